//! Line-oriented dataset manifests: one record per line with path, content
//! label, style label and split, plus a topology fingerprint header.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::mesh::{avd, read_ply, topology_fingerprint, Mesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRecord {
    pub path: PathBuf,
    pub content: usize,
    pub style: usize,
    pub split: Split,
}

/// Labeled records over a shared topology. Style class 0 is the neutral
/// class whenever a label named `neutral` exists.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub records: Vec<ManifestRecord>,
    pub content_labels: Vec<String>,
    pub style_labels: Vec<String>,
    pub fingerprint: String,
    pub root: PathBuf,
}

impl DatasetManifest {
    pub fn write<W: Write>(&self, sink: &mut W) -> Result<()> {
        writeln!(sink, "# fingerprint\t{}", self.fingerprint)?;
        writeln!(sink, "# records\t{}", self.records.len())?;
        for r in &self.records {
            writeln!(
                sink,
                "{}\t{}\t{}\t{}",
                r.path.display(),
                self.content_labels[r.content],
                self.style_labels[r.style],
                r.split.as_str()
            )?;
        }
        Ok(())
    }

    pub fn split_indices(&self, split: Split) -> Vec<usize> {
        self.records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.split == split)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn neutral_class(&self) -> usize {
        self.style_labels.iter().position(|l| l == "neutral").unwrap_or(0)
    }

    pub fn n_style_classes(&self) -> usize {
        self.style_labels.len()
    }

    pub fn n_content_classes(&self) -> usize {
        self.content_labels.len()
    }
}

/// Loads a manifest and all referenced meshes, verifying every mesh against
/// the shared topology fingerprint.
pub fn load_manifest(path: &Path) -> Result<(DatasetManifest, Vec<Mesh>)> {
    let root = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);

    let mut declared_fingerprint: Option<String> = None;
    let mut rows: Vec<(PathBuf, String, String, Split)> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let mut parts = rest.split_whitespace();
            if parts.next() == Some("fingerprint") {
                declared_fingerprint = parts.next().map(|s| s.to_string());
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(Error::Parse(format!(
                "manifest line {}: expected 4 tab-separated fields, got {}",
                lineno + 1,
                cols.len()
            )));
        }
        let split = match cols[3] {
            "train" => Split::Train,
            "test" => Split::Test,
            other => {
                return Err(Error::Parse(format!(
                    "manifest line {}: unknown split `{other}`",
                    lineno + 1
                )))
            }
        };
        rows.push((PathBuf::from(cols[0]), cols[1].to_string(), cols[2].to_string(), split));
    }
    if rows.is_empty() {
        return Err(Error::Validation("manifest has no records".into()));
    }

    // label -> index maps in first-seen order; a style label `neutral` is
    // forced to class 0
    let mut content_labels: Vec<String> = Vec::new();
    let mut style_labels: Vec<String> = Vec::new();
    if rows.iter().any(|r| r.2 == "neutral") {
        style_labels.push("neutral".to_string());
    }
    for (_, c, s, _) in &rows {
        if !content_labels.contains(c) {
            content_labels.push(c.clone());
        }
        if !style_labels.contains(s) {
            style_labels.push(s.clone());
        }
    }
    let cmap: BTreeMap<&str, usize> =
        content_labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let smap: BTreeMap<&str, usize> =
        style_labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();

    let mut meshes = Vec::with_capacity(rows.len());
    let mut records = Vec::with_capacity(rows.len());
    let mut fingerprint: Option<String> = declared_fingerprint;
    for (p, c, s, split) in rows {
        let full = root.join(&p);
        let payload = read_ply(std::fs::File::open(&full).map_err(|e| {
            Error::Validation(format!("manifest references missing file {}: {e}", full.display()))
        })?)?;
        let fp = topology_fingerprint(&payload.mesh.faces);
        match &fingerprint {
            None => fingerprint = Some(fp),
            Some(expect) => {
                if *expect != fp {
                    return Err(Error::Validation(format!(
                        "topology fingerprint mismatch for {}",
                        full.display()
                    )));
                }
            }
        }
        meshes.push(payload.mesh);
        records.push(ManifestRecord { path: p, content: cmap[c.as_str()], style: smap[s.as_str()], split });
    }

    let manifest = DatasetManifest {
        records,
        content_labels,
        style_labels,
        fingerprint: fingerprint.unwrap(),
        root,
    };
    Ok((manifest, meshes))
}

/// Style-frame selection for labeled mesh sequences: the first frame is the
/// neutral exemplar, the frame with the largest AVD to it is the expression
/// peak, and a window of `halo` frames on both sides adds diversity.
/// Returns indices into the sequence, peak first.
pub fn select_coma_style_frames(sequence: &[Mesh], halo: usize) -> Result<Vec<usize>> {
    if sequence.len() < 2 {
        return Err(Error::Validation("sequence needs at least two frames".into()));
    }
    let neutral = &sequence[0];
    let mut peak = 1usize;
    let mut best = -1.0f64;
    for (i, frame) in sequence.iter().enumerate().skip(1) {
        let d = avd(neutral, frame)?;
        if d > best {
            best = d;
            peak = i;
        }
    }
    let lo = peak.saturating_sub(halo);
    let hi = (peak + halo).min(sequence.len() - 1);
    let mut out = vec![peak];
    for i in lo..=hi {
        if i != peak {
            out.push(i);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_dataset, write_dataset, SynthConfig};
    use crate::mesh::icosphere;

    #[test]
    fn synth_dataset_roundtrips_through_manifest() {
        let cfg = SynthConfig {
            template_subdivisions: 1,
            n_identities: 3,
            n_expressions: 3,
            samples_per_cell: 1,
            seed: 5,
            ..Default::default()
        };
        let ds = generate_dataset(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&ds, dir.path()).unwrap();
        let (manifest, meshes) = load_manifest(&dir.path().join("manifest.tsv")).unwrap();
        assert_eq!(manifest.records.len(), 9);
        assert_eq!(manifest.fingerprint, ds.manifest.fingerprint);
        assert_eq!(manifest.neutral_class(), 0);
        for (a, b) in meshes.iter().zip(&ds.meshes) {
            assert_eq!(a.faces, b.faces);
            for (x, y) in a.vertices.iter().zip(&b.vertices) {
                for d in 0..3 {
                    assert!((x[d] - y[d]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn fingerprint_mismatch_rejected_with_path() {
        let cfg = SynthConfig {
            template_subdivisions: 1,
            n_identities: 2,
            n_expressions: 2,
            samples_per_cell: 1,
            seed: 6,
            ..Default::default()
        };
        let ds = generate_dataset(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&ds, dir.path()).unwrap();
        // overwrite one mesh with a different topology
        let rogue = icosphere(0, 50.0);
        let path = dir.path().join(&ds.manifest.records[2].path);
        let mut f = std::fs::File::create(&path).unwrap();
        crate::mesh::write_ply(&rogue, None, &mut f).unwrap();
        let err = load_manifest(&dir.path().join("manifest.tsv")).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("fingerprint"), "{msg}");
        assert!(msg.contains(&ds.manifest.records[2].path.display().to_string()), "{msg}");
    }

    #[test]
    fn seventeen_free_form_style_labels_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = icosphere(0, 10.0);
        let mut lines = String::new();
        let styles: Vec<String> = (0..17)
            .map(|i| if i == 0 { "neutral".into() } else { format!("mouth_move_{i}") })
            .collect();
        for (i, s) in styles.iter().enumerate() {
            let p = format!("m{i}.ply");
            let mut f = std::fs::File::create(dir.path().join(&p)).unwrap();
            crate::mesh::write_ply(&mesh, None, &mut f).unwrap();
            lines.push_str(&format!("{p}\tsubjectA\t{s}\ttrain\n"));
        }
        std::fs::write(dir.path().join("manifest.tsv"), lines).unwrap();
        let (manifest, _) = load_manifest(&dir.path().join("manifest.tsv")).unwrap();
        assert_eq!(manifest.n_style_classes(), 17);
        assert_eq!(manifest.style_labels[0], "neutral");
    }

    #[test]
    fn style_frame_selection_prefers_peak_distance() {
        let base = icosphere(1, 10.0);
        let mut frames = Vec::new();
        for k in 0..7 {
            let amp = match k {
                0 => 0.0,
                4 => 3.0, // the peak
                _ => 0.5,
            };
            let mut m = base.clone();
            for v in &mut m.vertices {
                v[2] += amp;
            }
            frames.push(m);
        }
        let picked = select_coma_style_frames(&frames, 1).unwrap();
        assert_eq!(picked[0], 4);
        assert!(picked.contains(&3) && picked.contains(&5));
        assert_eq!(picked.len(), 3);
    }
}
