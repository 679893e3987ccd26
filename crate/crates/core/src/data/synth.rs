//! Parametric synthetic face meshes with an analytically known
//! identity/expression decomposition.
//!
//! A sample of identity c and expression class s is
//!
//!   x = base + B_id * a_c + (1 + gamma * g(a_c, s)) * B_exp[s] + noise
//!
//! where B_id holds smooth low-frequency displacement fields, B_exp[s] is a
//! smooth field localized by a per-expression spatial mask (zero for the
//! neutral class 0), and g(a_c, s) = tanh(w_s . a_c) couples expression
//! amplitude to identity. With gamma = 0 vertex-delta transfer is exact by
//! construction; with gamma > 0 its residual has the closed form
//! |gamma| * |g(c) - g(c')| * avd_norm(B_exp[s]).

use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::manifest::{DatasetManifest, ManifestRecord, Split};
use crate::container::{Container, Dtype};
use crate::error::{Error, Result};
use crate::mesh::{icosphere, read_obj, topology_fingerprint, write_ply, Mesh};
use crate::rng::SeedStream;

pub const GROUND_TRUTH_MAGIC: &[u8; 4] = b"FTGT";
pub const GROUND_TRUTH_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Icosphere subdivision level of the template (3 -> 642 vertices).
    pub template_subdivisions: u32,
    pub template_radius_mm: f64,
    /// Optional external OBJ template overriding the icosphere.
    pub template_obj: Option<PathBuf>,
    pub n_identities: usize,
    /// Expression classes including class 0 = neutral.
    pub n_expressions: usize,
    pub samples_per_cell: usize,
    /// Identity basis rank K_id.
    pub identity_rank: usize,
    /// Identity-dependent expression gain strength.
    pub gamma: f64,
    pub noise_std_mm: f64,
    /// Per-basis-column identity displacement scale (avd-norm, mm).
    pub identity_scale_mm: f64,
    /// Per-expression displacement scale (avd-norm, mm).
    pub expression_scale_mm: f64,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            template_subdivisions: 3,
            template_radius_mm: 100.0,
            template_obj: None,
            n_identities: 24,
            n_expressions: 10,
            samples_per_cell: 3,
            identity_rank: 4,
            gamma: 0.5,
            noise_std_mm: 0.2,
            identity_scale_mm: 3.0,
            expression_scale_mm: 5.0,
            train_fraction: 0.9,
            seed: 1234,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_expressions < 2 {
            return Err(Error::Config("need the neutral class plus at least one expression".into()));
        }
        if self.gamma < 0.0 {
            return Err(Error::Config("gamma must be >= 0".into()));
        }
        if self.identity_rank < 1 || self.n_identities < 2 || self.samples_per_cell < 1 {
            return Err(Error::Config("degenerate synthetic dataset configuration".into()));
        }
        if !(0.0..=1.0).contains(&self.train_fraction) {
            return Err(Error::Config("train_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        self.n_identities * self.n_expressions * self.samples_per_cell
    }
}

/// Frozen generator internals: enough to evaluate any clean sample and the
/// delta-transfer residual in closed form.
#[derive(Debug, Clone)]
pub struct SynthGroundTruth {
    pub config: SynthConfig,
    pub template: Mesh,
    /// K_id fields of shape (V, 3).
    pub identity_basis: Vec<Vec<[f64; 3]>>,
    /// Per style class (class 0 all zeros).
    pub expression_fields: Vec<Vec<[f64; 3]>>,
    /// Per style class gain directions w_s (class 0 zeros).
    pub gain_dirs: Vec<Vec<f64>>,
    /// Per identity coefficients a_c.
    pub identity_coeffs: Vec<Vec<f64>>,
}

impl SynthGroundTruth {
    pub fn gain(&self, identity: usize, style: usize) -> f64 {
        let a = &self.identity_coeffs[identity];
        let w = &self.gain_dirs[style];
        a.iter().zip(w).map(|(x, y)| x * y).sum::<f64>().tanh()
    }

    /// Noise-free vertex positions of (identity, style).
    pub fn clean_vertices(&self, identity: usize, style: usize) -> Vec<[f64; 3]> {
        let v = self.template.vertex_count();
        let mut out = self.template.vertices.clone();
        let a = &self.identity_coeffs[identity];
        for (k, field) in self.identity_basis.iter().enumerate() {
            for i in 0..v {
                for d in 0..3 {
                    out[i][d] += a[k] * field[i][d];
                }
            }
        }
        if style > 0 {
            let amp = 1.0 + self.config.gamma * self.gain(identity, style);
            let field = &self.expression_fields[style];
            for i in 0..v {
                for d in 0..3 {
                    out[i][d] += amp * field[i][d];
                }
            }
        }
        out
    }

    /// Mean per-vertex length of an expression field (its avd-norm).
    pub fn field_avd_norm(&self, style: usize) -> f64 {
        avd_norm(&self.expression_fields[style])
    }

    /// Closed-form AVD error of vertex-delta transfer from identity c' to c
    /// for style s, in the noise-free regime.
    pub fn delta_baseline_residual(&self, target: usize, source: usize, style: usize) -> f64 {
        self.config.gamma.abs()
            * (self.gain(target, style) - self.gain(source, style)).abs()
            * self.field_avd_norm(style)
    }

    /// Fraction of vertices untouched by every expression field.
    pub fn untouched_vertex_fraction(&self) -> f64 {
        let v = self.template.vertex_count();
        let mut touched = vec![false; v];
        for field in &self.expression_fields[1..] {
            for (i, p) in field.iter().enumerate() {
                if p[0] != 0.0 || p[1] != 0.0 || p[2] != 0.0 {
                    touched[i] = true;
                }
            }
        }
        touched.iter().filter(|&&t| !t).count() as f64 / v as f64
    }

    pub fn save<W: std::io::Write>(&self, sink: &mut W) -> Result<()> {
        let v = self.template.vertex_count();
        let k = self.config.identity_rank;
        let s = self.config.n_expressions;
        let c = self.config.n_identities;
        let mut cont = Container::new();
        cont.put(
            "template.vertices",
            vec![v, 3],
            Dtype::F64,
            self.template.vertices.iter().flatten().copied().collect(),
        );
        cont.put(
            "template.faces",
            vec![self.template.face_count(), 3],
            Dtype::F64,
            self.template.faces.iter().flatten().map(|&i| i as f64).collect(),
        );
        cont.put(
            "identity_basis",
            vec![k, v, 3],
            Dtype::F64,
            self.identity_basis.iter().flat_map(|f| f.iter().flatten().copied()).collect(),
        );
        cont.put(
            "expression_fields",
            vec![s, v, 3],
            Dtype::F64,
            self.expression_fields.iter().flat_map(|f| f.iter().flatten().copied()).collect(),
        );
        cont.put(
            "gain_dirs",
            vec![s, k],
            Dtype::F64,
            self.gain_dirs.iter().flatten().copied().collect(),
        );
        cont.put(
            "identity_coeffs",
            vec![c, k],
            Dtype::F64,
            self.identity_coeffs.iter().flatten().copied().collect(),
        );
        let config_text = toml::to_string(&self.config)
            .map_err(|e| Error::Config(format!("serializing synth config: {e}")))?;
        cont.put_string("config", &config_text);
        cont.save(GROUND_TRUTH_MAGIC, GROUND_TRUTH_VERSION, sink)
    }

    pub fn load<R: std::io::Read>(source: &mut R) -> Result<Self> {
        let cont = Container::load(GROUND_TRUTH_MAGIC, GROUND_TRUTH_VERSION, source)?;
        let config: SynthConfig = toml::from_str(cont.string("config")?)
            .map_err(|e| Error::Config(format!("parsing synth config: {e}")))?;
        let tv = cont.tensor("template.vertices")?;
        let v = tv.shape[0];
        let vertices = tv.values.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        let tf = cont.tensor("template.faces")?;
        let faces = tf
            .values
            .chunks_exact(3)
            .map(|c| [c[0] as usize, c[1] as usize, c[2] as usize])
            .collect();
        let template = Mesh::new(vertices, faces)?;
        let unflatten_fields = |e: &crate::container::Entry| -> Vec<Vec<[f64; 3]>> {
            e.values
                .chunks_exact(v * 3)
                .map(|f| f.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
                .collect()
        };
        let identity_basis = unflatten_fields(cont.tensor("identity_basis")?);
        let expression_fields = unflatten_fields(cont.tensor("expression_fields")?);
        let k = config.identity_rank;
        let gain_dirs = cont.tensor("gain_dirs")?.values.chunks_exact(k).map(|c| c.to_vec()).collect();
        let identity_coeffs =
            cont.tensor("identity_coeffs")?.values.chunks_exact(k).map(|c| c.to_vec()).collect();
        Ok(SynthGroundTruth {
            config,
            template,
            identity_basis,
            expression_fields,
            gain_dirs,
            identity_coeffs,
        })
    }
}

/// A generated dataset held in memory, with its manifest.
pub struct SynthDataset {
    pub meshes: Vec<Mesh>,
    pub manifest: DatasetManifest,
    pub ground_truth: SynthGroundTruth,
}

fn avd_norm(field: &[[f64; 3]]) -> f64 {
    field
        .iter()
        .map(|p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt())
        .sum::<f64>()
        / field.len() as f64
}

/// Smooth field: each coordinate is a random degree-2 polynomial in the
/// normalized template coordinates, rescaled to unit avd-norm.
fn smooth_field(template: &Mesh, radius: f64, rng: &mut impl Rng) -> Vec<[f64; 3]> {
    let normal = Normal::new(0.0f64, 1.0).unwrap();
    let coeffs: Vec<f64> = (0..30).map(|_| normal.sample(rng)).collect();
    let mut field: Vec<[f64; 3]> = template
        .vertices
        .iter()
        .map(|p| {
            let (x, y, z) = (p[0] / radius, p[1] / radius, p[2] / radius);
            let monos = [1.0, x, y, z, x * x, y * y, z * z, x * y, y * z, z * x];
            let mut out = [0.0f64; 3];
            for d in 0..3 {
                for (m, c) in monos.iter().zip(&coeffs[d * 10..(d + 1) * 10]) {
                    out[d] += m * c;
                }
            }
            out
        })
        .collect();
    let norm = avd_norm(&field).max(1e-12);
    for p in &mut field {
        for c in p.iter_mut() {
            *c /= norm;
        }
    }
    field
}

/// Quadratic-falloff cap mask around a center direction; exactly zero
/// outside the angular radius.
fn cap_mask(template: &Mesh, center: [f64; 3], angular_radius: f64) -> Vec<f64> {
    template
        .vertices
        .iter()
        .map(|p| {
            let dot: f64 = p.iter().zip(&center).map(|(a, b)| a * b).sum();
            let pn = (p.iter().map(|v| v * v).sum::<f64>()).sqrt().max(1e-12);
            let cn = (center.iter().map(|v| v * v).sum::<f64>()).sqrt().max(1e-12);
            let angle = (dot / (pn * cn)).clamp(-1.0, 1.0).acos();
            let t = angle / angular_radius;
            if t >= 1.0 {
                0.0
            } else {
                1.0 - t * t
            }
        })
        .collect()
}

fn build_ground_truth(config: &SynthConfig) -> Result<SynthGroundTruth> {
    config.validate()?;
    let template = match &config.template_obj {
        Some(path) => read_obj(std::fs::File::open(path)?)?,
        None => icosphere(config.template_subdivisions, config.template_radius_mm),
    };
    let radius = config.template_radius_mm;
    let seeds = SeedStream::new(config.seed);
    let v = template.vertex_count();

    let mut identity_basis = Vec::with_capacity(config.identity_rank);
    for k in 0..config.identity_rank {
        let mut rng = seeds.stream_indexed("synth-id-basis", k as u64);
        let mut field = smooth_field(&template, radius, &mut rng);
        for p in &mut field {
            for c in p.iter_mut() {
                *c *= config.identity_scale_mm;
            }
        }
        identity_basis.push(field);
    }

    // masks live in the +z cap (faces look along +z here): centers within
    // 0.9 rad of the pole, angular radius 0.8 rad, keeping the hemisphere
    // opposite the pole exactly untouched
    let mut expression_fields = vec![vec![[0.0f64; 3]; v]];
    let mut gain_dirs = vec![vec![0.0f64; config.identity_rank]];
    for s in 1..config.n_expressions {
        let mut rng = seeds.stream_indexed("synth-expr", s as u64);
        let raw = smooth_field(&template, radius, &mut rng);
        let polar = rng.random_range(0.0..0.9f64);
        let azimuth = rng.random_range(0.0..std::f64::consts::TAU);
        let center = [
            radius * polar.sin() * azimuth.cos(),
            radius * polar.sin() * azimuth.sin(),
            radius * polar.cos(),
        ];
        let mask = cap_mask(&template, center, 0.8);
        let mut field: Vec<[f64; 3]> = raw
            .iter()
            .zip(&mask)
            .map(|(p, &m)| [p[0] * m, p[1] * m, p[2] * m])
            .collect();
        let norm = avd_norm(&field).max(1e-12);
        let target = config.expression_scale_mm;
        for p in &mut field {
            for c in p.iter_mut() {
                *c = *c / norm * target;
            }
        }
        expression_fields.push(field);

        let normal = Normal::new(0.0f64, 1.0).unwrap();
        let mut w: Vec<f64> = (0..config.identity_rank).map(|_| normal.sample(&mut rng)).collect();
        let wn = w.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        // unit direction scaled so gains spread well across identities
        for x in &mut w {
            *x = *x / wn * 1.2;
        }
        gain_dirs.push(w);
    }

    let normal = Normal::new(0.0f64, 1.0).unwrap();
    let identity_coeffs = (0..config.n_identities)
        .map(|c| {
            let mut rng = seeds.stream_indexed("synth-identity", c as u64);
            (0..config.identity_rank).map(|_| normal.sample(&mut rng)).collect()
        })
        .collect();

    Ok(SynthGroundTruth {
        config: config.clone(),
        template,
        identity_basis,
        expression_fields,
        gain_dirs,
        identity_coeffs,
    })
}

/// One noisy sample from the generator equation. The noise stream is keyed
/// by `sample_index`, so any sample can be regenerated in isolation.
pub fn generate_sample(gt: &SynthGroundTruth, identity: usize, style: usize, sample_index: u64) -> Result<Mesh> {
    if style >= gt.config.n_expressions {
        return Err(Error::Validation(format!(
            "style class {style} out of range ({} classes)",
            gt.config.n_expressions
        )));
    }
    if identity >= gt.config.n_identities {
        return Err(Error::Validation(format!(
            "identity {identity} out of range ({})",
            gt.config.n_identities
        )));
    }
    let mut vertices = gt.clean_vertices(identity, style);
    if gt.config.noise_std_mm > 0.0 {
        let seeds = SeedStream::new(gt.config.seed);
        let mut rng = seeds.stream_indexed("synth-noise", sample_index);
        let normal = Normal::new(0.0f64, gt.config.noise_std_mm).unwrap();
        for p in &mut vertices {
            for c in p.iter_mut() {
                *c += normal.sample(&mut rng);
            }
        }
    }
    Ok(Mesh { vertices, faces: gt.template.faces.clone() })
}

/// Generates the full grid (identities x expressions x samples_per_cell)
/// with a deterministic 9:1-style split.
pub fn generate_dataset(config: &SynthConfig) -> Result<SynthDataset> {
    let gt = build_ground_truth(config)?;
    let n = config.sample_count();
    let mut meshes = Vec::with_capacity(n);
    let mut records = Vec::with_capacity(n);

    let n_train = ((n as f64) * config.train_fraction).round() as usize;
    let seeds = SeedStream::new(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = seeds.stream("synth-split");
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let mut split = vec![Split::Test; n];
    for &i in order.iter().take(n_train) {
        split[i] = Split::Train;
    }

    let mut idx = 0u64;
    for c in 0..config.n_identities {
        for s in 0..config.n_expressions {
            for k in 0..config.samples_per_cell {
                let mesh = generate_sample(&gt, c, s, idx)?;
                meshes.push(mesh);
                records.push(ManifestRecord {
                    path: PathBuf::from(format!("id{c:03}_ex{s:02}_s{k}.ply")),
                    content: c,
                    style: s,
                    split: split[idx as usize],
                });
                idx += 1;
            }
        }
    }

    let content_labels = (0..config.n_identities).map(|c| format!("id{c:03}")).collect();
    let mut style_labels = vec!["neutral".to_string()];
    style_labels.extend((1..config.n_expressions).map(|s| format!("expr{s:02}")));

    let manifest = DatasetManifest {
        records,
        content_labels,
        style_labels,
        fingerprint: topology_fingerprint(&gt.template.faces),
        root: PathBuf::new(),
    };
    Ok(SynthDataset { meshes, manifest, ground_truth: gt })
}

/// Writes meshes (binary PLY), the manifest and the ground-truth sidecar
/// into `dir`.
pub fn write_dataset(ds: &SynthDataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (mesh, rec) in ds.meshes.iter().zip(&ds.manifest.records) {
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join(&rec.path))?);
        write_ply(mesh, None, &mut f)?;
        f.flush()?;
    }
    let mut mf = std::io::BufWriter::new(std::fs::File::create(dir.join("manifest.tsv"))?);
    ds.manifest.write(&mut mf)?;
    mf.flush()?;
    let mut gf = std::io::BufWriter::new(std::fs::File::create(dir.join("ground_truth.ftgt"))?);
    ds.ground_truth.save(&mut gf)?;
    gf.flush()?;
    Ok(())
}
