//! Per-resolution topology bundle: spiral tables, sampling matrices, and a
//! versioned binary container (magic `FTTA`).

use std::io::{Read, Write};

use sha2::{Digest, Sha256};

use super::{build_sampling, compute_spirals, Mesh, SparseMat, SpiralTable};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"FTTA";
const VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct LevelTopology {
    pub v_count: usize,
    pub faces: Vec<[usize; 3]>,
    pub spirals: SpiralTable,
}

/// Shared faces, spiral tables and sampling matrices for every resolution
/// level of one dataset topology. Level 0 is the full resolution; level l+1
/// has ceil(V_l / factor) vertices.
#[derive(Debug, Clone)]
pub struct TopologyAssets {
    pub levels: Vec<LevelTopology>,
    /// down[l]: (V_{l+1}, V_l)
    pub down: Vec<SparseMat>,
    /// up[l]: (V_l, V_{l+1})
    pub up: Vec<SparseMat>,
}

impl TopologyAssets {
    /// Precomputes all levels from a template mesh. Coarse geometry for each
    /// next decimation is the cluster-mean image of the finer level.
    pub fn build(
        template: &Mesh,
        n_levels: usize,
        factor: usize,
        spiral_length: usize,
        dilation: usize,
    ) -> Result<Self> {
        if n_levels < 1 {
            return Err(Error::Validation("need at least one level".into()));
        }
        let mut levels = Vec::with_capacity(n_levels);
        let mut down = Vec::new();
        let mut up = Vec::new();

        let mut verts = template.vertices.clone();
        let mut faces = template.faces.clone();
        for l in 0..n_levels {
            let spirals = compute_spirals(&faces, verts.len(), spiral_length, dilation)?;
            levels.push(LevelTopology { v_count: verts.len(), faces: faces.clone(), spirals });
            if l + 1 < n_levels {
                let pair = build_sampling(&verts, &faces, factor)?;
                verts = pair.coarse_vertices.clone();
                faces = pair.coarse_faces.clone();
                down.push(pair.down);
                up.push(pair.up);
            }
        }
        Ok(TopologyAssets { levels, down, up })
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.v_count).collect()
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn spiral_length(&self) -> usize {
        self.levels[0].spirals.length
    }

    pub fn fingerprint(&self) -> String {
        topology_fingerprint(&self.levels[0].faces)
    }

    pub fn save<W: Write>(&self, sink: &mut W) -> Result<()> {
        sink.write_all(MAGIC)?;
        write_u32(sink, VERSION)?;
        write_u32(sink, self.levels.len() as u32)?;
        for lv in &self.levels {
            write_u64(sink, lv.v_count as u64)?;
            write_u64(sink, lv.faces.len() as u64)?;
            for f in &lv.faces {
                for &i in f {
                    write_u64(sink, i as u64)?;
                }
            }
            write_u64(sink, lv.spirals.length as u64)?;
            for &i in &lv.spirals.indices {
                sink.write_all(&(i as i64).to_le_bytes())?;
            }
        }
        for mats in [&self.down, &self.up] {
            for m in mats.iter() {
                write_sparse(sink, m)?;
            }
        }
        Ok(())
    }

    pub fn load<R: Read>(source: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        source.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Parse("bad topology file magic".into()));
        }
        let version = read_u32(source)?;
        if version != VERSION {
            return Err(Error::Parse(format!("unsupported topology file version {version}")));
        }
        let n_levels = read_u32(source)? as usize;
        let mut levels = Vec::with_capacity(n_levels);
        for _ in 0..n_levels {
            let v_count = read_u64(source)? as usize;
            let f_count = read_u64(source)? as usize;
            let mut faces = Vec::with_capacity(f_count);
            for _ in 0..f_count {
                let mut f = [0usize; 3];
                for slot in &mut f {
                    *slot = read_u64(source)? as usize;
                }
                faces.push(f);
            }
            let length = read_u64(source)? as usize;
            let mut indices = Vec::with_capacity(v_count * length);
            for _ in 0..v_count * length {
                let mut b = [0u8; 8];
                source.read_exact(&mut b)?;
                indices.push(i64::from_le_bytes(b) as usize);
            }
            levels.push(LevelTopology {
                v_count,
                faces,
                spirals: SpiralTable { v_count, length, indices },
            });
        }
        let mut down = Vec::with_capacity(n_levels.saturating_sub(1));
        let mut up = Vec::with_capacity(n_levels.saturating_sub(1));
        for _ in 1..n_levels {
            down.push(read_sparse(source)?);
        }
        for _ in 1..n_levels {
            up.push(read_sparse(source)?);
        }
        Ok(TopologyAssets { levels, down, up })
    }
}

/// Hex digest identifying a face topology; all meshes of a dataset must
/// share it.
pub fn topology_fingerprint(faces: &[[usize; 3]]) -> String {
    let mut hasher = Sha256::new();
    hasher.update((faces.len() as u64).to_le_bytes());
    for f in faces {
        for &i in f {
            hasher.update((i as u64).to_le_bytes());
        }
    }
    hex(&hasher.finalize())
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}
fn write_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}
fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn write_sparse<W: Write>(w: &mut W, m: &SparseMat) -> Result<()> {
    write_u64(w, m.rows as u64)?;
    write_u64(w, m.cols as u64)?;
    let trips = m.triplets();
    write_u64(w, trips.len() as u64)?;
    for (r, c, v) in trips {
        write_u64(w, r as u64)?;
        write_u64(w, c as u64)?;
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_sparse<R: Read>(r: &mut R) -> Result<SparseMat> {
    let rows = read_u64(r)? as usize;
    let cols = read_u64(r)? as usize;
    let nnz = read_u64(r)? as usize;
    let mut trips = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        let row = read_u64(r)? as usize;
        let col = read_u64(r)? as usize;
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        trips.push((row, col, f64::from_le_bytes(b)));
    }
    Ok(SparseMat::from_triplets(rows, cols, trips))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::icosphere;

    #[test]
    fn build_and_roundtrip() {
        let m = icosphere(2, 50.0);
        let assets = TopologyAssets::build(&m, 3, 4, 9, 1).unwrap();
        assert_eq!(assets.level_sizes(), vec![162, 41, 11]);
        assert_eq!(assets.down.len(), 2);
        assert_eq!(assets.up.len(), 2);
        for lv in &assets.levels {
            for v in 0..lv.v_count {
                let row = lv.spirals.row(v);
                assert_eq!(row[0], v);
                assert!(row.iter().all(|&i| i < lv.v_count));
            }
        }

        let mut buf = Vec::new();
        assets.save(&mut buf).unwrap();
        let loaded = TopologyAssets::load(&mut &buf[..]).unwrap();
        assert_eq!(loaded.level_sizes(), assets.level_sizes());
        for (a, b) in loaded.levels.iter().zip(&assets.levels) {
            assert_eq!(a.faces, b.faces);
            assert_eq!(a.spirals, b.spirals);
        }
        for (a, b) in loaded.down.iter().zip(&assets.down) {
            assert_eq!(a, b);
        }
        for (a, b) in loaded.up.iter().zip(&assets.up) {
            assert_eq!(a, b);
        }
        assert_eq!(loaded.fingerprint(), assets.fingerprint());
    }

    #[test]
    fn fingerprint_distinguishes_topologies() {
        let a = icosphere(1, 1.0);
        let b = icosphere(2, 1.0);
        assert_ne!(topology_fingerprint(&a.faces), topology_fingerprint(&b.faces));
        assert_eq!(topology_fingerprint(&a.faces), topology_fingerprint(&a.faces));
    }
}
