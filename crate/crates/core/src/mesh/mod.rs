//! Triangle meshes on a shared topology: representation, I/O, metrics,
//! spiral sequences and multi-resolution sampling.

mod metrics;
mod obj;
mod ply;
mod primitives;
mod sampling;
mod spiral;
mod topology;

pub use metrics::{avd, per_vertex_distance, uniform_laplacian_energy, LaplacianEnergy};
pub use obj::{read_obj, write_obj};
pub use ply::{read_ply, save_error_map, write_ply, write_ply_ascii, PlyPayload};
pub use primitives::icosphere;
pub use sampling::{build_sampling, SamplingPair, SparseMat};
pub use spiral::{compute_spirals, one_ring_fan, SpiralTable};
pub use topology::{topology_fingerprint, LevelTopology, TopologyAssets};

use crate::error::{Error, Result};

/// Fixed-topology triangle mesh. Vertex positions are in millimeters.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 3]>,
}

impl Mesh {
    /// Builds a mesh and checks the structural invariants: non-empty,
    /// in-range face indices, no degenerate triangles.
    pub fn new(vertices: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::InvalidMesh("mesh has no vertices".into()));
        }
        let v = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            for &idx in f {
                if idx >= v {
                    return Err(Error::InvalidMesh(format!(
                        "face {fi} references vertex {idx}, but mesh has {v} vertices"
                    )));
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} is degenerate: [{}, {}, {}]",
                    f[0], f[1], f[2]
                )));
            }
        }
        Ok(Self { vertices, faces })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Flat xyz buffer in vertex order, for feeding the network.
    pub fn flat_coords(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.vertices.len() * 3);
        for v in &self.vertices {
            out.extend_from_slice(v);
        }
        out
    }

    /// Rebuilds a mesh from a flat xyz buffer over an existing topology.
    pub fn from_flat_coords(coords: &[f64], faces: &[[usize; 3]]) -> Result<Self> {
        if coords.len() % 3 != 0 {
            return Err(Error::InvalidMesh(format!(
                "coordinate buffer length {} is not a multiple of 3",
                coords.len()
            )));
        }
        let vertices = coords.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        Mesh::new(vertices, faces.to_vec())
    }

    pub fn mean_edge_length(&self) -> f64 {
        let edges = undirected_edges(&self.faces);
        if edges.is_empty() {
            return 0.0;
        }
        let total: f64 = edges
            .iter()
            .map(|&(a, b)| dist(self.vertices[a], self.vertices[b]))
            .sum();
        total / edges.len() as f64
    }
}

/// Per-vertex scalar field (millimeters) attached to a mesh, e.g. error maps.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexScalarField {
    pub values: Vec<f64>,
}

impl VertexScalarField {
    pub fn new(mesh: &Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.vertex_count() {
            return Err(Error::InvalidMesh(format!(
                "field has {} values but the mesh has {} vertices",
                values.len(),
                mesh.vertex_count()
            )));
        }
        Ok(Self { values })
    }
}

pub(crate) fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Sorted, deduplicated undirected edge list.
pub(crate) fn undirected_edges(faces: &[[usize; 3]]) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(faces.len() * 3);
    for f in faces {
        for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
            edges.push((a.min(b), a.max(b)));
        }
    }
    edges.sort_unstable();
    edges.dedup();
    edges
}

/// One-ring neighbor sets as sorted adjacency lists.
pub(crate) fn vertex_neighbors(v_count: usize, faces: &[[usize; 3]]) -> Vec<Vec<usize>> {
    let mut nbrs = vec![Vec::new(); v_count];
    for &(a, b) in &undirected_edges(faces) {
        nbrs[a].push(b);
        nbrs[b].push(a);
    }
    for n in &mut nbrs {
        n.sort_unstable();
    }
    nbrs
}
