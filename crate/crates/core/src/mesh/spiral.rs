//! Spiral sequence precomputation.
//!
//! A spiral for vertex v enumerates v, then its one-ring, then successive
//! rings, in a fixed deterministic order:
//!
//! - one-rings are walked counter-clockwise per face winding, starting at the
//!   smallest-index neighbor (for open boundary fans, at the unique neighbor
//!   with no counter-clockwise predecessor, since the path start is forced);
//! - ring k+1 is appended by scanning ring k in order and emitting each
//!   scanned vertex's unvisited one-ring neighbors, in that vertex's own
//!   fan order;
//! - the sequence is cut to every d-th element for dilation d, then padded by
//!   repeating the last valid index if the rings run out before length L.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Per-vertex spiral index table of shape (v_count, length), row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpiralTable {
    pub v_count: usize,
    pub length: usize,
    pub indices: Vec<usize>,
}

impl SpiralTable {
    pub fn row(&self, v: usize) -> &[usize] {
        &self.indices[v * self.length..(v + 1) * self.length]
    }
}

/// Ordered one-ring of every vertex (counter-clockwise per face winding,
/// deterministic start). Fails on vertices whose incident faces do not form
/// a single fan.
pub fn one_ring_fan(v_count: usize, faces: &[[usize; 3]]) -> Result<Vec<Vec<usize>>> {
    // Directed "next" edges around each center: face (v, a, b) in winding
    // order contributes a -> b to v's ring walk.
    let mut next: Vec<HashMap<usize, usize>> = vec![HashMap::new(); v_count];
    let mut indeg: Vec<HashMap<usize, usize>> = vec![HashMap::new(); v_count];
    for f in faces {
        for r in 0..3 {
            let v = f[r];
            let a = f[(r + 1) % 3];
            let b = f[(r + 2) % 3];
            if next[v].insert(a, b).is_some() {
                return Err(Error::NonManifoldVertex(v));
            }
            *indeg[v].entry(b).or_insert(0) += 1;
        }
    }

    let mut rings = Vec::with_capacity(v_count);
    for v in 0..v_count {
        let outmap = &next[v];
        if outmap.is_empty() {
            rings.push(Vec::new());
            continue;
        }
        let mut neighbors: Vec<usize> = outmap.keys().copied().collect();
        for (&b, &c) in &indeg[v] {
            if c > 1 {
                return Err(Error::NonManifoldVertex(v));
            }
            if !outmap.contains_key(&b) {
                neighbors.push(b);
            }
        }
        neighbors.sort_unstable();
        neighbors.dedup();
        let n = neighbors.len();

        // Closed fan: every neighbor has an outgoing edge. Open fan: exactly
        // one head (no incoming edge) and one tail (no outgoing edge).
        let start = if outmap.len() == n {
            *neighbors.iter().min().unwrap()
        } else {
            let heads: Vec<usize> = neighbors
                .iter()
                .copied()
                .filter(|u| !indeg[v].contains_key(u))
                .collect();
            if heads.len() != 1 || outmap.len() + 1 != n {
                return Err(Error::NonManifoldVertex(v));
            }
            heads[0]
        };

        let mut ring = Vec::with_capacity(n);
        let mut cur = start;
        for _ in 0..n {
            ring.push(cur);
            match outmap.get(&cur) {
                Some(&nxt) => {
                    if nxt == start {
                        break;
                    }
                    cur = nxt;
                }
                None => break,
            }
        }
        if ring.len() != n {
            // walk did not cover all neighbors: more than one fan component
            return Err(Error::NonManifoldVertex(v));
        }
        rings.push(ring);
    }
    Ok(rings)
}

/// Builds the spiral table for a topology.
pub fn compute_spirals(
    faces: &[[usize; 3]],
    v_count: usize,
    length: usize,
    dilation: usize,
) -> Result<SpiralTable> {
    if length < 1 || dilation < 1 {
        return Err(Error::Validation(
            "spiral length and dilation must be at least 1".into(),
        ));
    }
    let rings = one_ring_fan(v_count, faces)?;
    let full_len = (length - 1) * dilation + 1;

    let mut indices = Vec::with_capacity(v_count * length);
    let mut visited = vec![u32::MAX; v_count];
    for v in 0..v_count {
        let mark = v as u32;
        let mut spiral = Vec::with_capacity(full_len);
        spiral.push(v);
        visited[v] = mark;

        let mut ring: Vec<usize> = rings[v].clone();
        for &u in &ring {
            visited[u] = mark;
        }
        while !ring.is_empty() && spiral.len() < full_len {
            spiral.extend(ring.iter().copied().take(full_len - spiral.len()));
            let mut next_ring = Vec::new();
            for &u in &ring {
                for &w in &rings[u] {
                    if visited[w] != mark {
                        visited[w] = mark;
                        next_ring.push(w);
                    }
                }
            }
            ring = next_ring;
        }

        let mut row: Vec<usize> = spiral.iter().step_by(dilation).copied().collect();
        let last = *row.last().unwrap();
        row.resize(length, last);
        row.truncate(length);
        indices.extend_from_slice(&row);
    }

    Ok(SpiralTable { v_count, length, indices })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::icosphere;

    #[test]
    fn length_one_is_identity_column() {
        let m = icosphere(1, 1.0);
        let t = compute_spirals(&m.faces, m.vertex_count(), 1, 1).unwrap();
        assert_eq!(t.indices, (0..m.vertex_count()).collect::<Vec<_>>());
    }

    #[test]
    fn icosahedron_l6_is_center_plus_one_ring() {
        let m = icosphere(0, 1.0);
        let t = compute_spirals(&m.faces, m.vertex_count(), 6, 1).unwrap();
        let nbrs = crate::mesh::vertex_neighbors(m.vertex_count(), &m.faces);
        for v in 0..m.vertex_count() {
            let row = t.row(v);
            assert_eq!(row[0], v);
            let mut got: Vec<usize> = row[1..].to_vec();
            got.sort_unstable();
            assert_eq!(got, nbrs[v]);
        }
    }

    #[test]
    fn deterministic_tables() {
        let m = icosphere(2, 1.0);
        let a = compute_spirals(&m.faces, m.vertex_count(), 9, 1).unwrap();
        let b = compute_spirals(&m.faces, m.vertex_count(), 9, 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ring_starts_at_smallest_neighbor_and_is_ccw() {
        let m = icosphere(0, 1.0);
        let rings = one_ring_fan(m.vertex_count(), &m.faces).unwrap();
        for (v, ring) in rings.iter().enumerate() {
            assert_eq!(ring[0], *ring.iter().min().unwrap());
            // consecutive ring members share a face with v in winding order
            for i in 0..ring.len() {
                let a = ring[i];
                let b = ring[(i + 1) % ring.len()];
                assert!(m.faces.iter().any(|f| {
                    (0..3).any(|r| f[r] == v && f[(r + 1) % 3] == a && f[(r + 2) % 3] == b)
                }));
            }
        }
    }

    #[test]
    fn rejects_non_manifold() {
        // two triangles sharing an edge plus a third on the same edge
        let faces = vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]];
        let err = compute_spirals(&faces, 5, 4, 1).unwrap_err();
        assert!(matches!(err, Error::NonManifoldVertex(_)));
    }

    #[test]
    fn boundary_mesh_pads_with_last_index() {
        // single triangle: every vertex has a 2-neighbor open fan
        let faces = vec![[0, 1, 2]];
        let t = compute_spirals(&faces, 3, 6, 1).unwrap();
        for v in 0..3 {
            let row = t.row(v);
            assert_eq!(row[0], v);
            assert_eq!(row[3], row[2]);
            assert_eq!(row[5], row[2]);
        }
    }

    #[test]
    fn dilation_keeps_every_dth() {
        let m = icosphere(1, 1.0);
        let full = compute_spirals(&m.faces, m.vertex_count(), 9, 1).unwrap();
        let dil = compute_spirals(&m.faces, m.vertex_count(), 5, 2).unwrap();
        for v in 0..m.vertex_count() {
            let f = full.row(v);
            let d = dil.row(v);
            for k in 0..5 {
                assert_eq!(d[k], f[2 * k]);
            }
        }
    }
}
