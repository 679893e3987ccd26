//! ASCII OBJ reader and writer. Quads and larger polygons are
//! fan-triangulated; only `v` and `f` records are interpreted.

use std::io::{BufRead, BufReader, Read, Write};

use super::Mesh;
use crate::error::{Error, Result};

pub fn read_obj<R: Read>(source: R) -> Result<Mesh> {
    let reader = BufReader::new(source);
    let mut vertices: Vec<[f64; 3]> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let mut coord = [0.0f64; 3];
                for c in &mut coord {
                    let tok = parts.next().ok_or_else(|| {
                        Error::Parse(format!("line {}: vertex with fewer than 3 coordinates", lineno + 1))
                    })?;
                    *c = tok.parse().map_err(|_| {
                        Error::Parse(format!("line {}: non-numeric coordinate `{tok}`", lineno + 1))
                    })?;
                }
                vertices.push(coord);
            }
            Some("f") => {
                let mut idx = Vec::with_capacity(4);
                for tok in parts {
                    idx.push(parse_face_index(tok, lineno + 1, vertices.len())?);
                }
                if idx.len() < 3 {
                    return Err(Error::Parse(format!(
                        "line {}: face with fewer than 3 vertices",
                        lineno + 1
                    )));
                }
                for i in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[i], idx[i + 1]]);
                }
            }
            _ => {}
        }
    }

    Mesh::new(vertices, faces)
}

fn parse_face_index(tok: &str, lineno: usize, v_count: usize) -> Result<usize> {
    // `f 1/2/3` forms: only the vertex index matters here.
    let head = tok.split('/').next().unwrap_or(tok);
    let raw: i64 = head
        .parse()
        .map_err(|_| Error::Parse(format!("line {lineno}: bad face index `{tok}`")))?;
    if raw < 1 {
        return Err(Error::Parse(format!(
            "line {lineno}: face index {raw} is not positive (relative indices unsupported)"
        )));
    }
    let idx = (raw - 1) as usize;
    if idx >= v_count {
        return Err(Error::Parse(format!(
            "line {lineno}: face index {raw} out of range ({v_count} vertices so far)"
        )));
    }
    Ok(idx)
}

pub fn write_obj<W: Write>(mesh: &Mesh, sink: &mut W) -> Result<()> {
    for v in &mesh.vertices {
        writeln!(sink, "v {} {} {}", v[0], v[1], v[2])?;
    }
    for f in &mesh.faces {
        writeln!(sink, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}
