//! PLY reader and writer, ASCII and binary little-endian. A per-vertex
//! float `quality` property carries error maps in millimeters.

use std::io::{BufRead, BufReader, Read, Write};

use super::{Mesh, VertexScalarField};
use crate::error::{Error, Result};

/// A mesh plus the optional per-vertex quality channel found in the file.
#[derive(Debug, Clone)]
pub struct PlyPayload {
    pub mesh: Mesh,
    pub quality: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Format {
    Ascii,
    BinaryLe,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "char" | "int8" => ScalarType::I8,
            "uchar" | "uint8" => ScalarType::U8,
            "short" | "int16" => ScalarType::I16,
            "ushort" | "uint16" => ScalarType::U16,
            "int" | "int32" => ScalarType::I32,
            "uint" | "uint32" => ScalarType::U32,
            "float" | "float32" => ScalarType::F32,
            "double" | "float64" => ScalarType::F64,
            other => return Err(Error::Parse(format!("unsupported PLY type `{other}`"))),
        })
    }

    fn size(self) -> usize {
        match self {
            ScalarType::I8 | ScalarType::U8 => 1,
            ScalarType::I16 | ScalarType::U16 => 2,
            ScalarType::I32 | ScalarType::U32 | ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }

    fn read_f64(self, buf: &[u8]) -> f64 {
        match self {
            ScalarType::I8 => buf[0] as i8 as f64,
            ScalarType::U8 => buf[0] as f64,
            ScalarType::I16 => i16::from_le_bytes([buf[0], buf[1]]) as f64,
            ScalarType::U16 => u16::from_le_bytes([buf[0], buf[1]]) as f64,
            ScalarType::I32 => i32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]) as f64,
            ScalarType::U32 => u32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]) as f64,
            ScalarType::F32 => f32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]) as f64,
            ScalarType::F64 => f64::from_le_bytes(buf[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: ScalarType },
    List { name: String, count_ty: ScalarType, item_ty: ScalarType },
}

#[derive(Debug, Clone)]
struct ElementDecl {
    name: String,
    count: usize,
    props: Vec<Property>,
}

pub fn read_ply<R: Read>(source: R) -> Result<PlyPayload> {
    let mut reader = BufReader::new(source);

    let mut line = String::new();
    reader.read_line(&mut line)?;
    if line.trim_end() != "ply" {
        return Err(Error::Parse("not a PLY file (missing `ply` magic)".into()));
    }

    let mut format = None;
    let mut elements: Vec<ElementDecl> = Vec::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(Error::Parse("unexpected end of PLY header".into()));
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["end_header"] => break,
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["format", f, _version] => {
                format = Some(match *f {
                    "ascii" => Format::Ascii,
                    "binary_little_endian" => Format::BinaryLe,
                    other => {
                        return Err(Error::Parse(format!("unsupported PLY format `{other}`")))
                    }
                });
            }
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad element count `{count}`")))?;
                elements.push(ElementDecl { name: (*name).into(), count, props: Vec::new() });
            }
            ["property", "list", count_ty, item_ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::Parse("property before element".into()))?;
                el.props.push(Property::List {
                    name: (*name).into(),
                    count_ty: ScalarType::parse(count_ty)?,
                    item_ty: ScalarType::parse(item_ty)?,
                });
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::Parse("property before element".into()))?;
                el.props.push(Property::Scalar { name: (*name).into(), ty: ScalarType::parse(ty)? });
            }
            _ => return Err(Error::Parse(format!("bad PLY header line: {}", line.trim()))),
        }
    }
    let format = format.ok_or_else(|| Error::Parse("PLY header missing format line".into()))?;

    let mut vertices: Vec<[f64; 3]> = Vec::new();
    let mut quality: Option<Vec<f64>> = None;
    let mut faces: Vec<[usize; 3]> = Vec::new();

    for el in &elements {
        match el.name.as_str() {
            "vertex" => {
                let (xyz, q) = read_vertex_element(&mut reader, el, format)?;
                vertices = xyz;
                quality = q;
            }
            "face" => faces = read_face_element(&mut reader, el, format, vertices.len())?,
            _ => skip_element(&mut reader, el, format)?,
        }
    }

    let mesh = Mesh::new(vertices, faces)?;
    Ok(PlyPayload { mesh, quality })
}

fn ascii_row<R: BufRead>(reader: &mut R) -> Result<Vec<String>> {
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(Error::Parse("unexpected end of PLY body".into()));
        }
        if !line.trim().is_empty() {
            return Ok(line.split_whitespace().map(|s| s.to_string()).collect());
        }
    }
}

fn read_exact_f64<R: Read>(reader: &mut R, ty: ScalarType) -> Result<f64> {
    let mut buf = [0u8; 8];
    reader.read_exact(&mut buf[..ty.size()])?;
    Ok(ty.read_f64(&buf))
}

fn read_vertex_element<R: BufRead>(
    reader: &mut R,
    el: &ElementDecl,
    format: Format,
) -> Result<(Vec<[f64; 3]>, Option<Vec<f64>>)> {
    let col = |name: &str| el.props.iter().position(|p| matches!(p, Property::Scalar { name: n, .. } if n == name));
    let (xi, yi, zi) = match (col("x"), col("y"), col("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(Error::Parse("PLY vertex element lacks x/y/z".into())),
    };
    let qi = col("quality");

    let mut xyz = Vec::with_capacity(el.count);
    let mut quality = qi.map(|_| Vec::with_capacity(el.count));

    for _ in 0..el.count {
        let row: Vec<f64> = match format {
            Format::Ascii => {
                let toks = ascii_row(reader)?;
                if toks.len() < el.props.len() {
                    return Err(Error::Parse("short PLY vertex row".into()));
                }
                toks.iter()
                    .map(|t| t.parse::<f64>().map_err(|_| Error::Parse(format!("non-numeric PLY value `{t}`"))))
                    .collect::<Result<_>>()?
            }
            Format::BinaryLe => {
                let mut vals = Vec::with_capacity(el.props.len());
                for p in &el.props {
                    match p {
                        Property::Scalar { ty, .. } => vals.push(read_exact_f64(reader, *ty)?),
                        Property::List { .. } => {
                            return Err(Error::Parse("list property on vertex element unsupported".into()))
                        }
                    }
                }
                vals
            }
        };
        xyz.push([row[xi], row[yi], row[zi]]);
        if let (Some(q), Some(qi)) = (quality.as_mut(), qi) {
            q.push(row[qi]);
        }
    }
    Ok((xyz, quality))
}

fn read_face_element<R: BufRead>(
    reader: &mut R,
    el: &ElementDecl,
    format: Format,
    v_count: usize,
) -> Result<Vec<[usize; 3]>> {
    let list = el.props.iter().position(|p| {
        matches!(p, Property::List { name, .. } if name == "vertex_indices" || name == "vertex_index")
    });
    let list = list.ok_or_else(|| Error::Parse("PLY face element lacks vertex_indices".into()))?;
    if el.props.len() != 1 || list != 0 {
        return Err(Error::Parse("PLY face element with extra properties unsupported".into()));
    }
    let (count_ty, item_ty) = match &el.props[0] {
        Property::List { count_ty, item_ty, .. } => (*count_ty, *item_ty),
        _ => unreachable!(),
    };

    let mut faces = Vec::with_capacity(el.count);
    for _ in 0..el.count {
        let idx: Vec<usize> = match format {
            Format::Ascii => {
                let toks = ascii_row(reader)?;
                let n: usize = toks[0]
                    .parse()
                    .map_err(|_| Error::Parse("bad face list count".into()))?;
                if toks.len() < n + 1 {
                    return Err(Error::Parse("short PLY face row".into()));
                }
                toks[1..=n]
                    .iter()
                    .map(|t| t.parse::<usize>().map_err(|_| Error::Parse(format!("bad face index `{t}`"))))
                    .collect::<Result<_>>()?
            }
            Format::BinaryLe => {
                let n = read_exact_f64(reader, count_ty)? as usize;
                let mut idx = Vec::with_capacity(n);
                for _ in 0..n {
                    idx.push(read_exact_f64(reader, item_ty)? as usize);
                }
                idx
            }
        };
        if idx.len() < 3 {
            return Err(Error::Parse("PLY face with fewer than 3 vertices".into()));
        }
        for &i in &idx {
            if i >= v_count {
                return Err(Error::Parse(format!("PLY face index {i} out of range ({v_count} vertices)")));
            }
        }
        for i in 1..idx.len() - 1 {
            faces.push([idx[0], idx[i], idx[i + 1]]);
        }
    }
    Ok(faces)
}

fn skip_element<R: BufRead>(reader: &mut R, el: &ElementDecl, format: Format) -> Result<()> {
    for _ in 0..el.count {
        match format {
            Format::Ascii => {
                ascii_row(reader)?;
            }
            Format::BinaryLe => {
                for p in &el.props {
                    match p {
                        Property::Scalar { ty, .. } => {
                            read_exact_f64(reader, *ty)?;
                        }
                        Property::List { count_ty, item_ty, .. } => {
                            let n = read_exact_f64(reader, *count_ty)? as usize;
                            for _ in 0..n {
                                read_exact_f64(reader, *item_ty)?;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Writes binary little-endian PLY. Positions are stored as f64 so synthetic
/// datasets round-trip exactly; an optional quality channel is f32.
pub fn write_ply<W: Write>(mesh: &Mesh, quality: Option<&VertexScalarField>, sink: &mut W) -> Result<()> {
    if let Some(q) = quality {
        if q.values.len() != mesh.vertex_count() {
            return Err(Error::InvalidMesh("quality field length mismatch".into()));
        }
    }
    write_header(mesh, quality.is_some(), "binary_little_endian", "double", sink)?;
    for (i, v) in mesh.vertices.iter().enumerate() {
        for c in v {
            sink.write_all(&c.to_le_bytes())?;
        }
        if let Some(q) = quality {
            sink.write_all(&(q.values[i] as f32).to_le_bytes())?;
        }
    }
    for f in &mesh.faces {
        sink.write_all(&[3u8])?;
        for &i in f {
            sink.write_all(&(i as i32).to_le_bytes())?;
        }
    }
    Ok(())
}

/// ASCII variant, mainly for fixtures and eyeballing.
pub fn write_ply_ascii<W: Write>(
    mesh: &Mesh,
    quality: Option<&VertexScalarField>,
    sink: &mut W,
) -> Result<()> {
    if let Some(q) = quality {
        if q.values.len() != mesh.vertex_count() {
            return Err(Error::InvalidMesh("quality field length mismatch".into()));
        }
    }
    write_header(mesh, quality.is_some(), "ascii", "double", sink)?;
    for (i, v) in mesh.vertices.iter().enumerate() {
        write!(sink, "{} {} {}", v[0], v[1], v[2])?;
        if let Some(q) = quality {
            write!(sink, " {}", q.values[i] as f32)?;
        }
        writeln!(sink)?;
    }
    for f in &mesh.faces {
        writeln!(sink, "3 {} {} {}", f[0], f[1], f[2])?;
    }
    Ok(())
}

fn write_header<W: Write>(
    mesh: &Mesh,
    with_quality: bool,
    format: &str,
    coord_ty: &str,
    sink: &mut W,
) -> Result<()> {
    writeln!(sink, "ply")?;
    writeln!(sink, "format {format} 1.0")?;
    writeln!(sink, "element vertex {}", mesh.vertex_count())?;
    writeln!(sink, "property {coord_ty} x")?;
    writeln!(sink, "property {coord_ty} y")?;
    writeln!(sink, "property {coord_ty} z")?;
    if with_quality {
        writeln!(sink, "property float quality")?;
    }
    writeln!(sink, "element face {}", mesh.face_count())?;
    writeln!(sink, "property list uchar int vertex_indices")?;
    writeln!(sink, "end_header")?;
    Ok(())
}

/// Writes a mesh with a per-vertex error map into `sink` (binary PLY).
pub fn save_error_map<W: Write>(mesh: &Mesh, field: &VertexScalarField, sink: &mut W) -> Result<()> {
    write_ply(mesh, Some(field), sink)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad_mesh() -> Mesh {
        Mesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.25]],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn ascii_roundtrip() {
        let m = quad_mesh();
        let mut buf = Vec::new();
        write_ply_ascii(&m, None, &mut buf).unwrap();
        let got = read_ply(&buf[..]).unwrap();
        assert_eq!(got.mesh.faces, m.faces);
        for (a, b) in got.mesh.vertices.iter().zip(&m.vertices) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn binary_roundtrip_with_quality() {
        let m = quad_mesh();
        let field = VertexScalarField::new(&m, vec![0.0, 1.5, 3.0, 4.5]).unwrap();
        let mut buf = Vec::new();
        write_ply(&m, Some(&field), &mut buf).unwrap();
        let got = read_ply(&buf[..]).unwrap();
        assert_eq!(got.mesh, m);
        let q = got.quality.unwrap();
        for (a, b) in q.iter().zip(&field.values) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn ascii_quads_triangulated() {
        let src = "ply\nformat ascii 1.0\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
        let got = read_ply(src.as_bytes()).unwrap();
        assert_eq!(got.mesh.faces, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn rejects_out_of_range_face() {
        let src = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n";
        assert!(read_ply(src.as_bytes()).is_err());
    }
}
