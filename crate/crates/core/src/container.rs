//! Named-tensor binary container used by checkpoints and dataset ground
//! truth: little-endian, with a name/shape directory in front of raw f32/f64
//! payloads and a string section for embedded metadata.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    fn tag(self) -> u8 {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
    fn from_tag(t: u8) -> Result<Self> {
        match t {
            4 => Ok(Dtype::F32),
            8 => Ok(Dtype::F64),
            other => Err(Error::Parse(format!("unknown dtype tag {other}"))),
        }
    }
}

/// One named tensor; values held as f64 in memory and written at the
/// requested precision.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub shape: Vec<usize>,
    pub dtype: Dtype,
    pub values: Vec<f64>,
}

/// Ordered name -> tensor map plus string metadata.
#[derive(Debug, Clone, Default)]
pub struct Container {
    pub tensors: BTreeMap<String, Entry>,
    pub strings: BTreeMap<String, String>,
}

impl Container {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put(&mut self, name: &str, shape: Vec<usize>, dtype: Dtype, values: Vec<f64>) {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        self.tensors.insert(name.to_string(), Entry { shape, dtype, values });
    }

    pub fn put_scalar(&mut self, name: &str, value: f64) {
        self.put(name, vec![], Dtype::F64, vec![value]);
    }

    pub fn put_string(&mut self, name: &str, value: &str) {
        self.strings.insert(name.to_string(), value.to_string());
    }

    pub fn tensor(&self, name: &str) -> Result<&Entry> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::Parse(format!("container missing tensor `{name}`")))
    }

    pub fn scalar(&self, name: &str) -> Result<f64> {
        let e = self.tensor(name)?;
        if e.values.len() != 1 {
            return Err(Error::Parse(format!("`{name}` is not a scalar")));
        }
        Ok(e.values[0])
    }

    pub fn string(&self, name: &str) -> Result<&str> {
        self.strings
            .get(name)
            .map(|s| s.as_str())
            .ok_or_else(|| Error::Parse(format!("container missing string `{name}`")))
    }

    /// Serializes with the given 4-byte magic and format version.
    pub fn save<W: Write>(&self, magic: &[u8; 4], version: u32, sink: &mut W) -> Result<()> {
        sink.write_all(magic)?;
        sink.write_all(&version.to_le_bytes())?;
        sink.write_all(&(self.strings.len() as u64).to_le_bytes())?;
        for (k, v) in &self.strings {
            write_str(sink, k)?;
            write_str(sink, v)?;
        }
        sink.write_all(&(self.tensors.len() as u64).to_le_bytes())?;
        for (k, e) in &self.tensors {
            write_str(sink, k)?;
            sink.write_all(&[e.dtype.tag()])?;
            sink.write_all(&(e.shape.len() as u32).to_le_bytes())?;
            for &d in &e.shape {
                sink.write_all(&(d as u64).to_le_bytes())?;
            }
            match e.dtype {
                Dtype::F32 => {
                    for &v in &e.values {
                        sink.write_all(&(v as f32).to_le_bytes())?;
                    }
                }
                Dtype::F64 => {
                    for &v in &e.values {
                        sink.write_all(&v.to_le_bytes())?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn load<R: Read>(magic: &[u8; 4], expect_version: u32, source: &mut R) -> Result<Self> {
        let mut m = [0u8; 4];
        source.read_exact(&mut m)?;
        if &m != magic {
            return Err(Error::Parse(format!(
                "bad container magic {:?} (wanted {:?})",
                String::from_utf8_lossy(&m),
                String::from_utf8_lossy(magic)
            )));
        }
        let mut vb = [0u8; 4];
        source.read_exact(&mut vb)?;
        let version = u32::from_le_bytes(vb);
        if version != expect_version {
            return Err(Error::Parse(format!("unsupported container version {version}")));
        }
        let mut c = Container::new();
        let n_strings = read_u64(source)?;
        for _ in 0..n_strings {
            let k = read_str(source)?;
            let v = read_str(source)?;
            c.strings.insert(k, v);
        }
        let n_tensors = read_u64(source)?;
        for _ in 0..n_tensors {
            let name = read_str(source)?;
            let mut tag = [0u8; 1];
            source.read_exact(&mut tag)?;
            let dtype = Dtype::from_tag(tag[0])?;
            let mut rb = [0u8; 4];
            source.read_exact(&mut rb)?;
            let rank = u32::from_le_bytes(rb) as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(read_u64(source)? as usize);
            }
            let numel: usize = shape.iter().product();
            let mut values = Vec::with_capacity(numel);
            match dtype {
                Dtype::F32 => {
                    let mut b = [0u8; 4];
                    for _ in 0..numel {
                        source.read_exact(&mut b)?;
                        values.push(f32::from_le_bytes(b) as f64);
                    }
                }
                Dtype::F64 => {
                    let mut b = [0u8; 8];
                    for _ in 0..numel {
                        source.read_exact(&mut b)?;
                        values.push(f64::from_le_bytes(b));
                    }
                }
            }
            c.tensors.insert(name, Entry { shape, dtype, values });
        }
        Ok(c)
    }
}

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    w.write_all(&(s.len() as u64).to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let len = read_u64(r)? as usize;
    if len > 1 << 30 {
        return Err(Error::Parse("unreasonable string length".into()));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| Error::Parse("invalid utf-8 in container".into()))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_both_dtypes() {
        let mut c = Container::new();
        c.put("a.weight", vec![2, 3], Dtype::F64, vec![1.0, -2.5, 3.0, 0.0, 9.25, -0.125]);
        c.put("b", vec![2], Dtype::F32, vec![0.5, 1.5]);
        c.put_scalar("step", 7.0);
        c.put_string("config", "epochs = 3\n");
        let mut buf = Vec::new();
        c.save(b"TSTC", 1, &mut buf).unwrap();
        let got = Container::load(b"TSTC", 1, &mut &buf[..]).unwrap();
        assert_eq!(got.tensor("a.weight").unwrap(), c.tensor("a.weight").unwrap());
        assert_eq!(got.tensor("b").unwrap().values, vec![0.5, 1.5]);
        assert_eq!(got.scalar("step").unwrap(), 7.0);
        assert_eq!(got.string("config").unwrap(), "epochs = 3\n");
        assert!(Container::load(b"XXXX", 1, &mut &buf[..]).is_err());
    }
}
