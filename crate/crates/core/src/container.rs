//! Versioned binary container of named arrays plus a JSON header.
//!
//! Layout (little endian):
//! `MAGIC | u32 version | u32 kind_len | kind | u64 meta_len | meta json |
//!  u32 n_arrays | { u32 name_len | name | u8 dtype | u32 ndim | u64 dims.. | data }*`
//!
//! Used for feature caches and model checkpoints. Writes go to a temporary
//! file in the target directory and are renamed into place.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"POLYTTS\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum ArrayData {
    F32(Vec<f32>),
    F64(Vec<f64>),
    U32(Vec<u32>),
}

impl ArrayData {
    fn dtype(&self) -> u8 {
        match self {
            ArrayData::F32(_) => 0,
            ArrayData::F64(_) => 1,
            ArrayData::U32(_) => 2,
        }
    }

    fn len(&self) -> usize {
        match self {
            ArrayData::F32(v) => v.len(),
            ArrayData::F64(v) => v.len(),
            ArrayData::U32(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray {
    pub shape: Vec<usize>,
    pub data: ArrayData,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub kind: String,
    pub meta: serde_json::Value,
    pub arrays: BTreeMap<String, NamedArray>,
}

impl Container {
    pub fn new(kind: impl Into<String>, meta: serde_json::Value) -> Self {
        Self {
            kind: kind.into(),
            meta,
            arrays: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, shape: Vec<usize>, data: ArrayData) -> Result<()> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::shape(format!(
                "array shape {shape:?} holds {n} values, got {}",
                data.len()
            )));
        }
        self.arrays.insert(name.into(), NamedArray { shape, data });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&NamedArray> {
        self.arrays
            .get(name)
            .ok_or_else(|| Error::config(format!("container has no array `{name}`")))
    }

    pub fn f32(&self, name: &str) -> Result<(&[usize], &[f32])> {
        match self.get(name)? {
            NamedArray {
                shape,
                data: ArrayData::F32(v),
            } => Ok((shape, v)),
            _ => Err(Error::config(format!("array `{name}` is not f32"))),
        }
    }

    pub fn f64(&self, name: &str) -> Result<(&[usize], &[f64])> {
        match self.get(name)? {
            NamedArray {
                shape,
                data: ArrayData::F64(v),
            } => Ok((shape, v)),
            _ => Err(Error::config(format!("array `{name}` is not f64"))),
        }
    }

    pub fn u32(&self, name: &str) -> Result<(&[usize], &[u32])> {
        match self.get(name)? {
            NamedArray {
                shape,
                data: ArrayData::U32(v),
            } => Ok((shape, v)),
            _ => Err(Error::config(format!("array `{name}` is not u32"))),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.kind.len() as u32).to_le_bytes());
        buf.extend_from_slice(self.kind.as_bytes());
        let meta = serde_json::to_vec(&self.meta)?;
        buf.extend_from_slice(&(meta.len() as u64).to_le_bytes());
        buf.extend_from_slice(&meta);
        buf.extend_from_slice(&(self.arrays.len() as u32).to_le_bytes());
        for (name, arr) in &self.arrays {
            buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
            buf.extend_from_slice(name.as_bytes());
            buf.push(arr.data.dtype());
            buf.extend_from_slice(&(arr.shape.len() as u32).to_le_bytes());
            for &d in &arr.shape {
                buf.extend_from_slice(&(d as u64).to_le_bytes());
            }
            match &arr.data {
                ArrayData::F32(v) => v.iter().for_each(|x| buf.extend_from_slice(&x.to_le_bytes())),
                ArrayData::F64(v) => v.iter().for_each(|x| buf.extend_from_slice(&x.to_le_bytes())),
                ArrayData::U32(v) => v.iter().for_each(|x| buf.extend_from_slice(&x.to_le_bytes())),
            }
        }
        Ok(buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(r.err("bad magic"));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(r.err(&format!("unsupported container version {version}")));
        }
        let kind_len = r.u32()? as usize;
        let kind = String::from_utf8(r.take(kind_len)?.to_vec()).map_err(|_| r.err("kind is not utf-8"))?;
        let meta_len = r.u64()? as usize;
        let meta = serde_json::from_slice(r.take(meta_len)?)?;
        let count = r.u32()?;
        let mut arrays = BTreeMap::new();
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec()).map_err(|_| r.err("array name is not utf-8"))?;
            let dtype = r.take(1)?[0];
            let ndim = r.u32()? as usize;
            let shape = (0..ndim).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let data = match dtype {
                0 => ArrayData::F32(r.take(n * 4)?.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect()),
                1 => ArrayData::F64(r.take(n * 8)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()),
                2 => ArrayData::U32(r.take(n * 4)?.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect()),
                other => return Err(r.err(&format!("unknown dtype tag {other}"))),
            };
            arrays.insert(name, NamedArray { shape, data });
        }
        if r.pos != bytes.len() {
            return Err(r.err("trailing bytes"));
        }
        Ok(Self { kind, meta, arrays })
    }

    /// Atomic write: temp file in the same directory, fsync, rename.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        std::fs::create_dir_all(dir)?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(&self.to_bytes()?)?;
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| Error::Io(e.error))?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse {
            line: 0,
            msg: format!("container byte {}: {msg}", self.pos),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(self.err("unexpected end of data"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut c = Container::new("test", serde_json::json!({"a": 1}));
        c.insert("x", vec![2, 2], ArrayData::F32(vec![1.0, -0.0, f32::MIN_POSITIVE, 3.5])).unwrap();
        c.insert("y", vec![3], ArrayData::F64(vec![0.1, 0.2, 0.3])).unwrap();
        c.insert("d", vec![2], ArrayData::U32(vec![7, 9])).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/c.bin");
        c.write(&p).unwrap();
        let back = Container::read(&p).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.f32("x").unwrap().1[1].to_bits(), (-0.0f32).to_bits());
    }

    #[test]
    fn rejects_garbage_and_bad_shapes() {
        assert!(Container::from_bytes(b"nope").is_err());
        let mut c = Container::new("t", serde_json::Value::Null);
        assert!(c.insert("x", vec![3], ArrayData::U32(vec![1])).is_err());
        let mut bytes = c.to_bytes().unwrap();
        bytes.push(0);
        assert!(Container::from_bytes(&bytes).is_err());
    }
}
