//! ACKP checkpoint files.
//!
//! Layout (little-endian): `"ACKP"`, u32 version, u32 tensor count, then per
//! tensor u32 name length, UTF-8 name, u32 rows, u32 cols, rows·cols f32;
//! finally u32 length and the UTF-8 JSON training-config echo.

use std::fs;
use std::path::Path;

use super::Matrix;
use crate::error::{Error, Result};

pub const ACKP_MAGIC: &[u8; 4] = b"ACKP";
pub const ACKP_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub tensors: Vec<(String, Matrix)>,
    /// JSON document describing how the parameters were produced.
    pub config_json: String,
}

impl Checkpoint {
    pub fn get(&self, name: &str) -> Result<&Matrix> {
        self.tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
            .ok_or_else(|| Error::Format(format!("checkpoint has no tensor {name}")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(ACKP_MAGIC);
        out.extend_from_slice(&ACKP_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, m) in &self.tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
            out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
            for &v in m.data() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&(self.config_json.len() as u32).to_le_bytes());
        out.extend_from_slice(self.config_json.as_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != ACKP_MAGIC {
            return Err(Error::Format("not an ACKP checkpoint".into()));
        }
        let version = r.u32()?;
        if version != ACKP_VERSION {
            return Err(Error::Format(format!("unsupported ACKP version {version}")));
        }
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec())
                .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let n = rows
                .checked_mul(cols)
                .ok_or_else(|| Error::Format("tensor too large".into()))?;
            let raw = r.take(
                n.checked_mul(4)
                    .ok_or_else(|| Error::Format("tensor too large".into()))?,
            )?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
                .collect();
            tensors.push((name, Matrix::from_vec(rows, cols, data)?));
        }
        let len = r.u32()? as usize;
        let config_json = String::from_utf8(r.take(len)?.to_vec())
            .map_err(|_| Error::Format("config echo is not UTF-8".into()))?;
        if r.pos != bytes.len() {
            return Err(Error::Format("trailing bytes after checkpoint".into()));
        }
        Ok(Self { tensors, config_json })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

pub(crate) struct Reader<'a> {
    pub(crate) bytes: &'a [u8],
    pub(crate) pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("unexpected end of file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub(crate) fn f32(&mut self) -> Result<f32> {
        let b = self.take(4)?;
        Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncated_file_is_rejected() {
        let ck = Checkpoint {
            tensors: vec![("w".into(), Matrix::filled(2, 2, 0.5))],
            config_json: "{}".into(),
        };
        let bytes = ck.to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(Checkpoint::from_bytes(b"NOPE").is_err());
        assert_eq!(Checkpoint::from_bytes(&bytes).unwrap(), ck);
    }
}
