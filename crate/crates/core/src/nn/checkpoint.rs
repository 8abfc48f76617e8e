//! Versioned binary container for parameters, freeze flags, optimizer state
//! and opaque JSON metadata.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic  "BPCK"
//! u16    version
//! str    architecture hash           (u32 byte length + UTF-8)
//! str    metadata JSON
//! u64    optimizer step
//! u32    tensor count
//! per tensor:
//!   str  name
//!   u8   trainable
//!   u32  rank, rank × u32 dims
//!   3 × numel × f64   value, m, v
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::params::Param;
use super::{ParamStore, Tensor};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"BPCK";
const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub arch_hash: String,
    pub metadata: String,
    pub store: ParamStore,
}

fn put_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

fn put_tensor_data(buf: &mut Vec<u8>, t: &Tensor) {
    for v in t.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        put_str(&mut buf, &self.arch_hash);
        put_str(&mut buf, &self.metadata);
        buf.extend_from_slice(&self.store.step().to_le_bytes());
        buf.extend_from_slice(&(self.store.len() as u32).to_le_bytes());
        for p in self.store.iter() {
            put_str(&mut buf, &p.name);
            buf.push(u8::from(p.trainable));
            let shape = p.value.shape();
            buf.extend_from_slice(&(shape.len() as u32).to_le_bytes());
            for d in shape {
                buf.extend_from_slice(&(*d as u32).to_le_bytes());
            }
            put_tensor_data(&mut buf, &p.value);
            put_tensor_data(&mut buf, &p.m);
            put_tensor_data(&mut buf, &p.v);
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let arch_hash = r.string()?;
        let metadata = r.string()?;
        let step = r.u64()?;
        let count = r.u32()? as usize;
        let mut store = ParamStore::new();
        for _ in 0..count {
            let name = r.string()?;
            let trainable = match r.take(1)?[0] {
                0 => false,
                1 => true,
                other => return Err(Error::Checkpoint(format!("bad freeze flag {other}"))),
            };
            let rank = r.u32()? as usize;
            let shape = (0..rank)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let numel: usize = shape.iter().product();
            let mut tensor = || -> Result<Tensor> {
                let data = (0..numel).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
                Tensor::new(shape.clone(), data).map_err(|e| Error::Checkpoint(e.to_string()))
            };
            let value = tensor()?;
            let m = tensor()?;
            let v = tensor()?;
            store.push_raw(Param {
                name,
                value,
                trainable,
                m,
                v,
            });
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes after last tensor".into()));
        }
        store.set_step(step);
        Ok(Self {
            arch_hash,
            metadata,
            store,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(&self.to_bytes()))
            .map_err(|e| Error::io(path, e))
    }

    /// Loads a checkpoint, rejecting it when `expected_hash` is given and differs.
    pub fn load(path: &Path, expected_hash: Option<&str>) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        let ckpt = Self::from_bytes(&bytes)?;
        if let Some(expected) = expected_hash {
            if ckpt.arch_hash != expected {
                return Err(Error::Checkpoint(format!(
                    "architecture hash mismatch: checkpoint {} vs expected {expected}",
                    ckpt.arch_hash
                )));
            }
        }
        Ok(ckpt)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("truncated checkpoint".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| Error::Checkpoint("invalid UTF-8 string".into()))
    }
}
