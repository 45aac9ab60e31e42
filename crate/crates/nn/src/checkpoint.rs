//! Binary parameter checkpoints.
//!
//! Layout (little-endian): magic `CHOICKPT`, `u32` version, `u32` entry count,
//! then one manifest record per entry (`u32` name length, UTF-8 name, `u8`
//! dtype tag, `u32` rank, `u64` dims), then every payload in manifest order as
//! row-major `f64`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{NnError, Result};
use crate::module::Module;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"CHOICKPT";
pub const VERSION: u32 = 1;
const DTYPE_F64: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

pub fn encode(entries: &[Entry]) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for e in entries {
        buf.extend_from_slice(&(e.name.len() as u32).to_le_bytes());
        buf.extend_from_slice(e.name.as_bytes());
        buf.push(DTYPE_F64);
        buf.extend_from_slice(&(e.shape.len() as u32).to_le_bytes());
        for &d in &e.shape {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
    }
    for e in entries {
        for v in &e.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(NnError::Checkpoint("unexpected end of file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
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

pub fn decode(buf: &[u8]) -> Result<Vec<Entry>> {
    let mut c = Cursor { buf, pos: 0 };
    if c.take(8)? != MAGIC {
        return Err(NnError::Checkpoint("bad magic".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(NnError::Checkpoint(format!("unsupported version {}", version)));
    }
    let count = c.u32()? as usize;
    let mut manifest = Vec::with_capacity(count);
    for _ in 0..count {
        let len = c.u32()? as usize;
        let name = String::from_utf8(c.take(len)?.to_vec())
            .map_err(|_| NnError::Checkpoint("non-UTF-8 parameter name".into()))?;
        let dtype = c.take(1)?[0];
        if dtype != DTYPE_F64 {
            return Err(NnError::Checkpoint(format!("unsupported dtype tag {}", dtype)));
        }
        let rank = c.u32()? as usize;
        let shape = (0..rank).map(|_| c.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        manifest.push((name, shape));
    }
    let mut entries = Vec::with_capacity(count);
    for (name, shape) in manifest {
        let n: usize = shape.iter().product();
        let raw = c.take(n * 8)?;
        let data = raw.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
        entries.push(Entry { name, shape, data });
    }
    if c.pos != buf.len() {
        return Err(NnError::Checkpoint("trailing bytes after payload".into()));
    }
    Ok(entries)
}

pub fn module_entries<M: Module + ?Sized>(module: &M, prefix: &str) -> Vec<Entry> {
    module
        .named_params()
        .into_iter()
        .map(|(name, t)| Entry { name: crate::module::join(prefix, &name), shape: t.shape().to_vec(), data: t.to_vec() })
        .collect()
}

/// Loads every parameter of `module` from `entries` (names under `prefix`).
/// Missing names or shape mismatches are errors; unrelated entries are ignored.
pub fn load_into<M: Module + ?Sized>(module: &mut M, entries: &[Entry], prefix: &str) -> Result<()> {
    for (name, t) in module.named_params_mut() {
        let full = crate::module::join(prefix, &name);
        let e = entries
            .iter()
            .find(|e| e.name == full)
            .ok_or_else(|| NnError::Checkpoint(format!("missing parameter {}", full)))?;
        if e.shape != t.shape() {
            return Err(NnError::Checkpoint(format!(
                "shape mismatch for {}: file {:?}, model {:?}",
                full,
                e.shape,
                t.shape()
            )));
        }
        *t = Tensor::param(e.data.clone(), &e.shape)?;
    }
    Ok(())
}

pub fn save(path: &Path, entries: &[Entry]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode(entries))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Vec<Entry>> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    decode(&buf)
}
