//! Binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "PLCM"  u32 version (=1)  u32 tensor_count
//! per tensor: u16 name_len, name (UTF-8), u8 rank, u32 dims[rank],
//!             f32 payload[product(dims)] (row-major)
//! ```
//!
//! Values are narrowed to `f32` on save, so a save/load round trip is
//! bit-exact for `f32`-representable parameters and saving the loaded set
//! again reproduces the file byte for byte.

use std::fs;
use std::path::Path;

use super::{ParamSet, Tensor};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"PLCM";
pub const VERSION: u32 = 1;

pub fn to_bytes(params: &ParamSet) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(12 + params.num_elements() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, p) in params.iter() {
        let name_len = u16::try_from(name.len())
            .map_err(|_| Error::Format(format!("tensor name {name:?} too long")))?;
        let rank = u8::try_from(p.value.shape().len())
            .map_err(|_| Error::Format(format!("tensor {name:?} has too many dimensions")))?;
        out.extend_from_slice(&name_len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(rank);
        for &d in p.value.shape() {
            let d = u32::try_from(d).map_err(|_| Error::Format(format!("dimension of {name:?} too large")))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        for &v in p.value.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
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
            .ok_or_else(|| Error::Format(format!("checkpoint truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<ParamSet> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format("bad checkpoint magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let count = r.u32()?;
    let mut params = ParamSet::new();
    for _ in 0..count {
        let name_len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.u8()? as usize;
        let mut shape = Vec::with_capacity(rank);
        let mut numel = 1usize;
        for _ in 0..rank {
            let d = r.u32()? as usize;
            numel = numel
                .checked_mul(d)
                .ok_or_else(|| Error::Format(format!("shape of {name:?} overflows")))?;
            shape.push(d);
        }
        let payload = r.take(
            numel
                .checked_mul(4)
                .ok_or_else(|| Error::Format(format!("shape of {name:?} overflows")))?,
        )?;
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        params
            .insert(name.clone(), Tensor::from_vec(&shape, data)?)
            .map_err(|_| Error::Format(format!("duplicate tensor {name:?}")))?;
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after last tensor",
            bytes.len() - r.pos
        )));
    }
    Ok(params)
}

pub fn save(params: &ParamSet, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_bytes(params)?)?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<ParamSet> {
    from_bytes(&fs::read(path)?)
}

/// Names in `params` that are not in `known`, for forward-compatible loading.
pub fn unknown_names(params: &ParamSet, known: &[String]) -> Vec<String> {
    params
        .names()
        .filter(|n| !known.iter().any(|k| k == n))
        .map(str::to_string)
        .collect()
}
