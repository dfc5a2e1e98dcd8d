//! Binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! b"TECRCKPT"
//! u32 header length, JSON header
//! u32 array count
//! per array: u32 name length, name, u32 ndim, u64 × ndim dims, f64 × product(dims)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelDims, ModelParameters, ScorerMode, BLOCK_NAMES, FORMAT_VERSION};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"TECRCKPT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub version: u32,
    pub d: usize,
    pub d_len: usize,
    pub d_a: usize,
    pub h: usize,
    pub max_width_bucket: usize,
    pub mode: ScorerMode,
}

impl CheckpointHeader {
    pub fn new(dims: ModelDims, mode: ScorerMode) -> Self {
        CheckpointHeader {
            version: FORMAT_VERSION,
            d: dims.d,
            d_len: dims.d_len,
            d_a: dims.d_a,
            h: dims.h,
            max_width_bucket: dims.max_width_bucket,
            mode,
        }
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            d: self.d,
            d_len: self.d_len,
            max_width_bucket: self.max_width_bucket,
            d_a: self.d_a,
            h: self.h,
        }
    }
}

fn bad(message: impl Into<String>) -> Error {
    Error::Checkpoint(message.into())
}

pub fn write_checkpoint(params: &ModelParameters, out: &mut impl Write) -> Result<()> {
    let header = serde_json::to_vec(&CheckpointHeader::new(params.dims, params.mode))?;
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header);
    buf.extend_from_slice(&(BLOCK_NAMES.len() as u32).to_le_bytes());
    for ((name, data), shape) in params.blocks().into_iter().zip(params.block_shapes()) {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for dim in &shape {
            buf.extend_from_slice(&(*dim as u64).to_le_bytes());
        }
        for x in data {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    out.write_all(&buf).map_err(|e| bad(e.to_string()))
}

struct Cursor<'a> {
    bytes: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(bad("truncated checkpoint"));
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Parse a checkpoint. When `expected` is given, the stored header must equal it.
pub fn read_checkpoint(input: &mut impl Read, expected: Option<&CheckpointHeader>) -> Result<ModelParameters> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(|e| bad(e.to_string()))?;
    let mut c = Cursor { bytes: &bytes };
    if c.take(8)? != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let len = c.u32()? as usize;
    let header: CheckpointHeader =
        serde_json::from_slice(c.take(len)?).map_err(|e| bad(format!("bad header: {e}")))?;
    if header.version != FORMAT_VERSION {
        return Err(bad(format!("unsupported version {}", header.version)));
    }
    if let Some(exp) = expected {
        if exp != &header {
            return Err(bad(format!(
                "header {} does not match configuration {}",
                serde_json::to_string(&header)?,
                serde_json::to_string(exp)?
            )));
        }
    }
    let mut params = ModelParameters::zeros(header.dims(), header.mode);
    let shapes = params.block_shapes();
    let count = c.u32()? as usize;
    if count != BLOCK_NAMES.len() {
        return Err(bad(format!("expected {} arrays, found {count}", BLOCK_NAMES.len())));
    }
    for ((name, block), shape) in params.blocks_mut().into_iter().zip(shapes) {
        let n = c.u32()? as usize;
        let found = std::str::from_utf8(c.take(n)?).map_err(|_| bad("array name is not UTF-8"))?;
        if found != name {
            return Err(bad(format!("expected array `{name}`, found `{found}`")));
        }
        let ndim = c.u32()? as usize;
        let dims = (0..ndim).map(|_| c.u64().map(|x| x as usize)).collect::<Result<Vec<_>>>()?;
        if dims != shape {
            return Err(bad(format!("array `{name}` has shape {dims:?}, expected {shape:?}")));
        }
        for x in block.iter_mut() {
            *x = f64::from_le_bytes(c.take(8)?.try_into().expect("8 bytes"));
        }
    }
    if !c.bytes.is_empty() {
        return Err(bad("trailing bytes after last array"));
    }
    if let Some(block) = params.first_non_finite_block() {
        return Err(Error::NonFinite(format!("checkpoint array {block}")));
    }
    Ok(params)
}

pub fn save_checkpoint(params: &ModelParameters, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(params, &mut buf)?;
    crate::util::write_atomic(path, &buf)
}

pub fn load_checkpoint(path: &Path, expected: Option<&CheckpointHeader>) -> Result<ModelParameters> {
    let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&mut f, expected)
}

impl ModelParameters {
    /// SHA-256 of the serialized checkpoint.
    pub fn fingerprint(&self) -> String {
        let mut buf = Vec::new();
        write_checkpoint(self, &mut buf).expect("in-memory write");
        crate::util::sha256_hex(&buf)
    }
}
