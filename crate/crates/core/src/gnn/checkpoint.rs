//! Binary checkpoint format.
//!
//! ```text
//! magic    8 bytes   "KGMCKPT\0"
//! version  u32 LE
//! config   u32 LE length + UTF-8 JSON of ModelConfig
//! count    u32 LE number of tensors
//! tensor   u32 LE name length + name, u32 LE rows, u32 LE cols, rows*cols f64 LE (row-major)
//! ```

use std::path::Path;

use ndarray::Array2;

use super::model::{MissingnessModel, ModelConfig, Params, TENSOR_COUNT, TENSOR_NAMES};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"KGMCKPT\0";
pub const FORMAT_VERSION: u32 = 1;

pub fn encode_checkpoint(model: &MissingnessModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let config = serde_json::to_vec(&model.config).expect("config serializes");
    out.extend_from_slice(&(config.len() as u32).to_le_bytes());
    out.extend_from_slice(&config);
    out.extend_from_slice(&(TENSOR_COUNT as u32).to_le_bytes());
    for (name, t) in TENSOR_NAMES.iter().zip(model.params.tensors()) {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.nrows() as u32).to_le_bytes());
        out.extend_from_slice(&(t.ncols() as u32).to_le_bytes());
        for x in t.iter() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated while reading {what}")))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<MissingnessModel> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(MAGIC.len(), "magic")? != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::ConfigMismatch {
            expected: format!("format version {FORMAT_VERSION}"),
            found: format!("format version {version}"),
        });
    }
    let len = r.u32("config length")? as usize;
    let config: ModelConfig = serde_json::from_slice(r.take(len, "config")?)
        .map_err(|e| Error::Checkpoint(format!("bad config header: {e}")))?;
    config.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;
    let count = r.u32("tensor count")? as usize;
    if count != TENSOR_COUNT {
        return Err(Error::Checkpoint(format!("expected {TENSOR_COUNT} tensors, found {count}")));
    }
    let shapes = config.tensor_shapes();
    let mut tensors = Vec::with_capacity(TENSOR_COUNT);
    for (name, shape) in TENSOR_NAMES.iter().zip(shapes) {
        let name_len = r.u32("tensor name length")? as usize;
        let found = r.take(name_len, "tensor name")?;
        if found != name.as_bytes() {
            return Err(Error::Checkpoint(format!(
                "expected tensor {name}, found {:?}",
                String::from_utf8_lossy(found)
            )));
        }
        let rows = r.u32("rows")? as usize;
        let cols = r.u32("cols")? as usize;
        if (rows, cols) != shape {
            return Err(Error::Checkpoint(format!(
                "tensor {name} is {rows}x{cols}, config implies {}x{}",
                shape.0, shape.1
            )));
        }
        let raw = r.take(rows * cols * 8, name)?;
        let data: Vec<f64> = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        tensors.push(Array2::from_shape_vec((rows, cols), data).expect("length matches shape"));
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(MissingnessModel {
        config,
        params: Params::from_tensors(tensors),
    })
}

pub fn save_checkpoint(model: &MissingnessModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_checkpoint(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<MissingnessModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

/// Loads a checkpoint and checks it accepts features of width `input_dim`.
pub fn load_checkpoint_for(path: impl AsRef<Path>, input_dim: usize) -> Result<MissingnessModel> {
    let model = load_checkpoint(path)?;
    if model.config.input_dim != input_dim {
        return Err(Error::ConfigMismatch {
            expected: format!("input_dim {input_dim}"),
            found: format!("input_dim {}", model.config.input_dim),
        });
    }
    Ok(model)
}
