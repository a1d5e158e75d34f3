//! Binary checkpoint format (little-endian, no alignment padding):
//!
//! ```text
//! magic "SCFN" (4 bytes)
//! format version   u32 = 1
//! tensor count     u16
//! per tensor:      name length u16, UTF-8 name,
//!                  rank u8, dims u32[rank], raw f32 data
//! metadata:        epoch u32, val_loss f32, val_accuracy f32,
//!                  val_mae f32, seed u64
//! ```
//!
//! Loading validates magic, version, and length before anything else, and
//! checks the named tensors against the fixed architecture.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{ModelParams, PARAM_SPECS};
use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"SCFN";
const FORMAT_VERSION: u32 = 1;

/// Selection metadata stored next to the weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckpointMeta {
    pub epoch: u32,
    pub val_loss: f32,
    pub val_accuracy: f32,
    pub val_mae: f32,
    /// Seed of the training run; reconstructs the exact dataset split.
    pub seed: u64,
}

/// Best-validation-loss model snapshot plus its metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams<f32>,
    pub meta: CheckpointMeta,
}

/// Serialize a checkpoint to bytes.
pub fn encode(ckpt: &Checkpoint) -> Vec<u8> {
    let tensors = ckpt.params.tensors();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u16).to_le_bytes());
    for ((name, _), tensor) in PARAM_SPECS.iter().zip(tensors) {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(tensor.rank() as u8);
        for &d in tensor.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.extend_from_slice(&ckpt.meta.epoch.to_le_bytes());
    out.extend_from_slice(&ckpt.meta.val_loss.to_le_bytes());
    out.extend_from_slice(&ckpt.meta.val_accuracy.to_le_bytes());
    out.extend_from_slice(&ckpt.meta.val_mae.to_le_bytes());
    out.extend_from_slice(&ckpt.meta.seed.to_le_bytes());
    out
}

pub fn save(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    fs::write(path, encode(ckpt))?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::CheckpointTruncated(format!(
                "unexpected end of file while reading {what}"
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Decode a checkpoint, verifying structure and architecture.
pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::CheckpointMagic);
    }
    let version = r.u32("format version")?;
    if version != FORMAT_VERSION {
        return Err(Error::CheckpointVersion(version));
    }
    let count = r.u16("tensor count")? as usize;
    if count != PARAM_SPECS.len() {
        return Err(Error::CheckpointMalformed(format!(
            "expected {} tensors, file declares {count}",
            PARAM_SPECS.len()
        )));
    }

    let mut params: ModelParams<f32> = ModelParams::zeros();
    let slots = params.tensors_mut();
    for ((want_name, want_shape), slot) in PARAM_SPECS.iter().zip(slots) {
        let name_len = r.u16("tensor name length")? as usize;
        let name_bytes = r.take(name_len, "tensor name")?;
        let name = std::str::from_utf8(name_bytes)
            .map_err(|_| Error::CheckpointMalformed("tensor name is not valid UTF-8".into()))?;
        if name != *want_name {
            return Err(Error::CheckpointMalformed(format!(
                "unexpected tensor '{name}', wanted '{want_name}'"
            )));
        }
        let rank = r.u8("tensor rank")? as usize;
        if rank != want_shape.len() {
            return Err(Error::CheckpointMalformed(format!(
                "tensor '{name}' has rank {rank}, wanted {}",
                want_shape.len()
            )));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32("tensor dim")? as usize);
        }
        if dims != *want_shape {
            return Err(Error::CheckpointMalformed(format!(
                "tensor '{name}' has shape {dims:?}, wanted {want_shape:?}"
            )));
        }
        let len: usize = dims.iter().product();
        let raw = r.take(len * 4, "tensor data")?;
        let data: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        *slot = Tensor::from_vec(&dims, data).expect("validated shape");
    }

    let meta = CheckpointMeta {
        epoch: r.u32("epoch")?,
        val_loss: r.f32("validation loss")?,
        val_accuracy: r.f32("validation accuracy")?,
        val_mae: r.f32("validation MAE")?,
        seed: r.u64("seed")?,
    };
    if r.pos != bytes.len() {
        return Err(Error::CheckpointMalformed(format!(
            "{} trailing bytes after metadata",
            bytes.len() - r.pos
        )));
    }
    Ok(Checkpoint { params, meta })
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path)?;
    decode(&bytes)
}
