//! Binary checkpoint container.
//!
//! Layout: the 8-byte magic `LWIRCKPT`, the header length as a little-endian
//! `u64`, a UTF-8 JSON header, then every tensor as raw little-endian `f32`.
//! Each header tensor entry carries its byte offset into the data section and
//! its element count, so readers can check for truncation before decoding.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::ParamSet;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"LWIRCKPT";
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset from the start of the data section.
    pub offset: u64,
    /// Number of `f32` elements.
    pub len: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    /// `generator`, `discriminator` or `train_state`.
    pub architecture: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub step: u64,
    pub epoch: u64,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    /// Tensor payloads, parallel to `header.tensors`.
    pub data: Vec<Vec<f32>>,
}

impl Checkpoint {
    pub fn new(architecture: &str, config: serde_json::Value, seed: u64, step: u64, epoch: u64) -> Self {
        Checkpoint {
            header: CheckpointHeader {
                format_version: FORMAT_VERSION,
                architecture: architecture.to_string(),
                config,
                seed,
                step,
                epoch,
                tensors: Vec::new(),
            },
            data: Vec::new(),
        }
    }

    pub fn from_params(
        architecture: &str,
        config: serde_json::Value,
        seed: u64,
        step: u64,
        epoch: u64,
        prefix: &str,
        params: &ParamSet<f32>,
    ) -> Self {
        let mut c = Self::new(architecture, config, seed, step, epoch);
        c.push_params(prefix, params);
        c
    }

    pub fn push(&mut self, name: String, shape: Vec<usize>, data: Vec<f32>) {
        let offset = self
            .header
            .tensors
            .last()
            .map_or(0, |t| t.offset + 4 * t.len);
        self.header.tensors.push(TensorEntry {
            name,
            shape,
            offset,
            len: data.len() as u64,
        });
        self.data.push(data);
    }

    pub fn push_params(&mut self, prefix: &str, params: &ParamSet<f32>) {
        for p in params.iter() {
            self.push(format!("{prefix}{}", p.name), p.shape.clone(), p.data.clone());
        }
    }

    pub fn tensor(&self, name: &str) -> Option<&[f32]> {
        self.header
            .tensors
            .iter()
            .position(|t| t.name == name)
            .map(|i| self.data[i].as_slice())
    }

    /// Copies `<prefix><param name>` into every parameter of `params`,
    /// checking shapes.
    pub fn fill_params(&self, prefix: &str, params: &mut ParamSet<f32>) -> Result<()> {
        for p in params.iter_mut() {
            let name = format!("{prefix}{}", p.name);
            let idx = self
                .header
                .tensors
                .iter()
                .position(|t| t.name == name)
                .ok_or_else(|| Error::CorruptCheckpoint(format!("missing tensor {name}")))?;
            if self.header.tensors[idx].shape != p.shape {
                return Err(Error::CorruptCheckpoint(format!(
                    "tensor {name} has shape {:?}, network expects {:?}",
                    self.header.tensors[idx].shape, p.shape
                )));
            }
            p.data.copy_from_slice(&self.data[idx]);
        }
        Ok(())
    }

    fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header)?;
        let payload: usize = self.data.iter().map(Vec::len).sum();
        let mut out = Vec::with_capacity(16 + header.len() + 4 * payload);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for block in &self.data {
            for v in block {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let corrupt = |m: &str| Error::CorruptCheckpoint(m.to_string());
        if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(corrupt("bad magic"));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
        let data_start = 16u64
            .checked_add(hlen)
            .filter(|&e| e <= bytes.len() as u64)
            .ok_or_else(|| corrupt("header extends past end of file"))? as usize;
        let header: CheckpointHeader = serde_json::from_slice(&bytes[16..data_start])
            .map_err(|e| Error::CorruptCheckpoint(format!("header: {e}")))?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::CorruptCheckpoint(format!(
                "unsupported format version {}",
                header.format_version
            )));
        }
        let payload = &bytes[data_start..];
        let mut expected = 0u64;
        let mut data = Vec::with_capacity(header.tensors.len());
        for t in &header.tensors {
            if t.shape.iter().product::<usize>() as u64 != t.len {
                return Err(Error::CorruptCheckpoint(format!("tensor {} shape/length disagree", t.name)));
            }
            let end = t.len.checked_mul(4).and_then(|n| n.checked_add(t.offset));
            let end = match end {
                Some(e) if e <= payload.len() as u64 => e as usize,
                _ => return Err(Error::CorruptCheckpoint(format!("tensor {} is truncated", t.name))),
            };
            data.push(
                payload[t.offset as usize..end]
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                    .collect(),
            );
            expected += 4 * t.len;
        }
        if expected != payload.len() as u64 {
            return Err(Error::CorruptCheckpoint(format!(
                "data section is {} bytes, header describes {expected}",
                payload.len()
            )));
        }
        Ok(Checkpoint { header, data })
    }
}

/// Writes through a temporary file in the same directory and renames it into
/// place, so readers never observe a partial checkpoint.
pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let bytes = ckpt.to_bytes()?;
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let file_name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{file_name}.{}.tmp", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}
