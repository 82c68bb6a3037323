//! Parameter checkpoints: a JSON manifest naming each tensor's shape and
//! byte offset, plus a sibling little-endian blob.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{decode_le, encode_le, read_bytes, read_json, sha256_hex, sibling, write_atomic, write_json};
use crate::numkernel::{MlpSpec, ParamSet, Tensor};
use crate::scalar::Scalar;

pub const CHECKPOINT_FORMAT: &str = "shotcol-params";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: u64,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: String,
    pub version: u32,
    pub dtype: String,
    pub blob: String,
    pub blob_bytes: u64,
    pub sha256: String,
    pub network: MlpSpec,
    pub tensors: Vec<TensorEntry>,
}

/// A network description together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub network: MlpSpec,
    pub params: ParamSet<T>,
}

fn blob_path(manifest_path: &Path) -> PathBuf {
    manifest_path.with_extension("bin")
}

impl<T: Scalar> Checkpoint<T> {
    pub fn new(network: MlpSpec, params: ParamSet<T>) -> Result<Self> {
        network.check_params(&params)?;
        Ok(Self { network, params })
    }

    /// Writes `<stem>.json` and `<stem>.bin`; `manifest_path` is the `.json` path.
    pub fn save(&self, manifest_path: &Path) -> Result<()> {
        let blob_path = blob_path(manifest_path);
        let mut blob = Vec::with_capacity(self.params.numel() * T::BYTES);
        let mut tensors = Vec::with_capacity(self.params.len());
        for (name, t) in self.params.iter() {
            tensors.push(TensorEntry {
                name: name.to_string(),
                shape: t.shape().to_vec(),
                offset: blob.len() as u64,
                len: t.len(),
            });
            encode_le(t.data(), &mut blob);
        }
        let manifest = CheckpointManifest {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            dtype: T::DTYPE.into(),
            blob: blob_path
                .file_name()
                .expect("manifest path has a file name")
                .to_string_lossy()
                .into_owned(),
            blob_bytes: blob.len() as u64,
            sha256: sha256_hex(&blob),
            network: self.network.clone(),
            tensors,
        };
        write_atomic(&blob_path, &blob)?;
        write_json(manifest_path, &manifest)
    }

    pub fn load(manifest_path: &Path) -> Result<Self> {
        let m: CheckpointManifest = read_json(manifest_path)?;
        let format_err = |message: String| Error::Format {
            path: manifest_path.to_path_buf(),
            message,
        };
        if m.format != CHECKPOINT_FORMAT {
            return Err(format_err(format!("unexpected format tag {:?}", m.format)));
        }
        if m.version != CHECKPOINT_VERSION {
            return Err(Error::Version {
                path: manifest_path.to_path_buf(),
                found: m.version,
                expected: CHECKPOINT_VERSION,
            });
        }
        if m.dtype != T::DTYPE {
            return Err(format_err(format!("dtype {} cannot load as {}", m.dtype, T::DTYPE)));
        }
        let blob_path = sibling(manifest_path, &m.blob);
        let blob = read_bytes(&blob_path)?;
        if (blob.len() as u64) < m.blob_bytes {
            return Err(Error::Truncated {
                path: blob_path,
                offset: blob.len() as u64,
                needed: m.blob_bytes,
                available: blob.len() as u64,
            });
        }
        if blob.len() as u64 != m.blob_bytes || sha256_hex(&blob) != m.sha256 {
            return Err(Error::Checksum { path: blob_path });
        }
        let mut entries = Vec::with_capacity(m.tensors.len());
        for e in &m.tensors {
            if e.shape.iter().product::<usize>() != e.len {
                return Err(format_err(format!("tensor {} shape/len disagree", e.name)));
            }
            let data = decode_le::<T>(&blob, e.offset, e.len, &blob_path)?;
            entries.push((e.name.clone(), Tensor::new(e.shape.clone(), data)?));
        }
        Checkpoint::new(m.network, ParamSet::new(entries)?)
    }
}
