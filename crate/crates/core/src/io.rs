//! File helpers shared by every on-disk format: atomic writes, hashing and
//! JSON manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Writes `bytes` to a temporary sibling, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_vec_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push(b'\n');
    write_atomic(path, &text)
}

pub fn read_json<D: DeserializeOwned>(path: &Path) -> Result<D> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// One JSON object per line.
pub fn write_jsonl<S: Serialize>(path: &Path, records: &[S]) -> Result<()> {
    let mut text = Vec::new();
    for r in records {
        serde_json::to_writer(&mut text, r).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        text.push(b'\n');
    }
    write_atomic(path, &text)
}

/// Reads a JSON-lines file; blank lines are ignored.
pub fn read_jsonl<D: DeserializeOwned>(path: &Path) -> Result<Vec<D>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Format {
                path: path.to_path_buf(),
                message: format!("line {}: {e}", i + 1),
            })
        })
        .collect()
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn encode_le<T: Scalar>(values: &[T], out: &mut Vec<u8>) {
    out.reserve(values.len() * T::BYTES);
    for v in values {
        v.write_le(out);
    }
}

/// Decodes `count` elements at byte `offset` of `blob`, reporting truncation
/// against the blob's path.
pub fn decode_le<T: Scalar>(blob: &[u8], offset: u64, count: usize, path: &Path) -> Result<Vec<T>> {
    let needed = (count * T::BYTES) as u64;
    let end = offset.checked_add(needed).filter(|&e| e <= blob.len() as u64);
    let Some(end) = end else {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            offset,
            needed,
            available: blob.len() as u64,
        });
    };
    let values: Vec<T> = blob[offset as usize..end as usize]
        .chunks_exact(T::BYTES)
        .map(T::read_le)
        .collect();
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: format!("{} at byte {}", path.display(), offset),
            index,
        });
    }
    Ok(values)
}

/// Resolves a blob name recorded in a manifest relative to the manifest.
pub(crate) fn sibling(manifest: &Path, name: &str) -> PathBuf {
    manifest
        .parent()
        .map(|p| p.join(name))
        .unwrap_or_else(|| PathBuf::from(name))
}
