//! Corpus directory layout:
//!
//! * `manifest.json`: version, generator echo, tensor geometry and per-title
//!   labels, times and blob offsets.
//! * `shots.bin`: little-endian `f32` shot tensors in title order.
//! * `modality2.bin`: optional second-modality vectors, same order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, GeneratorConfig, Shot, ShotTensor, TensorDims, Title};
use crate::error::{Error, Result};
use crate::io::{decode_le, encode_le, read_bytes, read_json, sha256_hex, write_atomic, write_json};

pub const CORPUS_FORMAT: &str = "shotcol-corpus";
pub const CORPUS_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";
const SHOTS: &str = "shots.bin";
const MODALITY2: &str = "modality2.bin";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TitleRecord {
    title_id: String,
    shot_count: usize,
    scene_ids: Vec<u32>,
    start_times: Vec<f64>,
    end_times: Vec<f64>,
    cuepoint_flags: Vec<bool>,
    blob_offset: u64,
    blob_bytes: u64,
    modality2_offset: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CorpusManifest {
    format: String,
    version: u32,
    generator: Option<GeneratorConfig>,
    tensor: TensorDims,
    modality2_dim: Option<usize>,
    shots_bytes: u64,
    shots_sha256: String,
    modality2_bytes: Option<u64>,
    modality2_sha256: Option<String>,
    titles: Vec<TitleRecord>,
}

pub fn save_corpus(corpus: &Corpus, dir: &Path) -> Result<()> {
    corpus.validate()?;
    let mut shots = Vec::with_capacity(corpus.shot_count() * corpus.dims.len() * 4);
    let mut m2 = Vec::new();
    let mut titles = Vec::with_capacity(corpus.titles.len());
    for t in &corpus.titles {
        let blob_offset = shots.len() as u64;
        let modality2_offset = corpus.modality2_dim.map(|_| m2.len() as u64);
        for s in &t.shots {
            encode_le(s.tensor.data(), &mut shots);
            if let Some(v) = &s.modality2 {
                encode_le(v, &mut m2);
            }
        }
        titles.push(TitleRecord {
            title_id: t.title_id.clone(),
            shot_count: t.len(),
            scene_ids: t.scene_ids.clone(),
            start_times: t.shots.iter().map(|s| s.start_time).collect(),
            end_times: t.shots.iter().map(|s| s.end_time).collect(),
            cuepoint_flags: t.cuepoint_flags.clone(),
            blob_offset,
            blob_bytes: shots.len() as u64 - blob_offset,
            modality2_offset,
        });
    }
    let has_m2 = corpus.modality2_dim.is_some();
    let manifest = CorpusManifest {
        format: CORPUS_FORMAT.into(),
        version: CORPUS_VERSION,
        generator: corpus.generator.clone(),
        tensor: corpus.dims,
        modality2_dim: corpus.modality2_dim,
        shots_bytes: shots.len() as u64,
        shots_sha256: sha256_hex(&shots),
        modality2_bytes: has_m2.then_some(m2.len() as u64),
        modality2_sha256: has_m2.then(|| sha256_hex(&m2)),
        titles,
    };
    write_atomic(&dir.join(SHOTS), &shots)?;
    if has_m2 {
        write_atomic(&dir.join(MODALITY2), &m2)?;
    }
    write_json(&dir.join(MANIFEST), &manifest)
}

fn check_blob(path: &Path, blob: &[u8], declared: u64, sha: &str, titles: &[(u64, u64)]) -> Result<()> {
    let available = blob.len() as u64;
    if available < declared {
        // Report the first title whose span no longer fits.
        let (offset, needed) = titles
            .iter()
            .copied()
            .find(|&(o, n)| o + n > available)
            .unwrap_or((available, declared - available));
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            offset,
            needed,
            available,
        });
    }
    if available != declared || sha256_hex(blob) != sha {
        return Err(Error::Checksum {
            path: path.to_path_buf(),
        });
    }
    Ok(())
}

pub fn load_corpus(dir: &Path) -> Result<Corpus> {
    let manifest_path = dir.join(MANIFEST);
    let m: CorpusManifest = read_json(&manifest_path)?;
    let format_err = |message: String| Error::Format {
        path: manifest_path.clone(),
        message,
    };
    if m.format != CORPUS_FORMAT {
        return Err(format_err(format!("unexpected format tag {:?}", m.format)));
    }
    if m.version != CORPUS_VERSION {
        return Err(Error::Version {
            path: manifest_path,
            found: m.version,
            expected: CORPUS_VERSION,
        });
    }
    m.tensor.validate()?;
    let shot_len = m.tensor.len();

    let shots_path = dir.join(SHOTS);
    let shots_blob = read_bytes(&shots_path)?;
    let spans: Vec<(u64, u64)> = m.titles.iter().map(|t| (t.blob_offset, t.blob_bytes)).collect();
    check_blob(&shots_path, &shots_blob, m.shots_bytes, &m.shots_sha256, &spans)?;

    let m2_path = dir.join(MODALITY2);
    let m2_blob = match (m.modality2_dim, &m.modality2_sha256, m.modality2_bytes) {
        (Some(dim), Some(sha), Some(bytes)) => {
            let blob = read_bytes(&m2_path)?;
            let spans: Vec<(u64, u64)> = m
                .titles
                .iter()
                .map(|t| (t.modality2_offset.unwrap_or(0), (t.shot_count * dim * 4) as u64))
                .collect();
            check_blob(&m2_path, &blob, bytes, sha, &spans)?;
            Some((dim, blob))
        }
        (None, None, None) => None,
        _ => return Err(format_err("inconsistent second-modality fields".into())),
    };

    let mut titles = Vec::with_capacity(m.titles.len());
    for r in &m.titles {
        let n = r.shot_count;
        if r.scene_ids.len() != n || r.start_times.len() != n || r.end_times.len() != n {
            return Err(format_err(format!("title {} has ragged per-shot fields", r.title_id)));
        }
        if r.blob_bytes != (n * shot_len * 4) as u64 {
            return Err(format_err(format!("title {} blob size disagrees with shot count", r.title_id)));
        }
        let pixels = decode_le::<f32>(&shots_blob, r.blob_offset, n * shot_len, &shots_path)?;
        let m2_values = match &m2_blob {
            Some((dim, blob)) => {
                let off = r
                    .modality2_offset
                    .ok_or_else(|| format_err(format!("title {} lacks modality2 offset", r.title_id)))?;
                Some((*dim, decode_le::<f32>(blob, off, n * dim, &m2_path)?))
            }
            None => None,
        };
        let shots = (0..n)
            .map(|i| {
                Ok(Shot {
                    tensor: ShotTensor::new(m.tensor, pixels[i * shot_len..(i + 1) * shot_len].to_vec())?,
                    start_time: r.start_times[i],
                    end_time: r.end_times[i],
                    modality2: m2_values
                        .as_ref()
                        .map(|(dim, v)| v[i * dim..(i + 1) * dim].to_vec()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        titles.push(Title {
            title_id: r.title_id.clone(),
            shots,
            scene_ids: r.scene_ids.clone(),
            cuepoint_flags: r.cuepoint_flags.clone(),
        });
    }
    let corpus = Corpus {
        generator: m.generator,
        dims: m.tensor,
        modality2_dim: m.modality2_dim,
        titles,
    };
    corpus.validate()?;
    Ok(corpus)
}
