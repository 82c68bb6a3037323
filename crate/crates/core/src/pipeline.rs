//! Corpus-wide glue between stages: embedding sets and their file format,
//! baseline features, boundary samples and prediction records.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::boundary::{
    build_boundary_samples, fuse_modalities, select_cue_points, BoundarySample, CuePointConstraints, CuePointRecord,
    PredictionRecord, SampleMode, ScoredBoundary,
};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::eval::{knn_retrieval_precision, KnnPrecision};
use crate::io::{decode_le, encode_le, read_bytes, read_json, sha256_hex, write_atomic, write_json};
use crate::numkernel::{ParamSet, Tensor};
use crate::pretrain::{EncoderConfig, ShotEncoder};

pub const EMBEDDINGS_FORMAT: &str = "shotcol-embeddings";
pub const EMBEDDINGS_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";
const BLOB: &str = "embeddings.bin";

/// Per-shot feature vectors for every title of a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    /// Free-form origin label, e.g. `shotcol` or `raw-pixel`.
    pub source: String,
    pub title_ids: Vec<String>,
    /// One `[shots, dim]` matrix per title.
    pub titles: Vec<Tensor<f32>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TitleEntry {
    title_id: String,
    shots: usize,
    offset: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct EmbeddingManifest {
    format: String,
    version: u32,
    source: String,
    dim: usize,
    blob: String,
    blob_bytes: u64,
    sha256: String,
    titles: Vec<TitleEntry>,
}

impl EmbeddingSet {
    pub fn new(source: impl Into<String>, title_ids: Vec<String>, titles: Vec<Tensor<f32>>) -> Result<Self> {
        let me = Self {
            source: source.into(),
            title_ids,
            titles,
        };
        if me.title_ids.len() != me.titles.len() {
            return Err(Error::shape("embedding set", &[me.title_ids.len()], &[me.titles.len()]));
        }
        let dim = me.dim();
        for t in &me.titles {
            if t.rank() != 2 || t.last_dim() != dim {
                return Err(Error::shape("title embeddings", &[t.rows(), dim], t.shape()));
            }
        }
        Ok(me)
    }

    pub fn dim(&self) -> usize {
        self.titles.first().map_or(0, |t| t.last_dim())
    }

    pub fn get(&self, title_id: &str) -> Option<&Tensor<f32>> {
        self.title_ids.iter().position(|t| t == title_id).map(|i| &self.titles[i])
    }

    /// Checks that titles and shot counts line up with `corpus`.
    pub fn check_matches(&self, corpus: &Corpus) -> Result<()> {
        for title in &corpus.titles {
            let e = self.get(&title.title_id).ok_or_else(|| {
                Error::InvalidArgument(format!("no embeddings for title {}", title.title_id))
            })?;
            if e.rows() != title.len() {
                return Err(Error::shape(
                    format!("embeddings of {}", title.title_id),
                    &[title.len(), self.dim()],
                    e.shape(),
                ));
            }
        }
        Ok(())
    }

    /// Row-wise concatenation with a second set over the same titles.
    pub fn fuse(&self, other: Option<&EmbeddingSet>) -> Result<EmbeddingSet> {
        let other = other
            .ok_or_else(|| Error::InvalidArgument("fusion requested but the second modality is missing".into()))?;
        let titles = self
            .title_ids
            .iter()
            .zip(&self.titles)
            .map(|(id, a)| {
                let b = other
                    .get(id)
                    .ok_or_else(|| Error::InvalidArgument(format!("second modality lacks title {id}")))?;
                fuse_modalities(a, Some(b))
            })
            .collect::<Result<_>>()?;
        EmbeddingSet::new(format!("{}+{}", self.source, other.source), self.title_ids.clone(), titles)
    }

    /// Writes `manifest.json` and `embeddings.bin` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let mut blob = Vec::new();
        let mut titles = Vec::with_capacity(self.titles.len());
        for (id, t) in self.title_ids.iter().zip(&self.titles) {
            titles.push(TitleEntry {
                title_id: id.clone(),
                shots: t.rows(),
                offset: blob.len() as u64,
            });
            encode_le(t.data(), &mut blob);
        }
        write_atomic(&dir.join(BLOB), &blob)?;
        write_json(
            &dir.join(MANIFEST),
            &EmbeddingManifest {
                format: EMBEDDINGS_FORMAT.into(),
                version: EMBEDDINGS_VERSION,
                source: self.source.clone(),
                dim: self.dim(),
                blob: BLOB.into(),
                blob_bytes: blob.len() as u64,
                sha256: sha256_hex(&blob),
                titles,
            },
        )
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join(MANIFEST);
        let m: EmbeddingManifest = read_json(&manifest_path)?;
        if m.format != EMBEDDINGS_FORMAT {
            return Err(Error::Format {
                path: manifest_path,
                message: format!("expected format {EMBEDDINGS_FORMAT}, found {}", m.format),
            });
        }
        if m.version != EMBEDDINGS_VERSION {
            return Err(Error::Version {
                path: manifest_path,
                found: m.version,
                expected: EMBEDDINGS_VERSION,
            });
        }
        let blob_path = dir.join(&m.blob);
        let blob = read_bytes(&blob_path)?;
        let mut titles = Vec::with_capacity(m.titles.len());
        let mut ids = Vec::with_capacity(m.titles.len());
        for t in &m.titles {
            let data = decode_le::<f32>(&blob, t.offset, t.shots * m.dim, &blob_path)?;
            titles.push(Tensor::new(vec![t.shots, m.dim], data)?);
            ids.push(t.title_id.clone());
        }
        if blob.len() as u64 != m.blob_bytes || sha256_hex(&blob) != m.sha256 {
            return Err(Error::Checksum { path: blob_path });
        }
        Self::new(m.source, ids, titles)
    }
}

/// Embeds every title of `corpus` with a frozen encoder.
pub fn embed_corpus(
    encoder: &ShotEncoder,
    params: &ParamSet<f32>,
    corpus: &Corpus,
    normalize: bool,
    source: &str,
) -> Result<EmbeddingSet> {
    let titles = corpus
        .titles
        .iter()
        .map(|t| encoder.embed_title(params, t, normalize))
        .collect::<Result<_>>()?;
    EmbeddingSet::new(source, corpus.title_ids(), titles)
}

/// Untrained encoder of the configured architecture.
pub fn random_encoder(config: &EncoderConfig, corpus: &Corpus, seed: u64) -> Result<(ShotEncoder, ParamSet<f32>)> {
    let encoder = ShotEncoder::for_corpus(config, corpus)?;
    let params = encoder.network.init_params(seed);
    Ok((encoder, params))
}

/// Flattened shot pixels, centred and scaled as encoder inputs are.
pub fn raw_pixel_embeddings(config: &EncoderConfig, corpus: &Corpus) -> Result<EmbeddingSet> {
    let mut visual = config.clone();
    visual.modality = crate::pretrain::Modality::Visual;
    let encoder = ShotEncoder::for_corpus(&visual, corpus)?;
    let titles = corpus
        .titles
        .iter()
        .map(|t| encoder.inputs(&t.shots))
        .collect::<Result<_>>()?;
    EmbeddingSet::new("raw-pixel", corpus.title_ids(), titles)
}

/// Boundary samples of every corpus title, in corpus order.
pub fn corpus_samples(
    corpus: &Corpus,
    embeddings: &EmbeddingSet,
    context: usize,
    mode: SampleMode,
) -> Result<Vec<BoundarySample>> {
    embeddings.check_matches(corpus)?;
    let mut out = Vec::new();
    for title in &corpus.titles {
        let e = embeddings.get(&title.title_id).expect("checked above");
        out.extend(build_boundary_samples(title, e, context, mode)?);
    }
    Ok(out)
}

/// k-NN same-scene precision of an embedding set over `corpus`.
pub fn corpus_knn(corpus: &Corpus, embeddings: &EmbeddingSet, k: usize) -> Result<KnnPrecision> {
    embeddings.check_matches(corpus)?;
    let pairs: Vec<(&Tensor<f32>, &[u32])> = corpus
        .titles
        .iter()
        .map(|t| (embeddings.get(&t.title_id).expect("checked above"), t.scene_ids.as_slice()))
        .collect();
    knn_retrieval_precision(&pairs, k)
}

pub fn prediction_records(samples: &[BoundarySample], scores: &[f64], with_labels: bool) -> Vec<PredictionRecord> {
    samples
        .iter()
        .zip(scores)
        .map(|(s, &score)| PredictionRecord {
            title_id: s.title_id.clone(),
            boundary_index: s.boundary_index,
            boundary_time_s: s.boundary_time,
            score,
            label_if_known: with_labels.then_some(s.label),
        })
        .collect()
}

/// Constrained cue-points per title from scored predictions. Each title's
/// budget scales with its duration, taken from `durations_s`.
pub fn cue_points_from_predictions(
    records: &[PredictionRecord],
    durations_s: &BTreeMap<String, f64>,
    min_gap_s: f64,
    per_hour: f64,
    threshold: f64,
) -> Result<Vec<CuePointRecord>> {
    let mut by_title: BTreeMap<&str, Vec<ScoredBoundary>> = BTreeMap::new();
    let mut order: Vec<&str> = Vec::new();
    for r in records {
        by_title
            .entry(&r.title_id)
            .or_insert_with(|| {
                order.push(&r.title_id);
                Vec::new()
            })
            .push(ScoredBoundary {
                time_s: r.boundary_time_s,
                score: r.score,
            });
    }
    let mut out = Vec::new();
    for id in order {
        let candidates = &by_title[id];
        let duration = durations_s
            .get(id)
            .copied()
            .unwrap_or_else(|| candidates.iter().map(|c| c.time_s).fold(0.0, f64::max));
        let limits = CuePointConstraints::for_duration(duration, min_gap_s, per_hour, threshold);
        for i in select_cue_points(candidates, &limits)? {
            out.push(CuePointRecord {
                title_id: id.to_string(),
                time_s: candidates[i].time_s,
                score: candidates[i].score,
            });
        }
    }
    Ok(out)
}

/// Title durations (end time of the last shot).
pub fn title_durations(corpus: &Corpus) -> BTreeMap<String, f64> {
    corpus
        .titles
        .iter()
        .map(|t| (t.title_id.clone(), t.shots.last().map_or(0.0, |s| s.end_time)))
        .collect()
}
