use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{contrastive_gradients, momentum_update, KeyQueue, PositiveKeyMap, select_positive_key, PretrainConfig, ShotEncoder};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::io::{read_json, write_json};
use crate::numkernel::{sgd_step, Checkpoint, ParamSet, SgdState, Tensor};
use crate::rng::stream_seed;

const STREAM_INIT: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;
const STREAM_DROPOUT: u64 = 3;

pub const QUERY_CHECKPOINT: &str = "query.json";
pub const KEY_CHECKPOINT: &str = "key.json";
pub const RUN_METADATA: &str = "run.json";

/// Embeds every title with `params` and reselects each shot's positive key.
pub fn refresh_positive_keys(
    corpus: &Corpus,
    encoder: &ShotEncoder,
    params: &ParamSet<f32>,
    cfg: &PretrainConfig,
) -> Result<PositiveKeyMap> {
    let embeddings = corpus
        .titles
        .iter()
        .map(|t| encoder.embed_title(params, t, cfg.normalize_embeddings))
        .collect::<Result<Vec<_>>>()?;
    PositiveKeyMap::from_embeddings(&embeddings, cfg.neighborhood)
}

#[derive(Debug, Clone)]
pub struct StepReport {
    pub loss: f64,
    /// Key embeddings enqueued by this step, one row per query.
    pub keys: Tensor<f32>,
}

/// Owns both encoders, the optimizer, the queue and the positive-key map.
pub struct Trainer<'c> {
    corpus: &'c Corpus,
    cfg: PretrainConfig,
    seed: u64,
    encoder: ShotEncoder,
    query: ParamSet<f32>,
    key: ParamSet<f32>,
    sgd: SgdState<f32>,
    queue: KeyQueue<f32>,
    key_map: PositiveKeyMap,
    epoch: usize,
    step: usize,
    epoch_losses: Vec<f64>,
    step_losses: Vec<f64>,
    refreshed_at: Vec<usize>,
}

impl<'c> Trainer<'c> {
    /// Initializes the query encoder, copies it into the key encoder and
    /// selects positive keys in the untrained embedding space.
    pub fn new(corpus: &'c Corpus, cfg: &PretrainConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if corpus.titles.iter().any(|t| t.len() < 2) {
            return Err(Error::InvalidArgument("every title needs at least two shots".into()));
        }
        if corpus.shot_count() < cfg.batch_size {
            return Err(Error::Config(format!(
                "batch size {} exceeds the corpus's {} shots",
                cfg.batch_size,
                corpus.shot_count()
            )));
        }
        let encoder = ShotEncoder::for_corpus(&cfg.encoder, corpus)?;
        let query = encoder.network.init_params(stream_seed(seed, STREAM_INIT, 0));
        let key = query.clone();
        let sgd = SgdState::new(cfg.optimizer.clone(), &query)?;
        let queue = KeyQueue::new(cfg.queue_capacity, encoder.embedding_dim(), cfg.normalize_embeddings)?;
        let key_map = refresh_positive_keys(corpus, &encoder, &query, cfg)?;
        Ok(Self {
            corpus,
            cfg: cfg.clone(),
            seed,
            encoder,
            query,
            key,
            sgd,
            queue,
            key_map,
            epoch: 0,
            step: 0,
            epoch_losses: Vec::new(),
            step_losses: Vec::new(),
            refreshed_at: vec![0],
        })
    }

    pub fn encoder(&self) -> &ShotEncoder {
        &self.encoder
    }

    pub fn query_params(&self) -> &ParamSet<f32> {
        &self.query
    }

    pub fn key_params(&self) -> &ParamSet<f32> {
        &self.key
    }

    pub fn queue(&self) -> &KeyQueue<f32> {
        &self.queue
    }

    pub fn key_map(&self) -> &PositiveKeyMap {
        &self.key_map
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// Reselects positive keys with the current query encoder.
    pub fn refresh(&mut self) -> Result<()> {
        self.key_map = refresh_positive_keys(self.corpus, &self.encoder, &self.query, &self.cfg)?;
        if self.refreshed_at.last() != Some(&self.epoch) {
            self.refreshed_at.push(self.epoch);
        }
        Ok(())
    }

    /// Every `(title, shot)` query of an epoch in shuffled order, cut into
    /// full batches. A trailing partial batch is dropped.
    pub fn epoch_batches(&self, epoch: usize) -> Vec<Vec<(usize, usize)>> {
        let mut all: Vec<(usize, usize)> = self
            .corpus
            .titles
            .iter()
            .enumerate()
            .flat_map(|(i, t)| (0..t.len()).map(move |s| (i, s)))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(self.seed, STREAM_SHUFFLE, epoch as u64));
        all.shuffle(&mut rng);
        all.chunks_exact(self.cfg.batch_size).map(|c| c.to_vec()).collect()
    }

    /// One optimizer step on a batch of `(title, shot)` queries.
    pub fn step(&mut self, batch: &[(usize, usize)]) -> Result<StepReport> {
        let titles = &self.corpus.titles;
        let queries = self.encoder.inputs(batch.iter().map(|&(t, s)| &titles[t].shots[s]))?;
        let key_shots = if self.cfg.per_step_key_selection {
            batch
                .iter()
                .map(|&(t, s)| self.select_key_now(t, s))
                .collect::<Result<Vec<_>>>()?
        } else {
            batch.iter().map(|&(t, s)| self.key_map.key(t, s)).collect()
        };
        let positives = self
            .encoder
            .inputs(batch.iter().zip(&key_shots).map(|(&(t, _), &k)| &titles[t].shots[k]))?;
        let keys = self
            .encoder
            .embed_inputs(&self.key, &positives, self.cfg.normalize_embeddings)?;

        let dropout_seed = stream_seed(self.seed, STREAM_DROPOUT, self.step as u64);
        let out = contrastive_gradients(
            &self.encoder.network,
            &self.query,
            &queries,
            &keys,
            &self.queue,
            self.cfg.temperature,
            self.cfg.normalize_embeddings,
            true,
            dropout_seed,
        )?;
        if !out.loss.is_finite() {
            return Err(Error::Diverged {
                epoch: self.epoch,
                step: self.step,
                reason: format!("loss is {}", out.loss),
            });
        }
        sgd_step(&mut self.query, &out.grads, &mut self.sgd, self.epoch).map_err(|e| Error::Diverged {
            epoch: self.epoch,
            step: self.step,
            reason: e.to_string(),
        })?;
        momentum_update(&mut self.key, &self.query, self.cfg.momentum)?;
        self.queue.enqueue(&keys)?;
        self.step += 1;
        self.step_losses.push(out.loss);
        Ok(StepReport { loss: out.loss, keys })
    }

    /// Positive key of one query under the current query encoder.
    fn select_key_now(&self, title: usize, shot: usize) -> Result<usize> {
        let shots = &self.corpus.titles[title].shots;
        let lo = shot.saturating_sub(self.cfg.neighborhood);
        let hi = (shot + self.cfg.neighborhood).min(shots.len() - 1);
        let x = self.encoder.inputs(&shots[lo..=hi])?;
        let e = self
            .encoder
            .embed_inputs(&self.query, &x, self.cfg.normalize_embeddings)?;
        Ok(lo + select_positive_key(&e, shot - lo, self.cfg.neighborhood)?)
    }

    /// Runs the next epoch, refreshing positive keys first when scheduled.
    /// Returns the epoch's mean step loss.
    pub fn train_epoch(&mut self) -> Result<f64> {
        if self.epoch > 0 && self.cfg.refresh_epochs.contains(&self.epoch) {
            self.refresh()?;
        }
        let batches = self.epoch_batches(self.epoch);
        let mut total = 0.0;
        for batch in &batches {
            total += self.step(batch)?.loss;
        }
        let mean = total / batches.len() as f64;
        log::info!("pretrain epoch {} loss {:.4}", self.epoch, mean);
        self.epoch_losses.push(mean);
        self.epoch += 1;
        Ok(mean)
    }

    pub fn finish(self) -> PretrainOutcome {
        PretrainOutcome {
            encoder: self.encoder,
            query: self.query,
            key: self.key,
            metadata: RunMetadata {
                config: self.cfg,
                seed: self.seed,
                epochs_completed: self.epoch,
                steps_completed: self.step,
                epoch_losses: self.epoch_losses,
                step_losses: self.step_losses,
                refreshed_at: self.refreshed_at,
                next_shuffle_stream: self.epoch as u64,
                next_dropout_stream: self.step as u64,
                queue_start: "partial".into(),
            },
        }
    }
}

/// Run record written next to the encoder checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunMetadata {
    pub config: PretrainConfig,
    pub seed: u64,
    pub epochs_completed: usize,
    pub steps_completed: usize,
    pub epoch_losses: Vec<f64>,
    pub step_losses: Vec<f64>,
    pub refreshed_at: Vec<usize>,
    /// Index of the next epoch's shuffle stream.
    pub next_shuffle_stream: u64,
    /// Index of the next step's dropout stream.
    pub next_dropout_stream: u64,
    /// The queue starts empty and fills during the first steps.
    pub queue_start: String,
}

#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    pub encoder: ShotEncoder,
    pub query: ParamSet<f32>,
    pub key: ParamSet<f32>,
    pub metadata: RunMetadata,
}

impl PretrainOutcome {
    /// Writes `query.json`, `key.json` (plus blobs) and `run.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        Checkpoint::new(self.encoder.network.clone(), self.query.clone())?.save(&dir.join(QUERY_CHECKPOINT))?;
        Checkpoint::new(self.encoder.network.clone(), self.key.clone())?.save(&dir.join(KEY_CHECKPOINT))?;
        write_json(&dir.join(RUN_METADATA), &self.metadata)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let metadata: RunMetadata = read_json(&dir.join(RUN_METADATA))?;
        let query = Checkpoint::<f32>::load(&dir.join(QUERY_CHECKPOINT))?;
        let key = Checkpoint::<f32>::load(&dir.join(KEY_CHECKPOINT))?;
        let input_width = query.network.input_width();
        let encoder = ShotEncoder::with_input_width(&metadata.config.encoder, input_width)?;
        if encoder.network != query.network || key.network != query.network {
            return Err(Error::Format {
                path: dir.join(RUN_METADATA),
                message: "encoder checkpoints do not match the recorded configuration".into(),
            });
        }
        Ok(Self {
            encoder,
            query: query.params,
            key: key.params,
            metadata,
        })
    }

    pub fn epoch_losses(&self) -> &[f64] {
        &self.metadata.epoch_losses
    }
}

/// Full pretraining run: `cfg.epochs` epochs from a fresh initialization.
pub fn pretrain(corpus: &Corpus, cfg: &PretrainConfig, seed: u64) -> Result<PretrainOutcome> {
    let mut trainer = Trainer::new(corpus, cfg, seed)?;
    for _ in 0..cfg.epochs {
        trainer.train_epoch()?;
    }
    Ok(trainer.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_corpus, GeneratorConfig, Range, TensorDims};

    fn tiny_corpus() -> Corpus {
        generate_corpus(&GeneratorConfig {
            titles: 3,
            scenes_per_title: Range { min: 4, max: 5 },
            shots_per_scene: Range { min: 3, max: 5 },
            tensor: TensorDims {
                width: 4,
                height: 4,
                channels: 3,
                keyframes: 2,
            },
            ..GeneratorConfig::default()
        })
        .unwrap()
    }

    fn tiny_config() -> PretrainConfig {
        let mut cfg = PretrainConfig::desk();
        cfg.batch_size = 8;
        cfg.queue_capacity = 32;
        cfg.epochs = 2;
        cfg.refresh_epochs = vec![1];
        cfg.encoder.hidden_widths = vec![16];
        cfg.encoder.embedding_dim = 8;
        cfg
    }

    #[test]
    fn refresh_without_change_is_stable() {
        let corpus = tiny_corpus();
        let cfg = tiny_config();
        let t = Trainer::new(&corpus, &cfg, 3).unwrap();
        let again = refresh_positive_keys(&corpus, t.encoder(), t.query_params(), &cfg).unwrap();
        assert_eq!(&again, t.key_map());
    }

    #[test]
    fn key_encoder_starts_equal() {
        let corpus = tiny_corpus();
        let t = Trainer::new(&corpus, &tiny_config(), 3).unwrap();
        assert_eq!(t.query_params(), t.key_params());
    }

    #[test]
    fn deterministic_histories() {
        let corpus = tiny_corpus();
        let a = pretrain(&corpus, &tiny_config(), 9).unwrap();
        let b = pretrain(&corpus, &tiny_config(), 9).unwrap();
        assert_eq!(a.metadata.step_losses, b.metadata.step_losses);
        assert_eq!(a.query, b.query);
        assert_eq!(a.metadata.refreshed_at, vec![0, 1]);
    }

    #[test]
    fn batches_cover_full_chunks() {
        let corpus = tiny_corpus();
        let t = Trainer::new(&corpus, &tiny_config(), 3).unwrap();
        let batches = t.epoch_batches(0);
        assert_eq!(batches.len(), corpus.shot_count() / 8);
        assert!(batches.iter().all(|b| b.len() == 8));
        assert_ne!(t.epoch_batches(0), t.epoch_batches(1));
    }

    #[test]
    fn per_step_selection_matches_map_before_training() {
        let corpus = tiny_corpus();
        let mut cfg = tiny_config();
        cfg.per_step_key_selection = true;
        let t = Trainer::new(&corpus, &cfg, 4).unwrap();
        for (ti, title) in corpus.titles.iter().enumerate() {
            for s in 0..title.len() {
                assert_eq!(t.select_key_now(ti, s).unwrap(), t.key_map().key(ti, s));
            }
        }
        let mut t = t;
        assert!(t.train_epoch().unwrap().is_finite());
    }

    #[test]
    fn save_load_round_trip() {
        let corpus = tiny_corpus();
        let out = pretrain(&corpus, &tiny_config(), 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        out.save(dir.path()).unwrap();
        let back = PretrainOutcome::load(dir.path()).unwrap();
        assert_eq!(back.query, out.query);
        assert_eq!(back.key, out.key);
        assert_eq!(back.metadata, out.metadata);
    }
}
