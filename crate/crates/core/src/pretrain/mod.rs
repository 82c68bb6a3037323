//! Shot-contrastive pretraining: nearest-neighbour positive keys, a momentum
//! key encoder and a queue of negatives under InfoNCE.

mod encoder;
mod keys;
mod loss;
mod momentum;
mod queue;
mod trainer;

pub use encoder::{embed_shot, EncoderConfig, Modality, ShotEncoder};
pub use keys::{neighborhood, select_positive_key, PositiveKeyMap};
pub use loss::{contrastive_gradients, info_nce, ContrastiveGradients, InfoNce};
pub use momentum::momentum_update;
pub use queue::KeyQueue;
pub use trainer::{
    pretrain, refresh_positive_keys, PretrainOutcome, RunMetadata, StepReport, Trainer, KEY_CHECKPOINT,
    QUERY_CHECKPOINT, RUN_METADATA,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{LrStep, SgdConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PretrainConfig {
    /// Half-width `m` of the positive-key neighbourhood, in shots.
    pub neighborhood: usize,
    pub queue_capacity: usize,
    /// Key-encoder momentum.
    pub momentum: f64,
    pub temperature: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Epochs at whose start positive keys are reselected with the current
    /// query encoder. Keys are always selected once before epoch 0.
    pub refresh_epochs: Vec<usize>,
    pub normalize_embeddings: bool,
    /// Reselect each query's positive key from current query-encoder
    /// embeddings at every step instead of using the cached map. Costly; meant
    /// for small corpora.
    pub per_step_key_selection: bool,
    pub optimizer: SgdConfig,
    pub encoder: EncoderConfig,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl PretrainConfig {
    pub fn desk() -> Self {
        Self {
            neighborhood: 4,
            queue_capacity: 1024,
            momentum: 0.999,
            temperature: 0.07,
            batch_size: 64,
            epochs: 60,
            refresh_epochs: vec![20, 50],
            normalize_embeddings: true,
            per_step_key_selection: false,
            optimizer: SgdConfig {
                learning_rate: 0.03,
                momentum: 0.9,
                weight_decay: 1e-4,
                schedule: vec![],
            },
            encoder: EncoderConfig::default(),
        }
    }

    /// Queue, batch, momentum, temperature and schedule at the sizes used for
    /// full-length feature films.
    pub fn paper_scale() -> Self {
        Self {
            neighborhood: 4,
            queue_capacity: 65_536,
            momentum: 0.999,
            temperature: 0.07,
            batch_size: 256,
            epochs: 100,
            refresh_epochs: vec![20, 50],
            normalize_embeddings: true,
            per_step_key_selection: false,
            optimizer: SgdConfig {
                learning_rate: 0.03,
                momentum: 0.9,
                weight_decay: 1e-4,
                schedule: vec![
                    LrStep {
                        epoch: 60,
                        multiplier: 0.1,
                    },
                    LrStep {
                        epoch: 90,
                        multiplier: 0.1,
                    },
                ],
            },
            encoder: EncoderConfig {
                hidden_widths: vec![2048],
                embedding_dim: 2048,
                ..EncoderConfig::default()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.neighborhood == 0 {
            return cfg("neighborhood must be at least 1".into());
        }
        if self.batch_size == 0 {
            return cfg("batch_size must be at least 1".into());
        }
        if self.queue_capacity < self.batch_size || !self.queue_capacity.is_multiple_of(self.batch_size) {
            return cfg(format!(
                "queue capacity {} must be a multiple of batch size {}",
                self.queue_capacity, self.batch_size
            ));
        }
        if !(0.0..=1.0).contains(&self.momentum) {
            return cfg(format!("momentum {} outside [0, 1]", self.momentum));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return cfg(format!("temperature must be positive, got {}", self.temperature));
        }
        if self.encoder.embedding_dim == 0 {
            return cfg("embedding_dim must be positive".into());
        }
        self.optimizer.validate()
    }
}
