//! Run configuration: named profiles overlaid with a TOML file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::boundary::{ClassifierConfig, SampleMode};
use crate::corpus::GeneratorConfig;
use crate::error::{Error, Result};
use crate::io::sha256_hex;
use crate::pretrain::PretrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    Desk,
    PaperScale,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Self::Desk),
            "paper-scale" => Ok(Self::PaperScale),
            other => Err(Error::Config(format!(
                "unknown profile {other:?}; expected desk or paper-scale"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub knn_k: Vec<usize>,
    pub score_threshold: f64,
    pub recall_window_s: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            knn_k: vec![1, 5, 10],
            score_threshold: crate::eval::SCORE_THRESHOLD,
            recall_window_s: crate::eval::RECALL_WINDOW_S,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskConfig {
    /// Title-level train/val/test ratios.
    pub split_ratios: [f64; 3],
    pub sample_mode: SampleMode,
    /// Concatenate second-modality features to the shot embeddings.
    pub fuse_modalities: bool,
    pub cuepoint_min_gap_s: f64,
    /// Cue-point budget per hour of content (at least one per title).
    pub cuepoints_per_hour: f64,
    pub cuepoint_threshold: f64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            split_ratios: [0.7, 0.1, 0.2],
            sample_mode: SampleMode::AllBoundaries,
            fuse_modalities: false,
            cuepoint_min_gap_s: 120.0,
            cuepoints_per_hour: 6.0,
            cuepoint_threshold: 0.5,
        }
    }
}

/// Artifact locations, relative to the output directory unless absolute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub corpus: PathBuf,
    pub pretrain: PathBuf,
    pub embeddings: PathBuf,
    pub classifier: PathBuf,
    pub predictions: PathBuf,
    pub cuepoints: PathBuf,
    pub metrics: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            corpus: "corpus".into(),
            pretrain: "pretrain".into(),
            embeddings: "embeddings".into(),
            classifier: "classifier/classifier.json".into(),
            predictions: "predictions.jsonl".into(),
            cuepoints: "cuepoints.jsonl".into(),
            metrics: "metrics.json".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub generator: GeneratorConfig,
    pub pretrain: PretrainConfig,
    pub classifier: ClassifierConfig,
    pub task: TaskConfig,
    pub eval: EvalConfig,
    pub paths: PathsConfig,
}

impl RunConfig {
    pub fn profile(profile: Profile) -> Self {
        let (pretrain, classifier) = match profile {
            Profile::Desk => (PretrainConfig::desk(), ClassifierConfig::desk()),
            Profile::PaperScale => (PretrainConfig::paper_scale(), ClassifierConfig::paper_scale()),
        };
        Self {
            seed: 0,
            generator: GeneratorConfig::default(),
            pretrain,
            classifier,
            task: TaskConfig::default(),
            eval: EvalConfig::default(),
            paths: PathsConfig::default(),
        }
    }

    /// The profile with `overlay` (TOML text) merged over it key by key.
    pub fn from_toml(profile: Profile, overlay: &str) -> Result<Self> {
        let overlay: toml::Table = overlay
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let base = toml::Table::try_from(Self::profile(profile)).map_err(|e| Error::Config(e.to_string()))?;
        let mut merged = toml::Value::Table(base);
        merge(&mut merged, toml::Value::Table(overlay));
        let cfg: Self = merged.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads an overlay file; `None` yields the bare profile.
    pub fn load(path: Option<&Path>, profile: Profile) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        Self::from_toml(profile, &text).map_err(|e| match (e, path) {
            (Error::Config(m), Some(p)) => Error::Config(format!("{}: {m}", p.display())),
            (e, _) => e,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.pretrain.validate()?;
        self.classifier.validate()?;
        let sum: f64 = self.task.split_ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.task.split_ratios.iter().any(|r| !(*r >= 0.0)) {
            return Err(Error::Config(format!(
                "split ratios {:?} must be non-negative and sum to 1",
                self.task.split_ratios
            )));
        }
        if !(self.task.cuepoint_min_gap_s > 0.0) || !(self.task.cuepoints_per_hour > 0.0) {
            return Err(Error::Config("cue-point gap and budget must be positive".into()));
        }
        if self.eval.knn_k.contains(&0) {
            return Err(Error::Config("knn k values must be positive".into()));
        }
        if !(self.eval.recall_window_s >= 0.0) {
            return Err(Error::Config("recall window must be non-negative".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Hex SHA-256 of the configuration's canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical: BTreeMap<String, serde_json::Value> =
            serde_json::from_value(serde_json::to_value(self).expect("config serializes")).expect("config is an object");
        sha256_hex(&serde_json::to_vec(&canonical).expect("config serializes"))
    }
}

fn merge(base: &mut toml::Value, overlay: toml::Value) {
    match (base, overlay) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_validate() {
        RunConfig::profile(Profile::Desk).validate().unwrap();
        RunConfig::profile(Profile::PaperScale).validate().unwrap();
        assert_eq!(RunConfig::profile(Profile::PaperScale).pretrain.queue_capacity, 65_536);
    }

    #[test]
    fn toml_round_trip() {
        let cfg = RunConfig::profile(Profile::Desk);
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(Profile::PaperScale, &text).unwrap(), cfg);
    }

    #[test]
    fn overlay_changes_only_named_keys() {
        let cfg = RunConfig::from_toml(Profile::Desk, "seed = 9\n[pretrain]\nepochs = 3\n").unwrap();
        let mut want = RunConfig::profile(Profile::Desk);
        want.seed = 9;
        want.pretrain.epochs = 3;
        assert_eq!(cfg, want);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = RunConfig::from_toml(Profile::Desk, "[pretrain]\nepoch = 3\n").unwrap_err();
        assert!(err.to_string().contains("epoch"), "{err}");
        assert!(RunConfig::from_toml(Profile::Desk, "bogus = 1\n").is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(RunConfig::from_toml(Profile::Desk, "[pretrain]\ntemperature = 0.0\n").is_err());
        assert!(RunConfig::from_toml(Profile::Desk, "[task]\nsplit_ratios = [0.5, 0.1, 0.1]\n").is_err());
        assert!("huge".parse::<Profile>().is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::profile(Profile::Desk);
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }
}
