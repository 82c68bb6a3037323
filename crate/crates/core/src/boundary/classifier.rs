use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BoundarySample;
use crate::error::{Error, Result};
use crate::io::{read_json, sibling, write_json};
use crate::numkernel::{forward, param_gradients, sgd_step, Checkpoint, MlpSpec, ParamSet, SgdConfig, SgdState, Tensor};
use crate::rng::stream_seed;
use crate::scalar::Scalar;

const STREAM_INIT: u64 = 11;
const STREAM_SHUFFLE: u64 = 12;
const STREAM_DROPOUT: u64 = 13;

/// Rows per forward pass at inference.
const PREDICT_CHUNK: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierConfig {
    /// Shots on each side of a boundary (`N`).
    pub context: usize,
    /// Hidden widths; empty uses `[4 D, D]` for per-shot width `D`.
    pub hidden_widths: Vec<usize>,
    /// Dropout probability after each hidden layer.
    pub dropout: f64,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Weight each class by `n / (2 n_class)` in the loss.
    pub class_weighting: bool,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ClassifierConfig {
    pub fn desk() -> Self {
        Self {
            context: 2,
            hidden_widths: vec![],
            dropout: 0.5,
            learning_rate: 0.1,
            momentum: 0.9,
            weight_decay: 0.0,
            batch_size: 256,
            epochs: 20,
            class_weighting: true,
        }
    }

    pub fn paper_scale() -> Self {
        Self {
            context: 2,
            hidden_widths: vec![4096, 1024],
            dropout: 0.9,
            learning_rate: 0.1,
            momentum: 0.9,
            weight_decay: 0.0,
            batch_size: 1024,
            epochs: 200,
            class_weighting: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.context == 0 {
            return bad("classifier context must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("classifier batch_size must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("classifier dropout must be in [0, 1)");
        }
        if self.hidden_widths.contains(&0) {
            return bad("classifier hidden widths must be positive");
        }
        self.optimizer().validate()
    }

    fn optimizer(&self) -> SgdConfig {
        SgdConfig {
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            schedule: vec![],
        }
    }

    /// Network for per-shot feature width `shot_width`.
    pub fn network(&self, shot_width: usize) -> Result<MlpSpec> {
        let hidden = if self.hidden_widths.is_empty() {
            vec![4 * shot_width, shot_width]
        } else {
            self.hidden_widths.clone()
        };
        let mut widths = vec![2 * self.context * shot_width];
        widths.extend(&hidden);
        widths.push(2);
        MlpSpec::new(widths, vec![self.dropout; hidden.len()])
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingCurves {
    /// Weighted loss over the training set before the first step.
    pub initial_loss: f64,
    /// Mean weighted training loss per epoch.
    pub loss: Vec<f64>,
    /// Eval-mode training accuracy after each epoch.
    pub accuracy: Vec<f64>,
}

/// Two-class MLP over concatenated boundary windows. Output column 1 is the
/// boundary class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryClassifier {
    pub context: usize,
    pub shot_width: usize,
    pub network: MlpSpec,
    #[serde(skip)]
    pub params: ParamSet<f32>,
}

impl BoundaryClassifier {
    pub fn feature_width(&self) -> usize {
        self.network.input_width()
    }

    /// Writes `<stem>.json` (classifier metadata), plus the weight manifest
    /// `<stem>.params.json` and its blob.
    pub fn save(&self, path: &Path) -> Result<()> {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("classifier");
        Checkpoint::new(self.network.clone(), self.params.clone())?.save(&sibling(path, &format!("{stem}.params.json")))?;
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut me: Self = read_json(path)?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("classifier");
        let ckpt = Checkpoint::<f32>::load(&sibling(path, &format!("{stem}.params.json")))?;
        if ckpt.network != me.network || me.feature_width() != 2 * me.context * me.shot_width {
            return Err(Error::Format {
                path: path.to_path_buf(),
                message: "classifier metadata does not match its weights".into(),
            });
        }
        me.params = ckpt.params;
        Ok(me)
    }
}

fn feature_matrix(samples: &[&BoundarySample], width: usize) -> Result<Tensor<f32>> {
    let mut data = Vec::with_capacity(samples.len() * width);
    for s in samples {
        if s.feature.len() != width {
            return Err(Error::shape("boundary feature", &[width], &[s.feature.len()]));
        }
        data.extend_from_slice(&s.feature);
    }
    Tensor::new(vec![samples.len(), width], data)
}

/// Numerically stable two-way softmax of one logit row, in f64.
fn softmax2(logits: &[f32]) -> [f64; 2] {
    let (a, b) = (logits[0] as f64, logits[1] as f64);
    let m = a.max(b);
    let (ea, eb) = ((a - m).exp(), (b - m).exp());
    [ea / (ea + eb), eb / (ea + eb)]
}

/// `[samples, 2]` class probabilities in eval mode.
pub fn class_probabilities(classifier: &BoundaryClassifier, samples: &[BoundarySample]) -> Result<Vec<[f64; 2]>> {
    let mut out = Vec::with_capacity(samples.len());
    let refs: Vec<&BoundarySample> = samples.iter().collect();
    for chunk in refs.chunks(PREDICT_CHUNK) {
        let x = feature_matrix(chunk, classifier.feature_width())?;
        let (logits, _) = forward(&classifier.network, &classifier.params, &x, false, 0)?;
        out.extend(logits.iter_rows().map(softmax2));
    }
    Ok(out)
}

/// Boundary-class probability per sample.
pub fn predict_boundaries(classifier: &BoundaryClassifier, samples: &[BoundarySample]) -> Result<Vec<f64>> {
    Ok(class_probabilities(classifier, samples)?.into_iter().map(|p| p[1]).collect())
}

fn class_weights(samples: &[BoundarySample], weighted: bool) -> Result<[f64; 2]> {
    let pos = samples.iter().filter(|s| s.label).count();
    let neg = samples.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidArgument(format!(
            "training needs both classes, got {pos} boundaries and {neg} non-boundaries"
        )));
    }
    let n = samples.len() as f64;
    Ok(if weighted {
        [n / (2.0 * neg as f64), n / (2.0 * pos as f64)]
    } else {
        [1.0, 1.0]
    })
}

/// Weighted loss and accuracy over all samples in eval mode.
fn evaluate(classifier: &BoundaryClassifier, samples: &[BoundarySample], weights: [f64; 2]) -> Result<(f64, f64)> {
    let probs = class_probabilities(classifier, samples)?;
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (p, s) in probs.iter().zip(samples) {
        let y = usize::from(s.label);
        loss -= weights[y] * p[y].max(f64::MIN_POSITIVE).ln();
        correct += usize::from((p[1] > p[0]) == s.label);
    }
    Ok((loss / samples.len() as f64, correct as f64 / samples.len() as f64))
}

/// Mean class-weighted softmax cross-entropy of a batch and its parameter
/// gradients.
pub fn weighted_cross_entropy<T: Scalar>(
    network: &MlpSpec,
    params: &ParamSet<T>,
    features: &Tensor<T>,
    labels: &[bool],
    weights: [f64; 2],
    train_mode: bool,
    seed: u64,
) -> Result<(f64, ParamSet<T>)> {
    if network.output_width() != 2 {
        return Err(Error::shape("classifier output", &[2], &[network.output_width()]));
    }
    let (logits, cache) = forward(network, params, features, train_mode, seed)?;
    if labels.len() != logits.rows() {
        return Err(Error::shape("labels", &[logits.rows()], &[labels.len()]));
    }
    let scale = 1.0 / labels.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for (row, &label) in logits.iter_rows().zip(labels) {
        let (a, b) = (row[0].to_acc(), row[1].to_acc());
        let m = a.max(b);
        let lse = m + ((a - m).exp() + (b - m).exp()).ln();
        let p = [(a - lse).exp(), (b - lse).exp()];
        let y = usize::from(label);
        let w = weights[y];
        loss -= w * ([a, b][y] - lse) * scale;
        for (c, pc) in p.iter().enumerate() {
            let target = if c == y { 1.0 } else { 0.0 };
            grad.push(T::from_acc(w * (pc - target) * scale));
        }
    }
    let grad = Tensor::new(logits.shape().to_vec(), grad)?;
    Ok((loss, param_gradients(&cache, params, &grad)?))
}

/// Trains a boundary classifier with momentum SGD at a fixed learning rate.
pub fn train_classifier(
    samples: &[BoundarySample],
    cfg: &ClassifierConfig,
    seed: u64,
) -> Result<(BoundaryClassifier, TrainingCurves)> {
    cfg.validate()?;
    let weights = class_weights(samples, cfg.class_weighting)?;
    let width = samples[0].feature.len();
    if !width.is_multiple_of(2 * cfg.context) {
        return Err(Error::shape("boundary feature", &[2 * cfg.context], &[width]));
    }
    let shot_width = width / (2 * cfg.context);
    let network = cfg.network(shot_width)?;
    let mut clf = BoundaryClassifier {
        context: cfg.context,
        shot_width,
        params: network.init_params(stream_seed(seed, STREAM_INIT, 0)),
        network,
    };
    let mut sgd = SgdState::new(cfg.optimizer(), &clf.params)?;
    let mut curves = TrainingCurves {
        initial_loss: evaluate(&clf, samples, weights)?.0,
        ..TrainingCurves::default()
    };

    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut step = 0u64;
    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(stream_seed(seed, STREAM_SHUFFLE, epoch as u64)));
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let refs: Vec<&BoundarySample> = batch.iter().map(|&i| &samples[i]).collect();
            let x = feature_matrix(&refs, width)?;
            let labels: Vec<bool> = refs.iter().map(|s| s.label).collect();
            let dropout_seed = stream_seed(seed, STREAM_DROPOUT, step);
            let (loss, grads) =
                weighted_cross_entropy(&clf.network, &clf.params, &x, &labels, weights, true, dropout_seed)?;
            total += loss * refs.len() as f64;
            sgd_step(&mut clf.params, &grads, &mut sgd, epoch).map_err(|e| Error::Diverged {
                epoch,
                step: step as usize,
                reason: e.to_string(),
            })?;
            step += 1;
        }
        let mean = total / samples.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Diverged {
                epoch,
                step: step as usize,
                reason: format!("classifier loss is {mean}"),
            });
        }
        let (_, acc) = evaluate(&clf, samples, weights)?;
        log::debug!("classifier epoch {epoch} loss {mean:.4} accuracy {acc:.3}");
        curves.loss.push(mean);
        curves.accuracy.push(acc);
    }
    Ok((clf, curves))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn sample(feature: Vec<f32>, label: bool) -> BoundarySample {
        BoundarySample {
            title_id: "t".into(),
            boundary_index: 0,
            boundary_time: 0.0,
            label,
            feature,
        }
    }

    /// Label is the sign of the first coordinate, with a margin.
    fn separable(n: usize, seed: u64) -> Vec<BoundarySample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let label = i % 3 == 0;
                let mut f: Vec<f32> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
                f[0] = if label { rng.gen_range(0.3..1.0) } else { rng.gen_range(-1.0..-0.3) };
                sample(f, label)
            })
            .collect()
    }

    fn small_config() -> ClassifierConfig {
        ClassifierConfig {
            context: 1,
            hidden_widths: vec![8, 4],
            dropout: 0.0,
            batch_size: 16,
            epochs: 50,
            ..ClassifierConfig::desk()
        }
    }

    #[test]
    fn separable_set_reaches_full_accuracy() {
        let data = separable(90, 1);
        let (_, curves) = train_classifier(&data, &small_config(), 5).unwrap();
        assert_eq!(curves.loss.len(), 50);
        assert_eq!(*curves.accuracy.last().unwrap(), 1.0);
    }

    /// Windows of four random unit-norm shot embeddings, as the pipeline
    /// produces them.
    fn unit_windows(n: usize, dim: usize, seed: u64) -> Vec<BoundarySample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let mut f = Vec::new();
                for _ in 0..4 {
                    let v: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let norm = v.iter().map(|x| x * x).sum::<f32>().sqrt();
                    f.extend(v.iter().map(|x| x / norm));
                }
                sample(f, i % 5 == 0)
            })
            .collect()
    }

    #[test]
    fn initial_loss_near_log_two() {
        let data = unit_windows(200, 64, 2);
        let cfg = ClassifierConfig {
            epochs: 0,
            ..ClassifierConfig::desk()
        };
        let (_, curves) = train_classifier(&data, &cfg, 5).unwrap();
        let ln2 = std::f64::consts::LN_2;
        assert!((curves.initial_loss - ln2).abs() < 0.1 * ln2, "{}", curves.initial_loss);
    }

    #[test]
    fn deterministic_per_seed() {
        let data = separable(60, 3);
        let mut cfg = small_config();
        cfg.dropout = 0.3;
        cfg.epochs = 5;
        let (a, ca) = train_classifier(&data, &cfg, 7).unwrap();
        let (b, cb) = train_classifier(&data, &cfg, 7).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(ca, cb);
    }

    #[test]
    fn single_class_rejected() {
        let data: Vec<_> = (0..4).map(|i| sample(vec![i as f32, 0.0], false)).collect();
        assert!(train_classifier(&data, &small_config(), 1).is_err());
    }

    #[test]
    fn probabilities_are_a_distribution_and_compose() {
        let data = separable(30, 4);
        let mut cfg = small_config();
        cfg.epochs = 3;
        let (clf, _) = train_classifier(&data, &cfg, 1).unwrap();
        let probs = class_probabilities(&clf, &data).unwrap();
        let scores = predict_boundaries(&clf, &data).unwrap();
        let x = Tensor::from_rows(&data.iter().map(|s| s.feature.clone()).collect::<Vec<_>>()).unwrap();
        let (logits, _) = forward(&clf.network, &clf.params, &x, false, 0).unwrap();
        for ((p, s), row) in probs.iter().zip(&scores).zip(logits.iter_rows()) {
            assert!((p[0] + p[1] - 1.0).abs() < 1e-6);
            let e0 = (row[0] as f64).exp();
            let e1 = (row[1] as f64).exp();
            assert!((s - e1 / (e0 + e1)).abs() < 1e-9);
        }
        assert_eq!(scores, predict_boundaries(&clf, &data).unwrap());
    }

    #[test]
    fn feature_width_mismatch_rejected() {
        let data = separable(30, 4);
        let mut cfg = small_config();
        cfg.epochs = 1;
        let (clf, _) = train_classifier(&data, &cfg, 1).unwrap();
        assert!(predict_boundaries(&clf, &[sample(vec![0.0; 6], true)]).is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let data = separable(30, 4);
        let mut cfg = small_config();
        cfg.epochs = 2;
        let (clf, _) = train_classifier(&data, &cfg, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("classifier.json");
        clf.save(&path).unwrap();
        assert_eq!(BoundaryClassifier::load(&path).unwrap(), clf);
    }

    #[test]
    fn cross_entropy_gradient_matches_differences() {
        use crate::numkernel::gradcheck::compare_with_central_differences;
        let net = MlpSpec::plain(vec![3, 2]).unwrap();
        let params: ParamSet<f64> = net.init_params(4);
        let x = Tensor::new(vec![3, 3], vec![0.2, -0.4, 0.9, 1.0, 0.1, -0.3, -0.7, 0.5, 0.05]).unwrap();
        let labels = [true, false, false];
        let w = [0.75, 1.5];
        let (_, grads) = weighted_cross_entropy(&net, &params, &x, &labels, w, false, 0).unwrap();
        let report = compare_with_central_differences(&params, &grads, 1e-5, 1e-7, |p| {
            Some(weighted_cross_entropy(&net, p, &x, &labels, w, false, 0).unwrap().0)
        });
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn default_widths_scale_with_shot_width() {
        let net = ClassifierConfig::desk().network(64).unwrap();
        assert_eq!(net.layer_widths, vec![256, 256, 64, 2]);
    }
}
