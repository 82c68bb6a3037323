use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::boundary::PredictionRecord;
use crate::error::{Error, Result};

/// Decision threshold on boundary probabilities.
pub const SCORE_THRESHOLD: f64 = 0.5;
/// Time tolerance for boundary recall.
pub const RECALL_WINDOW_S: f64 = 3.0;

/// Parallel per-boundary scores, labels, times and titles.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RankedPredictions {
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
    pub times: Vec<f64>,
    pub title_ids: Vec<String>,
}

impl RankedPredictions {
    pub fn new(scores: Vec<f64>, labels: Vec<bool>, times: Vec<f64>, title_ids: Vec<String>) -> Result<Self> {
        let me = Self {
            scores,
            labels,
            times,
            title_ids,
        };
        me.validate()?;
        Ok(me)
    }

    /// Scores and labels only; every item at time 0 of one anonymous title.
    pub fn from_scores(scores: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        let n = scores.len();
        Self::new(scores, labels, vec![0.0; n], vec![String::new(); n])
    }

    /// Records without a known label are rejected.
    pub fn from_records(records: &[PredictionRecord]) -> Result<Self> {
        let mut me = Self::default();
        for (i, r) in records.iter().enumerate() {
            let label = r
                .label_if_known
                .ok_or_else(|| Error::InvalidArgument(format!("prediction {i} has no label")))?;
            me.scores.push(r.score);
            me.labels.push(label);
            me.times.push(r.boundary_time_s);
            me.title_ids.push(r.title_id.clone());
        }
        me.validate()?;
        Ok(me)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.scores.len();
        if self.labels.len() != n || self.times.len() != n || self.title_ids.len() != n {
            return Err(Error::shape(
                "ranked predictions",
                &[n, n, n, n],
                &[n, self.labels.len(), self.times.len(), self.title_ids.len()],
            ));
        }
        if let Some(index) = self.scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite {
                context: "prediction scores".into(),
                index,
            });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    fn require_positive(&self) -> Result<usize> {
        self.validate()?;
        match self.positives() {
            0 => Err(Error::InvalidArgument("metric undefined without positive labels".into())),
            n => Ok(n),
        }
    }

    /// Per title, in first-appearance order: (ground-truth times, predicted
    /// times at `threshold`).
    fn per_title_times(&self, threshold: f64) -> Vec<(Vec<f64>, Vec<f64>)> {
        let mut order: Vec<&str> = Vec::new();
        let mut by_title: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for i in 0..self.len() {
            let id = self.title_ids[i].as_str();
            let entry = by_title.entry(id).or_insert_with(|| {
                order.push(id);
                (Vec::new(), Vec::new())
            });
            if self.labels[i] {
                entry.0.push(self.times[i]);
            }
            if self.scores[i] >= threshold {
                entry.1.push(self.times[i]);
            }
        }
        order.into_iter().map(|id| by_title.remove(id).unwrap()).collect()
    }
}

/// Mean over positives of precision at each positive's rank. Items are ranked
/// by descending score; equal scores keep input order.
pub fn average_precision(preds: &RankedPredictions) -> Result<f64> {
    let positives = preds.require_positive()?;
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds.scores[b].total_cmp(&preds.scores[a]));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if preds.labels[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / positives as f64)
}

/// Fraction of positives scoring at least `threshold`.
pub fn recall_at_threshold(preds: &RankedPredictions, threshold: f64) -> Result<f64> {
    let positives = preds.require_positive()?;
    let hit = (0..preds.len())
        .filter(|&i| preds.labels[i] && preds.scores[i] >= threshold)
        .count();
    Ok(hit as f64 / positives as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeRecall {
    pub recall: f64,
    pub ground_truth: usize,
    pub matched: usize,
    /// No ground-truth boundaries at all; recall is 1 by definition.
    pub vacuous: bool,
}

/// Pooled fraction of ground-truth boundary times with some predicted time of
/// the same title within `window_s`. Each entry is one title's
/// `(ground_truth_times, predicted_times)`.
pub fn recall_at_3s(titles: &[(Vec<f64>, Vec<f64>)], window_s: f64) -> TimeRecall {
    let mut ground_truth = 0;
    let mut matched = 0;
    for (gt, pred) in titles {
        let mut sorted = pred.clone();
        sorted.sort_by(f64::total_cmp);
        for &g in gt {
            ground_truth += 1;
            // nearest predictions bracket g
            let at = sorted.partition_point(|&p| p < g);
            let near = [at.checked_sub(1), Some(at)]
                .into_iter()
                .flatten()
                .filter_map(|j| sorted.get(j))
                .any(|&p| (p - g).abs() <= window_s);
            matched += usize::from(near);
        }
    }
    TimeRecall {
        recall: if ground_truth == 0 {
            1.0
        } else {
            matched as f64 / ground_truth as f64
        },
        ground_truth,
        matched,
        vacuous: ground_truth == 0,
    }
}

impl RankedPredictions {
    /// Time recall with predictions thresholded at `threshold`.
    pub fn recall_at_3s(&self, threshold: f64, window_s: f64) -> Result<TimeRecall> {
        self.validate()?;
        Ok(recall_at_3s(&self.per_title_times(threshold), window_s))
    }
}
