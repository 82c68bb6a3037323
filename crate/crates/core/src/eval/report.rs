use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsCounts {
    pub samples: usize,
    pub positives: usize,
    pub titles: usize,
    pub ground_truth_boundaries: usize,
    pub recall_at_3s_vacuous: bool,
    pub knn_queries: usize,
    pub knn_skipped_titles: usize,
}

/// Metrics file written by the evaluate command. Absent metrics were not
/// computed for the run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ap: Option<f64>,
    pub recall_at_threshold: Option<f64>,
    pub recall_threshold: f64,
    pub recall_at_3s: Option<f64>,
    pub knn_precision_by_k: BTreeMap<usize, f64>,
    pub counts: MetricsCounts,
}
