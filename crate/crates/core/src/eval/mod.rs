//! Ranking and retrieval metrics.

mod knn;
mod ranking;
mod report;

pub use knn::{knn_retrieval_precision, KnnPrecision};
pub use ranking::{
    average_precision, recall_at_3s, recall_at_threshold, RankedPredictions, TimeRecall, RECALL_WINDOW_S,
    SCORE_THRESHOLD,
};
pub use report::{MetricsCounts, MetricsReport};
