//! Supervised boundary detection on frozen shot embeddings and constrained
//! cue-point selection.

mod classifier;
mod cuepoint;
mod records;
mod samples;

pub use classifier::{
    class_probabilities, predict_boundaries, train_classifier, weighted_cross_entropy, BoundaryClassifier,
    ClassifierConfig, TrainingCurves,
};
pub use cuepoint::{select_cue_points, CuePointConstraints, ScoredBoundary};
pub use records::{CuePointRecord, PredictionRecord};
pub use samples::{
    build_boundary_samples, extract_title_embeddings, fuse_modalities, BoundarySample, SampleMode,
};
