use serde::{Deserialize, Serialize};

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub title_id: String,
    pub boundary_index: usize,
    pub boundary_time_s: f64,
    pub score: f64,
    pub label_if_known: Option<bool>,
}

/// One line of a cue-point file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CuePointRecord {
    pub title_id: String,
    pub time_s: f64,
    pub score: f64,
}
