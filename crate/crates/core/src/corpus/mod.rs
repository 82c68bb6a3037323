//! Synthetic long-form video corpora: shot tensors, titles with scene and
//! cue-point labels, a seeded generator, on-disk storage and title splits.

mod generate;
mod shot;
mod split;
mod store;

pub use generate::{generate_corpus, GeneratorConfig, Range};
pub use shot::{
    keyframe_indices, reshape_shot, sample_keyframes, unreshape_shot, Shot, ShotTensor, TensorDims,
};
pub use split::{split_corpus, Split};
pub use store::{load_corpus, save_corpus, CORPUS_VERSION};

use crate::error::{Error, Result};

/// One video: ordered shots with per-shot scene ids and per-boundary
/// cue-point flags. Boundary `b` separates shots `b` and `b + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Title {
    pub title_id: String,
    pub shots: Vec<Shot>,
    pub scene_ids: Vec<u32>,
    pub cuepoint_flags: Vec<bool>,
}

impl Title {
    pub fn len(&self) -> usize {
        self.shots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shots.is_empty()
    }

    pub fn boundary_count(&self) -> usize {
        self.shots.len().saturating_sub(1)
    }

    /// True at boundaries where the scene id changes.
    pub fn scene_boundaries(&self) -> Vec<bool> {
        self.scene_ids.windows(2).map(|w| w[0] != w[1]).collect()
    }

    /// Time of boundary `b` (end of shot `b`).
    pub fn boundary_time(&self, b: usize) -> f64 {
        self.shots[b].end_time
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(format!("title {}: {msg}", self.title_id)));
        if self.shots.is_empty() {
            return bad("no shots".into());
        }
        if self.scene_ids.len() != self.shots.len() {
            return bad(format!("{} scene ids for {} shots", self.scene_ids.len(), self.shots.len()));
        }
        if self.cuepoint_flags.len() != self.boundary_count() {
            return bad(format!(
                "{} cue-point flags for {} boundaries",
                self.cuepoint_flags.len(),
                self.boundary_count()
            ));
        }
        for (i, s) in self.shots.iter().enumerate() {
            if !(s.end_time > s.start_time) {
                return bad(format!("shot {i} has non-positive duration"));
            }
            if i > 0 && s.start_time != self.shots[i - 1].end_time {
                return bad(format!("shot {i} does not start where shot {} ends", i - 1));
            }
        }
        // Each scene id must occupy one contiguous run.
        let mut seen = std::collections::BTreeSet::new();
        for (i, &id) in self.scene_ids.iter().enumerate() {
            if (i == 0 || self.scene_ids[i - 1] != id) && !seen.insert(id) {
                return bad(format!("scene {id} reappears at shot {i}"));
            }
        }
        let scene_b = self.scene_boundaries();
        if let Some(b) = (0..self.boundary_count()).find(|&b| self.cuepoint_flags[b] && !scene_b[b]) {
            return bad(format!("cue-point at boundary {b} is not a scene boundary"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    /// Generator settings, when the corpus is synthetic.
    pub generator: Option<GeneratorConfig>,
    pub dims: TensorDims,
    pub modality2_dim: Option<usize>,
    pub titles: Vec<Title>,
}

impl Corpus {
    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        let mut ids = std::collections::BTreeSet::new();
        for t in &self.titles {
            if !ids.insert(t.title_id.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate title id {}", t.title_id)));
            }
            t.validate()?;
            for (i, s) in t.shots.iter().enumerate() {
                if s.tensor.dims() != self.dims {
                    return Err(Error::InvalidArgument(format!(
                        "title {} shot {i}: tensor dims {:?} differ from corpus {:?}",
                        t.title_id,
                        s.tensor.dims(),
                        self.dims
                    )));
                }
                if s.modality2.as_ref().map(Vec::len) != self.modality2_dim {
                    return Err(Error::InvalidArgument(format!(
                        "title {} shot {i}: second-modality length differs from corpus",
                        t.title_id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn title(&self, id: &str) -> Option<&Title> {
        self.titles.iter().find(|t| t.title_id == id)
    }

    pub fn shot_count(&self) -> usize {
        self.titles.iter().map(Title::len).sum()
    }

    pub fn title_ids(&self) -> Vec<String> {
        self.titles.iter().map(|t| t.title_id.clone()).collect()
    }

    /// Sub-corpus with the listed titles, in the given order.
    pub fn subset(&self, ids: &[String]) -> Result<Corpus> {
        let titles = ids
            .iter()
            .map(|id| {
                self.title(id)
                    .cloned()
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown title {id}")))
            })
            .collect::<Result<_>>()?;
        Ok(Corpus {
            generator: self.generator.clone(),
            dims: self.dims,
            modality2_dim: self.modality2_dim,
            titles,
        })
    }
}
