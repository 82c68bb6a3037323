use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::Tensor;
use crate::scalar::{dot, Scalar};

/// Candidate neighbours of shot `t` in a title of `len` shots, ordered by
/// distance in time and then by index: `t-1, t+1, t-2, t+2, ...`, clamped to
/// the title.
pub fn neighborhood(len: usize, t: usize, m: usize) -> impl Iterator<Item = usize> {
    (1..=m).flat_map(move |d| {
        let left = t.checked_sub(d);
        let right = (t + d < len).then_some(t + d);
        left.into_iter().chain(right)
    })
}

/// Index of the neighbour within `m` shots of `t` whose embedding has the
/// largest dot product with shot `t`'s. Ties go to the nearer shot, then the
/// earlier one.
pub fn select_positive_key<T: Scalar>(embeddings: &Tensor<T>, t: usize, m: usize) -> Result<usize> {
    let len = embeddings.rows();
    if len < 2 {
        return Err(Error::InvalidArgument(
            "positive key selection needs a title with at least two shots".into(),
        ));
    }
    if t >= len {
        return Err(Error::InvalidArgument(format!("query index {t} outside title of {len} shots")));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("neighborhood half-width must be at least 1".into()));
    }
    let q = embeddings.row(t);
    let mut best: Option<(usize, f64)> = None;
    for j in neighborhood(len, t, m) {
        let s = dot(q, embeddings.row(j));
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((j, s));
        }
    }
    Ok(best.expect("title has a neighbour").0)
}

/// Selected positive key per shot, per title (indexed like the corpus).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositiveKeyMap {
    pub keys: Vec<Vec<usize>>,
}

impl PositiveKeyMap {
    /// Selects every shot's key from per-title embedding matrices.
    pub fn from_embeddings<T: Scalar>(titles: &[Tensor<T>], m: usize) -> Result<Self> {
        let keys = titles
            .iter()
            .map(|e| (0..e.rows()).map(|t| select_positive_key(e, t, m)).collect())
            .collect::<Result<_>>()?;
        Ok(Self { keys })
    }

    pub fn key(&self, title: usize, shot: usize) -> usize {
        self.keys[title][shot]
    }
}
