use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::Tensor;
use crate::scalar::{dot, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnPrecision {
    pub k: usize,
    pub precision: f64,
    pub queries: usize,
    /// Titles with at most `k` shots, excluded from the mean.
    pub skipped_titles: usize,
}

/// Mean over query shots of the same-scene fraction among the `k` most
/// cosine-similar other shots of the same title. Ties go to the lower shot
/// index. Zero vectors have similarity 0 to everything.
pub fn knn_retrieval_precision<T: Scalar>(titles: &[(&Tensor<T>, &[u32])], k: usize) -> Result<KnnPrecision> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    let mut total = 0.0;
    let mut queries = 0usize;
    let mut skipped_titles = 0usize;
    for &(emb, scenes) in titles {
        if emb.rank() != 2 || emb.rows() != scenes.len() {
            return Err(Error::shape("title embeddings", &[scenes.len(), emb.last_dim()], emb.shape()));
        }
        let n = scenes.len();
        if n < k + 1 {
            skipped_titles += 1;
            continue;
        }
        let norms: Vec<f64> = emb.iter_rows().map(|r| dot(r, r).sqrt()).collect();
        let mut sims: Vec<(f64, usize)> = Vec::with_capacity(n);
        for q in 0..n {
            sims.clear();
            for j in (0..n).filter(|&j| j != q) {
                let denom = norms[q] * norms[j];
                let s = if denom > 0.0 {
                    dot(emb.row(q), emb.row(j)) / denom
                } else {
                    0.0
                };
                sims.push((s, j));
            }
            let cmp = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
            sims.select_nth_unstable_by(k - 1, cmp);
            let hits = sims[..k].iter().filter(|&&(_, j)| scenes[j] == scenes[q]).count();
            total += hits as f64 / k as f64;
            queries += 1;
        }
    }
    Ok(KnnPrecision {
        k,
        precision: if queries == 0 { 0.0 } else { total / queries as f64 },
        queries,
        skipped_titles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separated_scenes_are_perfect() {
        let scenes = [0u32, 0, 0, 1, 1, 1, 2, 2, 2];
        let rows: Vec<Vec<f32>> = scenes
            .iter()
            .map(|&s| {
                let mut v = vec![0.0; 3];
                v[s as usize] = 1.0;
                v
            })
            .collect();
        let e = Tensor::from_rows(&rows).unwrap();
        let r = knn_retrieval_precision(&[(&e, &scenes[..])], 2).unwrap();
        assert_eq!(r.precision, 1.0);
        assert_eq!(r.queries, 9);
    }

    #[test]
    fn identical_embeddings_follow_index_order() {
        // every candidate ties, so the k lowest other indices are retrieved
        let scenes = [0u32, 0, 1, 1];
        let e = Tensor::filled(&[4, 2], 1.0f32);
        let r = knn_retrieval_precision(&[(&e, &scenes[..])], 1).unwrap();
        // queries 0..3 retrieve 1, 0, 0, 0
        assert_eq!(r.precision, 0.5);
    }

    #[test]
    fn short_titles_skipped() {
        let e = Tensor::filled(&[2, 2], 1.0f32);
        let r = knn_retrieval_precision(&[(&e, &[0u32, 0][..])], 2).unwrap();
        assert_eq!((r.queries, r.skipped_titles), (0, 1));
        assert!(knn_retrieval_precision(&[(&e, &[0u32, 0][..])], 0).is_err());
    }

    #[test]
    fn common_rescaling_invariant() {
        let scenes = [0u32, 0, 1, 1, 2, 0];
        let data: Vec<f32> = (0..18).map(|i| ((i * 7 % 11) as f32 - 5.0) / 3.0).collect();
        let e = Tensor::new(vec![6, 3], data.clone()).unwrap();
        let scaled = Tensor::new(vec![6, 3], data.iter().map(|x| x * 4.5).collect()).unwrap();
        let a = knn_retrieval_precision(&[(&e, &scenes[..])], 2).unwrap();
        let b = knn_retrieval_precision(&[(&scaled, &scenes[..])], 2).unwrap();
        assert_eq!(a, b);
    }
}
