use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::Title;
use crate::error::{Error, Result};
use crate::numkernel::{ParamSet, Tensor};
use crate::pretrain::ShotEncoder;

/// Per-shot embeddings of a title from a frozen encoder.
pub fn extract_title_embeddings(
    encoder: &ShotEncoder,
    params: &ParamSet<f32>,
    title: &Title,
    normalize: bool,
) -> Result<Tensor<f32>> {
    encoder.embed_title(params, title, normalize)
}

/// Row-wise concatenation `first ‖ second`.
pub fn fuse_modalities(first: &Tensor<f32>, second: Option<&Tensor<f32>>) -> Result<Tensor<f32>> {
    let second =
        second.ok_or_else(|| Error::InvalidArgument("fusion requested but the second modality is missing".into()))?;
    if first.rank() != 2 || second.rank() != 2 || first.rows() != second.rows() {
        return Err(Error::shape("fused modalities", first.shape(), second.shape()));
    }
    let width = first.last_dim() + second.last_dim();
    let mut data = Vec::with_capacity(first.rows() * width);
    for (a, b) in first.iter_rows().zip(second.iter_rows()) {
        data.extend_from_slice(a);
        data.extend_from_slice(b);
    }
    Tensor::new(vec![first.rows(), width], data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SampleMode {
    /// Every shot boundary, labelled by scene change.
    AllBoundaries,
    /// Cue-points as positives plus the boundaries within `radius` of each.
    WindowedNegatives { radius: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySample {
    pub title_id: String,
    /// Boundary between shots `boundary_index` and `boundary_index + 1`.
    pub boundary_index: usize,
    pub boundary_time: f64,
    pub label: bool,
    /// `2 * context` shot embeddings, left to right.
    pub feature: Vec<f32>,
}

/// Samples for one title. `embeddings` has one row per shot.
///
/// Boundary `b` takes shots `b + 1 - context ..= b + context`; positions past
/// either end of the title repeat the terminal shot.
pub fn build_boundary_samples(
    title: &Title,
    embeddings: &Tensor<f32>,
    context: usize,
    mode: SampleMode,
) -> Result<Vec<BoundarySample>> {
    if context == 0 {
        return Err(Error::InvalidArgument("context must be at least 1".into()));
    }
    let shots = title.len();
    if shots < 2 {
        return Err(Error::InvalidArgument(format!("title {} has fewer than 2 shots", title.title_id)));
    }
    if embeddings.rank() != 2 || embeddings.rows() != shots {
        return Err(Error::shape(
            "title embeddings",
            &[shots, embeddings.last_dim()],
            embeddings.shape(),
        ));
    }
    let (indices, labels): (Vec<usize>, Vec<bool>) = match mode {
        SampleMode::AllBoundaries => title.scene_boundaries().into_iter().enumerate().unzip(),
        SampleMode::WindowedNegatives { radius } => {
            let positives: BTreeSet<usize> = title
                .cuepoint_flags
                .iter()
                .enumerate()
                .filter(|(_, &f)| f)
                .map(|(b, _)| b)
                .collect();
            let mut chosen = positives.clone();
            for &p in &positives {
                let lo = p.saturating_sub(radius);
                let hi = (p + radius).min(shots - 2);
                chosen.extend(lo..=hi);
            }
            chosen.into_iter().map(|b| (b, positives.contains(&b))).unzip()
        }
    };
    let width = embeddings.last_dim();
    Ok(indices
        .into_iter()
        .zip(labels)
        .map(|(b, label)| {
            let mut feature = Vec::with_capacity(2 * context * width);
            for pos in (b + 1) as isize - context as isize..=(b + context) as isize {
                let shot = pos.clamp(0, shots as isize - 1) as usize;
                feature.extend_from_slice(embeddings.row(shot));
            }
            BoundarySample {
                title_id: title.title_id.clone(),
                boundary_index: b,
                boundary_time: title.boundary_time(b),
                label,
                feature,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Shot, ShotTensor};

    fn title(scenes: &[u32], flags: &[bool]) -> Title {
        let shots = (0..scenes.len())
            .map(|i| Shot {
                tensor: ShotTensor::from_frames(1, 1, 1, &[[0.5f32]]).unwrap(),
                start_time: i as f64 * 2.0,
                end_time: (i + 1) as f64 * 2.0,
                modality2: None,
            })
            .collect();
        Title {
            title_id: "t".into(),
            shots,
            scene_ids: scenes.to_vec(),
            cuepoint_flags: flags.to_vec(),
        }
    }

    /// Shot `i` embeds as `[i, 10 i]`.
    fn ramp(n: usize) -> Tensor<f32> {
        Tensor::new(vec![n, 2], (0..n).flat_map(|i| [i as f32, 10.0 * i as f32]).collect()).unwrap()
    }

    #[test]
    fn all_boundaries_count_and_labels() {
        let t = title(&[0, 0, 1, 1, 2], &[false; 4]);
        let s = build_boundary_samples(&t, &ramp(5), 1, SampleMode::AllBoundaries).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.iter().map(|x| x.label).collect::<Vec<_>>(), vec![false, true, false, true]);
        assert_eq!(s[1].boundary_time, 4.0);
    }

    #[test]
    fn context_two_window() {
        let t = title(&[0; 8], &[false; 7]);
        let s = build_boundary_samples(&t, &ramp(8), 2, SampleMode::AllBoundaries).unwrap();
        let b = &s[4];
        assert_eq!(b.feature, vec![3.0, 30.0, 4.0, 40.0, 5.0, 50.0, 6.0, 60.0]);
        assert_eq!(s[0].feature, vec![0.0, 0.0, 0.0, 0.0, 1.0, 10.0, 2.0, 20.0]);
        assert_eq!(s[6].feature, vec![5.0, 50.0, 6.0, 60.0, 7.0, 70.0, 7.0, 70.0]);
    }

    #[test]
    fn windowed_negatives() {
        let mut flags = vec![false; 19];
        flags[10] = true;
        let scenes: Vec<u32> = (0..20).map(|i| u32::from(i > 10)).collect();
        let t = title(&scenes, &flags);
        let s = build_boundary_samples(&t, &ramp(20), 1, SampleMode::WindowedNegatives { radius: 2 }).unwrap();
        let got: Vec<(usize, bool)> = s.iter().map(|x| (x.boundary_index, x.label)).collect();
        assert_eq!(got, vec![(8, false), (9, false), (10, true), (11, false), (12, false)]);
    }

    #[test]
    fn windows_clip_and_dedupe() {
        let mut flags = vec![false; 5];
        flags[0] = true;
        flags[2] = true;
        let t = title(&[0, 1, 1, 2, 2, 2], &flags);
        let s = build_boundary_samples(&t, &ramp(6), 1, SampleMode::WindowedNegatives { radius: 2 }).unwrap();
        let got: Vec<(usize, bool)> = s.iter().map(|x| (x.boundary_index, x.label)).collect();
        assert_eq!(got, vec![(0, true), (1, false), (2, true), (3, false), (4, false)]);
    }

    #[test]
    fn rejects_short_titles_and_bad_shapes() {
        let t = title(&[0], &[]);
        assert!(build_boundary_samples(&t, &ramp(1), 1, SampleMode::AllBoundaries).is_err());
        let t = title(&[0, 0, 0], &[false; 2]);
        assert!(build_boundary_samples(&t, &ramp(4), 1, SampleMode::AllBoundaries).is_err());
        assert!(build_boundary_samples(&t, &ramp(3), 0, SampleMode::AllBoundaries).is_err());
    }

    #[test]
    fn fusion_concatenates() {
        let a = Tensor::filled(&[3, 64], 1.0f32);
        let b = Tensor::filled(&[3, 32], 2.0f32);
        let f = fuse_modalities(&a, Some(&b)).unwrap();
        assert_eq!(f.shape(), &[3, 96]);
        assert_eq!(f.row(1)[63], 1.0);
        assert_eq!(f.row(1)[64], 2.0);
        assert!(fuse_modalities(&a, None).is_err());
        assert!(fuse_modalities(&a, Some(&Tensor::filled(&[2, 32], 0.0f32))).is_err());
    }
}
