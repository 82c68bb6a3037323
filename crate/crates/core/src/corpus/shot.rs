use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::Tensor;

/// Frame geometry shared by every shot of a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorDims {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub keyframes: usize,
}

impl TensorDims {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.channels == 0 || self.keyframes == 0 {
            return Err(Error::Config(format!("tensor dimensions must be positive: {self:?}")));
        }
        Ok(())
    }

    /// Values in one `(w, h, c)` frame.
    pub fn frame_len(&self) -> usize {
        self.width * self.height * self.channels
    }

    /// Values in the whole `(w, h, c, k)` stack.
    pub fn len(&self) -> usize {
        self.frame_len() * self.keyframes
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Width of the flattened channel-stacked view fed to encoders.
    pub fn flat_width(&self) -> usize {
        self.len()
    }
}

/// `k` keyframes of `w x h x c` pixels in `[0, 1]`, stored row-major in
/// `(w, h, c, k)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotTensor {
    dims: TensorDims,
    data: Vec<f32>,
}

impl ShotTensor {
    pub fn new(dims: TensorDims, data: Vec<f32>) -> Result<Self> {
        dims.validate()?;
        if data.len() != dims.len() {
            return Err(Error::shape(
                "shot tensor",
                &[dims.width, dims.height, dims.channels, dims.keyframes],
                &[data.len()],
            ));
        }
        if let Some(index) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument(format!(
                "pixel {index} = {} outside [0, 1]",
                data[index]
            )));
        }
        Ok(Self { dims, data })
    }

    /// Stacks `(w, h, c)` row-major frames into the 4D layout.
    pub fn from_frames<F: AsRef<[f32]>>(width: usize, height: usize, channels: usize, frames: &[F]) -> Result<Self> {
        let dims = TensorDims {
            width,
            height,
            channels,
            keyframes: frames.len(),
        };
        dims.validate()?;
        let frame_len = dims.frame_len();
        if let Some(f) = frames.iter().find(|f| f.as_ref().len() != frame_len) {
            return Err(Error::shape("frame", &[width, height, channels], &[f.as_ref().len()]));
        }
        let k = frames.len();
        let mut data = vec![0.0f32; dims.len()];
        for (f, frame) in frames.iter().enumerate() {
            for (p, &v) in frame.as_ref().iter().enumerate() {
                data[p * k + f] = v;
            }
        }
        Self::new(dims, data)
    }

    pub fn dims(&self) -> TensorDims {
        self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Frame `f` as a `(w, h, c)` row-major buffer.
    pub fn frame(&self, f: usize) -> Vec<f32> {
        let k = self.dims.keyframes;
        (0..self.dims.frame_len()).map(|p| self.data[p * k + f]).collect()
    }
}

/// Combines the channel and keyframe axes: `(w, h, c, k)` becomes
/// `(w, h, c*k)` where output channel `f*c + ch` holds frame `f`, channel `ch`.
pub fn reshape_shot(t: &ShotTensor) -> Tensor<f32> {
    let d = t.dims;
    let (c, k) = (d.channels, d.keyframes);
    let mut out = vec![0.0f32; d.len()];
    for pix in 0..d.width * d.height {
        let src = &t.data[pix * c * k..(pix + 1) * c * k];
        let dst = &mut out[pix * c * k..(pix + 1) * c * k];
        for ch in 0..c {
            for f in 0..k {
                dst[f * c + ch] = src[ch * k + f];
            }
        }
    }
    Tensor::from_parts_unchecked(vec![d.width, d.height, c * k], out)
}

/// Inverse of [`reshape_shot`].
pub fn unreshape_shot(t: &Tensor<f32>, channels: usize, keyframes: usize) -> Result<ShotTensor> {
    let s = t.shape();
    if s.len() != 3 || s[2] != channels * keyframes {
        return Err(Error::shape("channel-stacked shot", &[0, 0, channels * keyframes], s));
    }
    let (c, k) = (channels, keyframes);
    let mut data = vec![0.0f32; t.len()];
    for pix in 0..s[0] * s[1] {
        let src = &t.data()[pix * c * k..(pix + 1) * c * k];
        let dst = &mut data[pix * c * k..(pix + 1) * c * k];
        for ch in 0..c {
            for f in 0..k {
                dst[ch * k + f] = src[f * c + ch];
            }
        }
    }
    ShotTensor::new(
        TensorDims {
            width: s[0],
            height: s[1],
            channels,
            keyframes,
        },
        data,
    )
}

/// Uniformly spaced indices `floor((i + 0.5) * n / k)`; with fewer than `k`
/// source frames the later indices repeat.
pub fn keyframe_indices(n: usize, k: usize) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::InvalidArgument("cannot sample keyframes from an empty shot".into()));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("keyframe count must be at least 1".into()));
    }
    Ok((0..k).map(|i| ((2 * i + 1) * n / (2 * k)).min(n - 1)).collect())
}

pub fn sample_keyframes<F: Clone>(frames: &[F], k: usize) -> Result<Vec<F>> {
    Ok(keyframe_indices(frames.len(), k)?
        .into_iter()
        .map(|i| frames[i].clone())
        .collect())
}

/// A shot: keyframe stack, time span and optional second-modality features.
#[derive(Debug, Clone, PartialEq)]
pub struct Shot {
    pub tensor: ShotTensor,
    pub start_time: f64,
    pub end_time: f64,
    pub modality2: Option<Vec<f32>>,
}

impl Shot {
    pub fn duration(&self) -> f64 {
        self.end_time - self.start_time
    }

    /// Channel-stacked view flattened to encoder input order.
    pub fn flat_input(&self) -> Vec<f32> {
        reshape_shot(&self.tensor).into_data()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn single_keyframe_reshape_is_identity() {
        let dims = TensorDims {
            width: 2,
            height: 2,
            channels: 3,
            keyframes: 1,
        };
        let data: Vec<f32> = (0..12).map(|i| i as f32 / 12.0).collect();
        let t = ShotTensor::new(dims, data.clone()).unwrap();
        let r = reshape_shot(&t);
        assert_eq!(r.shape(), &[2, 2, 3]);
        assert_eq!(r.data(), data.as_slice());
    }

    #[test]
    fn channel_layout_is_frame_major() {
        let (a0, a1, b0, b1) = (0.1f32, 0.2, 0.3, 0.4);
        let t = ShotTensor::from_frames(1, 1, 2, &[vec![a0, a1], vec![b0, b1]]).unwrap();
        // 4D storage interleaves keyframes innermost.
        assert_eq!(t.data(), &[a0, b0, a1, b1]);
        assert_eq!(reshape_shot(&t).data(), &[a0, a1, b0, b1]);
        assert_eq!(t.frame(1), vec![b0, b1]);
    }

    #[test]
    fn reshape_round_trip_random() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let dims = TensorDims {
                width: rng.gen_range(1..5),
                height: rng.gen_range(1..5),
                channels: rng.gen_range(1..4),
                keyframes: rng.gen_range(1..4),
            };
            let data: Vec<f32> = (0..dims.len()).map(|_| rng.gen()).collect();
            let t = ShotTensor::new(dims, data).unwrap();
            let r = reshape_shot(&t);
            assert_eq!(r.shape()[2], dims.channels * dims.keyframes);
            let mut a = t.data().to_vec();
            let mut b = r.data().to_vec();
            a.sort_by(f32::total_cmp);
            b.sort_by(f32::total_cmp);
            assert_eq!(a, b);
            assert_eq!(unreshape_shot(&r, dims.channels, dims.keyframes).unwrap(), t);
        }
    }

    #[test]
    fn keyframe_spacing() {
        assert_eq!(keyframe_indices(3, 3).unwrap(), vec![0, 1, 2]);
        assert_eq!(keyframe_indices(9, 3).unwrap(), vec![1, 4, 7]);
        assert_eq!(keyframe_indices(1, 3).unwrap(), vec![0, 0, 0]);
        assert_eq!(keyframe_indices(2, 3).unwrap(), vec![0, 1, 1]);
        assert!(keyframe_indices(0, 3).is_err());
        assert_eq!(sample_keyframes(&['a', 'b', 'c', 'd'], 2).unwrap(), vec!['b', 'd']);
        assert!(sample_keyframes::<u8>(&[], 1).is_err());
    }

    #[test]
    fn pixel_range_enforced() {
        let dims = TensorDims {
            width: 1,
            height: 1,
            channels: 1,
            keyframes: 1,
        };
        assert!(ShotTensor::new(dims, vec![1.5]).is_err());
        assert!(ShotTensor::new(dims, vec![0.5, 0.5]).is_err());
    }
}
