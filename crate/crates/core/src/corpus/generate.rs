//! Seeded synthetic corpus generator.
//!
//! Every scene draws a latent vector; each shot jitters its scene latent by
//! `sigma_within` and adds an independent nuisance latent (camera, lighting)
//! with scale `nuisance_gain * sigma_within` that no other shot shares. A
//! fixed seeded projection followed by a sigmoid renders the two latents
//! into pixels, and source frames add per-pixel noise before
//! keyframes are sampled. Nearby shots of one scene are therefore more alike
//! than random shots, while raw pixel distances are dominated by nuisance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::corpus::shot::{sample_keyframes, Shot, ShotTensor, TensorDims};
use crate::corpus::{Corpus, Title};
use crate::error::{Error, Result};

/// Inclusive range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range<T> {
    pub min: T,
    pub max: T,
}

impl<T: PartialOrd + Copy + std::fmt::Debug> Range<T> {
    pub const fn new(min: T, max: T) -> Self {
        Self { min, max }
    }

    fn check(&self, name: &str) -> Result<()> {
        if self.min > self.max {
            return Err(Error::Config(format!(
                "{name}: min {:?} exceeds max {:?}",
                self.min, self.max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub titles: usize,
    pub scenes_per_title: Range<usize>,
    pub shots_per_scene: Range<usize>,
    pub shot_duration_s: Range<f64>,
    pub tensor: TensorDims,
    /// Source frame rate before keyframe sampling.
    pub source_fps: f64,
    pub latent_dim: usize,
    pub nuisance_dim: usize,
    /// Nuisance latent scale relative to `sigma_within`.
    pub nuisance_gain: f64,
    pub sigma_within: f64,
    pub sigma_frame: f64,
    pub flashback_prob: f64,
    /// Scene-latent distance above which a scene boundary may be a cue-point.
    pub cuepoint_threshold: f64,
    pub cuepoint_min_gap_s: f64,
    /// Length of the second-modality feature vector; 0 disables it.
    pub modality2_dim: usize,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            titles: 20,
            scenes_per_title: Range::new(36, 44),
            shots_per_scene: Range::new(4, 12),
            shot_duration_s: Range::new(2.0, 8.0),
            tensor: TensorDims {
                width: 16,
                height: 16,
                channels: 3,
                keyframes: 3,
            },
            source_fps: 1.0,
            latent_dim: 16,
            nuisance_dim: 16,
            nuisance_gain: 5.0,
            sigma_within: 0.3,
            sigma_frame: 0.1,
            flashback_prob: 0.05,
            cuepoint_threshold: 6.0,
            cuepoint_min_gap_s: 120.0,
            modality2_dim: 32,
            seed: 1,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        self.scenes_per_title.check("scenes_per_title")?;
        self.shots_per_scene.check("shots_per_scene")?;
        self.shot_duration_s.check("shot_duration_s")?;
        self.tensor.validate()?;
        let cfg = |m: String| Err(Error::Config(m));
        if self.titles == 0 {
            return cfg("titles must be at least 1".into());
        }
        if self.scenes_per_title.min == 0 || self.shots_per_scene.min == 0 {
            return cfg("scene and shot counts must be at least 1".into());
        }
        if !(self.shot_duration_s.min > 0.0) {
            return cfg("shot durations must be positive".into());
        }
        if !(self.source_fps > 0.0) {
            return cfg("source_fps must be positive".into());
        }
        if self.latent_dim == 0 {
            return cfg("latent_dim must be at least 1".into());
        }
        // Scene latents are unit normal, so shots of two scenes sit about
        // sqrt(2 * latent_dim) apart against sigma_within * sqrt(2 * latent_dim)
        // within one scene.
        if !(0.0..1.0).contains(&self.sigma_within) {
            return cfg(format!("sigma_within {} must lie in [0, 1)", self.sigma_within));
        }
        for (name, v) in [
            ("sigma_frame", self.sigma_frame),
            ("nuisance_gain", self.nuisance_gain),
            ("cuepoint_min_gap_s", self.cuepoint_min_gap_s),
            ("cuepoint_threshold", self.cuepoint_threshold),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return cfg(format!("{name} must be finite and non-negative"));
            }
        }
        if !(0.0..=1.0).contains(&self.flashback_prob) {
            return cfg(format!("flashback_prob {} outside [0, 1]", self.flashback_prob));
        }
        Ok(())
    }
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Fixed projections shared by all titles of a corpus.
struct Renderer {
    frame_len: usize,
    latent_dim: usize,
    nuisance_dim: usize,
    /// `[frame_len, latent_dim + nuisance_dim]` row-major, pre-scaled.
    pixels: Vec<f64>,
    m2_dim: usize,
    /// `[m2_dim, latent_dim + nuisance_dim]`.
    m2: Vec<f64>,
}

impl Renderer {
    fn new(cfg: &GeneratorConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f1a_7e47_u64);
        let cols = cfg.latent_dim + cfg.nuisance_dim;
        let scale = 1.0 / (cols as f64).sqrt();
        let frame_len = cfg.tensor.frame_len();
        Self {
            frame_len,
            latent_dim: cfg.latent_dim,
            nuisance_dim: cfg.nuisance_dim,
            pixels: normal_vec(&mut rng, frame_len * cols, scale),
            m2_dim: cfg.modality2_dim,
            m2: normal_vec(&mut rng, cfg.modality2_dim * cols, scale),
        }
    }

    fn project(matrix: &[f64], rows: usize, latent: &[f64]) -> Vec<f64> {
        let cols = latent.len();
        (0..rows)
            .map(|r| {
                matrix[r * cols..(r + 1) * cols]
                    .iter()
                    .zip(latent)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    fn frame_base(&self, latent: &[f64]) -> Vec<f64> {
        debug_assert_eq!(latent.len(), self.latent_dim + self.nuisance_dim);
        Self::project(&self.pixels, self.frame_len, latent)
    }

    fn modality2(&self, latent: &[f64]) -> Vec<f32> {
        Self::project(&self.m2, self.m2_dim, latent)
            .into_iter()
            .map(|v| v.tanh() as f32)
            .collect()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn generate_title(cfg: &GeneratorConfig, renderer: &Renderer, index: usize) -> Result<Title> {
    let mut rng = ChaCha8Rng::seed_from_u64(crate::rng::derive_seed(cfg.seed, index as u64));
    let n_scenes = rng.gen_range(cfg.scenes_per_title.min..=cfg.scenes_per_title.max);
    let scene_latents: Vec<Vec<f64>> = (0..n_scenes)
        .map(|_| normal_vec(&mut rng, cfg.latent_dim, 1.0))
        .collect();

    let sigma_nuisance = cfg.nuisance_gain * cfg.sigma_within;
    let mut shots = Vec::new();
    let mut scene_ids = Vec::new();
    let mut scene_starts = Vec::with_capacity(n_scenes);
    let mut t = 0.0f64;
    for (s, scene_latent) in scene_latents.iter().enumerate() {
        scene_starts.push(shots.len());
        let n_shots = rng.gen_range(cfg.shots_per_scene.min..=cfg.shots_per_scene.max);
        for _ in 0..n_shots {
            let source = if s > 0 && rng.gen::<f64>() < cfg.flashback_prob {
                &scene_latents[rng.gen_range(0..s)]
            } else {
                scene_latent
            };
            let mut latent: Vec<f64> = source
                .iter()
                .map(|z| z + cfg.sigma_within * rng.sample::<f64, _>(StandardNormal))
                .collect();
            latent.extend(normal_vec(&mut rng, cfg.nuisance_dim, sigma_nuisance));

            let duration = if cfg.shot_duration_s.min == cfg.shot_duration_s.max {
                cfg.shot_duration_s.min
            } else {
                rng.gen_range(cfg.shot_duration_s.min..cfg.shot_duration_s.max)
            };
            let n_frames = ((duration * cfg.source_fps).round() as usize).max(1);
            let base = renderer.frame_base(&latent);
            let frames: Vec<Vec<f32>> = (0..n_frames)
                .map(|_| {
                    base.iter()
                        .map(|&b| {
                            let noise = cfg.sigma_frame * rng.sample::<f64, _>(StandardNormal);
                            sigmoid(b + noise) as f32
                        })
                        .collect()
                })
                .collect();
            let keyframes = sample_keyframes(&frames, cfg.tensor.keyframes)?;
            let d = cfg.tensor;
            let tensor = ShotTensor::from_frames(d.width, d.height, d.channels, &keyframes)?;
            let modality2 = (cfg.modality2_dim > 0).then(|| {
                let mut m2_latent = source.clone();
                m2_latent.extend(normal_vec(&mut rng, cfg.nuisance_dim, sigma_nuisance));
                renderer.modality2(&m2_latent)
            });
            shots.push(Shot {
                tensor,
                start_time: t,
                end_time: t + duration,
                modality2,
            });
            scene_ids.push(s as u32);
            t += duration;
        }
    }

    let mut cuepoint_flags = vec![false; shots.len() - 1];
    let mut last_flagged: Option<f64> = None;
    for s in 1..n_scenes {
        let b = scene_starts[s] - 1;
        let dist: f64 = scene_latents[s]
            .iter()
            .zip(&scene_latents[s - 1])
            .map(|(a, c)| (a - c).powi(2))
            .sum::<f64>()
            .sqrt();
        let time = shots[b].end_time;
        let spaced = last_flagged.is_none_or(|lt| time - lt >= cfg.cuepoint_min_gap_s);
        if dist > cfg.cuepoint_threshold && spaced {
            cuepoint_flags[b] = true;
            last_flagged = Some(time);
        }
    }

    Ok(Title {
        title_id: format!("title-{index:05}"),
        shots,
        scene_ids,
        cuepoint_flags,
    })
}

/// Generates a corpus; identical configs yield identical corpora.
pub fn generate_corpus(cfg: &GeneratorConfig) -> Result<Corpus> {
    cfg.validate()?;
    let renderer = Renderer::new(cfg);
    let titles = (0..cfg.titles)
        .map(|i| generate_title(cfg, &renderer, i))
        .collect::<Result<Vec<_>>>()?;
    let corpus = Corpus {
        generator: Some(cfg.clone()),
        dims: cfg.tensor,
        modality2_dim: (cfg.modality2_dim > 0).then_some(cfg.modality2_dim),
        titles,
    };
    debug_assert!(corpus.validate().is_ok());
    Ok(corpus)
}
