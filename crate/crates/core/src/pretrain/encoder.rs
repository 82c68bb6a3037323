use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Shot, Title};
use crate::error::{Error, Result};
use crate::numkernel::{forward, l2_normalize, MlpSpec, ParamSet, Tensor};

/// Which per-shot signal an encoder reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Modality {
    /// Channel-stacked keyframes.
    Visual,
    /// The corpus's second feature modality.
    Audio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderConfig {
    pub modality: Modality,
    pub hidden_widths: Vec<usize>,
    pub embedding_dim: usize,
    /// Dropout after each hidden layer during training.
    pub dropout: f64,
    /// Visual inputs are standardized as `(pixel - mean) / std`.
    pub pixel_mean: f64,
    pub pixel_std: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            modality: Modality::Visual,
            hidden_widths: vec![128],
            embedding_dim: 64,
            dropout: 0.0,
            pixel_mean: 0.5,
            pixel_std: 0.25,
        }
    }
}

/// Encoder input preparation plus network shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotEncoder {
    pub config: EncoderConfig,
    pub network: MlpSpec,
}

/// Rows per forward pass when embedding many shots.
const EMBED_CHUNK: usize = 256;

impl ShotEncoder {
    pub fn for_corpus(config: &EncoderConfig, corpus: &Corpus) -> Result<Self> {
        let input_width = match config.modality {
            Modality::Visual => corpus.dims.flat_width(),
            Modality::Audio => corpus.modality2_dim.ok_or_else(|| {
                Error::Config("audio encoder requested but the corpus has no second modality".into())
            })?,
        };
        Self::with_input_width(config, input_width)
    }

    pub fn with_input_width(config: &EncoderConfig, input_width: usize) -> Result<Self> {
        if !(config.pixel_std > 0.0) {
            return Err(Error::Config("pixel_std must be positive".into()));
        }
        let mut widths = vec![input_width];
        widths.extend(&config.hidden_widths);
        widths.push(config.embedding_dim);
        let network = MlpSpec::new(widths, vec![config.dropout; config.hidden_widths.len()])?;
        Ok(Self {
            config: config.clone(),
            network,
        })
    }

    pub fn embedding_dim(&self) -> usize {
        self.network.output_width()
    }

    /// Appends one shot's encoder input to `out`.
    pub fn push_input(&self, shot: &Shot, out: &mut Vec<f32>) -> Result<()> {
        let start = out.len();
        match self.config.modality {
            Modality::Visual => {
                let (mean, std) = (self.config.pixel_mean, self.config.pixel_std);
                out.extend(
                    shot.flat_input()
                        .into_iter()
                        .map(|p| ((p as f64 - mean) / std) as f32),
                );
            }
            Modality::Audio => {
                let v = shot
                    .modality2
                    .as_ref()
                    .ok_or_else(|| Error::InvalidArgument("shot has no second-modality features".into()))?;
                out.extend_from_slice(v);
            }
        }
        let width = out.len() - start;
        if width != self.network.input_width() {
            out.truncate(start);
            return Err(Error::shape("encoder input", &[self.network.input_width()], &[width]));
        }
        Ok(())
    }

    /// `[shots, input_width]` matrix of encoder inputs.
    pub fn inputs<'s>(&self, shots: impl IntoIterator<Item = &'s Shot>) -> Result<Tensor<f32>> {
        let mut data = Vec::new();
        let mut n = 0;
        for s in shots {
            self.push_input(s, &mut data)?;
            n += 1;
        }
        Tensor::new(vec![n, self.network.input_width()], data)
    }

    /// Eval-mode embeddings of prepared inputs, optionally unit-normalized.
    pub fn embed_inputs(&self, params: &ParamSet<f32>, inputs: &Tensor<f32>, normalize: bool) -> Result<Tensor<f32>> {
        let (out, _) = forward(&self.network, params, inputs, false, 0)?;
        if normalize {
            l2_normalize(&out)
        } else {
            Ok(out)
        }
    }

    /// `[shots, D]` embeddings of every shot of a title; `params` are read only.
    pub fn embed_title(&self, params: &ParamSet<f32>, title: &Title, normalize: bool) -> Result<Tensor<f32>> {
        let d = self.embedding_dim();
        let mut data = Vec::with_capacity(title.len() * d);
        for chunk in title.shots.chunks(EMBED_CHUNK) {
            let x = self.inputs(chunk)?;
            data.extend_from_slice(self.embed_inputs(params, &x, normalize)?.data());
        }
        Tensor::new(vec![title.len(), d], data)
    }
}

/// Embeds one shot: channel-stack, flatten, encode, optionally normalize.
pub fn embed_shot(encoder: &ShotEncoder, params: &ParamSet<f32>, shot: &Shot, normalize: bool) -> Result<Vec<f32>> {
    let x = encoder.inputs(std::iter::once(shot))?;
    Ok(encoder.embed_inputs(params, &x, normalize)?.into_data())
}
