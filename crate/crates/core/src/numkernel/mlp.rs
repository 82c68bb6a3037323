//! Fully connected rectifier networks with inverted dropout.
//!
//! Weights are stored `[out, in]` row-major under the names `fc{i}.weight`
//! and `fc{i}.bias`. Hidden layers apply a rectifier followed by dropout;
//! the final layer is affine.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{ParamSet, Tensor};
use crate::scalar::{axpy_acc, dot, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSpec {
    /// Input width, hidden widths, output width.
    pub layer_widths: Vec<usize>,
    /// One rate per hidden layer, each in `[0, 1)`.
    pub dropout_rates: Vec<f64>,
}

impl MlpSpec {
    pub fn new(layer_widths: Vec<usize>, dropout_rates: Vec<f64>) -> Result<Self> {
        let spec = Self {
            layer_widths,
            dropout_rates,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Network without dropout.
    pub fn plain(layer_widths: Vec<usize>) -> Result<Self> {
        let hidden = layer_widths.len().saturating_sub(2);
        Self::new(layer_widths, vec![0.0; hidden])
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.len() < 2 {
            return Err(Error::Config("an MLP needs at least input and output widths".into()));
        }
        if self.layer_widths.contains(&0) {
            return Err(Error::Config(format!(
                "layer widths must be positive: {:?}",
                self.layer_widths
            )));
        }
        if self.dropout_rates.len() != self.hidden_layers() {
            return Err(Error::Config(format!(
                "{} dropout rates given for {} hidden layers",
                self.dropout_rates.len(),
                self.hidden_layers()
            )));
        }
        if let Some(r) = self
            .dropout_rates
            .iter()
            .find(|r| !(0.0..1.0).contains(*r))
        {
            return Err(Error::Config(format!("dropout rate {r} outside [0, 1)")));
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_widths.last().unwrap()
    }

    pub fn layers(&self) -> usize {
        self.layer_widths.len() - 1
    }

    pub fn hidden_layers(&self) -> usize {
        self.layer_widths.len().saturating_sub(2)
    }

    pub fn weight_name(layer: usize) -> String {
        format!("fc{layer}.weight")
    }

    pub fn bias_name(layer: usize) -> String {
        format!("fc{layer}.bias")
    }

    /// Uniform `±sqrt(6 / (fan_in + fan_out))` weights, zero biases.
    pub fn init_params<T: Scalar>(&self, seed: u64) -> ParamSet<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut entries = Vec::with_capacity(2 * self.layers());
        for l in 0..self.layers() {
            let (fan_in, fan_out) = (self.layer_widths[l], self.layer_widths[l + 1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let w: Vec<T> = (0..fan_in * fan_out)
                .map(|_| T::from_acc(rng.gen_range(-bound..bound)))
                .collect();
            entries.push((
                Self::weight_name(l),
                Tensor::from_parts_unchecked(vec![fan_out, fan_in], w),
            ));
            entries.push((Self::bias_name(l), Tensor::zeros(&[fan_out])));
        }
        ParamSet::new(entries).expect("generated names are unique")
    }

    /// Verifies `params` holds exactly the tensors this network expects.
    pub fn check_params<T: Scalar>(&self, params: &ParamSet<T>) -> Result<()> {
        if params.len() != 2 * self.layers() {
            return Err(Error::shape(
                "parameter count",
                &[2 * self.layers()],
                &[params.len()],
            ));
        }
        for l in 0..self.layers() {
            let (fan_in, fan_out) = (self.layer_widths[l], self.layer_widths[l + 1]);
            let (w, b) = (params.tensor(2 * l), params.tensor(2 * l + 1));
            if w.shape() != [fan_out, fan_in] {
                return Err(Error::shape(Self::weight_name(l), &[fan_out, fan_in], w.shape()));
            }
            if b.shape() != [fan_out] {
                return Err(Error::shape(Self::bias_name(l), &[fan_out], b.shape()));
            }
        }
        Ok(())
    }
}

/// Activation record from [`forward`], consumed by [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    spec: MlpSpec,
    fingerprint: u64,
    rows: usize,
    output_shape: Vec<usize>,
    input_shape: Vec<usize>,
    /// Input to each layer, `[rows, width]` flattened. Entry 0 is the network input.
    layer_inputs: Vec<Vec<T>>,
    /// Pre-activations of hidden layers.
    pre: Vec<Vec<T>>,
    /// Inverted-dropout scale per hidden unit (0 or 1/keep); empty when no dropout.
    masks: Vec<Vec<T>>,
}

impl<T: Scalar> ForwardCache<T> {
    /// Pre-activations of hidden layer `l`, `[rows, width]` flattened.
    pub fn pre_activations(&self, l: usize) -> &[T] {
        &self.pre[l]
    }

    pub fn hidden_layers(&self) -> usize {
        self.pre.len()
    }
}

/// Runs the network on `input` (`[in]` or `[.., in]`).
///
/// Dropout is applied only when `train_mode` is set; its masks are drawn
/// deterministically from `rng_seed`.
pub fn forward<T: Scalar>(
    spec: &MlpSpec,
    params: &ParamSet<T>,
    input: &Tensor<T>,
    train_mode: bool,
    rng_seed: u64,
) -> Result<(Tensor<T>, ForwardCache<T>)> {
    spec.validate()?;
    spec.check_params(params)?;
    if input.last_dim() != spec.input_width() {
        return Err(Error::shape(
            "network input (last axis)",
            &[spec.input_width()],
            &[input.last_dim()],
        ));
    }
    let rows = input.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut layer_inputs: Vec<Vec<T>> = vec![input.data().to_vec()];
    let mut pre = Vec::with_capacity(spec.hidden_layers());
    let mut masks = Vec::with_capacity(spec.hidden_layers());

    for l in 0..spec.layers() {
        let (fan_in, fan_out) = (spec.layer_widths[l], spec.layer_widths[l + 1]);
        let w = params.tensor(2 * l).data();
        let b = params.tensor(2 * l + 1).data();
        let a = layer_inputs.last().unwrap();
        let mut z = vec![T::zero(); rows * fan_out];
        for r in 0..rows {
            let x = &a[r * fan_in..(r + 1) * fan_in];
            let zr = &mut z[r * fan_out..(r + 1) * fan_out];
            for (o, zo) in zr.iter_mut().enumerate() {
                *zo = T::from_acc(b[o].to_acc() + dot(&w[o * fan_in..(o + 1) * fan_in], x));
            }
        }
        if l + 1 == spec.layers() {
            layer_inputs.push(z);
            break;
        }
        let rate = spec.dropout_rates[l];
        let mut h: Vec<T> = z.iter().map(|&v| v.max(T::zero())).collect();
        let mask = if train_mode && rate > 0.0 {
            let scale = T::from_acc(1.0 / (1.0 - rate));
            let m: Vec<T> = (0..h.len())
                .map(|_| {
                    if rng.gen::<f64>() < rate {
                        T::zero()
                    } else {
                        scale
                    }
                })
                .collect();
            for (hv, mv) in h.iter_mut().zip(&m) {
                *hv *= *mv;
            }
            m
        } else {
            Vec::new()
        };
        pre.push(z);
        masks.push(mask);
        layer_inputs.push(h);
    }

    let out = layer_inputs.pop().unwrap();
    let mut output_shape = input.shape().to_vec();
    *output_shape.last_mut().unwrap() = spec.output_width();
    let output = Tensor::new(output_shape.clone(), out)?;
    let cache = ForwardCache {
        spec: spec.clone(),
        fingerprint: params.fingerprint(),
        rows,
        output_shape,
        input_shape: input.shape().to_vec(),
        layer_inputs,
        pre,
        masks,
    };
    Ok((output, cache))
}

/// Gradients of a scalar objective with respect to parameters and input,
/// given its gradient with respect to the network output.
pub fn backward<T: Scalar>(
    cache: &ForwardCache<T>,
    params: &ParamSet<T>,
    output_gradient: &Tensor<T>,
) -> Result<(ParamSet<T>, Tensor<T>)> {
    let (grads, input_grad) = backward_impl(cache, params, output_gradient, true)?;
    Ok((grads, input_grad.expect("requested")))
}

/// Like [`backward`] but skips the input gradient, saving one pass over the
/// first layer.
pub fn param_gradients<T: Scalar>(
    cache: &ForwardCache<T>,
    params: &ParamSet<T>,
    output_gradient: &Tensor<T>,
) -> Result<ParamSet<T>> {
    Ok(backward_impl(cache, params, output_gradient, false)?.0)
}

fn backward_impl<T: Scalar>(
    cache: &ForwardCache<T>,
    params: &ParamSet<T>,
    output_gradient: &Tensor<T>,
    need_input_grad: bool,
) -> Result<(ParamSet<T>, Option<Tensor<T>>)> {
    let spec = &cache.spec;
    spec.check_params(params)?;
    if params.fingerprint() != cache.fingerprint {
        return Err(Error::StaleCache);
    }
    if output_gradient.shape() != cache.output_shape.as_slice() {
        return Err(Error::shape(
            "output gradient",
            &cache.output_shape,
            output_gradient.shape(),
        ));
    }
    let rows = cache.rows;
    let mut grads = params.zeros_like();
    let mut delta: Vec<f64> = output_gradient.data().iter().map(|v| v.to_acc()).collect();
    let mut input_grad = None;

    for l in (0..spec.layers()).rev() {
        let (fan_in, fan_out) = (spec.layer_widths[l], spec.layer_widths[l + 1]);
        let w = params.tensor(2 * l).data();
        let a = &cache.layer_inputs[l];

        let mut dw = vec![0.0f64; fan_out * fan_in];
        let mut db = vec![0.0f64; fan_out];
        for r in 0..rows {
            let x = &a[r * fan_in..(r + 1) * fan_in];
            for o in 0..fan_out {
                let d = delta[r * fan_out + o];
                if d != 0.0 {
                    db[o] += d;
                    axpy_acc(d, x, &mut dw[o * fan_in..(o + 1) * fan_in]);
                }
            }
        }
        write_acc(grads.tensor_mut(2 * l), &dw);
        write_acc(grads.tensor_mut(2 * l + 1), &db);

        if l == 0 && !need_input_grad {
            break;
        }
        let mut da = vec![0.0f64; rows * fan_in];
        for r in 0..rows {
            let dar = &mut da[r * fan_in..(r + 1) * fan_in];
            for o in 0..fan_out {
                let d = delta[r * fan_out + o];
                if d != 0.0 {
                    axpy_acc(d, &w[o * fan_in..(o + 1) * fan_in], dar);
                }
            }
        }
        if l == 0 {
            let data = da.into_iter().map(T::from_acc).collect();
            input_grad = Some(Tensor::from_parts_unchecked(cache.input_shape.clone(), data));
            break;
        }
        // Through dropout then the rectifier of hidden layer l-1.
        let pre = &cache.pre[l - 1];
        let mask = &cache.masks[l - 1];
        for (i, g) in da.iter_mut().enumerate() {
            if pre[i] <= T::zero() {
                *g = 0.0;
            } else if !mask.is_empty() {
                *g *= mask[i].to_acc();
            }
        }
        delta = da;
    }

    Ok((grads, input_grad))
}

fn write_acc<T: Scalar>(t: &mut Tensor<T>, acc: &[f64]) {
    for (dst, &v) in t.data_mut().iter_mut().zip(acc) {
        *dst = T::from_acc(v);
    }
}
