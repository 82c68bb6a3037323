//! Central-difference verification of analytic gradients.
//!
//! Deviation is measured per parameter tensor as
//! `|analytic - numeric|_2 / max(|analytic|_2, |numeric|_2)`, which stays
//! meaningful for tensors whose individual entries are near zero.
//! Coordinates whose perturbation flips a rectifier are skipped and counted.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::numkernel::mlp::{backward, forward, ForwardCache, MlpSpec};
use crate::numkernel::{ParamSet, Tensor};
use crate::scalar::{dot, Scalar};

#[derive(Debug, Clone, Serialize)]
pub struct ParamCheck {
    pub name: String,
    pub relative_deviation: f64,
    pub max_abs_deviation: f64,
    pub checked: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub max_relative_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl GradCheckReport {
    fn from_checks(params: Vec<ParamCheck>, tolerance: f64) -> Self {
        let max_relative_deviation = params
            .iter()
            .map(|p| p.relative_deviation)
            .fold(0.0, f64::max);
        Self {
            passed: max_relative_deviation <= tolerance,
            params,
            max_relative_deviation,
            tolerance,
        }
    }
}

/// Compares `analytic` against central differences of `objective` with step `h`.
///
/// `objective` returns `None` when the perturbed point is not comparable
/// (for instance a rectifier changed sign); such coordinates are skipped.
pub fn compare_with_central_differences<T, F>(
    params: &ParamSet<T>,
    analytic: &ParamSet<T>,
    h: f64,
    tolerance: f64,
    mut objective: F,
) -> GradCheckReport
where
    T: Scalar,
    F: FnMut(&ParamSet<T>) -> Option<f64>,
{
    let mut probe = params.clone();
    let mut checks = Vec::with_capacity(params.len());
    for (i, (name, tensor)) in params.iter().enumerate() {
        let a = analytic.tensor(i).data();
        let (mut diff_sq, mut a_sq, mut n_sq, mut max_abs) = (0.0, 0.0, 0.0, 0.0f64);
        let (mut checked, mut skipped) = (0, 0);
        for j in 0..tensor.len() {
            let orig = tensor.data()[j];
            probe.tensor_mut(i).data_mut()[j] = T::from_acc(orig.to_acc() + h);
            let plus = objective(&probe);
            probe.tensor_mut(i).data_mut()[j] = T::from_acc(orig.to_acc() - h);
            let minus = objective(&probe);
            probe.tensor_mut(i).data_mut()[j] = orig;
            match (plus, minus) {
                (Some(p), Some(m)) => {
                    let numeric = (p - m) / (2.0 * h);
                    let an = a[j].to_acc();
                    diff_sq += (an - numeric).powi(2);
                    a_sq += an * an;
                    n_sq += numeric * numeric;
                    max_abs = max_abs.max((an - numeric).abs());
                    checked += 1;
                }
                _ => skipped += 1,
            }
        }
        let denom = a_sq.sqrt().max(n_sq.sqrt());
        let relative_deviation = if denom > 0.0 { diff_sq.sqrt() / denom } else { 0.0 };
        checks.push(ParamCheck {
            name: name.to_string(),
            relative_deviation,
            max_abs_deviation: max_abs,
            checked,
            skipped,
        });
    }
    GradCheckReport::from_checks(checks, tolerance)
}

/// Options for [`finite_diff_check`].
#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub train_mode: bool,
    pub seed: u64,
    pub step: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            train_mode: false,
            seed: 0,
            step: 1e-3,
        }
    }
}

fn rectifier_pattern<T: Scalar>(cache: &ForwardCache<T>) -> Vec<bool> {
    (0..cache.hidden_layers())
        .flat_map(|l| cache.pre_activations(l).iter().map(|v| *v > T::zero()))
        .collect()
}

/// Checks the network's parameter gradients on the objective
/// `sum(output * R)` for a fixed seeded projection `R`.
pub fn finite_diff_check<T: Scalar>(
    spec: &MlpSpec,
    params: &ParamSet<T>,
    input: &Tensor<T>,
    tolerance: f64,
    opts: GradCheckOptions,
) -> Result<GradCheckReport> {
    let (out, cache) = forward(spec, params, input, opts.train_mode, opts.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37_79b9_7f4a_7c15);
    let proj: Vec<T> = (0..out.len())
        .map(|_| T::from_acc(rng.gen_range(-1.0..1.0)))
        .collect();
    let proj = Tensor::new(out.shape().to_vec(), proj)?;
    let (grads, _) = backward(&cache, params, &proj)?;
    let base_pattern = rectifier_pattern(&cache);

    Ok(compare_with_central_differences(
        params,
        &grads,
        opts.step,
        tolerance,
        |p| {
            let (o, c) = forward(spec, p, input, opts.train_mode, opts.seed).ok()?;
            (rectifier_pattern(&c) == base_pattern).then(|| dot(o.data(), proj.data()))
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_input(rows: usize, width: usize, seed: u64) -> Tensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::new(
            vec![rows, width],
            (0..rows * width).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn linear_network() {
        let spec = MlpSpec::plain(vec![2, 2]).unwrap();
        let params = spec.init_params::<f64>(1);
        let r = finite_diff_check(&spec, &params, &random_input(3, 2, 2), 1e-6, Default::default())
            .unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.max_relative_deviation < 1e-6);
    }

    #[test]
    fn eval_mode_3_4_2() {
        for seed in 0..5 {
            let spec = MlpSpec::plain(vec![3, 4, 2]).unwrap();
            let params = spec.init_params::<f64>(seed);
            let r = finite_diff_check(&spec, &params, &random_input(4, 3, seed + 100), 1e-4, Default::default())
                .unwrap();
            assert!(r.passed, "seed {seed}: {r:?}");
        }
    }

    #[test]
    fn dropout_train_mode() {
        let spec = MlpSpec::new(vec![3, 6, 5, 2], vec![0.3, 0.3]).unwrap();
        let params = spec.init_params::<f64>(7);
        let opts = GradCheckOptions {
            train_mode: true,
            seed: 11,
            ..Default::default()
        };
        let r = finite_diff_check(&spec, &params, &random_input(5, 3, 8), 1e-3, opts).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn detects_wrong_gradient() {
        let spec = MlpSpec::plain(vec![2, 2]).unwrap();
        let params = spec.init_params::<f64>(1);
        let mut wrong = params.zeros_like();
        wrong.tensor_mut(0).data_mut()[0] = 1.0;
        let r = compare_with_central_differences(&params, &wrong, 1e-3, 1e-4, |p| {
            Some(p.tensor(0).data()[1])
        });
        assert!(!r.passed);
    }
}
