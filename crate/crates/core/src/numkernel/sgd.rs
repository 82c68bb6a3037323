use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::ParamSet;
use crate::scalar::Scalar;

/// Multiply the learning rate by `multiplier` from `epoch` onwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrStep {
    pub epoch: usize,
    pub multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    #[serde(default)]
    pub schedule: Vec<LrStep>,
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be non-negative, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum {} outside [0, 1)",
                self.momentum
            )));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::Config(format!(
                "weight decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        if let Some(s) = self.schedule.iter().find(|s| !(s.multiplier > 0.0)) {
            return Err(Error::Config(format!(
                "schedule multiplier at epoch {} must be positive",
                s.epoch
            )));
        }
        Ok(())
    }

    /// Base rate times every multiplier whose epoch has been reached.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.schedule
            .iter()
            .filter(|s| epoch >= s.epoch)
            .fold(self.learning_rate, |lr, s| lr * s.multiplier)
    }
}

/// Optimizer hyperparameters plus velocity buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdState<T> {
    pub config: SgdConfig,
    velocity: ParamSet<T>,
}

impl<T: Scalar> SgdState<T> {
    pub fn new(config: SgdConfig, params: &ParamSet<T>) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            velocity: params.zeros_like(),
        })
    }

    pub fn velocity(&self) -> &ParamSet<T> {
        &self.velocity
    }
}

/// One momentum step: `v = momentum*v + (g + wd*p)`, `p -= lr(epoch)*v`.
///
/// A non-finite gradient rejects the whole step and leaves parameters and
/// velocity untouched.
pub fn sgd_step<T: Scalar>(
    params: &mut ParamSet<T>,
    grads: &ParamSet<T>,
    state: &mut SgdState<T>,
    epoch: usize,
) -> Result<()> {
    params.check_congruent(grads, "sgd gradients")?;
    params.check_congruent(&state.velocity, "sgd velocity")?;
    for (name, g) in grads.iter() {
        if let Some(index) = g.first_non_finite() {
            return Err(Error::NonFinite {
                context: format!("gradient of {name}"),
                index,
            });
        }
    }
    let lr = state.config.lr_at(epoch);
    let mu = state.config.momentum;
    let wd = state.config.weight_decay;
    for i in 0..params.len() {
        let g = grads.tensor(i).data();
        let v = state.velocity.tensor_mut(i).data_mut();
        let p = params.tensor_mut(i).data_mut();
        for ((pj, vj), gj) in p.iter_mut().zip(v.iter_mut()).zip(g) {
            let vn = mu * vj.to_acc() + gj.to_acc() + wd * pj.to_acc();
            *vj = T::from_acc(vn);
            *pj = T::from_acc(pj.to_acc() - lr * vn);
        }
    }
    Ok(())
}
