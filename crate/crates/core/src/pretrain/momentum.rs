use crate::error::{Error, Result};
use crate::numkernel::ParamSet;
use crate::scalar::Scalar;

/// `key = alpha * key + (1 - alpha) * query`, elementwise.
pub fn momentum_update<T: Scalar>(key: &mut ParamSet<T>, query: &ParamSet<T>, alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("momentum {alpha} outside [0, 1]")));
    }
    key.check_congruent(query, "momentum update")?;
    if alpha == 1.0 {
        return Ok(());
    }
    for i in 0..key.len() {
        let q = query.tensor(i).data();
        for (k, qv) in key.tensor_mut(i).data_mut().iter_mut().zip(q) {
            *k = if alpha == 0.0 {
                *qv
            } else {
                T::from_acc(alpha * k.to_acc() + (1.0 - alpha) * qv.to_acc())
            };
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::Tensor;

    fn p(v: &[f64]) -> ParamSet<f64> {
        ParamSet::new(vec![("w".into(), Tensor::vector(v.to_vec()).unwrap())]).unwrap()
    }

    #[test]
    fn extremes() {
        let q = p(&[1.0, -2.0, 3.5]);
        let mut k = p(&[0.25, 0.5, -0.75]);
        let orig = k.clone();
        momentum_update(&mut k, &q, 1.0).unwrap();
        assert_eq!(k, orig);
        momentum_update(&mut k, &q, 0.0).unwrap();
        assert_eq!(k, q);
    }

    #[test]
    fn scalar_arithmetic() {
        let mut k = p(&[1.0]);
        momentum_update(&mut k, &p(&[0.0]), 0.999).unwrap();
        assert!((k.tensor(0).data()[0] - 0.999).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_alpha_and_shapes() {
        let mut k = p(&[1.0]);
        assert!(momentum_update(&mut k, &p(&[0.0]), 1.5).is_err());
        assert!(momentum_update(&mut k, &p(&[0.0]), -0.1).is_err());
        assert!(momentum_update(&mut k, &p(&[0.0, 1.0]), 0.5).is_err());
    }

    #[test]
    fn exponential_average_of_trajectory() {
        // k_T = a^T k_0 + (1-a) sum_t a^(T-1-t) q_t
        let alpha = 0.9;
        let traj: Vec<f64> = (0..25).map(|t| (t as f64 * 0.37).sin()).collect();
        let mut k = p(&[2.0]);
        for &q in &traj {
            momentum_update(&mut k, &p(&[q]), alpha).unwrap();
        }
        let n = traj.len() as i32;
        let closed = alpha.powi(n) * 2.0
            + (1.0 - alpha)
                * traj
                    .iter()
                    .enumerate()
                    .map(|(t, q)| alpha.powi(n - 1 - t as i32) * q)
                    .sum::<f64>();
        assert!((k.tensor(0).data()[0] - closed).abs() < 1e-12);
    }
}
