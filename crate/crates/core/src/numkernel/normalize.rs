use crate::error::{Error, Result};
use crate::numkernel::Tensor;
use crate::scalar::{dot, Scalar};

/// Rows with a norm at or below this are rejected.
pub const MIN_ROW_NORM: f64 = 1e-12;

/// Scales every row (last axis) to unit Euclidean norm.
pub fn l2_normalize<T: Scalar>(v: &Tensor<T>) -> Result<Tensor<T>> {
    let mut out = v.clone();
    for (r, row) in out.data_mut().chunks_exact_mut(v.last_dim()).enumerate() {
        let norm = dot(row, row).sqrt();
        if !(norm > MIN_ROW_NORM) {
            return Err(Error::DegenerateRow { row: r, norm });
        }
        for x in row.iter_mut() {
            *x = T::from_acc(x.to_acc() / norm);
        }
    }
    Ok(out)
}

/// Gradient through [`l2_normalize`]: `(g - y (y.g)) / |z|` per row, where
/// `z` is the un-normalized input and `y = z / |z|`.
pub fn l2_normalize_backward<T: Scalar>(input: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if input.shape() != grad_out.shape() {
        return Err(Error::shape("normalize gradient", input.shape(), grad_out.shape()));
    }
    let d = input.last_dim();
    let mut out = Vec::with_capacity(input.len());
    for (r, (z, g)) in input.iter_rows().zip(grad_out.iter_rows()).enumerate() {
        let norm = dot(z, z).sqrt();
        if !(norm > MIN_ROW_NORM) {
            return Err(Error::DegenerateRow { row: r, norm });
        }
        let yg = dot(z, g) / norm;
        for j in 0..d {
            let y = z[j].to_acc() / norm;
            out.push(T::from_acc((g[j].to_acc() - y * yg) / norm));
        }
    }
    Ok(Tensor::from_parts_unchecked(input.shape().to_vec(), out))
}
