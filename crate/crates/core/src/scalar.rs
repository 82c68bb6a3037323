//! Floating-point element types accepted by the numeric kernel.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Element type for tensors, parameters and losses.
///
/// Reductions widen to `f64` through [`Scalar::to_acc`] regardless of the
/// storage type, so `f32` and `f64` kernels share one summation order.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Tag written into checkpoint and embedding manifests.
    const DTYPE: &'static str;
    /// Width of one little-endian element on disk.
    const BYTES: usize;

    fn to_acc(self) -> f64;
    fn from_acc(v: f64) -> Self;
    fn write_le(self, out: &mut Vec<u8>);
    /// Decodes one element; `bytes` must hold exactly [`Scalar::BYTES`] bytes.
    fn read_le(bytes: &[u8]) -> Self;
}

impl Scalar for f32 {
    const DTYPE: &'static str = "f32";
    const BYTES: usize = 4;

    #[inline(always)]
    fn to_acc(self) -> f64 {
        self as f64
    }

    #[inline(always)]
    fn from_acc(v: f64) -> Self {
        v as f32
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        let mut b = [0u8; 4];
        b.copy_from_slice(bytes);
        f32::from_le_bytes(b)
    }
}

impl Scalar for f64 {
    const DTYPE: &'static str = "f64";
    const BYTES: usize = 8;

    #[inline(always)]
    fn to_acc(self) -> f64 {
        self
    }

    #[inline(always)]
    fn from_acc(v: f64) -> Self {
        v
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        let mut b = [0u8; 8];
        b.copy_from_slice(bytes);
        f64::from_le_bytes(b)
    }
}

/// Dot product with `f64` accumulation in a fixed lane order.
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0].to_acc() * y[0].to_acc();
        acc[1] += x[1].to_acc() * y[1].to_acc();
        acc[2] += x[2].to_acc() * y[2].to_acc();
        acc[3] += x[3].to_acc() * y[3].to_acc();
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x.to_acc() * y.to_acc();
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `acc[i] += alpha * x[i]` in `f64`.
#[inline]
pub fn axpy_acc<T: Scalar>(alpha: f64, x: &[T], acc: &mut [f64]) {
    debug_assert_eq!(x.len(), acc.len());
    for (a, v) in acc.iter_mut().zip(x) {
        *a += alpha * v.to_acc();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_matches_naive_sum() {
        let a: Vec<f32> = (0..11).map(|i| i as f32 * 0.5).collect();
        let b: Vec<f32> = (0..11).map(|i| 1.0 - i as f32 * 0.1).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| *x as f64 * *y as f64).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }

    #[test]
    fn le_round_trip() {
        let mut buf = Vec::new();
        1.5f32.write_le(&mut buf);
        (-2.25f64).write_le(&mut buf);
        assert_eq!(f32::read_le(&buf[..4]), 1.5);
        assert_eq!(f64::read_le(&buf[4..]), -2.25);
    }
}
