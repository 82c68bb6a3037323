use crate::error::{Error, Result};
use crate::numkernel::Tensor;
use crate::scalar::{dot, Scalar};

/// Fixed-capacity FIFO of key embeddings used as negatives.
///
/// Rows are written round-robin, so once full each enqueue overwrites the
/// oldest rows.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyQueue<T> {
    capacity: usize,
    dim: usize,
    rows: Vec<T>,
    len: usize,
    cursor: usize,
    unit_norm: bool,
}

impl<T: Scalar> KeyQueue<T> {
    /// With `unit_norm`, enqueued rows must have norm 1 within 1e-3.
    pub fn new(capacity: usize, dim: usize, unit_norm: bool) -> Result<Self> {
        if capacity == 0 || dim == 0 {
            return Err(Error::InvalidArgument("queue capacity and dimension must be positive".into()));
        }
        Ok(Self {
            capacity,
            dim,
            rows: vec![T::zero(); capacity * dim],
            len: 0,
            cursor: 0,
            unit_norm,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_full(&self) -> bool {
        self.len == self.capacity
    }

    /// Stored rows as one `[len, dim]` slice in storage order.
    pub fn as_rows(&self) -> &[T] {
        &self.rows[..self.len * self.dim]
    }

    /// Rows from oldest to newest.
    pub fn fifo_rows(&self) -> Vec<&[T]> {
        let start = if self.is_full() { self.cursor } else { 0 };
        (0..self.len)
            .map(|i| {
                let r = (start + i) % self.capacity;
                &self.rows[r * self.dim..(r + 1) * self.dim]
            })
            .collect()
    }

    /// Appends a `[batch, dim]` block, evicting the oldest rows when full.
    pub fn enqueue(&mut self, batch: &Tensor<T>) -> Result<()> {
        if batch.last_dim() != self.dim {
            return Err(Error::shape("queue key width", &[self.dim], &[batch.last_dim()]));
        }
        let n = batch.rows();
        if n > self.capacity {
            return Err(Error::InvalidArgument(format!(
                "batch of {n} keys exceeds queue capacity {}",
                self.capacity
            )));
        }
        if self.unit_norm {
            for (r, row) in batch.iter_rows().enumerate() {
                let norm = dot(row, row).sqrt();
                if (norm - 1.0).abs() > 1e-3 {
                    return Err(Error::InvalidArgument(format!(
                        "key row {r} has norm {norm}, queue expects unit rows"
                    )));
                }
            }
        }
        for row in batch.iter_rows() {
            let c = self.cursor;
            self.rows[c * self.dim..(c + 1) * self.dim].copy_from_slice(row);
            self.cursor = (c + 1) % self.capacity;
        }
        self.len = (self.len + n).min(self.capacity);
        Ok(())
    }
}
