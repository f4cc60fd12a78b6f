//! Dense symmetric positive-definite factorization.

use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::num::Real;

/// Largest `|a_ij - a_ji|`.
pub fn max_asymmetry<F: Real>(a: ArrayView2<'_, F>) -> F {
    let n = a.nrows();
    let mut worst = F::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[[i, j]] - a[[j, i]]).abs());
        }
    }
    worst
}

/// Lower-triangular Cholesky factor of `A + shift * I`, stored row-major.
///
/// A pivot counts as positive only if it exceeds `n * eps * max|diag|`;
/// below that the matrix is treated as numerically singular.
#[derive(Clone, Debug)]
pub struct Cholesky<F> {
    n: usize,
    l: Vec<F>,
}

impl<F: Real> Cholesky<F> {
    pub fn factor(a: ArrayView2<'_, F>) -> Result<Self> {
        Self::factor_shifted(a, F::zero())
    }

    pub fn factor_shifted(a: ArrayView2<'_, F>, shift: F) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: a.ncols() });
        }
        let scale = (0..n).map(|i| (a[[i, i]] + shift).abs()).fold(F::zero(), F::max);
        let floor = F::from_count(n.max(1)) * F::epsilon() * scale;
        let mut l = vec![F::zero(); n * n];
        for i in 0..n {
            for j in 0..=i {
                let (ri, rj) = (&l[i * n..i * n + j], &l[j * n..j * n + j]);
                let dot: F = ri.iter().zip(rj).map(|(&x, &y)| x * y).sum();
                if i == j {
                    let pivot = a[[i, i]] + shift - dot;
                    if !(pivot > floor) {
                        return Err(Error::NotPositiveDefinite { row: i, pivot: pivot.as_f64() });
                    }
                    l[i * n + i] = pivot.sqrt();
                } else {
                    l[i * n + j] = (a[[i, j]] - dot) / l[j * n + j];
                }
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `L L^T x = b`.
    pub fn solve(&self, b: ArrayView1<'_, F>) -> Result<Array1<F>> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: b.len() });
        }
        let l = &self.l;
        let mut y = vec![F::zero(); n];
        for i in 0..n {
            let dot: F = l[i * n..i * n + i].iter().zip(&y[..i]).map(|(&a, &b)| a * b).sum();
            y[i] = (b[i] - dot) / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= l[k * n + i] * y[k];
            }
            y[i] = s / l[i * n + i];
        }
        Ok(Array1::from(y))
    }
}
