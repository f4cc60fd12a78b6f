//! Kernels induced by tree ensembles (leaf co-membership frequency), the
//! Laplace reference kernel, the Mantel matrix correlation and a PSD check.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::linalg::{max_asymmetry, Cholesky};
use crate::num::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Rf,
    Gbt,
    Laplace,
}

/// Kernel values between the rows of two inputs (`n_a x n_b`).
#[derive(Clone, Debug, PartialEq)]
pub struct KernelMatrix<F> {
    values: Array2<F>,
    kind: KernelKind,
}

impl<F: Real> KernelMatrix<F> {
    pub fn new(values: Array2<F>, kind: KernelKind) -> Self {
        Self { values, kind }
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn values(&self) -> &Array2<F> {
        &self.values
    }

    pub fn view(&self) -> ArrayView2<'_, F> {
        self.values.view()
    }

    pub fn into_values(self) -> Array2<F> {
        self.values
    }

    pub fn is_square(&self) -> bool {
        self.values.nrows() == self.values.ncols()
    }
}

/// Binary leaf-indicator encoding of a batch of points, one column per
/// point and one row per leaf of the ensemble (trees stacked in order).
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    phi: Array2<u8>,
    n_trees: usize,
}

impl FeatureMap {
    pub fn matrix(&self) -> &Array2<u8> {
        &self.phi
    }

    pub fn n_trees(&self) -> usize {
        self.n_trees
    }

    /// `(1/M) * self^T * other`, computed densely in floating point.
    pub fn gram<F: Real>(&self, other: &FeatureMap) -> Result<Array2<F>> {
        if self.phi.nrows() != other.phi.nrows() || self.n_trees != other.n_trees {
            return Err(Error::DimensionMismatch { expected: self.phi.nrows(), got: other.phi.nrows() });
        }
        let a = self.phi.mapv(|v| F::from_u8(v).expect("0/1"));
        let b = other.phi.mapv(|v| F::from_u8(v).expect("0/1"));
        let m = F::from_count(self.n_trees);
        let mut g = Array2::<F>::zeros((a.ncols(), b.ncols()));
        for i in 0..a.ncols() {
            for j in 0..b.ncols() {
                let dot: F = a.column(i).iter().zip(b.column(j)).map(|(&x, &y)| x * y).sum();
                g[[i, j]] = dot / m;
            }
        }
        Ok(g)
    }
}

fn require_trees<F: Real>(e: &Ensemble<F>) -> Result<()> {
    if e.n_trees() == 0 {
        return Err(Error::InvalidInput("ensemble has no trees".into()));
    }
    Ok(())
}

/// One-hot leaf blocks; tree `m`'s block starts at the sum of the leaf
/// counts of trees `0..m`.
pub fn feature_map<F: Real>(e: &Ensemble<F>, x: ArrayView2<'_, F>) -> Result<FeatureMap> {
    require_trees(e)?;
    let leaves = e.leaf_assignments(x)?;
    let mut offsets = Vec::with_capacity(e.n_trees());
    let mut total = 0;
    for t in e.trees() {
        offsets.push(total);
        total += t.n_leaves();
    }
    let mut phi = Array2::<u8>::zeros((total, x.nrows()));
    for (i, row) in leaves.outer_iter().enumerate() {
        for (m, &leaf) in row.iter().enumerate() {
            phi[[offsets[m] + leaf, i]] = 1;
        }
    }
    Ok(FeatureMap { phi, n_trees: e.n_trees() })
}

/// Fraction of trees in which row `i` of `a` and row `j` of `b` share a leaf.
///
/// Rows of `b` are bucketed by leaf per tree, so the work is proportional to
/// the number of co-resident pairs rather than `n_a * n_b * M`. Counts are
/// integers, so the result does not depend on evaluation order.
pub fn ensemble_kernel<F: Real>(e: &Ensemble<F>, a: ArrayView2<'_, F>, b: ArrayView2<'_, F>) -> Result<KernelMatrix<F>> {
    require_trees(e)?;
    let la = e.leaf_assignments(a)?;
    let lb = e.leaf_assignments(b)?;
    let (na, nb, m) = (a.nrows(), b.nrows(), e.n_trees());

    // buckets[t][leaf] = rows of b in that leaf of tree t
    let buckets: Vec<Vec<Vec<u32>>> = e
        .trees()
        .iter()
        .enumerate()
        .map(|(t, tree)| {
            let mut bk = vec![Vec::new(); tree.n_leaves()];
            for j in 0..nb {
                bk[lb[[j, t]]].push(j as u32);
            }
            bk
        })
        .collect();

    let total = F::from_count(m);
    let mut values = Array2::<F>::zeros((na, nb));
    values.outer_iter_mut().into_par_iter().enumerate().for_each(|(i, mut out)| {
        let mut counts = vec![0u32; nb];
        for t in 0..m {
            for &j in &buckets[t][la[[i, t]]] {
                counts[j as usize] += 1;
            }
        }
        for (o, &c) in out.iter_mut().zip(&counts) {
            *o = F::from_u32(c).expect("count") / total;
        }
    });
    let kind = if e.kind().is_rf() { KernelKind::Rf } else { KernelKind::Gbt };
    Ok(KernelMatrix::new(values, kind))
}

/// `exp(-||a_i - b_j||_1 / sigma)`.
pub fn laplace_kernel<F: Real>(a: ArrayView2<'_, F>, b: ArrayView2<'_, F>, sigma: F) -> Result<KernelMatrix<F>> {
    if !(sigma > F::zero()) {
        return Err(Error::InvalidParameter(format!("laplace sigma must be positive, got {sigma}")));
    }
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch { expected: a.ncols(), got: b.ncols() });
    }
    let mut values = Array2::<F>::zeros((a.nrows(), b.nrows()));
    values.outer_iter_mut().into_par_iter().enumerate().for_each(|(i, mut out)| {
        let ai = a.row(i);
        for (j, o) in out.iter_mut().enumerate() {
            let d: F = ai.iter().zip(b.row(j)).map(|(&x, &y)| (x - y).abs()).sum();
            *o = (-d / sigma).exp();
        }
    });
    Ok(KernelMatrix::new(values, KernelKind::Laplace))
}

/// Mantel statistic: Pearson correlation of the strict upper triangles.
pub fn mantel<F: Real>(k1: ArrayView2<'_, F>, k2: ArrayView2<'_, F>) -> Result<F> {
    let n = k1.nrows();
    if k1.ncols() != n {
        return Err(Error::InvalidInput("mantel needs square matrices".into()));
    }
    if k2.dim() != (n, n) {
        return Err(Error::DimensionMismatch { expected: n, got: k2.nrows() });
    }
    if n < 3 {
        return Err(Error::InvalidInput("mantel needs at least 3 points".into()));
    }
    let pairs = || (0..n).flat_map(move |i| ((i + 1)..n).map(move |j| (i, j)));
    let count = F::from_count(n * (n - 1) / 2);
    let (mut m1, mut m2) = (F::zero(), F::zero());
    for (i, j) in pairs() {
        m1 += k1[[i, j]];
        m2 += k2[[i, j]];
    }
    m1 /= count;
    m2 /= count;
    let (mut sxy, mut sxx, mut syy) = (F::zero(), F::zero(), F::zero());
    for (i, j) in pairs() {
        let (dx, dy) = (k1[[i, j]] - m1, k2[[i, j]] - m2);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if !(sxx > F::zero()) {
        return Err(Error::UndefinedCorrelation("first matrix"));
    }
    if !(syy > F::zero()) {
        return Err(Error::UndefinedCorrelation("second matrix"));
    }
    let r = sxy / (sxx.sqrt() * syy.sqrt());
    Ok(r.max(-F::one()).min(F::one()))
}

/// Asymmetry beyond this is rejected by [`check_psd`].
pub const SYMMETRY_TOL: f64 = 1e-10;

/// `true` when `K + tol * I` admits a Cholesky factorization, i.e. the
/// smallest eigenvalue of `K` is (numerically) at least `-tol`.
pub fn check_psd<F: Real>(k: ArrayView2<'_, F>, tol: F) -> Result<bool> {
    if k.nrows() != k.ncols() {
        return Err(Error::InvalidInput("psd check needs a square matrix".into()));
    }
    let asym = max_asymmetry(k);
    if asym > F::lit(SYMMETRY_TOL) {
        return Err(Error::NotSymmetric(asym.as_f64()));
    }
    match Cholesky::factor_shifted(k, tol) {
        Ok(_) => Ok(true),
        Err(Error::NotPositiveDefinite { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}
