//! Kernel ridge regression on a precomputed kernel matrix, with the
//! smallest-invertible ridge selection rule and a +/-1 classification
//! wrapper thresholded at zero.

use ndarray::{Array1, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Task;
use crate::error::{Error, Result};
use crate::linalg::{max_asymmetry, Cholesky};
use crate::num::Real;

/// Ridge values tried by [`select_lambda`], in order: exact zero, then
/// `1e-12, 1e-11, ..., 1e2`.
pub fn lambda_ladder<F: Real>() -> Vec<F> {
    std::iter::once(F::zero())
        .chain((0..=14).map(|k| F::lit(10f64.powi(k - 12))))
        .collect()
}

fn check_square_symmetric<F: Real>(k: ArrayView2<'_, F>) -> Result<()> {
    if k.nrows() != k.ncols() {
        return Err(Error::InvalidInput(format!("kernel matrix is {}x{}, not square", k.nrows(), k.ncols())));
    }
    let asym = max_asymmetry(k);
    if asym > F::lit(crate::kernels::SYMMETRY_TOL) {
        return Err(Error::NotSymmetric(asym.as_f64()));
    }
    Ok(())
}

/// Smallest ladder value for which `K + lambda * I` factorizes as
/// symmetric positive definite.
pub fn select_lambda<F: Real>(k: ArrayView2<'_, F>) -> Result<F> {
    check_square_symmetric(k)?;
    lambda_ladder()
        .into_iter()
        .find(|&lambda| Cholesky::factor_shifted(k, lambda).is_ok())
        .ok_or(Error::DegenerateKernel)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "F: Real"))]
pub struct KrrModel<F> {
    alpha: Array1<F>,
    lambda: F,
    train_targets: Array1<F>,
    task: Task,
}

/// Maps class 0 to -1 and class 1 to +1.
pub fn encode_classes<F: Real>(labels: ArrayView1<'_, F>) -> Result<Array1<F>> {
    labels
        .iter()
        .map(|&y| {
            if y == F::zero() {
                Ok(-F::one())
            } else if y == F::one() {
                Ok(F::one())
            } else {
                Err(Error::InvalidInput(format!("class label {y} is not 0 or 1")))
            }
        })
        .collect::<Result<Vec<F>>>()
        .map(Array1::from)
}

/// Solves `(K + lambda I) alpha = Y` by Cholesky with one step of
/// iterative refinement. For classification `y` holds 0/1 labels, which are
/// encoded as -1/+1 before solving.
pub fn fit_krr<F: Real>(k: ArrayView2<'_, F>, y: ArrayView1<'_, F>, lambda: F, task: Task) -> Result<KrrModel<F>> {
    check_square_symmetric(k)?;
    let n = k.nrows();
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if !(lambda >= F::zero()) {
        return Err(Error::InvalidParameter(format!("lambda must be non-negative, got {lambda}")));
    }
    let targets = match task {
        Task::Regression => y.to_owned(),
        Task::Classification => encode_classes(y)?,
    };
    let chol = Cholesky::factor_shifted(k, lambda)?;
    let mut alpha = chol.solve(targets.view())?;
    let residual = &targets - &(k.dot(&alpha) + &(&alpha * lambda));
    let correction = chol.solve(residual.view())?;
    alpha += &correction;
    Ok(KrrModel { alpha, lambda, train_targets: targets, task })
}

impl<F: Real> KrrModel<F> {
    pub fn alpha(&self) -> ArrayView1<'_, F> {
        self.alpha.view()
    }

    pub fn lambda(&self) -> F {
        self.lambda
    }

    pub fn train_targets(&self) -> ArrayView1<'_, F> {
        self.train_targets.view()
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn n_train(&self) -> usize {
        self.alpha.len()
    }

    /// `alpha^T k_vec`, where `k_vec` holds kernel values between the query
    /// and each training point.
    pub fn predict(&self, k_vec: ArrayView1<'_, F>) -> Result<F> {
        if k_vec.len() != self.alpha.len() {
            return Err(Error::DimensionMismatch { expected: self.alpha.len(), got: k_vec.len() });
        }
        Ok(self.alpha.dot(&k_vec))
    }

    /// Class 1 iff the score is strictly positive.
    pub fn classify(&self, k_vec: ArrayView1<'_, F>) -> Result<F> {
        if self.task != Task::Classification {
            return Err(Error::WrongModelKind("regression model cannot classify".into()));
        }
        Ok(if self.predict(k_vec)? > F::zero() { F::one() } else { F::zero() })
    }

    /// Scores for each row of a query-by-train kernel block.
    pub fn predict_batch(&self, k_rows: ArrayView2<'_, F>) -> Result<Array1<F>> {
        if k_rows.ncols() != self.alpha.len() {
            return Err(Error::DimensionMismatch { expected: self.alpha.len(), got: k_rows.ncols() });
        }
        let out: Vec<F> = (0..k_rows.nrows()).into_par_iter().map(|i| self.alpha.dot(&k_rows.row(i))).collect();
        Ok(Array1::from(out))
    }

    /// Scores for regression, 0/1 classes for classification.
    pub fn predict_task(&self, k_rows: ArrayView2<'_, F>) -> Result<Array1<F>> {
        let scores = self.predict_batch(k_rows)?;
        Ok(match self.task {
            Task::Regression => scores,
            Task::Classification => scores.mapv(|s| if s > F::zero() { F::one() } else { F::zero() }),
        })
    }
}

pub fn predict_krr<F: Real>(model: &KrrModel<F>, k_vec: ArrayView1<'_, F>) -> Result<F> {
    model.predict(k_vec)
}

pub fn classify_krr<F: Real>(model: &KrrModel<F>, k_vec: ArrayView1<'_, F>) -> Result<F> {
    model.classify(k_vec)
}
