use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Task::Regression => f.write_str("regression"),
            Task::Classification => f.write_str("classification"),
        }
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regression" => Ok(Task::Regression),
            "classification" => Ok(Task::Classification),
            other => Err(Error::InvalidInput(format!("unknown task `{other}`"))),
        }
    }
}

/// Feature matrix (`n x p`, one row per sample) with its target vector.
///
/// Classification targets are stored as `0`/`1` in the scalar type.
#[derive(Clone, Debug)]
pub struct Dataset<F> {
    features: Array2<F>,
    target: Array1<F>,
    task: Task,
}

impl<F: Real> Dataset<F> {
    pub fn new(features: Array2<F>, target: Array1<F>, task: Task) -> Result<Self> {
        let (n, p) = features.dim();
        if n == 0 {
            return Err(Error::InvalidInput("dataset has no rows".into()));
        }
        if p == 0 {
            return Err(Error::InvalidInput("dataset has no feature columns".into()));
        }
        if target.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: target.len() });
        }
        if features.iter().chain(target.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("dataset contains non-finite values".into()));
        }
        if task == Task::Classification
            && target.iter().any(|&y| y != F::zero() && y != F::one())
        {
            return Err(Error::InvalidInput("classification targets must be 0 or 1".into()));
        }
        Ok(Self { features, target, task })
    }

    pub fn features(&self) -> ArrayView2<'_, F> {
        self.features.view()
    }

    pub fn target(&self) -> ArrayView1<'_, F> {
        self.target.view()
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    /// Rows selected by `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select(ndarray::Axis(0), indices),
            target: self.target.select(ndarray::Axis(0), indices),
            task: self.task,
        }
    }

    pub fn into_parts(self) -> (Array2<F>, Array1<F>, Task) {
        (self.features, self.target, self.task)
    }
}
