//! Random forests (bagged, averaged trees) and gradient-boosted trees with
//! the second-order regularized objective. Both expose per-tree leaf
//! assignments, which is all the kernel module needs.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Task};
use crate::error::{Error, Result};
use crate::num::{sigmoid, Real};
use crate::rng::stream_rng;
use crate::tree::{grow_tree, Response, SplitCriterion, Tree, TreeParams, XgbRegularization};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RfParams {
    pub num_trees: usize,
    pub tree: TreeParams,
    pub bootstrap: bool,
}

impl RfParams {
    pub const DEFAULT_TREES: usize = 500;

    pub fn for_task(task: Task) -> Self {
        Self { num_trees: Self::DEFAULT_TREES, tree: TreeParams::for_task(task), bootstrap: true }
    }

    pub fn with_trees(mut self, num_trees: usize) -> Self {
        self.num_trees = num_trees;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    SquaredError,
    Logistic,
}

impl Loss {
    pub fn for_task(task: Task) -> Self {
        match task {
            Task::Regression => Loss::SquaredError,
            Task::Classification => Loss::Logistic,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbtParams<F> {
    pub rounds: usize,
    pub eta: F,
    pub max_depth: usize,
    pub gamma: F,
    pub lambda_w: F,
    pub min_child_weight: F,
    /// Starting raw score. `None` picks 0.5 for squared loss and the
    /// log-odds of the training prevalence for logistic loss.
    pub base_score: Option<F>,
    pub loss: Loss,
}

impl<F: Real> GbtParams<F> {
    pub const DEFAULT_ROUNDS: usize = 100;

    pub fn new(loss: Loss) -> Self {
        Self {
            rounds: Self::DEFAULT_ROUNDS,
            eta: F::lit(0.3),
            max_depth: 6,
            gamma: F::zero(),
            lambda_w: F::one(),
            min_child_weight: F::one(),
            base_score: None,
            loss,
        }
    }

    pub fn for_task(task: Task) -> Self {
        Self::new(Loss::for_task(task))
    }

    pub fn with_rounds(mut self, rounds: usize) -> Self {
        self.rounds = rounds;
        self
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.rounds == 0 {
            return bad("rounds must be >= 1");
        }
        if !(self.eta >= F::zero() && self.eta <= F::one()) {
            return bad("eta must lie in [0, 1]");
        }
        if self.max_depth == 0 {
            return bad("max_depth must be >= 1");
        }
        if self.gamma < F::zero() || self.lambda_w < F::zero() || self.min_child_weight < F::zero() {
            return bad("gamma, lambda_w and min_child_weight must be non-negative");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    RfRegression,
    RfClassification,
    GbtRegression,
    GbtClassification,
}

impl EnsembleKind {
    pub fn is_rf(self) -> bool {
        matches!(self, EnsembleKind::RfRegression | EnsembleKind::RfClassification)
    }

    pub fn task(self) -> Task {
        match self {
            EnsembleKind::RfRegression | EnsembleKind::GbtRegression => Task::Regression,
            EnsembleKind::RfClassification | EnsembleKind::GbtClassification => Task::Classification,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum EnsembleParams<F> {
    Rf(RfParams),
    Gbt(GbtParams<F>),
}

/// An ordered collection of fitted trees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "F: Real"))]
pub struct Ensemble<F> {
    kind: EnsembleKind,
    n_features: usize,
    params: EnsembleParams<F>,
    trees: Vec<Tree<F>>,
}

impl<F: Real> Ensemble<F> {
    /// Assembles an ensemble from already-built trees.
    pub fn from_trees(kind: EnsembleKind, params: EnsembleParams<F>, trees: Vec<Tree<F>>, n_features: usize) -> Result<Self> {
        let consistent = matches!(
            (&params, kind.is_rf()),
            (EnsembleParams::Rf(_), true) | (EnsembleParams::Gbt(_), false)
        );
        if !consistent {
            return Err(Error::WrongModelKind(format!("{kind:?} with mismatched parameters")));
        }
        if let Some(t) = trees.iter().find(|t| t.n_features() != n_features) {
            return Err(Error::DimensionMismatch { expected: n_features, got: t.n_features() });
        }
        if let EnsembleParams::Gbt(g) = &params {
            if g.base_score.is_none() {
                return Err(Error::InvalidParameter("boosted ensemble needs a resolved base_score".into()));
            }
        }
        Ok(Self { kind, n_features, params, trees })
    }

    pub fn kind(&self) -> EnsembleKind {
        self.kind
    }

    pub fn trees(&self) -> &[Tree<F>] {
        &self.trees
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn params(&self) -> &EnsembleParams<F> {
        &self.params
    }

    /// Total number of leaves over all trees.
    pub fn total_leaves(&self) -> usize {
        self.trees.iter().map(Tree::n_leaves).sum()
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.n_features {
            return Err(Error::DimensionMismatch { expected: self.n_features, got });
        }
        Ok(())
    }

    fn gbt(&self) -> Result<&GbtParams<F>> {
        match &self.params {
            EnsembleParams::Gbt(g) => Ok(g),
            EnsembleParams::Rf(_) => Err(Error::WrongModelKind(format!("{:?} is not a boosted ensemble", self.kind))),
        }
    }

    /// Average of the per-tree predictions.
    pub fn rf_mean(&self, x: ArrayView1<'_, F>) -> Result<F> {
        if !self.kind.is_rf() {
            return Err(Error::WrongModelKind(format!("{:?} is not a forest", self.kind)));
        }
        self.check_dim(x.len())?;
        let sum: F = self.trees.iter().map(|t| t.value_unchecked(x)).sum();
        Ok(sum / F::from_count(self.trees.len()))
    }

    /// Forest prediction: the tree average for regression, a majority vote
    /// of the trees' 0.5-thresholded class-1 fractions for classification
    /// (a tied vote gives class 0).
    pub fn predict_rf(&self, x: ArrayView1<'_, F>) -> Result<F> {
        match self.kind {
            EnsembleKind::RfRegression => self.rf_mean(x),
            EnsembleKind::RfClassification => {
                self.check_dim(x.len())?;
                let half = F::lit(0.5);
                let votes = self.trees.iter().filter(|t| t.value_unchecked(x) > half).count();
                Ok(if 2 * votes > self.trees.len() { F::one() } else { F::zero() })
            }
            _ => Err(Error::WrongModelKind(format!("{:?} is not a forest", self.kind))),
        }
    }

    /// Raw additive score `base_score + eta * sum of leaf weights`.
    pub fn gbt_score(&self, x: ArrayView1<'_, F>) -> Result<F> {
        let g = self.gbt()?;
        self.check_dim(x.len())?;
        let sum: F = self.trees.iter().map(|t| t.value_unchecked(x)).sum();
        Ok(g.base_score.unwrap_or_default() + g.eta * sum)
    }

    /// Boosted prediction: the raw score for regression, the class
    /// (`sigmoid(score) > 0.5`) for classification.
    pub fn predict_gbt(&self, x: ArrayView1<'_, F>) -> Result<F> {
        let score = self.gbt_score(x)?;
        Ok(match self.kind {
            EnsembleKind::GbtClassification => {
                if sigmoid(score) > F::lit(0.5) { F::one() } else { F::zero() }
            }
            _ => score,
        })
    }

    /// Class-1 probability of a logistic booster.
    pub fn gbt_probability(&self, x: ArrayView1<'_, F>) -> Result<F> {
        if self.kind != EnsembleKind::GbtClassification {
            return Err(Error::WrongModelKind(format!("{:?} has no probabilities", self.kind)));
        }
        Ok(sigmoid(self.gbt_score(x)?))
    }

    pub fn predict(&self, x: ArrayView1<'_, F>) -> Result<F> {
        if self.kind.is_rf() { self.predict_rf(x) } else { self.predict_gbt(x) }
    }

    pub fn predict_batch(&self, x: ArrayView2<'_, F>) -> Result<Array1<F>> {
        self.check_dim(x.ncols())?;
        let out: Result<Vec<F>> = (0..x.nrows()).into_par_iter().map(|i| self.predict(x.row(i))).collect();
        Ok(Array1::from(out?))
    }

    /// `n x M` matrix whose entry `(i, m)` is the leaf id of row `i` in tree `m`.
    pub fn leaf_assignments(&self, x: ArrayView2<'_, F>) -> Result<Array2<usize>> {
        self.check_dim(x.ncols())?;
        let (n, m) = (x.nrows(), self.trees.len());
        let mut out = Array2::<usize>::zeros((n, m));
        out.outer_iter_mut().into_par_iter().enumerate().for_each(|(i, mut row)| {
            let xi = x.row(i);
            for (slot, tree) in row.iter_mut().zip(&self.trees) {
                *slot = tree.leaf_unchecked(xi);
            }
        });
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let e: Self = serde_json::from_str(s)?;
        Self::from_trees(e.kind, e.params, e.trees, e.n_features)
    }
}

/// Fits a random forest. Tree `m` draws its bootstrap sample and its
/// per-node feature subsets from a stream derived from `(seed, m)`, so the
/// result does not depend on thread scheduling.
pub fn fit_rf<F: Real>(data: &Dataset<F>, params: &RfParams, seed: u64) -> Result<Ensemble<F>> {
    if params.num_trees == 0 {
        return Err(Error::InvalidParameter("num_trees must be >= 1".into()));
    }
    let kind = match (data.task(), params.tree.criterion) {
        (_, SplitCriterion::XgbGain) => {
            return Err(Error::InvalidParameter("forests use variance or gini splits".into()));
        }
        (Task::Classification, SplitCriterion::Gini) => EnsembleKind::RfClassification,
        (Task::Regression, SplitCriterion::Variance) => EnsembleKind::RfRegression,
        (task, crit) => {
            return Err(Error::InvalidParameter(format!("{crit:?} splits do not fit a {task} forest")));
        }
    };
    let n = data.n_samples();
    let target = data.target();
    let y = target.as_slice().expect("contiguous target");
    let response = match kind {
        EnsembleKind::RfClassification => Response::Classes(y),
        _ => Response::Values(y),
    };
    let x = data.features();
    let trees: Result<Vec<Tree<F>>> = (0..params.num_trees)
        .into_par_iter()
        .map(|m| {
            let mut rng = stream_rng(seed, m as u64);
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow_tree(x, response, rows, &params.tree, &mut rng)
        })
        .collect();
    Ensemble::from_trees(kind, EnsembleParams::Rf(params.clone()), trees?, data.n_features())
}

fn default_base_score<F: Real>(loss: Loss, y: ArrayView1<'_, F>) -> F {
    match loss {
        Loss::SquaredError => F::lit(0.5),
        Loss::Logistic => {
            let eps = F::lit(1e-6);
            let prevalence = y.sum() / F::from_count(y.len());
            let p = prevalence.max(eps).min(F::one() - eps);
            (p / (F::one() - p)).ln()
        }
    }
}

/// Fits a gradient-boosted ensemble round by round on all rows and all
/// features. Each tree is grown greedily on the current gradients and
/// hessians; the running score moves by `eta` times the leaf weight.
pub fn fit_gbt<F: Real>(data: &Dataset<F>, params: &GbtParams<F>, seed: u64) -> Result<Ensemble<F>> {
    params.validate()?;
    let kind = match params.loss {
        Loss::SquaredError => EnsembleKind::GbtRegression,
        Loss::Logistic => {
            if data.task() != Task::Classification {
                return Err(Error::InvalidParameter("logistic loss needs 0/1 targets".into()));
            }
            EnsembleKind::GbtClassification
        }
    };
    let x = data.features();
    let y = data.target();
    let (n, p) = x.dim();
    let base = params.base_score.unwrap_or_else(|| default_base_score(params.loss, y));
    let tree_params = TreeParams {
        min_node_size: 1,
        max_depth: Some(params.max_depth),
        mtry: Some(p),
        criterion: SplitCriterion::XgbGain,
    };
    let reg = XgbRegularization { lambda_w: params.lambda_w, gamma: params.gamma, min_child_weight: params.min_child_weight };

    let mut score = vec![base; n];
    let mut grad = vec![F::zero(); n];
    let mut hess = vec![F::zero(); n];
    let mut trees = Vec::with_capacity(params.rounds);
    for m in 0..params.rounds {
        for i in 0..n {
            let (g, h) = match params.loss {
                Loss::SquaredError => (score[i] - y[i], F::one()),
                Loss::Logistic => {
                    let prob = sigmoid(score[i]);
                    (prob - y[i], prob * (F::one() - prob))
                }
            };
            grad[i] = g;
            hess[i] = h;
        }
        let mut rng = stream_rng(seed, m as u64);
        let response = Response::Gradients { grad: &grad, hess: &hess, reg };
        let tree = grow_tree(x, response, (0..n).collect(), &tree_params, &mut rng)?;
        for (i, s) in score.iter_mut().enumerate() {
            *s += params.eta * tree.value_unchecked(x.row(i));
        }
        trees.push(tree);
    }
    let mut snapshot = params.clone();
    snapshot.base_score = Some(base);
    Ensemble::from_trees(kind, EnsembleParams::Gbt(snapshot), trees, p)
}

/// Free-function form of [`Ensemble::leaf_assignments`].
pub fn leaf_assignments<F: Real>(e: &Ensemble<F>, x: ArrayView2<'_, F>) -> Result<Array2<usize>> {
    e.leaf_assignments(x)
}
