//! CART-style binary trees with axis-aligned splits.
//!
//! Splits are found by an exhaustive scan: for every candidate feature the
//! node's rows are sorted and each midpoint between consecutive distinct
//! values is scored. Routing is `x[feature] <= threshold` to the left child.
//! Leaves carry a dense id in `0..n_leaves` assigned in depth-first,
//! left-first order, which is what the ensemble kernels key on.

use ndarray::{ArrayView1, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Task};
use crate::error::{Error, Result};
use crate::num::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitCriterion {
    /// Reduction in within-node sum of squared errors.
    Variance,
    /// Size-weighted decrease of Gini impurity (binary targets).
    Gini,
    /// Second-order structure-score gain on gradient/hessian statistics.
    XgbGain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Minimum number of training rows in every leaf.
    pub min_node_size: usize,
    pub max_depth: Option<usize>,
    /// Candidate features drawn per node; `None` means `floor(sqrt(p))`.
    pub mtry: Option<usize>,
    pub criterion: SplitCriterion,
}

impl TreeParams {
    pub fn regression() -> Self {
        Self { min_node_size: 5, max_depth: None, mtry: None, criterion: SplitCriterion::Variance }
    }

    pub fn classification() -> Self {
        Self { min_node_size: 1, max_depth: None, mtry: None, criterion: SplitCriterion::Gini }
    }

    pub fn for_task(task: Task) -> Self {
        match task {
            Task::Regression => Self::regression(),
            Task::Classification => Self::classification(),
        }
    }

    /// Resolved number of candidate features for `p` inputs.
    pub fn mtry_for(&self, p: usize) -> Result<usize> {
        let m = self.mtry.unwrap_or_else(|| default_mtry(p));
        if m == 0 || m > p {
            return Err(Error::InvalidParameter(format!("mtry {m} outside [1, {p}]")));
        }
        Ok(m)
    }

    fn validate(&self, p: usize) -> Result<usize> {
        if self.min_node_size == 0 {
            return Err(Error::InvalidParameter("min_node_size must be >= 1".into()));
        }
        if self.max_depth == Some(0) {
            return Err(Error::InvalidParameter("max_depth must be >= 1".into()));
        }
        self.mtry_for(p)
    }
}

pub fn default_mtry(p: usize) -> usize {
    ((p as f64).sqrt().floor() as usize).max(1)
}

/// Regularization of the second-order gain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct XgbRegularization<F> {
    /// L2 penalty on leaf weights.
    pub lambda_w: F,
    /// Penalty per leaf; a split must beat it.
    pub gamma: F,
    /// Minimum hessian sum in each child.
    pub min_child_weight: F,
}

/// What a tree is fitted against.
#[derive(Clone, Copy, Debug)]
pub enum Response<'a, F> {
    /// Real-valued targets, variance splits, leaf value = mean.
    Values(&'a [F]),
    /// `0`/`1` targets, Gini splits, leaf value = class-1 fraction.
    Classes(&'a [F]),
    /// Per-row loss derivatives, leaf value = `-G / (H + lambda_w)`.
    Gradients { grad: &'a [F], hess: &'a [F], reg: XgbRegularization<F> },
}

impl<'a, F: Real> Response<'a, F> {
    pub fn criterion(&self) -> SplitCriterion {
        match self {
            Response::Values(_) => SplitCriterion::Variance,
            Response::Classes(_) => SplitCriterion::Gini,
            Response::Gradients { .. } => SplitCriterion::XgbGain,
        }
    }

    fn len(&self) -> usize {
        match self {
            Response::Values(y) | Response::Classes(y) => y.len(),
            Response::Gradients { grad, .. } => grad.len(),
        }
    }

    fn is_pure(&self, rows: &[usize]) -> bool {
        match self {
            Response::Values(y) | Response::Classes(y) => {
                let first = y[rows[0]];
                rows.iter().all(|&r| y[r] == first)
            }
            Response::Gradients { .. } => false,
        }
    }

    fn leaf_value(&self, rows: &[usize]) -> F {
        match self {
            Response::Values(y) | Response::Classes(y) => {
                // offset by the first value so constant targets reproduce exactly
                let base = y[rows[0]];
                let shift: F = rows.iter().map(|&r| y[r] - base).sum();
                base + shift / F::from_count(rows.len())
            }
            Response::Gradients { grad, hess, reg } => {
                let g: F = rows.iter().map(|&r| grad[r]).sum();
                let h: F = rows.iter().map(|&r| hess[r]).sum();
                -g / (h + reg.lambda_w)
            }
        }
    }
}

/// Outcome of a split search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitCandidate<F> {
    pub feature: usize,
    pub threshold: F,
    pub gain: F,
}

#[derive(Clone, Copy, Default)]
struct Acc<F> {
    count: usize,
    s1: F,
    s2: F,
}

/// Best split of `rows` over `candidate_features`.
///
/// Every midpoint between consecutive distinct sorted values is scored; a
/// split is legal only if both children keep `min_node_size` rows (and, for
/// gradient responses, `min_child_weight` hessian). Ties go to the lower
/// feature index, then the lower threshold. Returns `None` when no legal
/// split has strictly positive gain.
pub fn best_split<F: Real>(
    x: ArrayView2<'_, F>,
    response: &Response<'_, F>,
    rows: &[usize],
    candidate_features: &[usize],
    min_node_size: usize,
) -> Option<SplitCandidate<F>> {
    if rows.is_empty() || candidate_features.is_empty() {
        return None;
    }
    if response.is_pure(rows) {
        return None;
    }
    let min_node_size = min_node_size.max(1);
    if rows.len() < 2 * min_node_size {
        return None;
    }

    let mut features = candidate_features.to_vec();
    features.sort_unstable();
    features.dedup();

    let base = match response {
        Response::Values(y) => y[rows[0]],
        _ => F::zero(),
    };
    let stat = |r: usize| -> (F, F) {
        match response {
            Response::Values(y) => (y[r] - base, F::zero()),
            Response::Classes(y) => (y[r], F::zero()),
            Response::Gradients { grad, hess, .. } => (grad[r], hess[r]),
        }
    };
    let mut total = Acc::<F>::default();
    for &r in rows {
        let (a, b) = stat(r);
        total.count += 1;
        total.s1 += a;
        total.s2 += b;
    }

    let mut best: Option<SplitCandidate<F>> = None;
    let mut order: Vec<(F, usize)> = Vec::with_capacity(rows.len());
    for &f in &features {
        order.clear();
        order.extend(rows.iter().map(|&r| (x[[r, f]], r)));
        order.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features").then(a.1.cmp(&b.1)));
        if order[0].0 == order[order.len() - 1].0 {
            continue;
        }
        let mut left = Acc::<F>::default();
        for i in 0..order.len() - 1 {
            let (a, b) = stat(order[i].1);
            left.count += 1;
            left.s1 += a;
            left.s2 += b;
            let (lo, hi) = (order[i].0, order[i + 1].0);
            if lo == hi {
                continue;
            }
            let right_count = total.count - left.count;
            if left.count < min_node_size || right_count < min_node_size {
                continue;
            }
            let right = Acc { count: right_count, s1: total.s1 - left.s1, s2: total.s2 - left.s2 };
            let Some(gain) = score(response, &total, &left, &right) else { continue };
            if gain > F::zero() && best.is_none_or(|b| gain > b.gain) {
                best = Some(SplitCandidate { feature: f, threshold: midpoint(lo, hi), gain });
            }
        }
    }
    best
}

fn midpoint<F: Real>(lo: F, hi: F) -> F {
    let mid = lo + (hi - lo) / F::lit(2.0);
    if mid >= hi { lo } else { mid }
}

fn score<F: Real>(response: &Response<'_, F>, total: &Acc<F>, left: &Acc<F>, right: &Acc<F>) -> Option<F> {
    match response {
        Response::Values(_) => {
            let (nl, nr, n) = (F::from_count(left.count), F::from_count(right.count), F::from_count(total.count));
            let diff = left.s1 / nl - right.s1 / nr;
            Some(nl * nr / n * diff * diff)
        }
        Response::Classes(_) => {
            // exact integer numerator so equal-proportion splits score exactly zero
            let ones = |a: &Acc<F>| a.s1.to_i64().expect("class count") as i128;
            let (n, nl, nr) = (total.count as i128, left.count as i128, right.count as i128);
            let sq = |c1: i128, c: i128| c1 * c1 + (c - c1) * (c - c1);
            let num = sq(ones(left), nl) * nr * n + sq(ones(right), nr) * nl * n - sq(ones(total), n) * nl * nr;
            let den = n * n * nl * nr;
            Some(F::from_i128(num)? / F::from_i128(den)?)
        }
        Response::Gradients { reg, .. } => {
            if left.s2 < reg.min_child_weight || right.s2 < reg.min_child_weight {
                return None;
            }
            let term = |a: &Acc<F>| a.s1 * a.s1 / (a.s2 + reg.lambda_w);
            Some(F::lit(0.5) * (term(left) + term(right) - term(total)) - reg.gamma)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node<F> {
    Split { feature: usize, threshold: F, left: usize, right: usize },
    Leaf { leaf_id: usize, value: F, n_samples: usize },
}

/// A fitted tree. Node 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTree<F>", bound(deserialize = "F: Real"))]
pub struct Tree<F> {
    nodes: Vec<Node<F>>,
    n_features: usize,
    #[serde(skip_serializing)]
    n_leaves: usize,
}

#[derive(Deserialize)]
struct RawTree<F> {
    nodes: Vec<Node<F>>,
    n_features: usize,
}

impl<F: Real> TryFrom<RawTree<F>> for Tree<F> {
    type Error = Error;

    fn try_from(raw: RawTree<F>) -> Result<Self> {
        Tree::from_nodes(raw.nodes, raw.n_features)
    }
}

impl<F: Real> Tree<F> {
    /// Builds a tree from explicit nodes, checking that child links stay in
    /// range, every node is reached exactly once from the root, and leaf ids
    /// are exactly `0..n_leaves`.
    pub fn from_nodes(nodes: Vec<Node<F>>, n_features: usize) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidInput("tree has no nodes".into()));
        }
        let mut seen = vec![false; nodes.len()];
        let mut leaf_seen = vec![false; nodes.len()];
        let mut n_leaves = 0;
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if i >= nodes.len() || seen[i] {
                return Err(Error::InvalidInput(format!("malformed tree link to node {i}")));
            }
            seen[i] = true;
            match &nodes[i] {
                Node::Split { feature, threshold, left, right } => {
                    if *feature >= n_features || !threshold.is_finite() {
                        return Err(Error::InvalidInput(format!("bad split at node {i}")));
                    }
                    stack.push(*right);
                    stack.push(*left);
                }
                Node::Leaf { leaf_id, .. } => {
                    if *leaf_id >= nodes.len() || leaf_seen[*leaf_id] {
                        return Err(Error::InvalidInput(format!("duplicate leaf id {leaf_id}")));
                    }
                    leaf_seen[*leaf_id] = true;
                    n_leaves += 1;
                }
            }
        }
        if seen.iter().any(|s| !s) || leaf_seen[..n_leaves].iter().any(|s| !s) {
            return Err(Error::InvalidInput("tree has unreachable nodes or sparse leaf ids".into()));
        }
        Ok(Self { nodes, n_features, n_leaves })
    }

    pub fn single_leaf(value: F, n_features: usize) -> Self {
        Self { nodes: vec![Node::Leaf { leaf_id: 0, value, n_samples: 0 }], n_features, n_leaves: 1 }
    }

    pub fn nodes(&self) -> &[Node<F>] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    /// Length of the longest root-to-leaf path, counted in edges.
    pub fn depth(&self) -> usize {
        let mut max = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, d)) = stack.pop() {
            match self.nodes[i] {
                Node::Split { left, right, .. } => {
                    stack.push((left, d + 1));
                    stack.push((right, d + 1));
                }
                Node::Leaf { .. } => max = max.max(d),
            }
        }
        max
    }

    /// `(leaf_id, value, n_samples)` for every leaf, ordered by leaf id.
    pub fn leaves(&self) -> Vec<(usize, F, usize)> {
        let mut out: Vec<_> = self
            .nodes
            .iter()
            .filter_map(|n| match *n {
                Node::Leaf { leaf_id, value, n_samples } => Some((leaf_id, value, n_samples)),
                Node::Split { .. } => None,
            })
            .collect();
        out.sort_unstable_by_key(|l| l.0);
        out
    }

    fn route(&self, x: ArrayView1<'_, F>) -> (usize, F) {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
                Node::Leaf { leaf_id, value, .. } => return (leaf_id, value),
            }
        }
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.n_features {
            return Err(Error::DimensionMismatch { expected: self.n_features, got });
        }
        Ok(())
    }

    pub fn predict(&self, x: ArrayView1<'_, F>) -> Result<F> {
        self.check_dim(x.len())?;
        Ok(self.route(x).1)
    }

    pub fn leaf_index(&self, x: ArrayView1<'_, F>) -> Result<usize> {
        self.check_dim(x.len())?;
        Ok(self.route(x).0)
    }

    /// Routing without the dimension check; callers validate once per batch.
    pub(crate) fn leaf_unchecked(&self, x: ArrayView1<'_, F>) -> usize {
        self.route(x).0
    }

    pub(crate) fn value_unchecked(&self, x: ArrayView1<'_, F>) -> F {
        self.route(x).1
    }
}

/// Fits a tree on every row of `data`, using variance splits for regression
/// and Gini splits for classification.
pub fn fit_tree<F: Real, R: Rng + ?Sized>(data: &Dataset<F>, params: &TreeParams, rng: &mut R) -> Result<Tree<F>> {
    let target = data.target();
    let y = target.as_slice().expect("contiguous target");
    let response = match params.criterion {
        SplitCriterion::Variance => Response::Values(y),
        SplitCriterion::Gini => {
            if data.task() != Task::Classification {
                return Err(Error::InvalidParameter("gini criterion needs a classification dataset".into()));
            }
            Response::Classes(y)
        }
        SplitCriterion::XgbGain => {
            return Err(Error::InvalidParameter("xgb_gain trees are fitted from gradients by the booster".into()));
        }
    };
    grow_tree(data.features(), response, (0..data.n_samples()).collect(), params, rng)
}

/// Grows a tree on `rows` (which may repeat, as in a bootstrap sample).
pub fn grow_tree<F: Real, R: Rng + ?Sized>(
    x: ArrayView2<'_, F>,
    response: Response<'_, F>,
    rows: Vec<usize>,
    params: &TreeParams,
    rng: &mut R,
) -> Result<Tree<F>> {
    let p = x.ncols();
    let mtry = params.validate(p)?;
    if rows.is_empty() {
        return Err(Error::InvalidInput("cannot grow a tree on zero rows".into()));
    }
    if response.len() != x.nrows() {
        return Err(Error::DimensionMismatch { expected: x.nrows(), got: response.len() });
    }
    let mut grower = Grower { x, response, params, mtry, rng, nodes: Vec::new(), next_leaf: 0 };
    grower.grow(rows, 0);
    let n_leaves = grower.next_leaf;
    Ok(Tree { nodes: grower.nodes, n_features: p, n_leaves })
}

struct Grower<'a, 'r, F, R: ?Sized> {
    x: ArrayView2<'a, F>,
    response: Response<'a, F>,
    params: &'a TreeParams,
    mtry: usize,
    rng: &'r mut R,
    nodes: Vec<Node<F>>,
    next_leaf: usize,
}

impl<F: Real, R: Rng + ?Sized> Grower<'_, '_, F, R> {
    fn leaf(&mut self, rows: &[usize]) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            leaf_id: self.next_leaf,
            value: self.response.leaf_value(rows),
            n_samples: rows.len(),
        });
        self.next_leaf += 1;
        id
    }

    fn candidates(&mut self) -> Vec<usize> {
        let p = self.x.ncols();
        if self.mtry == p {
            (0..p).collect()
        } else {
            let mut c = rand::seq::index::sample(self.rng, p, self.mtry).into_vec();
            c.sort_unstable();
            c
        }
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let min = self.params.min_node_size;
        if rows.len() < 2 * min
            || self.params.max_depth.is_some_and(|d| depth >= d)
            || self.response.is_pure(&rows)
        {
            return self.leaf(&rows);
        }
        let features = self.candidates();
        let Some(split) = best_split(self.x, &self.response, &rows, &features, min) else {
            return self.leaf(&rows);
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&r| self.x[[r, split.feature]] <= split.threshold);
        let id = self.nodes.len();
        self.nodes.push(Node::Split { feature: split.feature, threshold: split.threshold, left: 0, right: 0 });
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        if let Node::Split { left: l, right: r, .. } = &mut self.nodes[id] {
            *l = left;
            *r = right;
        }
        id
    }
}
