//! Experiment harness: repeated random splits, the four methods (forest,
//! forest kernel, booster, booster kernel) and MSE / accuracy reporting.

mod metrics;

pub use metrics::{accuracy, mse, round_sig6, rows_to_csv, split, summarize, ResultRow, SummaryRow, RESULT_HEADER};

use ndarray::{Array1, ArrayView1};
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Task};
use crate::ensemble::{fit_gbt, fit_rf, Ensemble, GbtParams, RfParams};
use crate::error::{Error, Result};
use crate::kernels::ensemble_kernel;
use crate::krr::{fit_krr, select_lambda};
use crate::num::Real;
use crate::rng::{derive_seed, stream_rng};
use crate::simgen::{self, SimSetup};
use crate::tabular::TabularDataset;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rf,
    RfKernel,
    Gbt,
    GbtKernel,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Rf, Method::RfKernel, Method::Gbt, Method::GbtKernel];

    pub fn name(self) -> &'static str {
        match self {
            Method::Rf => "rf",
            Method::RfKernel => "rf_kernel",
            Method::Gbt => "gbt",
            Method::GbtKernel => "gbt_kernel",
        }
    }

    fn uses_forest(self) -> bool {
        matches!(self, Method::Rf | Method::RfKernel)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown method `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Continuous,
    Binary,
}

impl TargetKind {
    pub fn task(self) -> Task {
        match self {
            TargetKind::Continuous => Task::Regression,
            TargetKind::Binary => Task::Classification,
        }
    }
}

impl std::str::FromStr for TargetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuous" => Ok(TargetKind::Continuous),
            "binary" => Ok(TargetKind::Binary),
            other => Err(Error::InvalidInput(format!("unknown target `{other}`"))),
        }
    }
}

/// Explicit hyperparameter overrides, as read from a `--config` JSON file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperOverrides {
    pub num_trees: Option<usize>,
    pub mtry: Option<usize>,
    pub min_node_size: Option<usize>,
    pub rounds: Option<usize>,
    pub eta: Option<f64>,
    pub max_depth: Option<usize>,
    pub gamma: Option<f64>,
    pub lambda_w: Option<f64>,
}

impl HyperOverrides {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub methods: Vec<Method>,
    pub reps: usize,
    pub train_fraction: f64,
    pub num_trees: usize,
    pub rounds: usize,
    /// Shallow-tree variant: forest leaves of at least 10 (regression) or
    /// 2 (classification) rows, booster depth 2.
    pub sensitivity: bool,
    pub overrides: HyperOverrides,
    pub seed: u64,
    /// Monte-Carlo draws for the binarization median of simulated data.
    pub median_samples: usize,
    /// Real datasets larger than this are subsampled per repetition.
    pub subsample_cap: usize,
}

impl BenchConfig {
    /// Desk-scale defaults: 20 repetitions, 100 trees, 50 boosting rounds.
    pub fn desk() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            reps: 20,
            train_fraction: 0.75,
            num_trees: 100,
            rounds: 50,
            sensitivity: false,
            overrides: HyperOverrides::default(),
            seed: 0,
            median_samples: simgen::DEFAULT_MC_SAMPLES,
            subsample_cap: 2000,
        }
    }

    /// Full protocol: 200 repetitions, 500 trees, 100 boosting rounds.
    pub fn full_scale() -> Self {
        Self { reps: 200, num_trees: 500, rounds: 100, ..Self::desk() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidParameter("reps must be >= 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidParameter("train_fraction must lie in (0, 1)".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidParameter("no methods selected".into()));
        }
        Ok(())
    }

    pub fn rf_params(&self, task: Task) -> RfParams {
        let mut params = RfParams::for_task(task).with_trees(self.num_trees);
        if self.sensitivity {
            params.tree.min_node_size = match task {
                Task::Regression => 10,
                Task::Classification => 2,
            };
        }
        let o = &self.overrides;
        if let Some(v) = o.num_trees {
            params.num_trees = v;
        }
        if let Some(v) = o.mtry {
            params.tree.mtry = Some(v);
        }
        if let Some(v) = o.min_node_size {
            params.tree.min_node_size = v;
        }
        params
    }

    pub fn gbt_params<F: Real>(&self, task: Task) -> GbtParams<F> {
        let mut params = GbtParams::<F>::for_task(task).with_rounds(self.rounds);
        if self.sensitivity {
            params.max_depth = 2;
        }
        let o = &self.overrides;
        if let Some(v) = o.rounds {
            params.rounds = v;
        }
        if let Some(v) = o.eta {
            params.eta = F::lit(v);
        }
        if let Some(v) = o.max_depth {
            params.max_depth = v;
        }
        if let Some(v) = o.gamma {
            params.gamma = F::lit(v);
        }
        if let Some(v) = o.lambda_w {
            params.lambda_w = F::lit(v);
        }
        params
    }
}

/// Ensembles fitted on one training set; each is fitted only if some
/// requested method needs it.
#[derive(Clone, Debug)]
pub struct FittedEnsembles<F> {
    pub forest: Option<Ensemble<F>>,
    pub booster: Option<Ensemble<F>>,
}

pub fn fit_ensembles<F: Real>(
    methods: &[Method],
    train: &Dataset<F>,
    config: &BenchConfig,
    seed: u64,
) -> Result<FittedEnsembles<F>> {
    let task = train.task();
    let forest = if methods.iter().any(|m| m.uses_forest()) {
        Some(fit_rf(train, &config.rf_params(task), derive_seed(seed, 0))?)
    } else {
        None
    };
    let booster = if methods.iter().any(|m| !m.uses_forest()) {
        Some(fit_gbt(train, &config.gbt_params(task), derive_seed(seed, 1))?)
    } else {
        None
    };
    Ok(FittedEnsembles { forest, booster })
}

/// Kernel ridge prediction with an ensemble kernel: the train Gram matrix
/// picks the ridge, the test-by-train block gives the predictions.
pub fn kernel_predict<F: Real>(ensemble: &Ensemble<F>, train: &Dataset<F>, test_x: ndarray::ArrayView2<'_, F>) -> Result<Array1<F>> {
    let k_train = ensemble_kernel(ensemble, train.features(), train.features())?;
    let lambda = select_lambda(k_train.view())?;
    let model = fit_krr(k_train.view(), train.target(), lambda, train.task())?;
    let k_test = ensemble_kernel(ensemble, test_x, train.features())?;
    model.predict_task(k_test.view())
}

fn predict_with<F: Real>(method: Method, fitted: &FittedEnsembles<F>, train: &Dataset<F>, test: &Dataset<F>) -> Result<Array1<F>> {
    let missing = || Error::InvalidInput(format!("{} needs an ensemble that was not fitted", method.name()));
    let ensemble = if method.uses_forest() { fitted.forest.as_ref() } else { fitted.booster.as_ref() }.ok_or_else(missing)?;
    match method {
        Method::Rf | Method::Gbt => ensemble.predict_batch(test.features()),
        Method::RfKernel | Method::GbtKernel => kernel_predict(ensemble, train, test.features()),
    }
}

/// Fits what `method` needs on `train` and predicts every test row:
/// real values for regression, 0/1 classes for classification.
pub fn run_method<F: Real>(method: Method, train: &Dataset<F>, test: &Dataset<F>, config: &BenchConfig, seed: u64) -> Result<Array1<F>> {
    if train.n_features() != test.n_features() {
        return Err(Error::DimensionMismatch { expected: train.n_features(), got: test.n_features() });
    }
    let fitted = fit_ensembles(&[method], train, config, seed)?;
    predict_with(method, &fitted, train, test)
}

fn score<F: Real>(task: Task, pred: ArrayView1<'_, F>, truth: ArrayView1<'_, F>) -> Result<(&'static str, f64)> {
    let (p, t) = (pred.to_vec(), truth.to_vec());
    Ok(match task {
        Task::Regression => ("mse", mse(&p, &t)?.as_f64()),
        Task::Classification => ("accuracy", accuracy(&p, &t)?.as_f64()),
    })
}

/// Splits `data`, evaluates every configured method on the held-out rows
/// and returns one row per method.
fn evaluate_rep(name: &str, data: &Dataset<f64>, rep: usize, config: &BenchConfig, rep_seed: u64) -> Result<Vec<ResultRow>> {
    let mut split_rng = stream_rng(rep_seed, 1);
    let (train_idx, test_idx) = split(data.n_samples(), config.train_fraction, &mut split_rng)?;
    let (train, test) = (data.select(&train_idx), data.select(&test_idx));
    let fitted = fit_ensembles(&config.methods, &train, config, derive_seed(rep_seed, 2))?;
    config
        .methods
        .iter()
        .map(|&method| {
            let pred = predict_with(method, &fitted, &train, &test)?;
            let (metric, value) = score(data.task(), pred.view(), test.target())?;
            Ok(ResultRow {
                setup: name.to_owned(),
                n: data.n_samples(),
                p: data.n_features(),
                rep,
                method: method.name().to_owned(),
                metric: metric.to_owned(),
                value,
            })
        })
        .collect()
}

fn collect_reps<T: Send>(reps: usize, f: impl Fn(usize) -> Result<Vec<T>> + Sync + Send) -> Result<Vec<T>> {
    let per_rep: Vec<Result<Vec<T>>> = (0..reps).into_par_iter().map(f).collect();
    let mut out = Vec::new();
    for r in per_rep {
        out.extend(r?);
    }
    Ok(out)
}

/// Runs the simulation protocol for one setup. Repetition `r` draws its
/// data, split and ensemble seeds from `(config.seed, r)`; rows come back in
/// repetition order whatever the thread count.
pub fn run_simulation(setup: SimSetup, n: usize, p: usize, target: TargetKind, config: &BenchConfig) -> Result<Vec<ResultRow>> {
    config.validate()?;
    let median = match target {
        TargetKind::Binary => Some(simgen::estimate_median(setup, p, config.median_samples, derive_seed(config.seed, u64::MAX))?),
        TargetKind::Continuous => None,
    };
    collect_reps(config.reps, |rep| {
        let rep_seed = derive_seed(config.seed, rep as u64);
        let mut data_rng = stream_rng(rep_seed, 0);
        let (features, y) = match median {
            Some(m) => {
                let s = simgen::gen_binary(setup, n, p, &mut data_rng, m)?;
                (s.features, s.binary_target.expect("binary sample"))
            }
            None => {
                let s = simgen::gen_continuous(setup, n, p, &mut data_rng)?;
                (s.features, s.continuous_target)
            }
        };
        let data = Dataset::new(features, y, target.task())?;
        evaluate_rep(setup.name(), &data, rep, config, rep_seed)
    })
}

/// 1 where the value exceeds `median`, else 0.
pub fn dichotomize(values: ArrayView1<'_, f64>, median: f64) -> Array1<f64> {
    values.mapv(|v| if v > median { 1.0 } else { 0.0 })
}

/// Runs the real-data protocol: per repetition, subsample to
/// `config.subsample_cap` rows if larger, dichotomize at the (sub)sample
/// median for classification, split and evaluate.
pub fn run_real(data: &TabularDataset, task: Task, config: &BenchConfig) -> Result<Vec<ResultRow>> {
    config.validate()?;
    collect_reps(config.reps, |rep| {
        let rep_seed = derive_seed(config.seed, rep as u64);
        let mut rng = stream_rng(rep_seed, 0);
        let n = data.n_rows();
        let rows: Vec<usize> = if n > config.subsample_cap {
            let mut r = sample(&mut rng, n, config.subsample_cap).into_vec();
            r.sort_unstable();
            r
        } else {
            (0..n).collect()
        };
        let x = data.features.select(ndarray::Axis(0), &rows);
        let y = data.target.select(ndarray::Axis(0), &rows);
        let y = match task {
            Task::Regression => y,
            Task::Classification => {
                let m = simgen::median_view(y.view()).expect("non-empty");
                dichotomize(y.view(), m)
            }
        };
        let ds = Dataset::new(x, y, task)?;
        evaluate_rep(&data.name, &ds, rep, config, rep_seed)
    })
}
