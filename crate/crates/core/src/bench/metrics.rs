use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;

/// Random train/test partition of `0..n`; the training part has
/// `round(train_fraction * n)` indices. Both parts come back sorted.
pub fn split<R: Rng + ?Sized>(n: usize, train_fraction: f64, rng: &mut R) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 4 {
        return Err(Error::InvalidInput(format!("need at least 4 rows to split, got {n}")));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!("train fraction {train_fraction} outside (0, 1)")));
    }
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut test = idx.split_off(n_train);
    idx.sort_unstable();
    test.sort_unstable();
    Ok((idx, test))
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { expected: b, got: a });
    }
    if a == 0 {
        return Err(Error::InvalidInput("empty prediction vector".into()));
    }
    Ok(())
}

pub fn mse<F: Real>(pred: &[F], truth: &[F]) -> Result<F> {
    check_lengths(pred.len(), truth.len())?;
    let sum: F = pred.iter().zip(truth).map(|(&a, &b)| (a - b) * (a - b)).sum();
    Ok(sum / F::from_count(pred.len()))
}

pub fn accuracy<F: Real>(pred: &[F], truth: &[F]) -> Result<F> {
    check_lengths(pred.len(), truth.len())?;
    let is_class = |v: F| v == F::zero() || v == F::one();
    if !pred.iter().chain(truth).all(|&v| is_class(v)) {
        return Err(Error::InvalidInput("accuracy needs 0/1 labels".into()));
    }
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(F::from_count(hits) / F::from_count(pred.len()))
}

/// One evaluation: a metric of one method on one repetition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub setup: String,
    pub n: usize,
    pub p: usize,
    pub rep: usize,
    pub method: String,
    pub metric: String,
    pub value: f64,
}

pub const RESULT_HEADER: &str = "setup,n,p,rep,method,metric,value";

impl ResultRow {
    pub fn to_csv_line(&self) -> String {
        format!("{},{},{},{},{},{},{}", self.setup, self.n, self.p, self.rep, self.method, self.metric, self.value)
    }
}

pub fn rows_to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(RESULT_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv_line());
        out.push('\n');
    }
    out
}

/// Mean and spread of a metric over repetitions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub setup: String,
    pub method: String,
    pub metric: String,
    pub mean: f64,
    pub sd: f64,
}

/// Rounds to six significant digits.
pub fn round_sig6(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.5e}").parse().expect("formatted float parses")
}

/// Groups rows by (setup, method, metric) in first-seen order and reports
/// the mean and the sample standard deviation (zero for a single rep).
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut order: Vec<(String, String, String)> = Vec::new();
    let mut groups: BTreeMap<(String, String, String), Vec<f64>> = BTreeMap::new();
    for r in rows {
        let key = (r.setup.clone(), r.method.clone(), r.metric.clone());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r.value);
    }
    order
        .into_iter()
        .map(|key| {
            let vals = &groups[&key];
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let sd = if vals.len() > 1 {
                (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            let (setup, method, metric) = key;
            SummaryRow { setup, method, metric, mean: round_sig6(mean), sd: round_sig6(sd) }
        })
        .collect()
}
