//! Synthetic benchmark generators: Friedman, a correlated checkerboard,
//! van der Laan and two Meier setups, each with a continuous target and a
//! median-centred logistic binary target.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{sigmoid, Real};
use crate::rng::{derive_seed, stream_rng};

/// Lag-one correlation of the checkerboard feature law.
pub const CHECKERBOARD_RHO: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimSetup {
    Friedman,
    Checkerboard,
    VanDerLaan,
    Meier1,
    Meier2,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FeatureLaw {
    IidUniform01,
    /// Rows are `N(0, S)` with `S_jk = rho^|j-k|`.
    Ar1Gaussian { rho: f64 },
}

impl SimSetup {
    pub const ALL: [SimSetup; 5] =
        [SimSetup::Friedman, SimSetup::Checkerboard, SimSetup::VanDerLaan, SimSetup::Meier1, SimSetup::Meier2];

    pub fn name(self) -> &'static str {
        match self {
            SimSetup::Friedman => "friedman",
            SimSetup::Checkerboard => "checkerboard",
            SimSetup::VanDerLaan => "vanderlaan",
            SimSetup::Meier1 => "meier1",
            SimSetup::Meier2 => "meier2",
        }
    }

    /// Smallest feature count the response function reads.
    pub fn min_p(self) -> usize {
        match self {
            SimSetup::Friedman => 5,
            SimSetup::Checkerboard => 20,
            SimSetup::VanDerLaan => 10,
            SimSetup::Meier1 | SimSetup::Meier2 => 4,
        }
    }

    /// Standard deviation of the additive Gaussian noise.
    pub fn noise_sd(self) -> f64 {
        match self {
            SimSetup::Friedman | SimSetup::Checkerboard => 1.0,
            _ => 0.5f64.sqrt(),
        }
    }

    pub fn feature_law(self) -> FeatureLaw {
        match self {
            SimSetup::Checkerboard => FeatureLaw::Ar1Gaussian { rho: CHECKERBOARD_RHO },
            _ => FeatureLaw::IidUniform01,
        }
    }

    fn check_p(self, p: usize) -> Result<()> {
        if p < self.min_p() {
            return Err(Error::InvalidInput(format!("{} needs p >= {}, got {p}", self.name(), self.min_p())));
        }
        Ok(())
    }
}

impl std::fmt::Display for SimSetup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SimSetup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SimSetup::ALL
            .into_iter()
            .find(|setup| setup.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown setup `{s}`")))
    }
}

/// Noiseless response `f(x)`. Features are 1-indexed in the usual
/// statements of these models; `x[0]` here is `x1`.
pub fn f_value<F: Real>(setup: SimSetup, x: &[F]) -> Result<F> {
    setup.check_p(x.len())?;
    let c = F::lit;
    let pi = F::PI();
    // centred uniform: 2(x - 0.5)
    let t = |j: usize| c(2.0) * (x[j - 1] - c(0.5));
    let v = match setup {
        SimSetup::Friedman => {
            c(10.0) * (pi * x[0] * x[1]).sin() + c(20.0) * (x[2] - c(0.5)).powi(2) + c(10.0) * x[3] + c(5.0) * x[4]
        }
        SimSetup::Checkerboard => c(2.0) * x[4] * x[9] + c(2.0) * x[14] * x[19],
        SimSetup::VanDerLaan => t(1) * t(2) + t(3).powi(2) + t(8) * t(10) - t(6).powi(2),
        SimSetup::Meier1 => -(c(2.0) * t(1)).sin() + t(2).powi(2) + t(3) - t(4).exp(),
        SimSetup::Meier2 => {
            let two_pi = c(2.0) * pi;
            -t(1) + (c(2.0) * t(2) - F::one()).powi(2) + (two_pi * t(3)).sin() / (c(2.0) - (two_pi * t(4)).sin())
                + c(2.0) * (two_pi * t(4)).cos()
                + c(4.0) * (two_pi * t(4)).cos().powi(2)
        }
    };
    Ok(v)
}

fn fill_row<R: Rng + ?Sized>(law: FeatureLaw, row: &mut [f64], rng: &mut R) {
    match law {
        FeatureLaw::IidUniform01 => row.iter_mut().for_each(|v| *v = rng.random::<f64>()),
        FeatureLaw::Ar1Gaussian { rho } => {
            // rows of the lower Cholesky factor of rho^|j-k| applied to iid
            // normals: x1 = z1, xj = rho x(j-1) + sqrt(1 - rho^2) zj
            let innov = (1.0 - rho * rho).sqrt();
            let mut prev = 0.0;
            for (j, v) in row.iter_mut().enumerate() {
                let z: f64 = StandardNormal.sample(rng);
                prev = if j == 0 { z } else { rho * prev + innov * z };
                *v = prev;
            }
        }
    }
}

/// `n x p` feature matrix drawn from the setup's feature law.
pub fn gen_features<R: Rng + ?Sized>(setup: SimSetup, n: usize, p: usize, rng: &mut R) -> Result<Array2<f64>> {
    setup.check_p(p)?;
    let mut x = Array2::<f64>::zeros((n, p));
    for mut row in x.outer_iter_mut() {
        fill_row(setup.feature_law(), row.as_slice_mut().expect("row-major"), rng);
    }
    Ok(x)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimSample {
    pub features: Array2<f64>,
    pub f_values: Array1<f64>,
    pub continuous_target: Array1<f64>,
    pub binary_target: Option<Array1<f64>>,
    pub median_used: Option<f64>,
}

/// Continuous sample with the setup's own noise level.
pub fn gen_continuous<R: Rng + ?Sized>(setup: SimSetup, n: usize, p: usize, rng: &mut R) -> Result<SimSample> {
    gen_continuous_with_noise(setup, n, p, setup.noise_sd(), rng)
}

pub fn gen_continuous_with_noise<R: Rng + ?Sized>(
    setup: SimSetup,
    n: usize,
    p: usize,
    noise_sd: f64,
    rng: &mut R,
) -> Result<SimSample> {
    if !(noise_sd >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise sd must be non-negative, got {noise_sd}")));
    }
    let features = gen_features(setup, n, p, rng)?;
    let f_values: Array1<f64> = features
        .outer_iter()
        .map(|row| f_value(setup, row.as_slice().expect("row-major")))
        .collect::<Result<_>>()?;
    let noise: Array1<f64> = (0..n).map(|_| noise_sd * Distribution::<f64>::sample(&StandardNormal, rng)).collect();
    let continuous_target = &f_values + &noise;
    Ok(SimSample { features, f_values, continuous_target, binary_target: None, median_used: None })
}

/// `P(Y = 1 | outcome) = sigmoid(outcome - median)`.
pub fn class_probability(outcome: f64, median: f64) -> f64 {
    sigmoid(outcome - median)
}

/// Continuous sample plus Bernoulli labels drawn with probability
/// `sigmoid(y - median)` from the continuous outcome `y`.
pub fn gen_binary<R: Rng + ?Sized>(setup: SimSetup, n: usize, p: usize, rng: &mut R, median: f64) -> Result<SimSample> {
    let mut sample = gen_continuous(setup, n, p, rng)?;
    let labels: Array1<f64> = sample
        .continuous_target
        .iter()
        .map(|&y| if rng.random::<f64>() < class_probability(y, median) { 1.0 } else { 0.0 })
        .collect();
    sample.binary_target = Some(labels);
    sample.median_used = Some(median);
    Ok(sample)
}

/// Monte-Carlo draws are generated in chunks of this many rows, chunk `c`
/// using its own derived stream.
const MC_CHUNK: usize = 1 << 16;

/// Smallest Monte-Carlo size accepted by the estimators.
pub const MIN_MC_SAMPLES: usize = 100_000;

/// Default Monte-Carlo size for median and Bayes-error estimates.
pub const DEFAULT_MC_SAMPLES: usize = 1_000_000;

fn mc_outcomes(setup: SimSetup, p: usize, n_mc: usize, seed: u64) -> Result<Vec<f64>> {
    setup.check_p(p)?;
    if n_mc < MIN_MC_SAMPLES {
        return Err(Error::InvalidParameter(format!("need at least {MIN_MC_SAMPLES} Monte-Carlo draws, got {n_mc}")));
    }
    let chunks = n_mc.div_ceil(MC_CHUNK);
    let sd = setup.noise_sd();
    let parts: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = MC_CHUNK.min(n_mc - c * MC_CHUNK);
            let mut rng = stream_rng(seed, c as u64);
            let mut row = vec![0.0; p];
            (0..len)
                .map(|_| {
                    fill_row(setup.feature_law(), &mut row, &mut rng);
                    let f = f_value(setup, &row).expect("p checked");
                    let e: f64 = StandardNormal.sample(&mut rng);
                    f + sd * e
                })
                .collect()
        })
        .collect();
    Ok(parts.concat())
}

/// Empirical median of a slice (mean of the two middle values for even length).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    let mid = v.len() / 2;
    let (lo, &mut upper, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    if values.len() % 2 == 1 {
        return Some(upper);
    }
    let lower = lo.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some(0.5 * (lower + upper))
}

pub fn median_view(values: ArrayView1<'_, f64>) -> Option<f64> {
    median(&values.to_vec())
}

/// Median of the continuous outcome `f(X) + noise` over `n_mc` fresh draws.
pub fn estimate_median(setup: SimSetup, p: usize, n_mc: usize, seed: u64) -> Result<f64> {
    let draws = mc_outcomes(setup, p, n_mc, seed)?;
    Ok(median(&draws).expect("non-empty"))
}

/// Monte-Carlo estimate of `1 - E[max(p, 1 - p)]` for the binary version of
/// `setup`, with the median estimated from an independent draw.
pub fn bayes_error(setup: SimSetup, p: usize, n_mc: usize, seed: u64) -> Result<f64> {
    let m = estimate_median(setup, p, n_mc, derive_seed(seed, 0))?;
    let draws = mc_outcomes(setup, p, n_mc, derive_seed(seed, 1))?;
    let mean_max: f64 = draws
        .chunks(MC_CHUNK)
        .map(|c| {
            c.iter()
                .map(|&y| {
                    let prob = class_probability(y, m);
                    prob.max(1.0 - prob)
                })
                .sum::<f64>()
        })
        .sum::<f64>()
        / draws.len() as f64;
    Ok((1.0 - mean_max).clamp(0.0, 0.5))
}
