//! Risks, L² errors against reference values, and the bias-variance
//! decomposition of the learning error.

use std::io::Write;

use crate::error::{ensure, Error, Result};
use crate::net::{ClippedNetwork, Scratch};
use crate::par;
use crate::rng::{derive_seed, tags, Stream};
use crate::sde::{
    capped_put_1d_params, capped_put_gbm_1d, grid_point_seed, mc_feynman_kac, simulate_terminal,
    KolmogorovProblem,
};
use crate::stats::{pairwise_sum, MeanEstimate};

use super::dataset::{generate_dataset, Dataset};
use super::train::{train_erm, FitReport, TrainConfig};

const CHUNK: usize = 2048;

/// `(1/m) Σ (f(X_i) − Y_i)²`. Chunk boundaries are fixed, so the value is
/// bit-identical for any thread count.
pub fn empirical_risk(f: &ClippedNetwork, data: &Dataset) -> Result<f64> {
    if f.input_dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: data.dim(),
            actual: f.input_dim(),
        });
    }
    ensure(!data.is_empty(), || "empirical risk of an empty dataset".into())?;
    let m = data.len();
    let sums = par::map_indexed(m.div_ceil(CHUNK), |c| {
        let mut scratch = Scratch::new(f.params().architecture());
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(m);
        let sq: Vec<f64> = (lo..hi)
            .map(|i| {
                let r = f.eval_with(&mut scratch, data.input(i)) - data.labels()[i];
                r * r
            })
            .collect();
        pairwise_sum(&sq)
    });
    Ok(pairwise_sum(&sums) / m as f64)
}

/// A point with a reference value for `F(T, x)` and the standard error of
/// that value (zero for exact references).
#[derive(Clone, Debug, PartialEq)]
pub struct ReferencePoint {
    pub point: Vec<f64>,
    pub value: f64,
    pub std_error: f64,
}

/// Mean of `(f(x_j) − value_j)²` over the reference points, with uniform
/// weights. This estimates the L²(P_X) error up to the reference noise,
/// whose contribution is about [`noise_floor`].
pub fn l2_error(f: &ClippedNetwork, reference: &[ReferencePoint]) -> Result<f64> {
    ensure(!reference.is_empty(), || "reference set is empty".into())?;
    let mut scratch = Scratch::new(f.params().architecture());
    let mut sq = Vec::with_capacity(reference.len());
    for r in reference {
        if r.point.len() != f.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: f.input_dim(),
                actual: r.point.len(),
            });
        }
        let e = f.eval_with(&mut scratch, &r.point) - r.value;
        sq.push(e * e);
    }
    Ok(pairwise_sum(&sq) / reference.len() as f64)
}

/// `Σ se_j² / n`: the expected inflation of [`l2_error`] from reference noise.
pub fn noise_floor(reference: &[ReferencePoint]) -> f64 {
    let sq: Vec<f64> = reference.iter().map(|r| r.std_error * r.std_error).collect();
    pairwise_sum(&sq) / reference.len().max(1) as f64
}

/// How reference values for `F(T, ·)` are obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Oracle {
    /// Deterministic dynamics: `F(T, x) = C_D(φ(x))`.
    Exact,
    /// Lognormal closed form of the one-dimensional capped put.
    ClosedForm,
    MonteCarlo { paths: usize },
}

impl Oracle {
    /// The cheapest exact oracle available, else Monte Carlo.
    pub fn for_problem(problem: &KolmogorovProblem, paths: usize) -> Self {
        if problem.coeffs.is_deterministic() {
            Oracle::Exact
        } else if capped_put_1d_params(problem).is_some() {
            Oracle::ClosedForm
        } else {
            Oracle::MonteCarlo { paths }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Oracle::Exact => "exact",
            Oracle::ClosedForm => "closed-form",
            Oracle::MonteCarlo { .. } => "monte-carlo",
        }
    }

    /// Reference value at `x`; `index` selects the Monte-Carlo seed.
    pub fn value(
        &self,
        problem: &KolmogorovProblem,
        x: &[f64],
        seed: u64,
        index: usize,
    ) -> Result<MeanEstimate> {
        match *self {
            Oracle::Exact => {
                // without diffusion the path is the deterministic flow of the drift
                let s = simulate_terminal(problem, x, &problem.driver(seed, 0))?;
                let v = crate::net::clip(problem.payoff_value(&s)?, problem.clip);
                Ok(MeanEstimate {
                    mean: v,
                    std_error: 0.0,
                })
            }
            Oracle::ClosedForm => {
                let (c, rate, vol) = capped_put_1d_params(problem)
                    .ok_or_else(|| Error::InvalidArgument("no closed form for this problem".into()))?;
                Ok(MeanEstimate {
                    mean: capped_put_gbm_1d(x[0], c, problem.clip, rate, vol, problem.horizon),
                    std_error: 0.0,
                })
            }
            Oracle::MonteCarlo { paths } => {
                mc_feynman_kac(problem, x, paths, grid_point_seed(seed, index))
            }
        }
    }
}

/// Evaluation points: an evenly spaced grid on `[u, v]` for `d = 1`,
/// uniform random points on `[u, v]^d` otherwise.
pub fn grid_points(problem: &KolmogorovProblem, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let (u, v) = (problem.lower, problem.upper);
    if problem.dim() == 1 {
        if n == 1 {
            return vec![vec![0.5 * (u + v)]];
        }
        return (0..n)
            .map(|j| vec![u + (v - u) * j as f64 / (n - 1) as f64])
            .collect();
    }
    let mut rng = Stream::new(derive_seed(seed, tags::GRID), u64::MAX);
    (0..n)
        .map(|_| (0..problem.dim()).map(|_| rng.uniform_in(u, v)).collect())
        .collect()
}

pub fn reference_grid(
    problem: &KolmogorovProblem,
    n: usize,
    oracle: Oracle,
    seed: u64,
) -> Result<Vec<ReferencePoint>> {
    ensure(n >= 1, || "reference grid needs at least one point".into())?;
    problem.validate()?;
    let points = grid_points(problem, n, seed);
    let values = par::try_map_indexed(n, |j| oracle.value(problem, &points[j], seed, j))?;
    Ok(points
        .into_iter()
        .zip(values)
        .map(|(point, e)| ReferencePoint {
            point,
            value: e.mean,
            std_error: e.std_error,
        })
        .collect())
}

/// CSV `x_1,...,x_d,estimate,std_error`.
pub fn write_reference_csv<W: Write>(mut w: W, reference: &[ReferencePoint]) -> Result<()> {
    let d = reference.first().map_or(0, |r| r.point.len());
    let header: Vec<String> = (1..=d).map(|i| format!("x_{i}")).collect();
    writeln!(w, "{},estimate,std_error", header.join(","))?;
    for r in reference {
        for x in &r.point {
            write!(w, "{x:e},")?;
        }
        writeln!(w, "{:e},{:e}", r.value, r.std_error)?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiasVarianceConfig {
    pub samples: usize,
    /// Extra trainings on independent data; the best of these and `f̂` by
    /// held-out risk stands in for the class minimizer `f_H`.
    pub trials: usize,
    pub holdout: usize,
    pub oracle: Oracle,
    pub seed: u64,
}

impl BiasVarianceConfig {
    /// Five extra trainings and a holdout of 10⁵ samples.
    pub fn new(samples: usize, oracle: Oracle, seed: u64) -> Self {
        Self { samples, trials: 5, holdout: 100_000, oracle, seed }
    }
}

/// Held-out estimates, each with its standard error:
/// - `generalization`: `E(f̂) − E(f_H)`,
/// - `approximation`: `E(f_H) − E(f*)`,
/// - `total`: `‖f̂ − f*‖²`,
/// - `residual`: per-sample `total − generalization − approximation`.
#[derive(Clone, Debug)]
pub struct BiasVarianceReport {
    pub generalization: MeanEstimate,
    pub approximation: MeanEstimate,
    pub total: MeanEstimate,
    pub residual: MeanEstimate,
    /// 0 for `f̂`, `k` for the k-th extra training.
    pub best_trial: usize,
    pub fit: FitReport,
}

impl BiasVarianceReport {
    /// `|total − (generalization + approximation)| ≤ k · se(residual)`.
    pub fn identity_holds(&self, k: f64) -> bool {
        let gap = self.total.mean - self.generalization.mean - self.approximation.mean;
        gap.abs() <= k * self.residual.std_error + 1e-12
    }
}

fn predictions(f: &ClippedNetwork, data: &Dataset) -> Vec<f64> {
    let m = data.len();
    par::map_indexed(m.div_ceil(CHUNK), |c| {
        let mut scratch = Scratch::new(f.params().architecture());
        let lo = c * CHUNK;
        (lo..(lo + CHUNK).min(m))
            .map(|i| f.eval_with(&mut scratch, data.input(i)))
            .collect::<Vec<_>>()
    })
    .concat()
}

pub fn bias_variance_report(
    problem: &KolmogorovProblem,
    config: &TrainConfig,
    bv: &BiasVarianceConfig,
) -> Result<BiasVarianceReport> {
    ensure(bv.samples >= 1 && bv.holdout >= 2, || {
        "bias-variance report needs samples ≥ 1 and holdout ≥ 2".into()
    })?;
    let data = generate_dataset(problem, bv.samples, bv.seed)?;
    let fit = train_erm(&data, config)?;

    let holdout_seed = derive_seed(bv.seed, tags::HOLDOUT);
    let held = generate_dataset(problem, bv.holdout, holdout_seed)?;
    let labels = held.labels();
    let f_hat = predictions(&fit.network, &held);
    let f_star = par::try_map_indexed(held.len(), |i| {
        bv.oracle
            .value(problem, held.input(i), holdout_seed, i)
            .map(|e| e.mean)
    })?;

    let risk = |pred: &[f64]| {
        let sq: Vec<f64> = pred.iter().zip(labels).map(|(p, y)| (p - y) * (p - y)).collect();
        pairwise_sum(&sq)
    };
    let mut best = (risk(&f_hat), 0usize, f_hat.clone());
    for k in 1..=bv.trials {
        let trial_seed = derive_seed(bv.seed, 1000 + k as u64);
        let trial_data = generate_dataset(problem, bv.samples, trial_seed)?;
        let mut cfg = config.clone();
        cfg.seed = derive_seed(config.seed, 1000 + k as u64);
        let trial = train_erm(&trial_data, &cfg)?;
        let pred = predictions(&trial.network, &held);
        let r = risk(&pred);
        if r < best.0 {
            best = (r, k, pred);
        }
    }
    let (_, best_trial, f_h) = best;

    let n = held.len();
    let mut gen = Vec::with_capacity(n);
    let mut app = Vec::with_capacity(n);
    let mut tot = Vec::with_capacity(n);
    let mut res = Vec::with_capacity(n);
    for i in 0..n {
        let y = labels[i];
        let (a, h, s) = (f_hat[i], f_h[i], f_star[i]);
        let g = (a - y).powi(2) - (h - y).powi(2);
        let p = (h - y).powi(2) - (s - y).powi(2);
        let t = (a - s).powi(2);
        gen.push(g);
        app.push(p);
        tot.push(t);
        res.push(t - g - p);
    }
    Ok(BiasVarianceReport {
        generalization: MeanEstimate::from_samples(&gen),
        approximation: MeanEstimate::from_samples(&app),
        total: MeanEstimate::from_samples(&tot),
        residual: MeanEstimate::from_samples(&res),
        best_trial,
        fit,
    })
}
