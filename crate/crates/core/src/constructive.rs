//! Monte-Carlo network builder: average the payoff network over `n`
//! sampled affine terminal maps `x ↦ M_j x + N_j` and assemble the result
//! as a single ReLU network.

use std::io::Write;

use crate::error::{ensure, Error, Result};
use crate::learning::{l2_error, reference_grid, Oracle, ReferencePoint};
use crate::net::{clipped_as_standard, compose_average, ClippedNetwork, Parametrization};
use crate::par;
use crate::rng::{derive_seed, tags};
use crate::sde::{extract_affine_representation, AffineMap, KolmogorovProblem};

#[derive(Clone, Debug, PartialEq)]
pub struct BuildSpec {
    /// Number of affine maps averaged (the Monte-Carlo width).
    pub n: usize,
    /// Payoff network `η` with input width `d`.
    pub eta: Parametrization,
    pub retries: usize,
    pub grid_size: usize,
    /// Paths per reference point when no exact reference exists.
    pub reference_paths: usize,
    pub seed: u64,
}

impl BuildSpec {
    pub fn new(n: usize, eta: Parametrization, seed: u64) -> Self {
        Self {
            n,
            eta,
            retries: 3,
            grid_size: 256,
            reference_paths: 10_000,
            seed,
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        ensure(self.n >= 1, || "n must be positive".into())?;
        ensure(self.retries >= 1, || "retries must be positive".into())?;
        ensure(self.grid_size >= 1, || "grid size must be positive".into())?;
        let a = self.eta.architecture();
        ensure(a.input_dim() == dim && a.output_dim() == 1, || {
            format!("payoff network {a} must map R^{dim} to R")
        })
    }
}

/// One side-by-side comparison of a bound.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundCheck {
    pub name: &'static str,
    pub actual: f64,
    pub cap: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstructionBounds {
    pub checks: Vec<BoundCheck>,
}

impl ConstructionBounds {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Recomputes the composition bounds from `(η, maps)` and compares them
/// with `built`:
/// - `P(a) ≤ n²·P(b)`,
/// - `‖θ‖_∞ ≤ √d·‖η‖_∞·max_j(‖M_j‖ + ‖N_j‖ + 1)` with the Frobenius norm
///   (which dominates the spectral norm),
/// - `L(a) = L(b)`,
/// - `‖a‖_∞ ≤ n·‖b‖_∞`. Equality fails in general since the input and
///   output widths of `a` are not multiplied by `n`; the hidden widths are.
pub fn verify_construction_bounds(
    built: &Parametrization,
    eta: &Parametrization,
    maps: &[AffineMap],
) -> ConstructionBounds {
    let n = maps.len() as f64;
    let a = built.architecture();
    let b = eta.architecture();
    let d = b.input_dim() as f64;
    let spread = maps
        .iter()
        .map(|m| m.matrix_frobenius() + m.offset_norm() + 1.0)
        .fold(0.0_f64, f64::max);
    let norm_cap = d.sqrt() * eta.max_norm() * spread;
    let width_cap = n * b.max_width() as f64;
    let params_cap = n * n * b.param_count() as f64;
    let check = |name, actual: f64, cap: f64, pass: bool| BoundCheck {
        name,
        actual,
        cap,
        pass,
    };
    ConstructionBounds {
        checks: vec![
            check(
                "param_count",
                a.param_count() as f64,
                params_cap,
                a.param_count() as f64 <= params_cap,
            ),
            check(
                "theta_norm",
                built.max_norm(),
                norm_cap,
                built.max_norm() <= norm_cap * (1.0 + 1e-12),
            ),
            check(
                "depth",
                a.depth() as f64,
                b.depth() as f64,
                a.depth() == b.depth(),
            ),
            check(
                "max_width",
                a.max_width() as f64,
                width_cap,
                a.max_width() as f64 <= width_cap,
            ),
        ],
    }
}

/// Draws the `n` affine maps of retry `retry`, in parallel over `j`.
pub fn draw_affine_maps(
    problem: &KolmogorovProblem,
    n: usize,
    seed: u64,
    retry: usize,
) -> Result<Vec<AffineMap>> {
    let map_seed = derive_seed(derive_seed(seed, tags::AFFINE_MAPS), retry as u64);
    par::try_map_indexed(n, |j| {
        extract_affine_representation(problem, &problem.driver(map_seed, j as u64))
            .map_err(|e| e.at_sample(j))
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RetryRow {
    pub retry: usize,
    pub l2_error: f64,
    pub theta_norm: f64,
    pub param_count: usize,
}

#[derive(Clone, Debug)]
pub struct BuildReport {
    pub retries: Vec<RetryRow>,
    pub selected: usize,
    pub bounds: ConstructionBounds,
    pub oracle: Oracle,
    pub reference: Vec<ReferencePoint>,
}

impl BuildReport {
    /// CSV `retry,l2_error_estimate,theta_norm,param_count`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "retry,l2_error_estimate,theta_norm,param_count")?;
        for r in &self.retries {
            writeln!(w, "{},{:e},{:e},{}", r.retry, r.l2_error, r.theta_norm, r.param_count)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct BuiltNetwork {
    /// The averaged network `θ` before clipping.
    pub params: Parametrization,
    /// `C_D ∘ F(θ)` as a plain ReLU network.
    pub clipped: Parametrization,
    pub maps: Vec<AffineMap>,
    pub report: BuildReport,
}

impl BuiltNetwork {
    pub fn l2_error(&self) -> f64 {
        self.report.retries[self.report.selected].l2_error
    }
}

/// Builds `(1/n)·Σ_j η ∘ A_{M_j,N_j}` `retries` times from independent
/// draws and keeps the one with the smallest L² error against a seeded
/// reference grid (closed form or exact when available, Monte Carlo
/// otherwise). Every candidate must satisfy the composition bounds.
pub fn build_mc_network(problem: &KolmogorovProblem, spec: &BuildSpec) -> Result<BuiltNetwork> {
    problem.validate()?;
    spec.validate(problem.dim())?;
    let oracle = Oracle::for_problem(problem, spec.reference_paths);
    let reference = reference_grid(problem, spec.grid_size, oracle, spec.seed)?;

    let mut rows = Vec::with_capacity(spec.retries);
    let mut best: Option<(f64, Parametrization, Vec<AffineMap>, ConstructionBounds)> = None;
    for retry in 0..spec.retries {
        let maps = draw_affine_maps(problem, spec.n, spec.seed, retry)?;
        let params = compose_average(&spec.eta, &maps)?;
        let bounds = verify_construction_bounds(&params, &spec.eta, &maps);
        if !bounds.all_pass() {
            return Err(Error::Domain(format!(
                "construction bounds violated on retry {retry}: {:?}",
                bounds.checks.iter().filter(|c| !c.pass).collect::<Vec<_>>()
            )));
        }
        let err = l2_error(&ClippedNetwork::new(params.clone(), problem.clip)?, &reference)?;
        rows.push(RetryRow {
            retry,
            l2_error: err,
            theta_norm: params.max_norm(),
            param_count: params.architecture().param_count(),
        });
        if best.as_ref().is_none_or(|b| err < b.0) {
            best = Some((err, params, maps, bounds));
        }
    }
    let (err, params, maps, bounds) = best.expect("at least one retry");
    let selected = rows
        .iter()
        .position(|r| r.l2_error == err)
        .expect("selected retry is recorded");
    let clipped = clipped_as_standard(&params, problem.clip)?;
    Ok(BuiltNetwork {
        params,
        clipped,
        maps,
        report: BuildReport {
            retries: rows,
            selected,
            bounds,
            oracle,
            reference,
        },
    })
}
