//! End-to-end experiments: generate data, train, evaluate against a
//! reference grid; and the dimension-scaling study built on top of it.

use std::io::Write;
use std::time::{Duration, Instant};

use crate::bounds::{scaling_audit, ScalingAudit};
use crate::error::{ensure, Result};
use crate::learning::{
    generate_dataset, l2_error, noise_floor, reference_grid, train_erm, FitReport, Oracle,
    ReferencePoint, TrainConfig,
};
use crate::net::{put_payoff_network, Architecture};
use crate::rng::derive_seed;
use crate::sde::{AffineCoefficients, KolmogorovProblem};

/// Seed shipped with the CLI defaults and the acceptance runs.
pub const DEFAULT_SEED: u64 = 20_190_812;

/// Basket put on `d` independent GBM assets with equal weights `1/d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasketPut {
    pub rate: f64,
    pub vol: f64,
    pub horizon: f64,
    pub clip: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Default for BasketPut {
    fn default() -> Self {
        Self {
            rate: 0.0,
            vol: 0.2,
            horizon: 1.0,
            clip: 1.0,
            lower: 0.5,
            upper: 1.5,
        }
    }
}

impl BasketPut {
    pub fn problem(&self, dim: usize) -> Result<KolmogorovProblem> {
        let coeffs = AffineCoefficients::gbm(dim, self.rate, self.vol)?;
        let weights = vec![1.0 / dim as f64; dim];
        KolmogorovProblem::new(
            coeffs,
            self.horizon,
            put_payoff_network(&weights, self.clip)?,
            self.clip,
            self.lower,
            self.upper,
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub samples: usize,
    pub train: TrainConfig,
    pub grid_size: usize,
    /// Paths per reference point when Monte Carlo is needed.
    pub reference_paths: usize,
    /// Seeds the data; the reference grid uses a derived seed.
    pub seed: u64,
}

impl PipelineConfig {
    /// Defaults: 256 reference points with 10⁵ paths each.
    pub fn new(samples: usize, train: TrainConfig, seed: u64) -> Self {
        Self {
            samples,
            train,
            grid_size: 256,
            reference_paths: 100_000,
            seed,
        }
    }

    fn grid_seed(&self) -> u64 {
        derive_seed(self.seed, 0x005e_ed0f_9e1d)
    }
}

#[derive(Clone, Debug)]
pub struct PipelineResult {
    pub dim: usize,
    pub samples: usize,
    pub architecture: Architecture,
    pub fit: FitReport,
    pub oracle: Oracle,
    pub reference: Vec<ReferencePoint>,
    pub l2_error: f64,
    pub noise_floor: f64,
    pub wall_clock: Duration,
}

impl PipelineResult {
    /// CSV header of [`PipelineResult::csv_row`].
    pub const CSV_HEADER: &'static str =
        "d,m,architecture,final_empirical_risk,l2_error,noise_floor,oracle";

    /// Deterministic summary row; wall-clock is reported separately.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},\"{}\",{:e},{:e},{:e},{}",
            self.dim,
            self.samples,
            self.architecture,
            self.fit.final_risk,
            self.l2_error,
            self.noise_floor,
            self.oracle.name()
        )
    }
}

/// Generate → train → evaluate against a closed-form, exact or Monte-Carlo
/// reference grid.
pub fn run_pipeline(problem: &KolmogorovProblem, config: &PipelineConfig) -> Result<PipelineResult> {
    let start = Instant::now();
    let data = generate_dataset(problem, config.samples, config.seed)?;
    let fit = train_erm(&data, &config.train)?;
    let oracle = Oracle::for_problem(problem, config.reference_paths);
    let reference = reference_grid(problem, config.grid_size, oracle, config.grid_seed())?;
    let l2 = l2_error(&fit.network, &reference)?;
    Ok(PipelineResult {
        dim: problem.dim(),
        samples: config.samples,
        architecture: config.train.architecture.clone(),
        noise_floor: noise_floor(&reference),
        l2_error: l2,
        oracle,
        reference,
        fit,
        wall_clock: start.elapsed(),
    })
}

/// Sample schedule `m(d) = ⌈m₀·d^p⌉`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleSchedule {
    pub base: f64,
    pub power: f64,
}

impl SampleSchedule {
    pub fn samples(&self, dim: usize) -> usize {
        (self.base * (dim as f64).powf(self.power)).ceil() as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingConfig {
    pub dims: Vec<usize>,
    pub schedule: SampleSchedule,
    pub target_error: f64,
    pub slope_threshold: f64,
    /// Hidden widths; the input width is set per dimension.
    pub hidden: Vec<usize>,
    /// Template; its architecture is replaced per dimension.
    pub train: TrainConfig,
    pub grid_size: usize,
    pub reference_paths: usize,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct ScalingRow {
    pub result: PipelineResult,
    pub hit_target: bool,
}

#[derive(Clone, Debug)]
pub struct ScalingStudy {
    pub rows: Vec<ScalingRow>,
    pub audit: ScalingAudit,
}

impl ScalingStudy {
    pub fn all_hit(&self) -> bool {
        self.rows.iter().all(|r| r.hit_target)
    }

    /// PASS needs every run at target and the audit slope within threshold.
    pub fn verdict(&self) -> bool {
        self.all_hit() && self.audit.pass
    }

    /// Per-dimension CSV followed by nothing else; the audit goes to
    /// [`ScalingStudy::write_audit_csv`].
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{},hit_target", PipelineResult::CSV_HEADER)?;
        for r in &self.rows {
            writeln!(w, "{},{}", r.result.csv_row(), r.hit_target)?;
        }
        Ok(())
    }

    pub fn write_audit_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "slope,intercept,r_squared,threshold,all_hit_target,verdict")?;
        writeln!(
            w,
            "{:e},{:e},{:e},{},{},{}",
            self.audit.slope,
            self.audit.intercept,
            self.audit.r_squared,
            self.audit.threshold,
            self.all_hit(),
            if self.verdict() { "PASS" } else { "FAIL" }
        )?;
        Ok(())
    }
}

/// Runs the pipeline for each `d` with `m(d)` from the schedule, then
/// audits the growth of `m` against the polynomial threshold.
pub fn scaling_study(
    make_problem: &dyn Fn(usize) -> Result<KolmogorovProblem>,
    config: &ScalingConfig,
) -> Result<ScalingStudy> {
    let mut distinct = config.dims.clone();
    distinct.sort_unstable();
    distinct.dedup();
    ensure(distinct.len() >= 3, || {
        format!("scaling study needs at least 3 distinct dimensions, got {:?}", config.dims)
    })?;
    let mut rows = Vec::with_capacity(config.dims.len());
    for (k, &d) in config.dims.iter().enumerate() {
        let problem = make_problem(d)?;
        let mut widths = vec![d];
        widths.extend(&config.hidden);
        widths.push(1);
        let mut train = config.train.clone();
        train.architecture = Architecture::new(widths)?;
        train.seed = derive_seed(config.train.seed, k as u64);
        let mut pc = PipelineConfig::new(config.schedule.samples(d), train, derive_seed(config.seed, d as u64));
        pc.grid_size = config.grid_size;
        pc.reference_paths = config.reference_paths;
        let result = run_pipeline(&problem, &pc)?;
        let hit_target = result.l2_error <= config.target_error;
        rows.push(ScalingRow { result, hit_target });
    }
    let points: Vec<(usize, f64)> = rows
        .iter()
        .map(|r| (r.result.dim, r.result.samples as f64))
        .collect();
    let audit = scaling_audit(&points, config.slope_threshold)?;
    Ok(ScalingStudy { rows, audit })
}
