//! Approximate empirical risk minimization over clipped networks.
//!
//! Minibatch Adam on the squared loss of `C_D ∘ F(θ)`. The clip passes
//! gradients through where `|F(θ)(x)| < D` and blocks them elsewhere
//! (including the kinks). The full-data risk is evaluated every
//! `eval_every` iterations and the best checkpoint is returned, so the
//! reported risk never increases when the budget is extended.

use std::io::Write;
use std::time::{Duration, Instant};

use crate::error::{ensure, Error, Result};
use crate::net::{Architecture, ClippedNetwork, Parametrization};
use crate::rng::{derive_seed, tags, Stream};

use super::dataset::Dataset;
use super::eval::empirical_risk;

/// Step size as a function of the (1-based) iteration index. Schedules do
/// not depend on the budget, so a longer run extends a shorter one.
#[derive(Clone, Debug, PartialEq)]
pub enum StepSchedule {
    Constant(f64),
    /// `initial · factor^⌊(t−1)/every⌋`.
    Exponential {
        initial: f64,
        factor: f64,
        every: usize,
    },
}

impl StepSchedule {
    pub fn rate(&self, iteration: usize) -> f64 {
        match *self {
            StepSchedule::Constant(r) => r,
            StepSchedule::Exponential {
                initial,
                factor,
                every,
            } => initial * factor.powi((iteration.saturating_sub(1) / every.max(1)) as i32),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            StepSchedule::Constant(r) => r > 0.0 && r.is_finite(),
            StepSchedule::Exponential {
                initial,
                factor,
                every,
            } => initial > 0.0 && factor > 0.0 && factor <= 1.0 && every >= 1,
        };
        ensure(ok, || format!("invalid step schedule {self:?}"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub architecture: Architecture,
    /// `R`: the class is `N_{a,R,D}`; `None` leaves it unconstrained.
    pub parameter_bound: Option<f64>,
    /// Separate bound for weights (biases keep `parameter_bound`). Setting
    /// it to zero restricts the class to constants.
    pub weight_bound: Option<f64>,
    /// Clamp parameters into the bounds after every step.
    pub project: bool,
    pub clip: f64,
    pub batch_size: usize,
    pub schedule: StepSchedule,
    pub iterations: usize,
    pub eval_every: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(architecture: Architecture, clip: f64) -> Self {
        Self {
            architecture,
            parameter_bound: None,
            weight_bound: None,
            project: false,
            clip,
            batch_size: 256,
            schedule: StepSchedule::Constant(1e-3),
            iterations: 100_000,
            eval_every: 1000,
            seed: 0,
        }
    }

    /// Projected training onto `P_{a,R}`.
    pub fn with_bound(mut self, bound: f64) -> Self {
        self.parameter_bound = Some(bound);
        self.project = true;
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let a = &self.architecture;
        ensure(a.input_dim() == dim && a.output_dim() == 1, || {
            format!("architecture {a} must map R^{dim} to R")
        })?;
        if let Some(r) = self.parameter_bound {
            ensure(r >= 1.0, || format!("parameter bound R must be at least 1, got {r}"))?;
        }
        if let Some(w) = self.weight_bound {
            ensure(w >= 0.0, || format!("weight bound must be nonnegative, got {w}"))?;
        }
        ensure(self.clip > 0.0 && self.clip.is_finite(), || {
            format!("clip amplitude must be positive, got {}", self.clip)
        })?;
        ensure(self.batch_size >= 1, || "batch size must be positive".into())?;
        ensure(self.iterations >= 1, || "iteration budget must be positive".into())?;
        ensure(self.eval_every >= 1, || "evaluation interval must be positive".into())?;
        self.schedule.validate()
    }

    fn bounds(&self) -> (f64, f64) {
        if !self.project {
            return (f64::INFINITY, f64::INFINITY);
        }
        let b = self.parameter_bound.unwrap_or(f64::INFINITY);
        (self.weight_bound.unwrap_or(b), b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    /// Mean minibatch risk since the previous trace point.
    pub batch_risk: f64,
    pub full_risk: f64,
}

#[derive(Clone, Debug)]
pub struct FitReport {
    pub network: ClippedNetwork,
    pub final_risk: f64,
    pub best_iteration: usize,
    pub trace: Vec<TracePoint>,
    pub wall_clock: Duration,
}

impl FitReport {
    /// CSV `iter,batch_risk,full_risk`.
    pub fn write_trace_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iter,batch_risk,full_risk")?;
        for t in &self.trace {
            writeln!(w, "{},{:e},{:e}", t.iteration, t.batch_risk, t.full_risk)?;
        }
        Ok(())
    }
}

/// Glorot-uniform weights, zero biases.
pub fn initialize(arch: &Architecture, seed: u64) -> Parametrization {
    let mut params = Parametrization::zeros(arch.clone());
    let mut rng = Stream::new(derive_seed(seed, tags::TRAIN_INIT), 0);
    for layer in params.layers_mut() {
        let limit = (6.0 / (layer.rows + layer.cols) as f64).sqrt();
        for w in &mut layer.weights {
            *w = rng.uniform_in(-limit, limit);
        }
    }
    params
}

fn project(params: &mut Parametrization, (wb, bb): (f64, f64)) {
    if wb.is_infinite() && bb.is_infinite() {
        return;
    }
    for layer in params.layers_mut() {
        layer.weights.iter_mut().for_each(|w| *w = w.clamp(-wb, wb));
        layer.bias.iter_mut().for_each(|b| *b = b.clamp(-bb, bb));
    }
}

/// Batched forward/backward buffers.
struct Workspace {
    /// `acts[l]`: batch × a_l; `acts[0]` is the input batch, hidden entries
    /// are post-ReLU, the last entry holds raw outputs.
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl Workspace {
    fn new(arch: &Architecture, batch: usize) -> Self {
        let acts = arch.widths().iter().map(|w| vec![0.0; w * batch]).collect();
        let w = arch.max_width() * batch;
        Self {
            acts,
            delta: vec![0.0; w],
            delta_prev: vec![0.0; w],
        }
    }
}

/// Fills `grad` with the gradient of the clipped batch risk and returns
/// the batch risk.
fn batch_gradient(
    params: &Parametrization,
    clip_amp: f64,
    data: &Dataset,
    batch: &[usize],
    ws: &mut Workspace,
    grad: &mut Parametrization,
) -> f64 {
    let layers = params.layers();
    let depth = layers.len();
    let bs = batch.len();
    let d = data.dim();

    for (s, &i) in batch.iter().enumerate() {
        ws.acts[0][s * d..(s + 1) * d].copy_from_slice(data.input(i));
    }
    for (l, layer) in layers.iter().enumerate() {
        let (prev, next) = ws.acts.split_at_mut(l + 1);
        let input = &prev[l];
        let out = &mut next[0];
        for s in 0..bs {
            let x = &input[s * layer.cols..(s + 1) * layer.cols];
            let o = &mut out[s * layer.rows..(s + 1) * layer.rows];
            layer.apply(x, o);
            if l + 1 < depth {
                o.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
    }

    let out_w = layers[depth - 1].rows;
    debug_assert_eq!(out_w, 1);
    let scale = 2.0 / bs as f64;
    let mut risk = 0.0;
    for (s, &i) in batch.iter().enumerate() {
        let z = ws.acts[depth][s];
        let pred = z.clamp(-clip_amp, clip_amp);
        let r = pred - data.labels()[i];
        risk += r * r;
        ws.delta[s] = if z.abs() < clip_amp { scale * r } else { 0.0 };
    }
    risk /= bs as f64;

    for l in (0..depth).rev() {
        let layer = &layers[l];
        let g = &mut grad.layers_mut()[l];
        g.weights.iter_mut().for_each(|v| *v = 0.0);
        g.bias.iter_mut().for_each(|v| *v = 0.0);
        let input = &ws.acts[l];
        for s in 0..bs {
            let ds = &ws.delta[s * layer.rows..(s + 1) * layer.rows];
            let x = &input[s * layer.cols..(s + 1) * layer.cols];
            for (i, &di) in ds.iter().enumerate() {
                if di == 0.0 {
                    continue;
                }
                g.bias[i] += di;
                let gw = &mut g.weights[i * layer.cols..(i + 1) * layer.cols];
                for (gk, xk) in gw.iter_mut().zip(x) {
                    *gk += di * xk;
                }
            }
        }
        if l == 0 {
            break;
        }
        for s in 0..bs {
            let ds = &ws.delta[s * layer.rows..(s + 1) * layer.rows];
            let dp = &mut ws.delta_prev[s * layer.cols..(s + 1) * layer.cols];
            dp.iter_mut().for_each(|v| *v = 0.0);
            for (i, &di) in ds.iter().enumerate() {
                if di == 0.0 {
                    continue;
                }
                for (dk, wk) in dp.iter_mut().zip(layer.row(i)) {
                    *dk += wk * di;
                }
            }
            // ReLU derivative of the previous hidden layer (acts are post-ReLU).
            let a = &input[s * layer.cols..(s + 1) * layer.cols];
            for (dk, ak) in dp.iter_mut().zip(a) {
                if *ak <= 0.0 {
                    *dk = 0.0;
                }
            }
        }
        std::mem::swap(&mut ws.delta, &mut ws.delta_prev);
    }
    risk
}

struct Adam {
    first: Parametrization,
    second: Parametrization,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
}

impl Adam {
    fn new(arch: &Architecture) -> Self {
        Self {
            first: Parametrization::zeros(arch.clone()),
            second: Parametrization::zeros(arch.clone()),
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
        }
    }

    fn step(&mut self, params: &mut Parametrization, grad: &Parametrization, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for (((p, g), m), v) in params
            .params_mut()
            .zip(grad.params())
            .zip(self.first.params_mut())
            .zip(self.second.params_mut())
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        }
    }
}

pub fn train_erm(data: &Dataset, config: &TrainConfig) -> Result<FitReport> {
    ensure(!data.is_empty(), || "cannot train on an empty dataset".into())?;
    config.validate(data.dim())?;
    let start = Instant::now();
    let arch = &config.architecture;
    let bounds = config.bounds();
    let divergence = 4.0 * config.clip * config.clip + 1.0;

    let mut params = initialize(arch, config.seed);
    project(&mut params, bounds);
    let mut grad = Parametrization::zeros(arch.clone());
    let mut adam = Adam::new(arch);
    let mut ws = Workspace::new(arch, config.batch_size);
    let mut batch_rng = Stream::new(derive_seed(config.seed, tags::TRAIN_BATCHES), 0);
    let mut batch = vec![0usize; config.batch_size];

    let risk_of = |p: &Parametrization| -> Result<f64> {
        empirical_risk(&ClippedNetwork::new(p.clone(), config.clip)?, data)
    };

    let initial = risk_of(&params)?;
    let mut trace = vec![TracePoint {
        iteration: 0,
        batch_risk: f64::NAN,
        full_risk: initial,
    }];
    let mut best = (initial, 0usize, params.clone());
    let mut window = (0.0, 0usize);

    for it in 1..=config.iterations {
        for b in batch.iter_mut() {
            *b = batch_rng.index(data.len());
        }
        let risk = batch_gradient(&params, config.clip, data, &batch, &mut ws, &mut grad);
        if !risk.is_finite() || risk > divergence || grad.params().any(|g| !g.is_finite()) {
            return Err(Error::Diverged {
                iteration: it,
                risk,
            });
        }
        adam.step(&mut params, &grad, config.schedule.rate(it));
        project(&mut params, bounds);
        window.0 += risk;
        window.1 += 1;

        if it % config.eval_every == 0 || it == config.iterations {
            let full = risk_of(&params)?;
            if !full.is_finite() {
                return Err(Error::Diverged {
                    iteration: it,
                    risk: full,
                });
            }
            trace.push(TracePoint {
                iteration: it,
                batch_risk: window.0 / window.1 as f64,
                full_risk: full,
            });
            window = (0.0, 0);
            if full < best.0 {
                best = (full, it, params.clone());
            }
        }
    }

    let (final_risk, best_iteration, params) = best;
    Ok(FitReport {
        network: ClippedNetwork::new(params, config.clip)?,
        final_risk,
        best_iteration,
        trace,
        wall_clock: start.elapsed(),
    })
}
