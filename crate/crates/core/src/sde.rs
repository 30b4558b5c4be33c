//! Affine-coefficient SDEs `dS_t = σ(S_t) dB_t + μ(S_t) dt`, their pathwise
//! affine terminal representation and Feynman-Kac Monte-Carlo estimates of
//! `F(T, x) = E[φ(S_T^x)]`.
//!
//! Diagonal geometric Brownian motion is simulated exactly; every other
//! affine system uses Euler–Maruyama. An Euler step is affine in the state
//! when `μ` and `σ` are affine, so `S_T^x = M x + N` holds exactly along any
//! fixed driver for both schemes.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{ensure, Error, Result};
use crate::net::{clip, Parametrization, Scratch};
use crate::par;
use crate::rng::{derive_seed, tags, Stream};
use crate::stats::MeanEstimate;

pub const DEFAULT_STEPS: usize = 128;

/// `x ↦ M x + N` with `M` stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap {
    dim: usize,
    pub matrix: Vec<f64>,
    pub offset: Vec<f64>,
}

impl AffineMap {
    pub fn new(dim: usize, matrix: Vec<f64>, offset: Vec<f64>) -> Result<Self> {
        ensure(matrix.len() == dim * dim && offset.len() == dim, || {
            format!(
                "affine map of dimension {dim} needs {} matrix and {dim} offset entries",
                dim * dim
            )
        })?;
        Ok(Self {
            dim,
            matrix,
            offset,
        })
    }

    pub fn identity(dim: usize) -> Self {
        let mut matrix = vec![0.0; dim * dim];
        for i in 0..dim {
            matrix[i * dim + i] = 1.0;
        }
        Self {
            dim,
            matrix,
            offset: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.apply_into(x, &mut out);
        out
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.matrix[r * self.dim..(r + 1) * self.dim];
            *o = self.offset[r] + row.iter().zip(x).map(|(m, xi)| m * xi).sum::<f64>();
        }
    }

    pub fn matrix_frobenius(&self) -> f64 {
        self.matrix.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn offset_norm(&self) -> f64 {
        self.offset.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `μ(x) = A x + b` and `σ(x) = C_0 + Σ_i x_i C_i`, all matrices `d × d`
/// row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineCoefficients {
    dim: usize,
    drift_matrix: Vec<f64>,
    drift_offset: Vec<f64>,
    /// `C_0, C_1, ..., C_d`; `None` marks an all-zero matrix.
    diffusion: Vec<Option<Vec<f64>>>,
    linear_growth: f64,
}

impl AffineCoefficients {
    /// Builds the coefficients; when `linear_growth` is `None` a valid
    /// constant `L` with `‖σ(x)‖_F + ‖μ(x)‖ ≤ L(1 + ‖x‖)` is computed.
    pub fn new(
        dim: usize,
        drift_matrix: Vec<f64>,
        drift_offset: Vec<f64>,
        diffusion: Vec<Vec<f64>>,
        linear_growth: Option<f64>,
    ) -> Result<Self> {
        ensure(dim >= 1, || "dimension must be positive".into())?;
        ensure(drift_matrix.len() == dim * dim, || "drift matrix must be d x d".into())?;
        ensure(drift_offset.len() == dim, || "drift vector must have d entries".into())?;
        ensure(diffusion.len() == dim + 1, || {
            format!("need d+1 = {} diffusion matrices, got {}", dim + 1, diffusion.len())
        })?;
        ensure(diffusion.iter().all(|c| c.len() == dim * dim), || {
            "diffusion matrices must be d x d".into()
        })?;
        ensure(
            drift_matrix
                .iter()
                .chain(&drift_offset)
                .chain(diffusion.iter().flatten())
                .all(|v| v.is_finite()),
            || "coefficients must be finite".into(),
        )?;
        let diffusion = diffusion
            .into_iter()
            .map(|c| c.iter().any(|&v| v != 0.0).then_some(c))
            .collect();
        let mut coeffs = Self {
            dim,
            drift_matrix,
            drift_offset,
            diffusion,
            linear_growth: 0.0,
        };
        let derived = coeffs.derived_growth();
        coeffs.linear_growth = match linear_growth {
            None => derived,
            Some(l) => {
                ensure(l > 0.0 && l.is_finite(), || {
                    format!("linear growth constant must be positive, got {l}")
                })?;
                coeffs.linear_growth = l;
                coeffs.check_growth(1000, 10.0, 0x6c69_6e67)?;
                l
            }
        };
        Ok(coeffs)
    }

    /// Diagonal geometric Brownian motion: `μ(x) = rate·x`,
    /// `σ(x) = vol·diag(x)`.
    pub fn gbm(dim: usize, rate: f64, vol: f64) -> Result<Self> {
        Self::gbm_diagonal(&vec![rate; dim], &vec![vol; dim])
    }

    pub fn gbm_diagonal(rates: &[f64], vols: &[f64]) -> Result<Self> {
        let dim = rates.len();
        ensure(vols.len() == dim, || "rates and vols differ in length".into())?;
        let mut a = vec![0.0; dim * dim];
        let mut diffusion = vec![vec![0.0; dim * dim]];
        for i in 0..dim {
            a[i * dim + i] = rates[i];
            let mut c = vec![0.0; dim * dim];
            c[i * dim + i] = vols[i];
            diffusion.push(c);
        }
        Self::new(dim, a, vec![0.0; dim], diffusion, None)
    }

    /// `μ ≡ 0`, `σ ≡ 0`.
    pub fn zero(dim: usize) -> Self {
        Self::new(
            dim,
            vec![0.0; dim * dim],
            vec![0.0; dim],
            vec![vec![0.0; dim * dim]; dim + 1],
            None,
        )
        .expect("zero coefficients are valid")
    }

    /// Constant coefficients `μ ≡ b`, `σ ≡ C_0`.
    pub fn constant(dim: usize, drift: Vec<f64>, diffusion: Vec<f64>) -> Result<Self> {
        let mut c = vec![vec![0.0; dim * dim]; dim + 1];
        c[0] = diffusion;
        Self::new(dim, vec![0.0; dim * dim], drift, c, None)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn linear_growth(&self) -> f64 {
        self.linear_growth
    }

    pub fn drift_matrix(&self) -> &[f64] {
        &self.drift_matrix
    }

    pub fn drift_offset(&self) -> &[f64] {
        &self.drift_offset
    }

    /// `C_k` (`k = 0` is the constant part); zeros if it vanishes.
    pub fn diffusion_matrix(&self, k: usize) -> Vec<f64> {
        self.diffusion[k]
            .clone()
            .unwrap_or_else(|| vec![0.0; self.dim * self.dim])
    }

    pub fn is_deterministic(&self) -> bool {
        self.diffusion.iter().all(Option::is_none)
    }

    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|r| {
                self.drift_offset[r]
                    + (0..d)
                        .map(|k| self.drift_matrix[r * d + k] * x[k])
                        .sum::<f64>()
            })
            .collect()
    }

    pub fn diffusion(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut s = vec![0.0; d * d];
        for (k, c) in self.diffusion.iter().enumerate() {
            if let Some(c) = c {
                let w = if k == 0 { 1.0 } else { x[k - 1] };
                s.iter_mut().zip(c).for_each(|(a, v)| *a += w * v);
            }
        }
        s
    }

    fn derived_growth(&self) -> f64 {
        let fro = |m: &[f64]| m.iter().map(|v| v * v).sum::<f64>().sqrt();
        let c0 = self.diffusion[0].as_deref().map_or(0.0, fro);
        let b = fro(&self.drift_offset);
        let ci = self.diffusion[1..]
            .iter()
            .map(|c| c.as_deref().map_or(0.0, |c| fro(c).powi(2)))
            .sum::<f64>()
            .sqrt();
        (c0 + b).max(ci + fro(&self.drift_matrix))
    }

    /// Checks the growth bound at `samples` points of `[-radius, radius]^d`.
    pub fn check_growth(&self, samples: usize, radius: f64, seed: u64) -> Result<()> {
        let mut rng = Stream::new(seed, 0);
        let l = self.linear_growth;
        for _ in 0..samples {
            let x: Vec<f64> = (0..self.dim).map(|_| rng.uniform_in(-radius, radius)).collect();
            let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
            let lhs = norm(&self.diffusion(&x)) + norm(&self.drift(&x));
            let rhs = l * (1.0 + norm(&x));
            if lhs > rhs * (1.0 + 1e-12) {
                return Err(Error::InvalidArgument(format!(
                    "linear growth bound L={l} violated at {x:?}: {lhs} > {rhs}"
                )));
            }
        }
        Ok(())
    }

    /// Per-coordinate `(rate, vol)` when the coefficients are diagonal GBM
    /// (`A` and all `C_i` diagonal with `C_i = vol_i e_i e_iᵀ`, `C_0 = 0`,
    /// `b = 0`).
    pub fn gbm_rates(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let d = self.dim;
        if self.drift_offset.iter().any(|&v| v != 0.0) || self.diffusion[0].is_some() {
            return None;
        }
        let mut rates = Vec::with_capacity(d);
        let mut vols = Vec::with_capacity(d);
        for i in 0..d {
            for k in 0..d {
                if k != i && self.drift_matrix[i * d + k] != 0.0 {
                    return None;
                }
            }
            rates.push(self.drift_matrix[i * d + i]);
            let vol = match &self.diffusion[i + 1] {
                None => 0.0,
                Some(c) => {
                    let off = c
                        .iter()
                        .enumerate()
                        .any(|(idx, &v)| idx != i * d + i && v != 0.0);
                    if off {
                        return None;
                    }
                    c[i * d + i]
                }
            };
            vols.push(vol);
        }
        Some((rates, vols))
    }
}

/// A linear Kolmogorov problem on `[u, v]^d` with a network payoff whose
/// output is clipped to `[-D, D]`.
#[derive(Clone, Debug)]
pub struct KolmogorovProblem {
    pub coeffs: AffineCoefficients,
    pub horizon: f64,
    pub payoff: Parametrization,
    pub clip: f64,
    pub lower: f64,
    pub upper: f64,
    /// Simulate exactly as diagonal GBM.
    pub gbm: bool,
    /// Euler steps used when `gbm` is false.
    pub steps: usize,
}

impl KolmogorovProblem {
    pub fn new(
        coeffs: AffineCoefficients,
        horizon: f64,
        payoff: Parametrization,
        clip: f64,
        lower: f64,
        upper: f64,
    ) -> Result<Self> {
        let gbm = coeffs.gbm_rates().is_some();
        let p = Self {
            coeffs,
            horizon,
            payoff,
            clip,
            lower,
            upper,
            gbm,
            steps: DEFAULT_STEPS,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    /// Forces Euler–Maruyama even for diagonal GBM.
    pub fn with_euler(mut self) -> Self {
        self.gbm = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.lower < self.upper, || {
            format!("need u < v, got u={} v={}", self.lower, self.upper)
        })?;
        ensure(self.horizon > 0.0 && self.horizon.is_finite(), || {
            format!("horizon T must be positive, got {}", self.horizon)
        })?;
        ensure(self.clip >= 1.0 && self.clip.is_finite(), || {
            format!("clip amplitude D must be at least 1, got {}", self.clip)
        })?;
        ensure(self.steps >= 1, || "need at least one time step".into())?;
        let arch = self.payoff.architecture();
        if arch.input_dim() != self.dim() || arch.output_dim() != 1 {
            return Err(Error::InvalidArgument(format!(
                "payoff network {arch} does not map R^{} to R",
                self.dim()
            )));
        }
        if self.gbm && self.coeffs.gbm_rates().is_none() {
            return Err(Error::InvalidArgument(
                "exact GBM simulation requested for non-diagonal coefficients".into(),
            ));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.coeffs.dim()
    }

    /// `C_D(F(η)(x))`.
    pub fn payoff_value(&self, x: &[f64]) -> Result<f64> {
        Ok(clip(self.payoff.realize_scalar(x)?, self.clip))
    }

    pub fn driver(&self, seed: u64, stream: u64) -> BrownianDriver {
        BrownianDriver {
            seed,
            stream,
            steps: if self.gbm { 1 } else { self.steps },
            dim: self.dim(),
        }
    }

    /// Stable identifier of everything that determines the data law.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        let mut put = |v: f64| h.update(v.to_le_bytes());
        put(self.dim() as f64);
        put(self.horizon);
        put(self.clip);
        put(self.lower);
        put(self.upper);
        put(self.steps as f64);
        put(if self.gbm { 1.0 } else { 0.0 });
        self.coeffs.drift_matrix.iter().for_each(|&v| put(v));
        self.coeffs.drift_offset.iter().for_each(|&v| put(v));
        for k in 0..=self.dim() {
            self.coeffs.diffusion_matrix(k).iter().for_each(|&v| put(v));
        }
        self.payoff.params().for_each(&mut put);
        h.update(self.payoff.to_text().as_bytes());
        let digest = h.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Identifies one Brownian path: the increments are a pure function of
/// `(seed, stream)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BrownianDriver {
    pub seed: u64,
    pub stream: u64,
    pub steps: usize,
    pub dim: usize,
}

impl BrownianDriver {
    pub fn rng(&self) -> Stream {
        Stream::new(self.seed, self.stream)
    }

    /// All standard normals of the path, step-major.
    pub fn normals(&self) -> Vec<f64> {
        let mut rng = self.rng();
        (0..self.steps * self.dim).map(|_| rng.normal()).collect()
    }
}

/// Reusable state buffers for path simulation.
#[derive(Clone, Debug)]
pub struct PathBuffers {
    state: Vec<f64>,
    next: Vec<f64>,
    db: Vec<f64>,
}

impl PathBuffers {
    pub fn new(dim: usize) -> Self {
        Self {
            state: vec![0.0; dim],
            next: vec![0.0; dim],
            db: vec![0.0; dim],
        }
    }
}

/// Terminal value `S_T^{x0}` along `driver`.
pub fn simulate_terminal(
    problem: &KolmogorovProblem,
    x0: &[f64],
    driver: &BrownianDriver,
) -> Result<Vec<f64>> {
    let mut buf = PathBuffers::new(problem.dim());
    simulate_into(problem, x0, driver, &mut buf)?;
    Ok(buf.state)
}

/// Simulates into `buf`; the terminal state is left in `terminal(buf)`.
pub fn simulate_into<'b>(
    problem: &KolmogorovProblem,
    x0: &[f64],
    driver: &BrownianDriver,
    buf: &'b mut PathBuffers,
) -> Result<&'b [f64]> {
    let d = problem.dim();
    if x0.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: x0.len(),
        });
    }
    ensure(x0.iter().all(|v| v.is_finite()), || "initial value is not finite".into())?;
    ensure(driver.steps >= 1 && driver.dim == d, || {
        format!(
            "driver has {} steps in dimension {}, problem dimension is {d}",
            driver.steps, driver.dim
        )
    })?;
    let mut rng = driver.rng();
    let t = problem.horizon;
    let coeffs = &problem.coeffs;

    if problem.gbm {
        let (rates, vols) = coeffs
            .gbm_rates()
            .expect("validated: gbm flag implies diagonal coefficients");
        let sqrt_t = t.sqrt();
        for i in 0..d {
            let z = rng.normal();
            let g = ((rates[i] - 0.5 * vols[i] * vols[i]) * t + vols[i] * sqrt_t * z).exp();
            buf.state[i] = x0[i] * g;
        }
        if buf.state.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: 1 });
        }
        return Ok(&buf.state);
    }

    let dt = t / driver.steps as f64;
    let sqrt_dt = dt.sqrt();
    buf.state.copy_from_slice(x0);
    for step in 0..driver.steps {
        for v in buf.db.iter_mut() {
            *v = sqrt_dt * rng.normal();
        }
        let s = &buf.state;
        for r in 0..d {
            let mut mu = coeffs.drift_offset[r];
            let arow = &coeffs.drift_matrix[r * d..(r + 1) * d];
            for k in 0..d {
                mu += arow[k] * s[k];
            }
            let mut noise = 0.0;
            for (idx, c) in coeffs.diffusion.iter().enumerate() {
                if let Some(c) = c {
                    let w = if idx == 0 { 1.0 } else { s[idx - 1] };
                    let crow = &c[r * d..(r + 1) * d];
                    let acc: f64 = crow.iter().zip(&buf.db).map(|(a, b)| a * b).sum();
                    noise += w * acc;
                }
            }
            buf.next[r] = s[r] + mu * dt + noise;
        }
        std::mem::swap(&mut buf.state, &mut buf.next);
        if buf.state.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: step + 1 });
        }
    }
    Ok(&buf.state)
}

/// `N = S_T^0`, `M = [S_T^{e_1} − S_T^0, ..., S_T^{e_d} − S_T^0]`, all
/// simulated on the same driver.
pub fn extract_affine_representation(
    problem: &KolmogorovProblem,
    driver: &BrownianDriver,
) -> Result<AffineMap> {
    let d = problem.dim();
    let mut buf = PathBuffers::new(d);
    let mut x = vec![0.0; d];
    let base = simulate_into(problem, &x, driver, &mut buf)?.to_vec();
    let mut matrix = vec![0.0; d * d];
    for i in 0..d {
        x[i] = 1.0;
        let s = simulate_into(problem, &x, driver, &mut buf)?;
        for r in 0..d {
            matrix[r * d + i] = s[r] - base[r];
        }
        x[i] = 0.0;
    }
    AffineMap::new(d, matrix, base)
}

/// `3√2·d·(1 + LT + 2L√T)·exp((L√T + 2L)² T)`, the bound on
/// `E[‖M‖_F + ‖N‖_2]`.
pub fn affine_moment_bound(dim: usize, growth: f64, horizon: f64) -> f64 {
    let st = horizon.sqrt();
    3.0 * 2f64.sqrt()
        * dim as f64
        * (1.0 + growth * horizon + 2.0 * growth * st)
        * ((growth * st + 2.0 * growth).powi(2) * horizon).exp()
}

/// Monte-Carlo estimate of `E[C_D(φ(S_T^x))]` with its standard error.
pub fn mc_feynman_kac(
    problem: &KolmogorovProblem,
    x: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<MeanEstimate> {
    ensure(n_paths >= 2, || format!("need at least 2 paths, got {n_paths}"))?;
    if x.len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            actual: x.len(),
        });
    }
    let path_seed = derive_seed(seed, tags::PATHS);
    const CHUNK: usize = 1024;
    let chunks = n_paths.div_ceil(CHUNK);
    let values = par::try_map_indexed(chunks, |c| {
        let mut buf = PathBuffers::new(problem.dim());
        let mut scratch = Scratch::new(problem.payoff.architecture());
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(n_paths);
        let mut out = Vec::with_capacity(hi - lo);
        for p in lo..hi {
            let driver = problem.driver(path_seed, p as u64);
            let s = simulate_into(problem, x, &driver, &mut buf)
                .map_err(|e| e.at_sample(p))?;
            out.push(clip(scratch.forward(&problem.payoff, s)[0], problem.clip));
        }
        Ok::<_, Error>(out)
    })?;
    let values: Vec<f64> = values.concat();
    Ok(MeanEstimate::from_samples(&values))
}

/// Seed used for grid point `index` by [`mc_reference_grid`].
pub fn grid_point_seed(seed: u64, index: usize) -> u64 {
    derive_seed(derive_seed(seed, tags::GRID), index as u64)
}

pub fn mc_reference_grid(
    problem: &KolmogorovProblem,
    points: &[Vec<f64>],
    n_paths: usize,
    seed: u64,
) -> Result<Vec<MeanEstimate>> {
    points
        .iter()
        .enumerate()
        .map(|(j, x)| mc_feynman_kac(problem, x, n_paths, grid_point_seed(seed, j)))
        .collect()
}

/// Undiscounted GBM put `E[(K − S_T)^+]` for `S_T = x·exp((r − σ²/2)T + σB_T)`.
pub fn gbm_put_value(x: f64, strike: f64, rate: f64, vol: f64, horizon: f64) -> f64 {
    if x <= 0.0 {
        return strike.max(0.0);
    }
    if strike <= 0.0 {
        return 0.0;
    }
    let forward = x * (rate * horizon).exp();
    let sd = vol * horizon.sqrt();
    if sd == 0.0 {
        return (strike - forward).max(0.0);
    }
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    let d1 = ((forward / strike).ln() + 0.5 * sd * sd) / sd;
    let d2 = d1 - sd;
    strike * n.cdf(-d2) - forward * n.cdf(-d1)
}

/// Closed form of `E[min{max{D − c·S_T, 0}, D}]` for one-dimensional GBM
/// with `c ≥ 0` and positive `x`. Equals `c·put(K = D/c)`.
pub fn capped_put_gbm_1d(x: f64, weight: f64, amplitude: f64, rate: f64, vol: f64, horizon: f64) -> f64 {
    if weight <= 0.0 {
        // c ≤ 0 and S_T > 0 give D − cS_T ≥ D, so the payoff is D.
        return amplitude;
    }
    weight * gbm_put_value(x, amplitude / weight, rate, vol, horizon)
}

/// Recognizes the one-dimensional GBM capped put, for which a closed form
/// exists. Returns `(c, rate, vol)`.
pub fn capped_put_1d_params(problem: &KolmogorovProblem) -> Option<(f64, f64, f64)> {
    if problem.dim() != 1 || problem.lower <= 0.0 {
        return None;
    }
    let (rates, vols) = problem.coeffs.gbm_rates()?;
    // Same (1,1,1,1) structure as put_payoff_network with some weight c.
    let layers = problem.payoff.layers();
    if problem.payoff.architecture().widths() != [1, 1, 1, 1] {
        return None;
    }
    let d = problem.clip;
    let weight = -layers[0].weights[0];
    let ok = layers[0].bias[0] == d
        && layers[1].weights[0] == -1.0
        && layers[1].bias[0] == d
        && layers[2].weights[0] == -1.0
        && layers[2].bias[0] == d;
    ok.then_some((weight, rates[0], vols[0]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::put_payoff_network;

    fn brownian_1d(t: f64) -> KolmogorovProblem {
        let coeffs = AffineCoefficients::constant(1, vec![0.0], vec![1.0]).unwrap();
        let payoff = Parametrization::from_rows(&[(vec![vec![1.0]], vec![0.0])]).unwrap();
        KolmogorovProblem::new(coeffs, t, payoff, 10.0, -1.0, 1.0).unwrap()
    }

    #[test]
    fn deterministic_sde_is_identity() {
        let coeffs = AffineCoefficients::zero(2);
        let payoff = put_payoff_network(&[0.5, 0.5], 1.0).unwrap();
        let p = KolmogorovProblem::new(coeffs, 1.0, payoff, 1.0, 0.0, 1.0).unwrap();
        assert!(!p.gbm || p.coeffs.gbm_rates().is_some());
        for seed in 0..5 {
            let s = simulate_terminal(&p, &[0.3, -0.7], &p.driver(seed, 0)).unwrap();
            assert_eq!(s, vec![0.3, -0.7]);
        }
    }

    #[test]
    fn single_euler_step_brownian_motion() {
        let p = brownian_1d(2.0).with_steps(1);
        let driver = p.driver(11, 3);
        let z = driver.normals()[0];
        let s = simulate_terminal(&p, &[0.25], &driver).unwrap();
        assert_eq!(s[0], 0.25 + 2f64.sqrt() * z);
    }

    #[test]
    fn additive_noise_representation() {
        let p = brownian_1d(1.0).with_steps(16);
        let driver = p.driver(3, 0);
        let map = extract_affine_representation(&p, &driver).unwrap();
        assert!((map.matrix[0] - 1.0).abs() < 1e-14);
        let bt: f64 = driver.normals().iter().map(|z| z * (1.0 / 16.0f64).sqrt()).sum();
        assert!((map.offset[0] - bt).abs() < 1e-12);
    }

    #[test]
    fn zero_coefficients_give_identity_map() {
        let p = KolmogorovProblem::new(
            AffineCoefficients::zero(3),
            1.0,
            put_payoff_network(&[1.0, 1.0, 1.0], 1.0).unwrap(),
            1.0,
            0.0,
            1.0,
        )
        .unwrap();
        let map = extract_affine_representation(&p, &p.driver(0, 0)).unwrap();
        assert_eq!(map, AffineMap::identity(3));
    }

    #[test]
    fn gbm_detection() {
        let g = AffineCoefficients::gbm(3, 0.05, 0.2).unwrap();
        let (r, v) = g.gbm_rates().unwrap();
        assert_eq!(r, vec![0.05; 3]);
        assert_eq!(v, vec![0.2; 3]);
        let c = AffineCoefficients::constant(1, vec![0.0], vec![1.0]).unwrap();
        assert!(c.gbm_rates().is_none());
    }

    #[test]
    fn derived_growth_constant_holds() {
        let c = AffineCoefficients::new(
            2,
            vec![0.1, -0.3, 0.2, 0.05],
            vec![0.4, -0.1],
            vec![
                vec![0.2, 0.0, 0.1, 0.3],
                vec![0.1, 0.2, 0.0, -0.1],
                vec![-0.2, 0.1, 0.3, 0.0],
            ],
            None,
        )
        .unwrap();
        c.check_growth(1000, 50.0, 1).unwrap();
        let err = AffineCoefficients::new(
            1,
            vec![1.0],
            vec![0.0],
            vec![vec![0.0], vec![1.0]],
            Some(0.5),
        );
        assert!(err.is_err());
    }

    #[test]
    fn overflow_reports_step() {
        let coeffs = AffineCoefficients::new(1, vec![1e6], vec![0.0], vec![vec![0.0], vec![0.0]], None)
            .unwrap();
        let payoff = Parametrization::from_rows(&[(vec![vec![1.0]], vec![0.0])]).unwrap();
        let p = KolmogorovProblem::new(coeffs, 100.0, payoff, 1.0, 0.0, 1.0)
            .unwrap()
            .with_euler()
            .with_steps(1000);
        match simulate_terminal(&p, &[1.0], &p.driver(0, 0)) {
            Err(Error::NonFinite { step }) => assert!(step > 1 && step <= 1000),
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn mc_deterministic_problem_is_exact() {
        let payoff = put_payoff_network(&[0.5, 0.5], 1.0).unwrap();
        let p = KolmogorovProblem::new(AffineCoefficients::zero(2), 1.0, payoff, 1.0, 0.0, 2.0)
            .unwrap();
        let x = [0.4, 0.2];
        let e = mc_feynman_kac(&p, &x, 100, 1).unwrap();
        assert!((e.mean - p.payoff_value(&x).unwrap()).abs() < 1e-15);
        assert!(e.std_error < 1e-15);
    }

    #[test]
    fn mc_symmetric_clip_payoff() {
        let p = brownian_1d(0.1);
        let e = mc_feynman_kac(&p, &[0.0], 20_000, 5).unwrap();
        assert!(e.mean.abs() <= 4.0 * e.std_error, "{e:?}");
    }

    #[test]
    fn mc_requires_two_paths() {
        assert!(mc_feynman_kac(&brownian_1d(1.0), &[0.0], 1, 0).is_err());
    }

    #[test]
    fn reference_grid_uses_derived_seeds() {
        let p = brownian_1d(0.5);
        assert!(mc_reference_grid(&p, &[], 10, 1).unwrap().is_empty());
        let g = mc_reference_grid(&p, &[vec![0.3]], 50, 9).unwrap();
        let direct = mc_feynman_kac(&p, &[0.3], 50, grid_point_seed(9, 0)).unwrap();
        assert_eq!(g, vec![direct]);
    }

    #[test]
    fn put_closed_form_limits() {
        // zero vol: intrinsic value of the forward
        assert_eq!(gbm_put_value(0.8, 1.0, 0.0, 0.0, 1.0), 0.19999999999999996);
        // put-call parity with zero rate: P - C = K - x
        let p = gbm_put_value(1.1, 1.0, 0.0, 0.3, 2.0);
        assert!(p > 0.0 && p < 1.0);
        assert_eq!(capped_put_gbm_1d(1.0, 0.0, 1.0, 0.0, 0.2, 1.0), 1.0);
    }

    #[test]
    fn recognizes_capped_put() {
        let payoff = put_payoff_network(&[1.0], 1.0).unwrap();
        let p = KolmogorovProblem::new(
            AffineCoefficients::gbm(1, 0.0, 0.2).unwrap(),
            1.0,
            payoff,
            1.0,
            0.5,
            1.5,
        )
        .unwrap();
        assert_eq!(capped_put_1d_params(&p), Some((1.0, 0.0, 0.2)));
    }
}
