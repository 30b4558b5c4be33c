//! Certificate calculators: the Lipschitz constant of the realization map,
//! covering numbers of network classes, the covering-number generalization
//! bound, the sample-complexity function `h`, Kolmogorov certificates and
//! the scaling-law audit.
//!
//! Every function is pure. Domain violations return [`Error::Domain`]
//! naming the violated hypothesis.

use std::io::Write;

use crate::error::{Error, Result};
use crate::net::Architecture;
use crate::stats::linear_fit;

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Domain(msg()))
    }
}

fn require_unit_interval(name: &str, x: f64) -> Result<()> {
    require(x > 0.0 && x < 1.0, || format!("{name} must lie in (0,1), got {x}"))
}

/// The hypothesis class `N_{a,R,D}` on `[u,v]^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassSpec {
    pub architecture: Architecture,
    pub bound: f64,
    pub clip: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ClassSpec {
    pub fn new(architecture: Architecture, bound: f64, clip: f64, lower: f64, upper: f64) -> Result<Self> {
        let spec = Self {
            architecture,
            bound,
            clip,
            lower,
            upper,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        require(self.bound >= 1.0 && self.bound.is_finite(), || {
            format!("parameter bound R must satisfy R ≥ 1, got {}", self.bound)
        })?;
        require(self.clip >= 1.0 && self.clip.is_finite(), || {
            format!("clip amplitude D must satisfy D ≥ 1, got {}", self.clip)
        })?;
        require(self.lower < self.upper, || {
            format!("domain requires u < v, got [{}, {}]", self.lower, self.upper)
        })
    }

    /// `max{1, |u|, |v|}`.
    pub fn domain_scale(&self) -> f64 {
        1f64.max(self.lower.abs()).max(self.upper.abs())
    }

    fn depth(&self) -> f64 {
        self.architecture.depth() as f64
    }

    fn width(&self) -> f64 {
        self.architecture.max_width() as f64
    }
}

/// `2·max{1,|u|,|v|}·L²·R^{L−1}·‖a‖^L`: Lipschitz constant of
/// `θ ↦ F(θ)|_{[u,v]^d}` from `(P_{a,R}, ‖·‖_∞)` to `L^∞`.
pub fn lipschitz_bound(spec: &ClassSpec) -> Result<f64> {
    spec.validate()?;
    let l = spec.depth();
    Ok(2.0 * spec.domain_scale() * l * l * spec.bound.powf(l - 1.0) * spec.width().powf(l))
}

/// The sharper intermediate form
/// `m̂·L·R^{L−1}‖a‖^L + Σ_{l=1}^{L} l·(R‖a‖)^{l−1}`, never above
/// [`lipschitz_bound`].
pub fn lipschitz_bound_sharp(spec: &ClassSpec) -> Result<f64> {
    spec.validate()?;
    let l = spec.depth();
    let (r, w) = (spec.bound, spec.width());
    let tail: f64 = (1..=spec.architecture.depth())
        .map(|k| k as f64 * (r * w).powi(k as i32 - 1))
        .sum();
    Ok(spec.domain_scale() * l * r.powf(l - 1.0) * w.powf(l) + tail)
}

/// `⌈R/r⌉` computed without floating-point drift: if `R/r` rounds to an
/// integer but `r·k < R`, the ceiling moves up.
fn exact_ceil_ratio(numer: f64, denom: f64) -> f64 {
    let q = (numer / denom).ceil();
    if q * denom < numer {
        q + 1.0
    } else if (q - 1.0) * denom >= numer {
        q - 1.0
    } else {
        q
    }
}

/// `n·ln⌈R/r⌉`: log-covering number of the `‖·‖_∞` ball of radius `R` in `R^n`.
pub fn ball_covering_log(n: u64, bound: f64, radius: f64) -> Result<f64> {
    require(n >= 1, || "dimension n must be positive".into())?;
    require(bound >= 1.0, || format!("ball radius R must satisfy R ≥ 1, got {bound}"))?;
    require_unit_interval("covering radius r", radius)?;
    Ok(n as f64 * exact_ceil_ratio(bound, radius).ln())
}

/// `P(a)·[ln(4L²·max{1,|u|,|v|}/r) + L·ln(R‖a‖_∞)]`. The same value bounds
/// the clipped class since clipping is non-expansive.
pub fn network_covering_log(spec: &ClassSpec, radius: f64) -> Result<f64> {
    spec.validate()?;
    require_unit_interval("covering radius r", radius)?;
    let l = spec.depth();
    let p = spec.architecture.param_count() as f64;
    Ok(p * ((4.0 * l * l * spec.domain_scale() / radius).ln() + l * (spec.bound * spec.width()).ln()))
}

/// `ln 2 + ln Cov − mε²/(128D⁴)`: log of the failure-probability bound of
/// `E(f̂) − E(f_H) > ε`, with `ln_cov` taken at radius `ε/(32D)`. The caller
/// exponentiates and clamps at 1.
pub fn generalization_failure_log(ln_cov: f64, m: u64, eps: f64, clip: f64) -> Result<f64> {
    require(m >= 1, || "sample size m must be positive".into())?;
    require_unit_interval("ε", eps)?;
    require(clip >= 1.0, || format!("clip amplitude D must satisfy D ≥ 1, got {clip}"))?;
    require(ln_cov >= 0.0, || format!("log-covering number must be nonnegative, got {ln_cov}"))?;
    Ok(2f64.ln() + ln_cov - m as f64 * eps * eps / (128.0 * clip.powi(4)))
}

/// Hoeffding bound `2·exp(−2mt²/range²)` for the deviation of an
/// `m`-sample mean of variables with values in an interval of length `range`.
pub fn hoeffding_bound(m: u64, deviation: f64, range: f64) -> f64 {
    (2.0 * (-2.0 * m as f64 * deviation * deviation / (range * range)).exp()).min(1.0)
}

/// Arguments of `h`: `x1 = ε⁻¹`, `x2 = ln ϱ⁻¹`, `x3 = ln(R‖a‖_∞)`,
/// `x4 = P(a)`, `x5 = L(a)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HArgs {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    pub x4: f64,
    pub x5: f64,
}

/// `h(x) = 128D⁴x₁²[ln 2 + x₂ + x₃x₄x₅ + x₄·ln(128D·max{1,|u|,|v|}·x₁x₅²)]`.
///
/// `x₂` and `x₃` may be zero (the `ϱ → 1` and `R‖a‖ = 1` limits).
pub fn sample_complexity_h(x: HArgs, clip: f64, lower: f64, upper: f64) -> Result<f64> {
    require(x.x1 > 0.0 && x.x4 > 0.0 && x.x5 > 0.0, || {
        format!("h requires x1, x4, x5 > 0, got {x:?}")
    })?;
    require(x.x2 >= 0.0 && x.x3 >= 0.0, || format!("h requires x2, x3 ≥ 0, got {x:?}"))?;
    require(clip >= 1.0, || format!("clip amplitude D must satisfy D ≥ 1, got {clip}"))?;
    let scale = 1f64.max(lower.abs()).max(upper.abs());
    let inner = (128.0 * clip * scale * x.x1 * x.x5 * x.x5).ln();
    Ok(128.0
        * clip.powi(4)
        * x.x1
        * x.x1
        * (2f64.ln() + x.x2 + x.x3 * x.x4 * x.x5 + x.x4 * inner))
}

fn h_args(spec: &ClassSpec, eps_inv: f64, rho: f64) -> HArgs {
    HArgs {
        x1: eps_inv,
        x2: (1.0 / rho).ln(),
        x3: (spec.bound * spec.width()).ln(),
        x4: spec.architecture.param_count() as f64,
        x5: spec.depth(),
    }
}

fn ceil_u64(x: f64) -> Result<u64> {
    let c = x.ceil();
    if !c.is_finite() || c >= u64::MAX as f64 {
        return Err(Error::Overflow(format!("required sample size {x:e} exceeds 64 bits")));
    }
    Ok(c.max(1.0) as u64)
}

/// `⌈h(ε⁻¹, ln ϱ⁻¹, ln(R‖a‖), P(a), L(a))⌉`: samples that make
/// `E(f̂) − E(f_H) ≤ ε` hold with probability at least `1 − ϱ`.
pub fn required_samples(spec: &ClassSpec, eps: f64, rho: f64) -> Result<u64> {
    spec.validate()?;
    require_unit_interval("ε", eps)?;
    require_unit_interval("ϱ", rho)?;
    ceil_u64(sample_complexity_h(h_args(spec, 1.0 / eps, rho), spec.clip, spec.lower, spec.upper)?)
}

/// The approximation-to-generalization form with `2ε⁻¹`: if the class holds
/// some `g` with `‖g − f*‖² ≤ ε/2`, this many samples give
/// `‖f̂ − f*‖² ≤ ε` with probability at least `1 − ϱ`.
pub fn required_samples_from_approximation(spec: &ClassSpec, eps: f64, rho: f64) -> Result<u64> {
    spec.validate()?;
    require_unit_interval("ε", eps)?;
    require_unit_interval("ϱ", rho)?;
    ceil_u64(sample_complexity_h(h_args(spec, 2.0 / eps, rho), spec.clip, spec.lower, spec.upper)?)
}

/// Exponents of an approximation family for the payoffs `φ_d`:
/// `η_{d,δ}` reaches accuracy `δ` with `P ≲ d^γ δ^{−λ}` parameters, weights
/// `≲ d^β δ^{−κ}`, and growth/regularity constants scaling like `d^ν`, `d^α`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ApproximationFamily {
    pub constant: f64,
    pub nu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub lambda: f64,
}

impl ApproximationFamily {
    /// The exact put payoff networks: `ν = 1/2`, `γ = 1`, the rest zero.
    pub fn put() -> Self {
        Self {
            constant: 1.0,
            nu: 0.5,
            alpha: 0.0,
            beta: 0.0,
            gamma: 1.0,
            kappa: 0.0,
            lambda: 0.0,
        }
    }

    pub fn tau(&self) -> f64 {
        self.nu + 2.0 * self.alpha
    }

    pub fn validate(&self) -> Result<()> {
        require(self.constant >= 1.0, || format!("family constant must be ≥ 1, got {}", self.constant))?;
        require(self.nu >= 0.5, || format!("ν must be ≥ 1/2, got {}", self.nu))?;
        let rest = [self.alpha, self.beta, self.gamma, self.kappa, self.lambda];
        require(rest.iter().all(|&x| x >= 0.0 && x.is_finite()), || {
            format!("α, β, γ, κ, λ must be nonnegative, got {rest:?}")
        })
    }

    pub fn parameter_exponents(&self) -> (f64, f64) {
        (self.tau() * (self.lambda / 2.0 + 2.0) + self.gamma, self.lambda / 2.0 + 2.0)
    }

    pub fn bound_exponents(&self) -> (f64, f64) {
        (self.tau() * (self.kappa / 2.0 + 1.0) + self.beta + 1.5, self.kappa / 2.0 + 1.0)
    }
}

/// Architecture `b_{d,δ}` of the payoff approximation for a given accuracy.
pub trait PayoffArchitecture {
    fn architecture(&self, dim: usize, delta: f64) -> Result<Architecture>;
}

impl<F: Fn(usize, f64) -> Result<Architecture>> PayoffArchitecture for F {
    fn architecture(&self, dim: usize, delta: f64) -> Result<Architecture> {
        self(dim, delta)
    }
}

/// The put payoff network has the fixed architecture `(d, 1, 1, 1)`.
pub fn put_architecture(dim: usize, _delta: f64) -> Result<Architecture> {
    Architecture::new(vec![dim, 1, 1, 1])
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertificateRow {
    pub quantity: &'static str,
    pub value: f64,
    pub formula: String,
    pub source: &'static str,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub dim: usize,
    pub eps: f64,
    pub rho: f64,
    pub constant: f64,
    pub tau: f64,
    pub parameter_cap: f64,
    pub bound_cap: f64,
    pub depth: usize,
    pub width_cap: f64,
    /// Accuracy `δ = c·d^{−τ/2}·ε^{1/2}` at which the payoff architecture is taken.
    pub delta: f64,
    pub samples: u64,
    pub rows: Vec<CertificateRow>,
}

impl Certificate {
    /// CSV `quantity,value,formula,paper_ref`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "quantity,value,formula,paper_ref")?;
        for r in &self.rows {
            writeln!(w, "{},{},\"{}\",\"{}\"", r.quantity, fmt_value(r.value), r.formula, r.source)?;
        }
        Ok(())
    }

    /// Fixed-width human-readable table.
    pub fn table(&self) -> String {
        let mut s = format!(
            "certificate for d = {}, ε = {}, ϱ = {}, C = {}, τ = {}\n",
            self.dim, self.eps, self.rho, self.constant, self.tau
        );
        s.push_str(&format!("{:<12} {:>16}  {}\n", "quantity", "value", "formula"));
        for r in &self.rows {
            s.push_str(&format!("{:<12} {:>16}  {}\n", r.quantity, fmt_value(r.value), r.formula));
        }
        s
    }
}

fn fmt_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{v:.0}")
    } else {
        format!("{v:.6e}")
    }
}

fn fmt_exp(x: f64) -> String {
    if x.fract() == 0.0 {
        format!("{x:.0}")
    } else {
        format!("{x}")
    }
}

/// Inputs of [`kolmogorov_certificate`]. `constant` (C) and `c` default to 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CertificateRequest {
    pub dim: usize,
    pub eps: f64,
    pub rho: f64,
    pub family: ApproximationFamily,
    pub constant: f64,
    pub c: f64,
    pub clip: f64,
    pub lower: f64,
    pub upper: f64,
}

impl CertificateRequest {
    pub fn new(dim: usize, eps: f64, rho: f64, family: ApproximationFamily) -> Self {
        Self {
            dim,
            eps,
            rho,
            family,
            constant: 1.0,
            c: 1.0,
            clip: 1.0,
            lower: 0.0,
            upper: 1.0,
        }
    }
}

/// Concrete caps for the ERM certificate on a Kolmogorov problem with
/// payoffs from `family`. `constant` and `c` stand in for the existential
/// constants; exponents are printed separately so audits stay
/// constant-free. The sample size uses `2ε⁻¹` and the caps for `R`,
/// `‖a‖_∞`, `P(a)`, which is conservative since `h` increases in each.
pub fn kolmogorov_certificate(
    request: &CertificateRequest,
    payoff: &dyn PayoffArchitecture,
) -> Result<Certificate> {
    let CertificateRequest {
        dim,
        eps,
        rho,
        ref family,
        constant,
        c,
        clip,
        lower,
        upper,
    } = *request;
    require(dim >= 1, || "dimension d must be positive".into())?;
    require_unit_interval("ε", eps)?;
    require_unit_interval("ϱ", rho)?;
    require(constant > 0.0 && constant.is_finite(), || {
        format!("constant C must be positive, got {constant}")
    })?;
    require(c > 0.0 && c.is_finite(), || format!("constant c must be positive, got {c}"))?;
    family.validate()?;
    let d = dim as f64;
    let tau = family.tau();
    let (pd, pe) = family.parameter_exponents();
    let (rd, re) = family.bound_exponents();
    let parameter_cap = constant * d.powf(pd) * eps.powf(-pe);
    let bound_cap = (constant * d.powf(rd) * eps.powf(-re)).max(1.0);
    let delta = c * d.powf(-tau / 2.0) * eps.sqrt();
    let b = payoff.architecture(dim, delta)?;
    let depth = b.depth();
    let width_cap = constant * d.powf(tau) / eps * b.max_width() as f64;

    let x = HArgs {
        x1: 2.0 / eps,
        x2: (1.0 / rho).ln(),
        x3: (bound_cap * width_cap).ln().max(0.0),
        x4: parameter_cap,
        x5: depth as f64,
    };
    let samples = ceil_u64(sample_complexity_h(x, clip, lower, upper)?)?;

    let rows = vec![
        CertificateRow {
            quantity: "m",
            value: samples as f64,
            formula: "ceil(h(2/eps, ln(1/rho), ln(R*|a|), P(a), L(a)))".into(),
            source: "sample size of the Kolmogorov generalization result",
        },
        CertificateRow {
            quantity: "P(a)",
            value: parameter_cap,
            formula: format!("C*d^{}*eps^-{}", fmt_exp(pd), fmt_exp(pe)),
            source: "parameter-count cap (item ii)",
        },
        CertificateRow {
            quantity: "R",
            value: bound_cap,
            formula: format!("C*d^{}*eps^-{}", fmt_exp(rd), fmt_exp(re)),
            source: "parameter-bound cap (item iii)",
        },
        CertificateRow {
            quantity: "L(a)",
            value: depth as f64,
            formula: format!("L(b_(d,delta)) with delta = c*d^-{}*eps^(1/2)", fmt_exp(tau / 2.0)),
            source: "depth (item iv)",
        },
        CertificateRow {
            quantity: "max_width",
            value: width_cap,
            formula: format!("C*d^{}*eps^-1*|b_(d,delta)|", fmt_exp(tau)),
            source: "width cap (item v)",
        },
    ];
    Ok(Certificate {
        dim,
        eps,
        rho,
        constant,
        tau,
        parameter_cap,
        bound_cap,
        depth,
        width_cap,
        delta,
        samples,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingAudit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `ln q − (intercept + slope·ln d)` per input row.
    pub residuals: Vec<f64>,
    pub threshold: f64,
    pub pass: bool,
}

/// OLS fit of `ln q` against `ln d`. Passes when the fitted degree is at
/// most `threshold`. Needs at least three distinct `d`.
pub fn scaling_audit(results: &[(usize, f64)], threshold: f64) -> Result<ScalingAudit> {
    let mut dims: Vec<usize> = results.iter().map(|r| r.0).collect();
    dims.sort_unstable();
    dims.dedup();
    require(dims.len() >= 3, || {
        format!("scaling audit needs at least 3 distinct dimensions, got {}", dims.len())
    })?;
    require(results.iter().all(|&(d, q)| d >= 1 && q > 0.0 && q.is_finite()), || {
        "scaling audit needs positive dimensions and quantities".into()
    })?;
    let x: Vec<f64> = results.iter().map(|&(d, _)| (d as f64).ln()).collect();
    let y: Vec<f64> = results.iter().map(|&(_, q)| q.ln()).collect();
    let fit = linear_fit(&x, &y).ok_or_else(|| Error::Domain("degenerate scaling fit".into()))?;
    let residuals = x
        .iter()
        .zip(&y)
        .map(|(a, b)| b - (fit.intercept + fit.slope * a))
        .collect();
    Ok(ScalingAudit {
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        residuals,
        threshold,
        pass: fit.slope <= threshold,
    })
}
