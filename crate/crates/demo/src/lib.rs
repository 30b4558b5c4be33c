//! Browser bindings for three operations of `kolmo-core`: the ERM sample
//! certificate, the one-dimensional put priced by Monte Carlo against its
//! closed form, and the averaged-composition network built from sampled
//! affine maps.
//!
//! The plain functions are usable and tested natively; the
//! `#[wasm_bindgen]` wrappers only convert errors.

use kolmo_core::bounds::{kolmogorov_certificate, put_architecture, ApproximationFamily, CertificateRequest};
use kolmo_core::constructive::{build_mc_network, BuildSpec};
use kolmo_core::net::{put_payoff_network, ClippedNetwork};
use kolmo_core::sde::{capped_put_gbm_1d, mc_feynman_kac, AffineCoefficients, KolmogorovProblem};
use wasm_bindgen::prelude::*;

/// Certificate rows as CSV `quantity,value,formula,paper_ref`.
pub fn certificate_csv(dim: usize, eps: f64, rho: f64, constant: f64) -> kolmo_core::Result<String> {
    let mut req = CertificateRequest::new(dim, eps, rho, ApproximationFamily::put());
    req.constant = constant;
    let cert = kolmogorov_certificate(&req, &put_architecture)?;
    let mut out = Vec::new();
    cert.write_csv(&mut out)?;
    Ok(String::from_utf8(out).expect("certificate CSV is UTF-8"))
}

fn put_problem(vol: f64, horizon: f64) -> kolmo_core::Result<KolmogorovProblem> {
    KolmogorovProblem::new(
        AffineCoefficients::gbm(1, 0.0, vol)?,
        horizon,
        put_payoff_network(&[1.0], 1.0)?,
        1.0,
        0.5,
        1.5,
    )
}

/// `[closed_form, mc_mean, mc_std_error]` for the capped put `min((1 − S_T)⁺, 1)`.
pub fn put_price(x: f64, vol: f64, horizon: f64, paths: usize, seed: u64) -> kolmo_core::Result<Vec<f64>> {
    let problem = put_problem(vol, horizon)?;
    let mc = mc_feynman_kac(&problem, &[x], paths, seed)?;
    Ok(vec![capped_put_gbm_1d(x, 1.0, 1.0, 0.0, vol, horizon), mc.mean, mc.std_error])
}

/// Builds the network from `n` affine maps for the one-dimensional put and
/// samples it at `points` inputs across `[0.5, 1.5]`. Layout:
/// `[l2_error, param_count, x_0, net_0, exact_0, x_1, ...]`.
pub fn built_curve(n: usize, vol: f64, seed: u64, points: usize) -> kolmo_core::Result<Vec<f64>> {
    let problem = put_problem(vol, 1.0)?;
    let mut spec = BuildSpec::new(n, problem.payoff.clone(), seed);
    spec.retries = 1;
    spec.grid_size = 64;
    let built = build_mc_network(&problem, &spec)?;
    let net = ClippedNetwork::new(built.params.clone(), 1.0)?;
    let mut out = vec![built.l2_error(), built.clipped.architecture().param_count() as f64];
    let steps = points.max(2) - 1;
    for k in 0..=steps {
        let x = 0.5 + k as f64 / steps as f64;
        out.extend([x, net.eval(&[x])?, capped_put_gbm_1d(x, 1.0, 1.0, 0.0, vol, 1.0)]);
    }
    Ok(out)
}

fn js(e: kolmo_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn certificate(dim: usize, eps: f64, rho: f64, constant: f64) -> Result<String, JsError> {
    certificate_csv(dim, eps, rho, constant).map_err(js)
}

#[wasm_bindgen(js_name = putPrice)]
pub fn put_price_js(x: f64, vol: f64, horizon: f64, paths: usize, seed: u64) -> Result<Vec<f64>, JsError> {
    put_price(x, vol, horizon, paths, seed).map_err(js)
}

#[wasm_bindgen(js_name = buildCurve)]
pub fn built_curve_js(n: usize, vol: f64, seed: u64, points: usize) -> Result<Vec<f64>, JsError> {
    built_curve(n, vol, seed, points).map_err(js)
}
