//! Problem definition files: flat `key = value` text.
//!
//! ```text
//! dimension = 2
//! u = 0.5
//! v = 1.5
//! T = 1
//! D = 1
//! gbm = 0.0 0.2
//! payoff = put 0.5 0.5 1
//! ```
//!
//! Instead of `gbm`, general affine coefficients may be given as
//! `drift_matrix`, `drift_vector` and `diffusion_0` .. `diffusion_d`
//! (row-major, whitespace or comma separated; missing entries are zero).
//! `payoff = network <path>` loads a network file relative to the problem
//! file. `steps` sets the Euler step count and `euler = true` forces Euler
//! for GBM.

use std::path::Path;

use anyhow::{bail, Context, Result};
use ini::Ini;
use kolmo_core::net::{put_payoff_network, Parametrization};
use kolmo_core::sde::{AffineCoefficients, KolmogorovProblem};

const KEYS: &[&str] = &[
    "dimension",
    "u",
    "v",
    "T",
    "D",
    "gbm",
    "drift_matrix",
    "drift_vector",
    "payoff",
    "steps",
    "euler",
];

pub fn load_problem(path: &Path) -> Result<KolmogorovProblem> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read problem file {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_problem(&text, base).with_context(|| format!("in problem file {}", path.display()))
}

pub fn parse_problem(text: &str, base: &Path) -> Result<KolmogorovProblem> {
    let ini = Ini::load_from_str(text).context("malformed key-value text")?;
    if ini.sections().flatten().next().is_some() {
        bail!("problem files take no [sections]");
    }
    let kv = ini.general_section();
    for (k, _) in kv.iter() {
        let known = KEYS.contains(&k)
            || k.strip_prefix("diffusion_").is_some_and(|i| i.parse::<usize>().is_ok());
        if !known {
            bail!("unknown key `{k}`");
        }
    }
    let get = |k: &str| kv.get(k).with_context(|| format!("missing key `{k}`"));
    let dim: usize = get("dimension")?.trim().parse().context("`dimension` must be a positive integer")?;
    let num = |k: &str| -> Result<f64> {
        get(k)?.trim().parse().with_context(|| format!("`{k}` must be a number"))
    };
    let (lower, upper, horizon, clip) = (num("u")?, num("v")?, num("T")?, num("D")?);

    let coeffs = match kv.get("gbm") {
        Some(g) => {
            if kv.iter().any(|(k, _)| k.starts_with("drift_") || k.starts_with("diffusion_")) {
                bail!("`gbm` cannot be combined with explicit drift or diffusion keys");
            }
            let v = numbers(g).context("`gbm` expects `rate vol`")?;
            let [rate, vol] = v[..] else {
                bail!("`gbm` expects two numbers `rate vol`, got {}", v.len());
            };
            AffineCoefficients::gbm(dim, rate, vol)?
        }
        None => {
            let matrix = |k: &str, len: usize| -> Result<Vec<f64>> {
                match kv.get(k) {
                    None => Ok(vec![0.0; len]),
                    Some(s) => {
                        let v = numbers(s).with_context(|| format!("in `{k}`"))?;
                        if v.len() != len {
                            bail!("`{k}` needs {len} entries, got {}", v.len());
                        }
                        Ok(v)
                    }
                }
            };
            let a = matrix("drift_matrix", dim * dim)?;
            let b = matrix("drift_vector", dim)?;
            let diffusion = (0..=dim)
                .map(|k| matrix(&format!("diffusion_{k}"), dim * dim))
                .collect::<Result<Vec<_>>>()?;
            if let Some((k, _)) = kv.iter().find(|(k, _)| {
                k.strip_prefix("diffusion_")
                    .and_then(|i| i.parse::<usize>().ok())
                    .is_some_and(|i| i > dim)
            }) {
                bail!("`{k}` exceeds the dimension {dim}");
            }
            AffineCoefficients::new(dim, a, b, diffusion, None)?
        }
    };

    let payoff = parse_payoff(get("payoff")?, dim, clip, base)?;
    let mut problem = KolmogorovProblem::new(coeffs, horizon, payoff, clip, lower, upper)?;
    if let Some(s) = kv.get("steps") {
        let steps: usize = s.trim().parse().context("`steps` must be a positive integer")?;
        if steps == 0 {
            bail!("`steps` must be positive");
        }
        problem = problem.with_steps(steps);
    }
    if let Some(e) = kv.get("euler") {
        match e.trim() {
            "true" => problem = problem.with_euler(),
            "false" => {}
            other => bail!("`euler` must be true or false, got `{other}`"),
        }
    }
    Ok(problem)
}

fn parse_payoff(spec: &str, dim: usize, clip: f64, base: &Path) -> Result<Parametrization> {
    let spec = spec.trim();
    if let Some(rest) = spec.strip_prefix("put") {
        let v = numbers(rest).context("`payoff = put c_1 .. c_d D`")?;
        if v.len() != dim + 1 {
            bail!("`payoff = put` needs {dim} weights and D, got {} numbers", v.len());
        }
        if v[dim] != clip {
            bail!("payoff amplitude {} differs from D = {clip}", v[dim]);
        }
        return Ok(put_payoff_network(&v[..dim], v[dim])?);
    }
    if let Some(rest) = spec.strip_prefix("network") {
        let path = base.join(rest.trim());
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("cannot read payoff network {}", path.display()))?;
        let net = Parametrization::from_text(&text)?;
        let arch = net.architecture();
        if arch.input_dim() != dim || arch.output_dim() != 1 {
            bail!("payoff network must map R^{dim} to R, got architecture {arch}");
        }
        return Ok(net);
    }
    bail!("`payoff` must be `put c_1 .. c_d D` or `network <path>`")
}

/// Whitespace or comma separated numbers.
pub fn numbers(s: &str) -> Result<Vec<f64>> {
    s.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().with_context(|| format!("`{t}` is not a number")))
        .collect()
}
