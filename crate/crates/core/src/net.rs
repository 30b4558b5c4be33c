//! ReLU networks: architectures, parametrizations, realization and the
//! explicit constructions (clipping, put payoff, averaged composition).
//!
//! A parametrization `((W_1, B_1), ..., (W_L, B_L))` realizes
//!
//! ```text
//! x ↦ A_L ∘ ReLU ∘ A_{L-1} ∘ ... ∘ ReLU ∘ A_1 (x),   A_l(z) = W_l z + B_l
//! ```
//!
//! with no activation on the output layer. Weights are stored dense and
//! row-major.

use std::fmt::Write as _;

use crate::error::{ensure, Error, Result};
use crate::sde::AffineMap;

/// Layer widths `(a_0, a_1, ..., a_L)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Architecture {
    widths: Vec<usize>,
}

impl Architecture {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::InvalidArchitecture(format!(
                "need at least input and output width, got {widths:?}"
            )));
        }
        if widths.contains(&0) {
            return Err(Error::InvalidArchitecture(format!(
                "all widths must be positive, got {widths:?}"
            )));
        }
        Ok(Self { widths })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    /// Number of affine layers `L`.
    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        self.widths[self.widths.len() - 1]
    }

    /// `P(a) = Σ_l a_l a_{l-1} + a_l`.
    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
    }

    /// `‖a‖_∞`, the largest width including input and output.
    pub fn max_width(&self) -> usize {
        *self.widths.iter().max().expect("nonempty")
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("(")?;
        for (i, w) in self.widths.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{w}")?;
        }
        f.write_str(")")
    }
}

/// One affine layer: `rows × cols` weights and `rows` biases.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn new(rows: usize, cols: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        ensure(weights.len() == rows * cols, || {
            format!("weight buffer has {} entries, expected {rows}x{cols}", weights.len())
        })?;
        ensure(bias.len() == rows, || {
            format!("bias has {} entries, expected {rows}", bias.len())
        })?;
        Ok(Self {
            rows,
            cols,
            weights,
            bias,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
        }
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.cols..(i + 1) * self.cols]
    }

    /// `out = W x + B`.
    #[inline]
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        for (i, o) in out.iter_mut().enumerate().take(self.rows) {
            let row = self.row(i);
            let mut acc = self.bias[i];
            for (w, xi) in row.iter().zip(x) {
                acc += w * xi;
            }
            *o = acc;
        }
    }

    fn max_abs(&self) -> f64 {
        self.weights
            .iter()
            .chain(&self.bias)
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// A network parametrization `θ ∈ P_a`.
#[derive(Clone, Debug, PartialEq)]
pub struct Parametrization {
    arch: Architecture,
    layers: Vec<Layer>,
}

impl Parametrization {
    pub fn new(arch: Architecture, layers: Vec<Layer>) -> Result<Self> {
        if layers.len() != arch.depth() {
            return Err(Error::InvalidArchitecture(format!(
                "{} layers given for architecture {arch}",
                layers.len()
            )));
        }
        for (l, (layer, w)) in layers.iter().zip(arch.widths().windows(2)).enumerate() {
            if layer.cols != w[0] || layer.rows != w[1] {
                return Err(Error::InvalidArchitecture(format!(
                    "layer {} is {}x{}, architecture {arch} needs {}x{}",
                    l + 1,
                    layer.rows,
                    layer.cols,
                    w[1],
                    w[0]
                )));
            }
        }
        Ok(Self { arch, layers })
    }

    /// Builds a parametrization from `(W, B)` pairs given as nested rows.
    pub fn from_rows(layers: &[(Vec<Vec<f64>>, Vec<f64>)]) -> Result<Self> {
        ensure(!layers.is_empty(), || "no layers".into())?;
        let mut widths = vec![layers[0].0.first().map_or(0, Vec::len)];
        let mut built = Vec::with_capacity(layers.len());
        for (w, b) in layers {
            let rows = w.len();
            let cols = w.first().map_or(0, Vec::len);
            ensure(w.iter().all(|r| r.len() == cols), || "ragged weight matrix".into())?;
            widths.push(rows);
            built.push(Layer::new(rows, cols, w.concat(), b.clone())?);
        }
        Self::new(Architecture::new(widths)?, built)
    }

    pub fn zeros(arch: Architecture) -> Self {
        let layers = arch
            .widths()
            .windows(2)
            .map(|w| Layer::zeros(w[1], w[0]))
            .collect();
        Self { arch, layers }
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// `‖θ‖_∞`: largest absolute weight or bias.
    pub fn max_norm(&self) -> f64 {
        self.layers.iter().fold(0.0_f64, |m, l| m.max(l.max_abs()))
    }

    /// Membership in `P_{a,R}`.
    pub fn is_bounded_by(&self, bound: f64) -> bool {
        self.max_norm() <= bound
    }

    /// Iterates over all parameters, layer by layer, weights before biases.
    pub fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    /// `‖θ − η‖_∞` for two parametrizations of the same architecture.
    pub fn distance(&self, other: &Parametrization) -> Result<f64> {
        self.check_same_arch(other)?;
        Ok(self
            .params()
            .zip(other.params())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
    }

    fn check_same_arch(&self, other: &Parametrization) -> Result<()> {
        if self.arch != other.arch {
            return Err(Error::InvalidArchitecture(format!(
                "architectures differ: {} vs {}",
                self.arch, other.arch
            )));
        }
        Ok(())
    }

    /// Evaluates the realization `F(θ)(x)`.
    pub fn realize(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.arch.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.arch.input_dim(),
                actual: x.len(),
            });
        }
        let mut scratch = Scratch::new(&self.arch);
        Ok(scratch.forward(self, x).to_vec())
    }

    /// Scalar realization for networks with output width 1.
    pub fn realize_scalar(&self, x: &[f64]) -> Result<f64> {
        if self.arch.output_dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                actual: self.arch.output_dim(),
            });
        }
        Ok(self.realize(x)?[0])
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("arch:");
        for w in self.arch.widths() {
            let _ = write!(s, " {w}");
        }
        s.push('\n');
        for (l, layer) in self.layers.iter().enumerate() {
            let _ = writeln!(s, "W_{}", l + 1);
            for i in 0..layer.rows {
                write_values(&mut s, layer.row(i));
            }
            let _ = writeln!(s, "B_{}", l + 1);
            write_values(&mut s, &layer.bias);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let parse_err = |line: usize, message: String| Error::Parse { line, message };

        let (n, header) = lines
            .next()
            .ok_or_else(|| parse_err(0, "empty network file".into()))?;
        let widths = header
            .strip_prefix("arch:")
            .ok_or_else(|| parse_err(n, "expected `arch:` header".into()))?
            .split_whitespace()
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|e| parse_err(n, format!("bad width `{t}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let arch = Architecture::new(widths)?;

        let mut layers = Vec::with_capacity(arch.depth());
        for (l, w) in arch.widths().windows(2).enumerate() {
            let (rows, cols) = (w[1], w[0]);
            let tag = format!("W_{}", l + 1);
            let (n, line) = lines
                .next()
                .ok_or_else(|| parse_err(0, format!("missing {tag}")))?;
            if line != tag {
                return Err(parse_err(n, format!("expected `{tag}`, found `{line}`")));
            }
            let mut weights = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (n, line) = lines
                    .next()
                    .ok_or_else(|| parse_err(0, format!("truncated {tag}")))?;
                weights.extend(parse_values(line, cols, n)?);
            }
            let tag = format!("B_{}", l + 1);
            let (n, line) = lines
                .next()
                .ok_or_else(|| parse_err(0, format!("missing {tag}")))?;
            if line != tag {
                return Err(parse_err(n, format!("expected `{tag}`, found `{line}`")));
            }
            let (n, line) = lines
                .next()
                .ok_or_else(|| parse_err(0, format!("truncated {tag}")))?;
            let bias = parse_values(line, rows, n)?;
            layers.push(Layer::new(rows, cols, weights, bias)?);
        }
        if let Some((n, extra)) = lines.next() {
            return Err(parse_err(n, format!("trailing content `{extra}`")));
        }
        Self::new(arch, layers)
    }
}

fn write_values(s: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        // 17 significant digits round-trip every f64.
        let _ = write!(s, "{v:.16e}");
    }
    s.push('\n');
}

fn parse_values(line: &str, expected: usize, n: usize) -> Result<Vec<f64>> {
    let values = line
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>().map_err(|e| Error::Parse {
                line: n,
                message: format!("bad number `{t}`: {e}"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if values.len() != expected {
        return Err(Error::Parse {
            line: n,
            message: format!("expected {expected} values, found {}", values.len()),
        });
    }
    Ok(values)
}

/// Reusable activation buffers for repeated forward passes.
#[derive(Clone, Debug)]
pub struct Scratch {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl Scratch {
    pub fn new(arch: &Architecture) -> Self {
        let w = arch.max_width();
        Self {
            a: vec![0.0; w],
            b: vec![0.0; w],
        }
    }

    /// Forward pass; panics in debug builds on a dimension mismatch.
    pub fn forward<'s>(&'s mut self, params: &Parametrization, x: &[f64]) -> &'s [f64] {
        let depth = params.layers.len();
        self.a[..x.len()].copy_from_slice(x);
        let mut width = x.len();
        for (l, layer) in params.layers.iter().enumerate() {
            layer.apply(&self.a[..width], &mut self.b[..layer.rows]);
            width = layer.rows;
            if l + 1 < depth {
                for v in &mut self.b[..width] {
                    *v = v.max(0.0);
                }
            }
            std::mem::swap(&mut self.a, &mut self.b);
        }
        &self.a[..width]
    }
}

/// The clipping function `C_D(x) = min{|x|, D}·sgn(x)`.
#[inline]
pub fn clip(x: f64, amplitude: f64) -> f64 {
    x.clamp(-amplitude, amplitude)
}

/// A network whose scalar output is passed through `C_D`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClippedNetwork {
    params: Parametrization,
    amplitude: f64,
}

impl ClippedNetwork {
    pub fn new(params: Parametrization, amplitude: f64) -> Result<Self> {
        ensure(amplitude > 0.0 && amplitude.is_finite(), || {
            format!("clip amplitude must be positive, got {amplitude}")
        })?;
        if params.architecture().output_dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                actual: params.architecture().output_dim(),
            });
        }
        Ok(Self { params, amplitude })
    }

    pub fn params(&self) -> &Parametrization {
        &self.params
    }

    pub fn into_params(self) -> Parametrization {
        self.params
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn input_dim(&self) -> usize {
        self.params.architecture().input_dim()
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(clip(self.params.realize_scalar(x)?, self.amplitude))
    }

    /// Evaluates with caller-owned buffers; `x` must have the input width.
    #[inline]
    pub fn eval_with(&self, scratch: &mut Scratch, x: &[f64]) -> f64 {
        clip(scratch.forward(&self.params, x)[0], self.amplitude)
    }

    /// The same function as a plain ReLU network with three extra layers.
    pub fn to_standard(&self) -> Result<Parametrization> {
        clipped_as_standard(&self.params, self.amplitude)
    }
}

fn check_amplitude(amplitude: f64) -> Result<()> {
    ensure(amplitude > 0.0 && amplitude.is_finite(), || {
        format!("clip amplitude must be positive and finite, got {amplitude}")
    })
}

/// The `(1,2,2,1)` network realizing `C_D` exactly:
/// `x ↦ −ReLU(D − ReLU(x)) + ReLU(D − ReLU(−x))`.
pub fn clip_network(amplitude: f64) -> Result<Parametrization> {
    check_amplitude(amplitude)?;
    let d = amplitude;
    Parametrization::from_rows(&[
        (vec![vec![1.0], vec![-1.0]], vec![0.0, 0.0]),
        (vec![vec![-1.0, 0.0], vec![0.0, -1.0]], vec![d, d]),
        (vec![vec![-1.0, 1.0]], vec![0.0]),
    ])
}

/// Rewrites `C_D ∘ F(θ)` as a standard ReLU network.
///
/// The last affine layer of `θ` is merged with the first layer of the
/// clipping network (`[W_L; −W_L]`, `[B_L; −B_L]`), so the result has
/// architecture `(a_0, ..., a_{L-1}, 2, 2, 1)` and no entry larger than
/// `max(‖θ‖_∞, D, 1)`.
pub fn clipped_as_standard(params: &Parametrization, amplitude: f64) -> Result<Parametrization> {
    check_amplitude(amplitude)?;
    let arch = params.architecture();
    if arch.output_dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            actual: arch.output_dim(),
        });
    }
    let clip = clip_network(amplitude)?;
    let mut layers = params.layers[..params.layers.len() - 1].to_vec();
    let last = &params.layers[params.layers.len() - 1];
    let weights = last
        .weights
        .iter()
        .copied()
        .chain(last.weights.iter().map(|w| -w))
        .collect();
    layers.push(Layer::new(2, last.cols, weights, vec![last.bias[0], -last.bias[0]])?);
    layers.extend(clip.layers[1..].iter().cloned());

    let mut widths = arch.widths()[..arch.depth()].to_vec();
    widths.extend([2, 2, 1]);
    Parametrization::new(Architecture::new(widths)?, layers)
}

/// The `(d,1,1,1)` network for the capped put payoff
/// `φ(x) = min{max{D − c·x, 0}, D}`, using `min{z, D} = D − ReLU(D − z)`.
pub fn put_payoff_network(weights: &[f64], amplitude: f64) -> Result<Parametrization> {
    check_amplitude(amplitude)?;
    ensure(!weights.is_empty(), || "payoff weight vector is empty".into())?;
    let d = amplitude;
    Parametrization::from_rows(&[
        (vec![weights.iter().map(|c| -c).collect()], vec![d]),
        (vec![vec![-1.0]], vec![d]),
        (vec![vec![-1.0]], vec![d]),
    ])
}

/// Builds `θ` with `F(θ) = (1/n) Σ_j F(η) ∘ (x ↦ M_j x + N_j)`.
///
/// For `η = ((V_1, A_1), ..., (V_L, A_L))` the first layer stacks
/// `V_1 M_j` with biases `V_1 N_j + A_1`, hidden layers are block-diagonal
/// copies of `V_l`, and the output layer is `[V_L/n ... V_L/n]` with bias
/// `A_L`. The architecture is `(b_0, n b_1, ..., n b_{L-1}, b_L)`. A single
/// affine `η` collapses to one averaged affine layer.
pub fn compose_average(eta: &Parametrization, maps: &[AffineMap]) -> Result<Parametrization> {
    ensure(!maps.is_empty(), || "no affine maps to average".into())?;
    let b = eta.architecture();
    let d = b.input_dim();
    for (j, map) in maps.iter().enumerate() {
        if map.dim() != d {
            return Err(Error::InvalidArgument(format!(
                "affine map {j} has dimension {}, network input width is {d}",
                map.dim()
            )));
        }
    }
    let n = maps.len();
    let inv_n = 1.0 / n as f64;
    let v1 = &eta.layers[0];

    // Rows of V_1 M_j and entries of V_1 N_j + A_1.
    let first_block = |map: &AffineMap| -> (Vec<f64>, Vec<f64>) {
        let mut w = vec![0.0; v1.rows * d];
        let mut bias = v1.bias.clone();
        for i in 0..v1.rows {
            let row = v1.row(i);
            for k in 0..d {
                let mut acc = 0.0;
                for (r, &vik) in row.iter().enumerate() {
                    acc += vik * map.matrix[r * d + k];
                }
                w[i * d + k] = acc;
            }
            bias[i] += row.iter().zip(&map.offset).map(|(a, b)| a * b).sum::<f64>();
        }
        (w, bias)
    };

    if b.depth() == 1 {
        let mut w = vec![0.0; v1.rows * d];
        let mut bias = vec![0.0; v1.rows];
        for map in maps {
            let (wj, bj) = first_block(map);
            w.iter_mut().zip(&wj).for_each(|(a, v)| *a += v * inv_n);
            bias.iter_mut().zip(&bj).for_each(|(a, v)| *a += v * inv_n);
        }
        return Parametrization::new(b.clone(), vec![Layer::new(v1.rows, d, w, bias)?]);
    }

    let depth = b.depth();
    let mut widths = Vec::with_capacity(depth + 1);
    widths.push(d);
    widths.extend(b.widths()[1..depth].iter().map(|w| w * n));
    widths.push(b.output_dim());
    let arch = Architecture::new(widths)?;

    let mut layers = Vec::with_capacity(depth);

    let mut w1 = Vec::with_capacity(n * v1.rows * d);
    let mut b1 = Vec::with_capacity(n * v1.rows);
    for map in maps {
        let (w, bias) = first_block(map);
        w1.extend(w);
        b1.extend(bias);
    }
    layers.push(Layer::new(n * v1.rows, d, w1, b1)?);

    for v in &eta.layers[1..depth - 1] {
        let (rows, cols) = (n * v.rows, n * v.cols);
        let mut w = vec![0.0; rows * cols];
        for j in 0..n {
            for i in 0..v.rows {
                let dst = (j * v.rows + i) * cols + j * v.cols;
                w[dst..dst + v.cols].copy_from_slice(v.row(i));
            }
        }
        let bias = v.bias.repeat(n);
        layers.push(Layer::new(rows, cols, w, bias)?);
    }

    let vl = &eta.layers[depth - 1];
    let cols = n * vl.cols;
    let mut w = vec![0.0; vl.rows * cols];
    for i in 0..vl.rows {
        for j in 0..n {
            for (k, &v) in vl.row(i).iter().enumerate() {
                w[i * cols + j * vl.cols + k] = v * inv_n;
            }
        }
    }
    layers.push(Layer::new(vl.rows, cols, w, vl.bias.clone())?);

    Parametrization::new(arch, layers)
}
