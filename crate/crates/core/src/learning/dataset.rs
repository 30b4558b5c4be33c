use std::io::{Read, Write};

use crate::error::{ensure, Error, Result};
use crate::net::{clip, Scratch};
use crate::par;
use crate::rng::{derive_seed, tags, Stream};
use crate::sde::{simulate_into, KolmogorovProblem, PathBuffers};

const MAGIC: &[u8; 8] = b"KOLMDSET";
const VERSION: u32 = 1;
const CHUNK: usize = 4096;

/// `m` samples `(X_i, Y_i)` with `X_i ~ U([u,v]^d)` and
/// `Y_i = C_D(φ(S_T^{X_i}))`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    dim: usize,
    inputs: Vec<f64>,
    labels: Vec<f64>,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    /// Problem fingerprint; empty when read back from a binary file.
    pub problem: String,
    pub seed: u64,
    pub lower: f64,
    pub upper: f64,
    pub clip: f64,
}

impl Dataset {
    pub fn new(
        dim: usize,
        inputs: Vec<f64>,
        labels: Vec<f64>,
        provenance: Provenance,
    ) -> Result<Self> {
        ensure(dim >= 1, || "dimension must be positive".into())?;
        ensure(inputs.len() == labels.len() * dim, || {
            format!(
                "{} input values do not form {} rows of width {dim}",
                inputs.len(),
                labels.len()
            )
        })?;
        Ok(Self {
            dim,
            inputs,
            labels,
            provenance,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        w.write_all(&self.provenance.lower.to_le_bytes())?;
        w.write_all(&self.provenance.upper.to_le_bytes())?;
        w.write_all(&self.provenance.clip.to_le_bytes())?;
        w.write_all(&self.provenance.seed.to_le_bytes())?;
        let mut row = Vec::with_capacity((self.dim + 1) * 8);
        for i in 0..self.len() {
            row.clear();
            for v in self.input(i).iter().chain(std::iter::once(&self.labels[i])) {
                row.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&row)?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let bad = |message: &str| Error::Parse {
            line: 0,
            message: message.to_string(),
        };
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(bad("not a dataset file (bad magic)"));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        if u32::from_le_bytes(b4) != VERSION {
            return Err(bad("unsupported dataset version"));
        }
        r.read_exact(&mut b4)?;
        let dim = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b8)?;
        let m = u64::from_le_bytes(b8) as usize;
        let mut f = || -> Result<f64> {
            r.read_exact(&mut b8)?;
            Ok(f64::from_le_bytes(b8))
        };
        let lower = f()?;
        let upper = f()?;
        let clip_amp = f()?;
        r.read_exact(&mut b8)?;
        let seed = u64::from_le_bytes(b8);
        ensure(dim >= 1, || "dataset dimension is zero".into())?;
        let mut body = Vec::new();
        r.read_to_end(&mut body)?;
        if body.len() != m * (dim + 1) * 8 {
            return Err(bad("dataset body length does not match header"));
        }
        let values: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let mut inputs = Vec::with_capacity(m * dim);
        let mut labels = Vec::with_capacity(m);
        for row in values.chunks_exact(dim + 1) {
            inputs.extend_from_slice(&row[..dim]);
            labels.push(row[dim]);
        }
        Dataset::new(
            dim,
            inputs,
            labels,
            Provenance {
                problem: String::new(),
                seed,
                lower,
                upper,
                clip: clip_amp,
            },
        )
    }

    /// CSV with header `x_1,...,x_d,y`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (1..=self.dim).map(|i| format!("x_{i}")).collect();
        writeln!(w, "{},y", header.join(","))?;
        for i in 0..self.len() {
            let mut line = String::new();
            for v in self.input(i) {
                line.push_str(&format!("{v:e},"));
            }
            line.push_str(&format!("{:e}", self.labels[i]));
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Draws `m` labelled samples. Sample `i` uses its own input stream and its
/// own Brownian driver, so the result is independent of thread count.
pub fn generate_dataset(problem: &KolmogorovProblem, m: usize, seed: u64) -> Result<Dataset> {
    ensure(m >= 1, || "dataset size must be positive".into())?;
    problem.validate()?;
    let d = problem.dim();
    let input_seed = derive_seed(seed, tags::DATASET_INPUTS);
    let driver_seed = derive_seed(seed, tags::DATASET_DRIVERS);
    let chunks = m.div_ceil(CHUNK);
    let parts = par::try_map_indexed(chunks, |c| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(m);
        let mut xs = Vec::with_capacity((hi - lo) * d);
        let mut ys = Vec::with_capacity(hi - lo);
        let mut buf = PathBuffers::new(d);
        let mut scratch = Scratch::new(problem.payoff.architecture());
        let mut x = vec![0.0; d];
        for i in lo..hi {
            let mut rng = Stream::new(input_seed, i as u64);
            for xi in x.iter_mut() {
                *xi = rng.uniform_in(problem.lower, problem.upper);
            }
            let driver = problem.driver(driver_seed, i as u64);
            let s = simulate_into(problem, &x, &driver, &mut buf).map_err(|e| e.at_sample(i))?;
            ys.push(clip(scratch.forward(&problem.payoff, s)[0], problem.clip));
            xs.extend_from_slice(&x);
        }
        Ok::<_, Error>((xs, ys))
    })?;
    let mut inputs = Vec::with_capacity(m * d);
    let mut labels = Vec::with_capacity(m);
    for (xs, ys) in parts {
        inputs.extend(xs);
        labels.extend(ys);
    }
    Dataset::new(
        d,
        inputs,
        labels,
        Provenance {
            problem: problem.fingerprint(),
            seed,
            lower: problem.lower,
            upper: problem.upper,
            clip: problem.clip,
        },
    )
}
