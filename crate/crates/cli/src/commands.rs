use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, ensure, Context, Result};
use kolmo_core::bounds::{kolmogorov_certificate, put_architecture, ApproximationFamily, CertificateRequest};
use kolmo_core::constructive::{build_mc_network, BuildSpec};
use kolmo_core::learning::{
    generate_dataset, l2_error, noise_floor, reference_grid, train_erm, write_reference_csv, Dataset,
    Oracle, ReferencePoint, StepSchedule, TrainConfig,
};
use kolmo_core::net::{Architecture, ClippedNetwork, Parametrization};
use kolmo_core::pipeline::{run_pipeline, scaling_study, BasketPut, PipelineConfig, SampleSchedule, ScalingConfig};
use kolmo_core::sde::KolmogorovProblem;

use crate::config::{ConfigFile, Output, Resolver};
use crate::problem::{load_problem, numbers};
use crate::{BuildArgs, CertifyArgs, EvaluateArgs, GenerateArgs, PipelineArgs, ScalingArgs, SimulateArgs, TrainArgs, TrainingArgs};

/// Settings shared by every command.
pub struct Session {
    pub config: Option<ConfigFile>,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Session {
    fn resolver(&self, command: &'static str) -> Resolver<'_> {
        let mut r = Resolver::new(command, self.config.as_ref());
        r.note("seed", self.seed);
        r
    }

    fn output(&self, r: Resolver<'_>) -> Result<Output> {
        Output::new(&self.out_dir, &r.finish()?, &self.seed.to_string())
    }
}

/// Comma separated positive integers, e.g. `32,32`.
#[derive(Clone, Debug, PartialEq)]
pub struct UsizeList(pub Vec<usize>);

impl FromStr for UsizeList {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}")))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(UsizeList)
    }
}

impl fmt::Display for UsizeList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

fn problem_setting(r: &mut Resolver<'_>, cli: Option<PathBuf>) -> Result<KolmogorovProblem> {
    let path: Option<String> = r.get_opt("problem", cli.map(|p| p.display().to_string()))?;
    let path = path.context("a problem file is required (--problem)")?;
    let problem = load_problem(Path::new(&path))?;
    r.note("problem_fingerprint", problem.fingerprint());
    Ok(problem)
}

fn oracle_setting(r: &mut Resolver<'_>, problem: &KolmogorovProblem, paths: Option<usize>, mc: Option<bool>) -> Result<Oracle> {
    let paths = r.get("paths", paths, 100_000)?;
    let force_mc = r.get("force-mc", mc, false)?;
    Ok(if force_mc {
        Oracle::MonteCarlo { paths }
    } else {
        Oracle::for_problem(problem, paths)
    })
}

fn architecture(dim: usize, hidden: &UsizeList) -> Result<Architecture> {
    let mut widths = vec![dim];
    widths.extend(&hidden.0);
    widths.push(1);
    Ok(Architecture::new(widths)?)
}

fn train_config(r: &mut Resolver<'_>, a: &TrainingArgs, dim: usize, clip: f64, seed: u64) -> Result<TrainConfig> {
    let hidden = r.get("hidden", a.hidden.clone(), UsizeList(vec![32, 32]))?;
    let mut cfg = TrainConfig::new(architecture(dim, &hidden)?, clip);
    if let Some(bound) = r.get_opt("bound", a.bound)? {
        cfg = cfg.with_bound(bound);
    }
    cfg.project = r.flag("project", a.project)? || cfg.parameter_bound.is_some();
    if cfg.project && cfg.parameter_bound.is_none() {
        bail!("--project needs --bound R");
    }
    cfg.batch_size = r.get("batch", a.batch, cfg.batch_size)?;
    cfg.iterations = r.get("iterations", a.iterations, cfg.iterations)?;
    cfg.eval_every = r.get("eval-every", a.eval_every, cfg.eval_every)?;
    let lr = r.get("lr", a.lr, 1e-3)?;
    cfg.schedule = match r.get_opt("decay-factor", a.decay_factor)? {
        None => StepSchedule::Constant(lr),
        Some(factor) => StepSchedule::Exponential {
            initial: lr,
            factor,
            every: r.get("decay-every", a.decay_every, 1000)?,
        },
    };
    cfg.seed = seed;
    cfg.validate(dim)?;
    Ok(cfg)
}

pub fn certify(ctx: &Session, a: CertifyArgs) -> Result<()> {
    let mut r = ctx.resolver("certify");
    let dim = r.get("dim", a.dim, 1)?;
    let eps = r.get("eps", a.eps, 0.1)?;
    let rho = r.get("rho", a.rho, 0.05)?;
    let family = r.get("family", a.family, "put".to_string())?;
    ensure!(family == "put", "unknown payoff family `{family}` (supported: put)");
    let mut req = CertificateRequest::new(dim, eps, rho, ApproximationFamily::put());
    req.constant = r.get("constant", a.constant, req.constant)?;
    req.c = r.get("c", a.c, req.c)?;
    req.clip = r.get("clip", a.clip, req.clip)?;
    req.lower = r.get("lower", a.lower, req.lower)?;
    req.upper = r.get("upper", a.upper, req.upper)?;
    let cert = kolmogorov_certificate(&req, &put_architecture)?;
    let out = ctx.output(r)?;
    print!("{}", cert.table());
    let path = out.csv("certificate.csv", |w| cert.write_csv(w))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

pub fn simulate(ctx: &Session, a: SimulateArgs) -> Result<()> {
    let mut r = ctx.resolver("simulate");
    let problem = problem_setting(&mut r, a.problem)?;
    let grid = r.get("grid", a.grid, 256)?;
    let oracle = oracle_setting(&mut r, &problem, a.paths, a.force_mc.then_some(true))?;
    let out = ctx.output(r)?;
    let reference = reference_grid(&problem, grid, oracle, ctx.seed)?;
    let path = out.csv("reference.csv", |w| write_reference_csv(w, &reference))?;
    println!(
        "{} reference points ({}), noise floor {:e}",
        reference.len(),
        oracle.name(),
        noise_floor(&reference)
    );
    eprintln!("wrote {}", path.display());
    Ok(())
}

pub fn generate(ctx: &Session, a: GenerateArgs) -> Result<()> {
    let mut r = ctx.resolver("generate");
    let problem = problem_setting(&mut r, a.problem)?;
    let samples = r.get("samples", a.samples, 100_000)?;
    let csv = r.flag("csv", a.csv)?;
    let out = ctx.output(r)?;
    let data = generate_dataset(&problem, samples, ctx.seed)?;
    let mut bin = Vec::new();
    data.write_binary(&mut bin)?;
    let path = out.raw("dataset.bin", &bin)?;
    eprintln!("wrote {}", path.display());
    if csv {
        let path = out.csv("dataset.csv", |w| data.write_csv(w))?;
        eprintln!("wrote {}", path.display());
    }
    println!("{} samples in dimension {}", data.len(), data.dim());
    Ok(())
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path).with_context(|| format!("cannot open dataset {}", path.display()))?;
    Dataset::read_binary(std::io::BufReader::new(file)).with_context(|| format!("in dataset {}", path.display()))
}

pub fn train(ctx: &Session, a: TrainArgs) -> Result<()> {
    let mut r = ctx.resolver("train");
    let data_path: Option<String> = r.get_opt("data", a.data.map(|p| p.display().to_string()))?;
    let data = load_dataset(Path::new(&data_path.context("a dataset is required (--data)")?))?;
    let clip = data.provenance.clip;
    let cfg = train_config(&mut r, &a.training, data.dim(), clip, ctx.seed)?;
    let out = ctx.output(r)?;
    let fit = train_erm(&data, &cfg)?;
    out.raw("network.txt", fit.network.params().to_text().as_bytes())?;
    out.csv("trace.csv", |w| fit.write_trace_csv(w))?;
    println!(
        "final empirical risk {:e} (best iteration {}), {:.1}s",
        fit.final_risk,
        fit.best_iteration,
        fit.wall_clock.as_secs_f64()
    );
    Ok(())
}

fn read_reference(path: &Path) -> Result<Vec<ReferencePoint>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read reference {}", path.display()))?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().context("empty reference file")?;
    let cols = header.split(',').count();
    ensure!(cols >= 3, "reference header must be x_1,...,x_d,estimate,std_error");
    lines
        .enumerate()
        .map(|(i, line)| {
            let v = numbers(line).with_context(|| format!("reference row {}", i + 1))?;
            ensure!(v.len() == cols, "reference row {} has {} fields, expected {cols}", i + 1, v.len());
            Ok(ReferencePoint {
                point: v[..cols - 2].to_vec(),
                value: v[cols - 2],
                std_error: v[cols - 1],
            })
        })
        .collect()
}

pub fn evaluate(ctx: &Session, a: EvaluateArgs) -> Result<()> {
    let mut r = ctx.resolver("evaluate");
    let net_path: Option<String> = r.get_opt("network", a.network.map(|p| p.display().to_string()))?;
    let net_path = net_path.context("a network file is required (--network)")?;
    let text = std::fs::read_to_string(&net_path).with_context(|| format!("cannot read network {net_path}"))?;
    let params = Parametrization::from_text(&text)?;
    let ref_path: Option<String> = r.get_opt("reference", a.reference.map(|p| p.display().to_string()))?;
    let (reference, clip, oracle_name) = match ref_path {
        Some(p) => {
            let clip = r.get("clip", a.clip, 1.0)?;
            (read_reference(Path::new(&p))?, clip, "file")
        }
        None => {
            let problem = problem_setting(&mut r, a.problem)?;
            let grid = r.get("grid", a.grid, 256)?;
            let oracle = oracle_setting(&mut r, &problem, a.paths, a.force_mc.then_some(true))?;
            let reference = reference_grid(&problem, grid, oracle, ctx.seed)?;
            (reference, problem.clip, oracle.name())
        }
    };
    let net = ClippedNetwork::new(params, clip)?;
    let out = ctx.output(r)?;
    let l2 = l2_error(&net, &reference)?;
    let floor = noise_floor(&reference);
    out.csv("evaluation.csv", |w| {
        use std::io::Write;
        writeln!(w, "grid_size,l2_error,noise_floor,oracle")?;
        writeln!(w, "{},{l2:e},{floor:e},{oracle_name}", reference.len())?;
        Ok(())
    })?;
    out.csv("predictions.csv", |w| {
        use std::io::Write;
        let d = reference.first().map_or(0, |p| p.point.len());
        let xs: Vec<String> = (1..=d).map(|i| format!("x_{i}")).collect();
        writeln!(w, "{},estimate,std_error,prediction", xs.join(","))?;
        for p in &reference {
            for x in &p.point {
                write!(w, "{x:e},")?;
            }
            writeln!(w, "{:e},{:e},{:e}", p.value, p.std_error, net.eval(&p.point)?)?;
        }
        Ok(())
    })?;
    println!("L2 error {l2:e} over {} points, noise floor {floor:e}", reference.len());
    Ok(())
}

pub fn build(ctx: &Session, a: BuildArgs) -> Result<()> {
    let mut r = ctx.resolver("build");
    let problem = problem_setting(&mut r, a.problem)?;
    let n = r.get("n", a.n, 1024)?;
    let mut spec = BuildSpec::new(n, problem.payoff.clone(), ctx.seed);
    spec.retries = r.get("retries", a.retries, spec.retries)?;
    spec.grid_size = r.get("grid", a.grid, spec.grid_size)?;
    spec.reference_paths = r.get("paths", a.paths, spec.reference_paths)?;
    let out = ctx.output(r)?;
    let built = build_mc_network(&problem, &spec)?;
    out.raw("network.txt", built.clipped.to_text().as_bytes())?;
    out.csv("build_report.csv", |w| built.report.write_csv(w))?;
    for c in &built.report.bounds.checks {
        println!("{:<12} {:>14.6e} <= {:<14.6e} {}", c.name, c.actual, c.cap, if c.pass { "ok" } else { "VIOLATED" });
    }
    println!(
        "selected retry {} with L2 error {:e} ({} reference)",
        built.report.selected,
        built.l2_error(),
        built.report.oracle.name()
    );
    Ok(())
}

pub fn pipeline(ctx: &Session, a: PipelineArgs) -> Result<()> {
    let mut r = ctx.resolver("pipeline");
    let problem = problem_setting(&mut r, a.problem)?;
    let samples = r.get("samples", a.samples, 100_000)?;
    let train = train_config(&mut r, &a.training, problem.dim(), problem.clip, ctx.seed)?;
    let mut cfg = PipelineConfig::new(samples, train, ctx.seed);
    cfg.grid_size = r.get("grid", a.grid, cfg.grid_size)?;
    cfg.reference_paths = r.get("paths", a.paths, cfg.reference_paths)?;
    let out = ctx.output(r)?;
    let result = run_pipeline(&problem, &cfg)?;
    out.raw("network.txt", result.fit.network.params().to_text().as_bytes())?;
    out.csv("trace.csv", |w| result.fit.write_trace_csv(w))?;
    out.csv("reference.csv", |w| write_reference_csv(w, &result.reference))?;
    out.csv("summary.csv", |w| {
        use std::io::Write;
        writeln!(w, "{}", kolmo_core::pipeline::PipelineResult::CSV_HEADER)?;
        writeln!(w, "{}", result.csv_row())?;
        Ok(())
    })?;
    out.csv("timing.csv", |w| {
        use std::io::Write;
        writeln!(w, "stage,seconds")?;
        writeln!(w, "train,{:.3}", result.fit.wall_clock.as_secs_f64())?;
        writeln!(w, "total,{:.3}", result.wall_clock.as_secs_f64())?;
        Ok(())
    })?;
    println!(
        "d={} m={} {}: empirical risk {:e}, L2 error {:e} ({}), noise floor {:e}, {:.1}s",
        result.dim,
        result.samples,
        result.architecture,
        result.fit.final_risk,
        result.l2_error,
        result.oracle.name(),
        result.noise_floor,
        result.wall_clock.as_secs_f64()
    );
    Ok(())
}

pub fn scaling(ctx: &Session, a: ScalingArgs) -> Result<()> {
    let mut r = ctx.resolver("scaling-study");
    let dims = r.get("dims", a.dims, UsizeList(vec![1, 2, 4]))?;
    ensure!(!dims.0.is_empty() && dims.0.iter().all(|&d| d >= 1), "--dims needs positive dimensions");
    let basket = BasketPut {
        rate: r.get("rate", a.rate, 0.0)?,
        vol: r.get("vol", a.vol, 0.2)?,
        horizon: r.get("horizon", a.horizon, 1.0)?,
        clip: r.get("clip", a.clip, 1.0)?,
        lower: r.get("lower", a.lower, 0.5)?,
        upper: r.get("upper", a.upper, 1.5)?,
    };
    // validates the shared training settings once, at the first dimension
    let train = train_config(&mut r, &a.training, dims.0[0], basket.clip, ctx.seed)?;
    let cfg = ScalingConfig {
        dims: dims.0.clone(),
        schedule: SampleSchedule {
            base: r.get("base", a.base, 5000.0)?,
            power: r.get("power", a.power, 2.0)?,
        },
        target_error: r.get("target", a.target, 5e-3)?,
        slope_threshold: r.get("threshold", a.threshold, 3.0)?,
        hidden: r.get("hidden", a.training.hidden.clone(), UsizeList(vec![32, 32]))?.0,
        train,
        grid_size: r.get("grid", a.grid, 256)?,
        reference_paths: r.get("paths", a.paths, 100_000)?,
        seed: ctx.seed,
    };
    let out = ctx.output(r)?;
    let study = scaling_study(&|d| basket.problem(d), &cfg)?;
    out.csv("scaling.csv", |w| study.write_csv(w))?;
    out.csv("audit.csv", |w| study.write_audit_csv(w))?;
    out.csv("timing.csv", |w| {
        use std::io::Write;
        writeln!(w, "d,seconds")?;
        for row in &study.rows {
            writeln!(w, "{},{:.3}", row.result.dim, row.result.wall_clock.as_secs_f64())?;
        }
        Ok(())
    })?;
    for row in &study.rows {
        println!(
            "d={:<3} m={:<8} L2 error {:e} {}",
            row.result.dim,
            row.result.samples,
            row.result.l2_error,
            if row.hit_target { "hit" } else { "MISSED" }
        );
    }
    println!(
        "audit: slope {:.3} (threshold {}), R^2 {:.3}; verdict {}",
        study.audit.slope,
        study.audit.threshold,
        study.audit.r_squared,
        if study.verdict() { "PASS" } else { "FAIL" }
    );
    Ok(())
}

/// Writes a put-payoff problem file, used by `kolmo init`.
pub fn example_problem(dim: usize) -> String {
    let weights: Vec<String> = (0..dim).map(|_| format!("{}", 1.0 / dim as f64)).collect();
    format!(
        "# basket put on {dim} independent GBM assets\ndimension = {dim}\nu = 0.5\nv = 1.5\nT = 1\nD = 1\ngbm = 0.0 0.2\npayoff = put {} 1\n",
        weights.join(" ")
    )
}
