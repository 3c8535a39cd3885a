//! `hyperselect` command-line driver.
//!
//! Exit codes: 0 success, 2 usage error, 3 numerical divergence, 4 I/O failure.
//! Solver warnings are logged at `warn`; set `RUST_LOG=warn` to see them.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use hyperselect::admm_bda::{BudgetSchedule, HypergradientStrategy, LambdaBox, SolverConfig, StepPolicy};
use hyperselect::baselines::SearchSpace;
use hyperselect::data::{load_dataset, save_dataset, synth_generate, NoiseKind, SynthConfig};
use hyperselect::harness::{
    benchmark, repeat_experiment, write_csv, write_iterates_csv, write_trajectory_csv, DataSource, Experiment, Method,
    ModelSpec, RunRecord, RunStatus,
};
use hyperselect::presets::Preset;
use hyperselect::problems::{HyperParams, LossNorm, ModelKind};
use hyperselect::Error;
use serde_json::json;

const EXIT_USAGE: u8 = 2;
const EXIT_DIVERGED: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "hyperselect", version, about = "Bilevel hyperparameter selection for sparse regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic train/validation/test dataset.
    Generate(GenerateArgs),
    /// Run one method over repeated datasets.
    Run(RunArgs),
    /// Run every applicable method on shared datasets.
    Benchmark(BenchmarkArgs),
}

#[derive(Args, Clone)]
struct SynthArgs {
    /// Feature dimension.
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 200)]
    m_train: usize,
    #[arg(long, default_value_t = 20)]
    m_val: usize,
    #[arg(long, default_value_t = 100)]
    m_test: usize,
    /// Number of planted nonzeros.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// gn, ln or un. Defaults to the preset's noise.
    #[arg(long)]
    noise: Option<String>,
    #[arg(long, default_value_t = 1e-3)]
    noise_level: f64,
    /// Planted magnitudes are 2^v with v uniform on LO,HI.
    #[arg(long, value_parser = parse_pair::<f64>, default_value = "0,3")]
    exponent_range: (f64, f64),
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    synth: SynthArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, env = "HYPERSELECT_OUT", default_value = "results")]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct ExperimentArgs {
    /// Bundle of per-experiment defaults, e.g. en-synth or gen-real-qinf.
    #[arg(long)]
    preset: Option<String>,
    /// en or gen.
    #[arg(long)]
    model: Option<String>,
    /// Loss norm of the generalized model: 1, 2 or inf.
    #[arg(long)]
    q: Option<String>,

    #[command(flatten)]
    synth: SynthArgs,
    /// Load a dataset directory written by `generate` instead of generating one per repetition.
    #[arg(long, conflicts_with = "libsvm")]
    data: Option<PathBuf>,
    /// LIBSVM file; split with each repetition seed.
    #[arg(long)]
    libsvm: Option<PathBuf>,
    /// Row counts TRAIN,VAL,TEST for the LIBSVM split.
    #[arg(long, value_parser = parse_triple)]
    split: Option<[usize; 3]>,
    /// Number of base features in the LIBSVM file (default: largest index seen).
    #[arg(long)]
    n_base_features: Option<usize>,
    /// Polynomial expansion degree for LIBSVM data.
    #[arg(long, default_value_t = 3)]
    degree: usize,

    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    zeta: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    /// Base upper step s.
    #[arg(long)]
    s: Option<f64>,
    /// Step on λ.
    #[arg(long)]
    alpha: Option<f64>,
    /// Inner sweeps per outer iteration.
    #[arg(long)]
    budget: Option<usize>,
    /// Extra inner sweeps added per outer iteration.
    #[arg(long, default_value_t = 0)]
    budget_delta: usize,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_outer: Option<usize>,
    #[arg(long)]
    x_max: Option<f64>,
    #[arg(long, value_parser = parse_pair::<f64>)]
    lambda0: Option<(f64, f64)>,
    #[arg(long, value_parser = parse_pair::<f64>)]
    lambda_lo: Option<(f64, f64)>,
    #[arg(long, value_parser = parse_pair::<f64>)]
    lambda_hi: Option<(f64, f64)>,
    /// strict, clamp or override.
    #[arg(long)]
    step_policy: Option<String>,
    /// fd or one-step.
    #[arg(long)]
    hypergradient: Option<String>,
    /// Keep λ₂ free even when the lower problem is not strongly convex.
    #[arg(long)]
    no_stabilize: bool,

    /// Log-space search bounds for λ₁.
    #[arg(long, value_parser = parse_pair::<f64>)]
    search_lambda1: Option<(f64, f64)>,
    #[arg(long, value_parser = parse_pair::<f64>)]
    search_lambda2: Option<(f64, f64)>,
    /// Grid points per axis.
    #[arg(long, value_parser = parse_pair::<usize>)]
    grid: Option<(usize, usize)>,
    /// Samples for random search (default: preset value).
    #[arg(long)]
    random_points: Option<usize>,

    #[arg(long, default_value_t = 20)]
    reps: usize,
    /// Repetition i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads for repetitions (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, env = "HYPERSELECT_OUT", default_value = "results")]
    out: PathBuf,
    /// Print the resolved configuration as JSON and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct RunArgs {
    /// admm_bda, pgm_bda, grid or random.
    #[arg(long)]
    method: String,
    #[command(flatten)]
    exp: ExperimentArgs,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Comma-separated subset of methods (default: all that apply).
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[command(flatten)]
    exp: ExperimentArgs,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Diverged(String),
    Io(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) | Error::Csv(_) | Error::Json(_) | Error::Parse { .. } => CliError::Io(e.to_string()),
            Error::Diverged { .. } => CliError::Diverged(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_pair<T: FromStr>(s: &str) -> Result<(T, T), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected A,B but got {s:?}"))?;
    let p = |t: &str| t.trim().parse::<T>().map_err(|_| format!("bad value {t:?}"));
    Ok((p(a)?, p(b)?))
}

fn parse_triple(s: &str) -> Result<[usize; 3], String> {
    let v: Vec<usize> = s.split(',').map(|t| t.trim().parse().map_err(|_| format!("bad count {t:?}"))).collect::<Result<_, _>>()?;
    v.try_into().map_err(|_| format!("expected TRAIN,VAL,TEST but got {s:?}"))
}

fn parse_with<T: FromStr<Err = Error>>(s: &str) -> Result<T, CliError> {
    s.parse().map_err(|e: Error| usage(e.to_string()))
}

impl SynthArgs {
    fn config(&self, default_noise: NoiseKind, seed: u64) -> Result<SynthConfig, CliError> {
        let noise_kind = match &self.noise {
            Some(s) => parse_with(s)?,
            None => default_noise,
        };
        let cfg = SynthConfig {
            n: self.n,
            m_train: self.m_train,
            m_val: self.m_val,
            m_test: self.m_test,
            k: self.k,
            noise_kind,
            noise_level: self.noise_level,
            value_exponent_range: self.exponent_range,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A fully resolved experiment plus the run controls.
struct Resolved {
    preset: Preset,
    exp: Experiment,
    synth: Option<SynthConfig>,
    reps: usize,
    seed: u64,
    out: PathBuf,
}

impl Resolved {
    fn to_json(&self, methods: &[Method]) -> serde_json::Value {
        let data = match &self.exp.data {
            DataSource::Synthetic(_) => json!({ "kind": "synthetic", "synth": self.synth }),
            DataSource::Libsvm { path, n_base_features, degree, counts } => json!({
                "kind": "libsvm", "path": path, "n_base_features": n_base_features, "degree": degree, "split": counts,
            }),
            DataSource::Fixed(ds) => json!({ "kind": "directory", "sha256": ds.fingerprint() }),
        };
        json!({
            "preset": self.preset.to_string(),
            "methods": methods.iter().map(|m| m.name()).collect::<Vec<_>>(),
            "model": self.exp.model,
            "data": data,
            "noise": self.exp.data.noise_label(),
            "solver": self.exp.solver,
            "search": self.exp.space,
            "random_points": self.exp.random_points,
            "reps": self.reps,
            "seed": self.seed,
            "out": self.out,
        })
    }
}

fn resolve_model(a: &ExperimentArgs) -> Result<(ModelSpec, Option<Preset>), CliError> {
    let preset = a.preset.as_deref().map(parse_with::<Preset>).transpose()?;
    let kind = match a.model.as_deref() {
        Some("en") => Some(ModelKind::ElasticNet),
        Some("gen") => Some(ModelKind::GeneralizedElasticNet),
        Some(other) => return Err(usage(format!("unknown model {other:?} (expected en or gen)"))),
        None => None,
    };
    let q = a.q.as_deref().map(parse_with::<LossNorm>).transpose()?;
    let model = match (kind, preset) {
        (None, Some(p)) => {
            let pm = p.model();
            if q.is_some() && q != pm.q {
                return Err(usage(format!("--q conflicts with preset {p}")));
            }
            pm
        }
        (None, None) => return Err(usage("--model (or --preset) is required")),
        (Some(ModelKind::ElasticNet), _) if q.is_some() => return Err(usage("--q only applies to --model gen")),
        (Some(ModelKind::ElasticNet), _) => ModelSpec::elastic_net(),
        (Some(ModelKind::GeneralizedElasticNet), _) => {
            ModelSpec::generalized(q.ok_or_else(|| usage("--model gen requires --q 1|2|inf"))?)
        }
    };
    if let Some(p) = preset {
        if p.model() != model {
            return Err(usage(format!("--model/--q conflict with preset {p}")));
        }
    }
    Ok((model, preset))
}

fn resolve(a: &ExperimentArgs, method: Method) -> Result<Resolved, CliError> {
    let (model, preset) = resolve_model(a)?;
    let real = a.libsvm.is_some();
    let preset = preset.unwrap_or_else(|| if real { Preset::real(&model) } else { Preset::synthetic(&model) });

    let mut synth = None;
    let data = if let Some(path) = &a.libsvm {
        let counts = a.split.ok_or_else(|| usage("--libsvm requires --split TRAIN,VAL,TEST"))?;
        DataSource::Libsvm { path: path.clone(), n_base_features: a.n_base_features, degree: a.degree, counts }
    } else if let Some(dir) = &a.data {
        let ds = load_dataset(dir).map_err(|e| match CliError::from(e) {
            CliError::Io(m) => CliError::Io(format!("{}: {m}", dir.display())),
            other => other,
        })?;
        DataSource::Fixed(Box::new(ds))
    } else {
        let cfg = a.synth.config(preset.noise().unwrap_or(NoiseKind::Gaussian), a.seed)?;
        synth = Some(cfg.clone());
        DataSource::Synthetic(cfg)
    };

    let mut solver: SolverConfig = preset.solver_config();
    let sc = &mut solver.scaling;
    sc.sigma = a.sigma.unwrap_or(sc.sigma);
    sc.zeta = a.zeta.unwrap_or(sc.zeta);
    sc.eta = a.eta.unwrap_or(sc.eta);
    solver.mu = a.mu.unwrap_or(solver.mu);
    solver.s = a.s.unwrap_or(solver.s);
    solver.alpha = a.alpha.unwrap_or(solver.alpha);
    if a.budget.is_some() || a.budget_delta > 0 {
        let j0 = a.budget.unwrap_or(solver.budget.at(0));
        solver.budget =
            if a.budget_delta > 0 { BudgetSchedule::Affine { j0, delta: a.budget_delta } } else { BudgetSchedule::Constant(j0) };
    }
    solver.tol = a.tol.unwrap_or(solver.tol);
    solver.max_outer = a.max_outer.unwrap_or(solver.max_outer);
    solver.x_max = a.x_max.unwrap_or(solver.x_max);
    if let Some((l1, l2)) = a.lambda0 {
        solver.lambda0 = HyperParams::new(l1, l2)?;
    }
    let LambdaBox { lo, hi } = solver.lambda_box;
    solver.lambda_box = LambdaBox {
        lo: a.lambda_lo.map_or(lo, |(x, y)| [x, y]),
        hi: a.lambda_hi.map_or(hi, |(x, y)| [x, y]),
    };
    if let Some(p) = &a.step_policy {
        solver.step_policy = match p.as_str() {
            "strict" => StepPolicy::Strict,
            "clamp" => StepPolicy::Clamp,
            "override" => StepPolicy::Override,
            _ => return Err(usage(format!("unknown step policy {p:?} (expected strict, clamp or override)"))),
        };
    }
    if let Some(h) = &a.hypergradient {
        solver.hypergradient = match h.as_str() {
            "fd" => HypergradientStrategy::FiniteDifference,
            "one-step" => HypergradientStrategy::OneStepProx,
            _ => return Err(usage(format!("unknown hypergradient {h:?} (expected fd or one-step)"))),
        };
    }
    if a.no_stabilize {
        solver.stabilize_lambda2 = false;
    }
    solver.validate()?;

    let mut space = SearchSpace::default();
    space.lambda1 = a.search_lambda1.unwrap_or(space.lambda1);
    space.lambda2 = a.search_lambda2.unwrap_or(space.lambda2);
    space.grid = a.grid.unwrap_or(space.grid);
    space.validate()?;

    if a.reps == 0 {
        return Err(usage("--reps must be >= 1"));
    }
    let exp = Experiment {
        method,
        model,
        data,
        solver,
        space,
        random_points: a.random_points.unwrap_or(preset.random_points()),
    };
    Ok(Resolved { preset, exp, synth, reps: a.reps, seed: a.seed, out: a.out.clone() })
}

fn setup_threads(n: Option<usize>) -> Result<(), CliError> {
    match n {
        Some(0) => Err(usage("--threads must be >= 1")),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| usage(e.to_string())),
        None => Ok(()),
    }
}

fn create(path: &Path) -> Result<fs::File, CliError> {
    fs::File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_outputs(dir: &Path, stem: &str, records: &[RunRecord]) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    write_csv(records, create(&dir.join(format!("{stem}.csv")))?)?;
    write_trajectory_csv(records, create(&dir.join(format!("{stem}_trajectory.csv")))?)?;
    write_iterates_csv(records, create(&dir.join(format!("{stem}_iterates.csv")))?)?;
    Ok(())
}

fn cmd_generate(a: &GenerateArgs) -> Result<(), CliError> {
    let cfg = a.synth.config(NoiseKind::Gaussian, a.seed)?;
    let ds = synth_generate(&cfg)?;
    let meta = json!({ "synth": cfg, "sha256": ds.fingerprint() });
    save_dataset(&a.out, &ds, &meta)?;
    println!("wrote {} ({}x{} train, sha256 {})", a.out.display(), ds.train.a.nrows(), ds.n_features(), ds.fingerprint());
    Ok(())
}

fn cmd_run(a: &RunArgs) -> Result<(), CliError> {
    let method: Method = parse_with(&a.method)?;
    let r = resolve(&a.exp, method)?;
    if !method.supports(&r.exp.model) {
        return Err(usage(format!("{method} only supports --model en")));
    }
    if a.exp.print_config {
        println!("{}", serde_json::to_string_pretty(&r.to_json(&[method])).expect("json"));
        return Ok(());
    }
    setup_threads(a.exp.threads)?;
    let rep = repeat_experiment(&r.exp, r.reps, r.seed)?;
    write_outputs(&r.out, method.name(), &rep.records)?;
    for rec in &rep.records {
        for note in &rec.notes {
            log::info!("{} seed {}: {note}", rec.method, rec.seed);
        }
    }
    println!("{}", rep.summary);
    if rep.records.iter().all(|rec| rec.status == RunStatus::Diverged) {
        return Err(CliError::Diverged(format!("all {} repetitions diverged", rep.records.len())));
    }
    Ok(())
}

fn cmd_benchmark(a: &BenchmarkArgs) -> Result<(), CliError> {
    let methods: Vec<Method> = match &a.methods {
        Some(names) => names.iter().map(|s| parse_with(s)).collect::<Result<_, _>>()?,
        None => Method::ALL.to_vec(),
    };
    let r = resolve(&a.exp, Method::AdmmBda)?;
    let applicable: Vec<Method> = methods.iter().copied().filter(|m| m.supports(&r.exp.model)).collect();
    if applicable.is_empty() {
        return Err(usage("no requested method supports this model"));
    }
    if a.exp.print_config {
        println!("{}", serde_json::to_string_pretty(&r.to_json(&applicable)).expect("json"));
        return Ok(());
    }
    setup_threads(a.exp.threads)?;
    let out = benchmark(&r.exp, &applicable, r.reps, r.seed)?;
    fs::create_dir_all(&r.out).map_err(|e| CliError::Io(format!("{}: {e}", r.out.display())))?;
    write_csv(&out.records, create(&r.out.join("benchmark.csv"))?)?;
    write_iterates_csv(&out.records, create(&r.out.join("benchmark_iterates.csv"))?)?;
    for m in &applicable {
        let recs: Vec<RunRecord> = out.records.iter().filter(|rec| rec.method == m.name()).cloned().collect();
        write_trajectory_csv(&recs, create(&r.out.join(format!("trajectory_{}.csv", m.name())))?)?;
    }
    let mut datasets = String::from("seed,sha256\n");
    for (seed, hash) in &out.datasets {
        datasets.push_str(&format!("{seed},{hash}\n"));
    }
    fs::write(r.out.join("datasets.csv"), datasets)?;

    for s in &out.summaries {
        println!("{s}");
        if s.n_failed > 0 {
            eprintln!("{}: {} of {} repetitions failed", s.method, s.n_failed, s.n_ok + s.n_failed);
        }
    }
    if applicable.iter().all(|m| out.all_failed(m.name())) {
        return Err(CliError::Diverged("every method failed".into()));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Run(a) => cmd_run(a),
        Command::Benchmark(a) => cmd_benchmark(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, kind, msg) = match e {
                CliError::Usage(m) => (EXIT_USAGE, "usage error", m),
                CliError::Diverged(m) => (EXIT_DIVERGED, "diverged", m),
                CliError::Io(m) => (EXIT_IO, "i/o error", m),
            };
            eprintln!("hyperselect: {kind}: {msg}");
            ExitCode::from(code)
        }
    }
}
