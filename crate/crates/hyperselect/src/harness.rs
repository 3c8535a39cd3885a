//! Metrics, run records, repetitions and CSV persistence.

use std::fmt;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::str::FromStr;

use ndarray::{Array1, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admm_bda::{outer_solve, SolverConfig};
use crate::baselines::{grid_search, pgm_bda, random_search, SearchSpace};
use crate::data::{fmt_real, load_libsvm_experiment, synth_generate, DataSplit, SplitDataset, SynthConfig};
use crate::error::{check_dims, invalid, Error, Result};
use crate::linalg::norm2;
use crate::problems::{LossNorm, LowerLevelModel, ModelKind, UpperLevelObjective};

/// `‖Ax − b‖₂ / (1 + ‖b‖₂)`
pub fn res_err(x: ArrayView1<f64>, a: ArrayView2<f64>, b: ArrayView1<f64>) -> Result<f64> {
    check_dims("x", x.len(), a.ncols())?;
    check_dims("b", b.len(), a.nrows())?;
    let r = a.dot(&x) - b;
    Ok(norm2(r.view()) / (1.0 + norm2(b)))
}

/// `‖new − old‖₂ / (1 + ‖old‖₂)`
pub fn rel_err(new: ArrayView1<f64>, old: ArrayView1<f64>) -> Result<f64> {
    check_dims("lambda", new.len(), old.len())?;
    Ok(norm2((&new - &old).view()) / (1.0 + norm2(old)))
}

/// `(1/2m)‖Ax − b‖²`
pub fn mse(a: ArrayView2<f64>, b: ArrayView1<f64>, x: ArrayView1<f64>) -> Result<f64> {
    check_dims("x", x.len(), a.ncols())?;
    check_dims("b", b.len(), a.nrows())?;
    if a.nrows() == 0 {
        return Err(invalid("empty split"));
    }
    let r = a.dot(&x) - b;
    Ok(r.dot(&r) / (2.0 * a.nrows() as f64))
}

/// `(val_err, test_err)` of `x`.
pub fn evaluate(x: ArrayView1<f64>, ds: &SplitDataset) -> Result<(f64, f64)> {
    Ok((mse(ds.val.a.view(), ds.val.b.view(), x)?, mse(ds.test.a.view(), ds.test.b.view(), x)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    Converged,
    MaxIter,
    Diverged,
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunStatus::Converged => "converged",
            RunStatus::MaxIter => "maxiter",
            RunStatus::Diverged => "diverged",
        })
    }
}

impl FromStr for RunStatus {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "converged" => Ok(RunStatus::Converged),
            "maxiter" => Ok(RunStatus::MaxIter),
            "diverged" => Ok(RunStatus::Diverged),
            _ => Err(invalid(format!("unknown status {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub elapsed_s: f64,
    pub test_err: f64,
}

/// One outer iteration of a bilevel run, kept for replaying the stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuterIterate {
    pub k: usize,
    pub inner_budget: usize,
    pub lambda: [f64; 2],
    pub lambda_next: [f64; 2],
    pub res_err: f64,
    pub rel_err: f64,
    pub val_err: f64,
    pub test_err: f64,
}

/// One candidate scored by grid or random search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointEval {
    pub lambda: [f64; 2],
    pub val_err: f64,
    pub test_err: f64,
    pub sweeps: usize,
    pub converged: bool,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub method: String,
    pub model: String,
    pub noise: String,
    pub seed: u64,
    pub status: RunStatus,
    pub wall_time_s: f64,
    pub val_err: f64,
    pub test_err: f64,
    pub lambda: [f64; 2],
    /// `(elapsed, test_err)` with strictly increasing times.
    pub trajectory: Vec<Checkpoint>,
    pub iterates: Vec<OuterIterate>,
    pub points: Vec<PointEval>,
    /// Outer iterations or scored candidates.
    pub evaluations: usize,
    pub notes: Vec<String>,
    pub x: Option<Array1<f64>>,
    /// SHA-256 of the dataset the run used, when known.
    pub dataset: Option<String>,
}

impl RunRecord {
    pub fn new(method: impl Into<String>, model: impl Into<String>, seed: u64) -> Self {
        Self {
            method: method.into(),
            model: model.into(),
            noise: String::new(),
            seed,
            status: RunStatus::MaxIter,
            wall_time_s: 0.0,
            val_err: f64::INFINITY,
            test_err: f64::INFINITY,
            lambda: [0.0; 2],
            trajectory: Vec::new(),
            iterates: Vec::new(),
            points: Vec::new(),
            evaluations: 0,
            notes: Vec::new(),
            x: None,
            dataset: None,
        }
    }

    /// Appends a checkpoint, nudging the time forward by one ulp if the clock did not advance.
    pub fn push_checkpoint(&mut self, elapsed_s: f64, test_err: f64) {
        let elapsed_s = match self.trajectory.last() {
            Some(c) if elapsed_s <= c.elapsed_s => f64::from_bits(c.elapsed_s.to_bits() + 1),
            _ => elapsed_s.max(0.0),
        };
        self.trajectory.push(Checkpoint { elapsed_s, test_err });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    AdmmBda,
    PgmBda,
    Grid,
    Random,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Grid, Method::Random, Method::PgmBda, Method::AdmmBda];

    pub fn name(self) -> &'static str {
        match self {
            Method::AdmmBda => "admm_bda",
            Method::PgmBda => "pgm_bda",
            Method::Grid => "grid",
            Method::Random => "random",
        }
    }

    pub fn supports(self, model: &ModelSpec) -> bool {
        self != Method::PgmBda || model.kind == ModelKind::ElasticNet
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "admm_bda" => Ok(Method::AdmmBda),
            "pgm_bda" => Ok(Method::PgmBda),
            "grid" => Ok(Method::Grid),
            "random" => Ok(Method::Random),
            _ => Err(invalid(format!("unknown method {s:?}"))),
        }
    }
}

/// Which lower-level model to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub q: Option<LossNorm>,
}

impl ModelSpec {
    pub fn elastic_net() -> Self {
        Self { kind: ModelKind::ElasticNet, q: None }
    }

    pub fn generalized(q: LossNorm) -> Self {
        Self { kind: ModelKind::GeneralizedElasticNet, q: Some(q) }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.kind, self.q) {
            (ModelKind::ElasticNet, None) | (ModelKind::GeneralizedElasticNet, Some(_)) => Ok(()),
            (ModelKind::ElasticNet, Some(_)) => Err(invalid("q only applies to the generalized model")),
            (ModelKind::GeneralizedElasticNet, None) => Err(invalid("the generalized model needs q")),
        }
    }

    pub fn build(&self, train: &DataSplit) -> Result<LowerLevelModel> {
        self.validate()?;
        match self.q {
            None => LowerLevelModel::elastic_net(train.a.clone(), train.b.clone()),
            Some(q) => LowerLevelModel::generalized(train.a.clone(), train.b.clone(), q),
        }
    }
}

#[derive(Debug, Clone)]
pub enum DataSource {
    /// Fresh synthetic data per repetition; the seed field is replaced by the repetition seed.
    Synthetic(SynthConfig),
    /// A LIBSVM file, optionally expanded, split with the repetition seed.
    Libsvm { path: PathBuf, n_base_features: Option<usize>, degree: usize, counts: [usize; 3] },
    /// The same dataset for every repetition.
    Fixed(Box<SplitDataset>),
}

impl DataSource {
    pub fn load(&self, seed: u64) -> Result<SplitDataset> {
        match self {
            DataSource::Synthetic(cfg) => synth_generate(&SynthConfig { seed, ..cfg.clone() }),
            DataSource::Libsvm { path, n_base_features, degree, counts } => {
                load_libsvm_experiment(path, *n_base_features, *degree, *counts, seed)
            }
            DataSource::Fixed(ds) => Ok((**ds).clone()),
        }
    }

    pub fn noise_label(&self) -> String {
        match self {
            DataSource::Synthetic(cfg) => cfg.noise_kind.label().to_string(),
            DataSource::Libsvm { .. } => "real".to_string(),
            DataSource::Fixed(_) => "fixed".to_string(),
        }
    }
}

/// Everything needed to run one method repeatedly.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub method: Method,
    pub model: ModelSpec,
    pub data: DataSource,
    pub solver: SolverConfig,
    pub space: SearchSpace,
    pub random_points: usize,
}

/// Runs `method` on an already loaded dataset.
#[allow(clippy::too_many_arguments)]
pub fn run_method(
    method: Method,
    model: &ModelSpec,
    ds: &SplitDataset,
    solver: &SolverConfig,
    space: &SearchSpace,
    random_points: usize,
    seed: u64,
) -> Result<RunRecord> {
    if !method.supports(model) {
        return Err(Error::UnsupportedModel(format!("{method} needs the elastic-net model")));
    }
    let lower = model.build(&ds.train)?;
    let ul = UpperLevelObjective::new(ds.val.a.clone(), ds.val.b.clone())?;
    match method {
        Method::AdmmBda => outer_solve(&lower, &ul, &ds.test, solver, seed),
        Method::PgmBda => pgm_bda(&lower, &ul, &ds.test, solver, seed),
        Method::Grid => grid_search(space, &lower, &ul, &ds.test, solver, seed),
        Method::Random => random_search(space, &lower, &ul, &ds.test, solver, random_points, seed),
    }
}

fn run_on(exp: &Experiment, method: Method, ds: &SplitDataset, seed: u64, noise: &str) -> Result<RunRecord> {
    let mut rec = run_method(method, &exp.model, ds, &exp.solver, &exp.space, exp.random_points, seed)?;
    rec.noise = noise.to_string();
    Ok(rec)
}

/// Sample statistics of one metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    /// Unbiased sample standard deviation; zero for a single value.
    pub std: f64,
    pub median: f64,
}

impl MeanStd {
    /// Sorts first so the result does not depend on input order.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { mean: f64::NAN, std: f64::NAN, median: f64::NAN };
        }
        let mut v = values.to_vec();
        v.sort_by(|a, b| a.total_cmp(b));
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let std = if v.len() == 1 {
            0.0
        } else {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        let h = v.len() / 2;
        let median = if v.len() % 2 == 1 { v[h] } else { 0.5 * (v[h - 1] + v[h]) };
        Self { mean, std, median }
    }
}

impl fmt::Display for MeanStd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3e}±{:.3e}", self.mean, self.std)
    }
}

/// Per-method summary over non-diverged records.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub method: String,
    pub n_ok: usize,
    pub n_failed: usize,
    pub time: MeanStd,
    pub val: MeanStd,
    pub test: MeanStd,
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {}", self.method, self.time, self.val, self.test)
    }
}

/// One summary per method, sorted by method name.
pub fn summarize(records: &[RunRecord]) -> Vec<Summary> {
    let mut methods: Vec<&str> = records.iter().map(|r| r.method.as_str()).collect();
    methods.sort_unstable();
    methods.dedup();
    methods
        .into_iter()
        .map(|m| {
            let group: Vec<&RunRecord> = records.iter().filter(|r| r.method == m).collect();
            let ok: Vec<&&RunRecord> = group.iter().filter(|r| r.status != RunStatus::Diverged).collect();
            let col = |f: fn(&RunRecord) -> f64| MeanStd::of(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
            Summary {
                method: m.to_string(),
                n_ok: ok.len(),
                n_failed: group.len() - ok.len(),
                time: col(|r| r.wall_time_s),
                val: col(|r| r.val_err),
                test: col(|r| r.test_err),
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Repetition {
    pub records: Vec<RunRecord>,
    pub summary: Summary,
}

/// Runs `exp` with seeds `base_seed + i` for `i < n_reps`, in parallel.
pub fn repeat_experiment(exp: &Experiment, n_reps: usize, base_seed: u64) -> Result<Repetition> {
    if n_reps == 0 {
        return Err(invalid("n_reps must be >= 1"));
    }
    exp.model.validate()?;
    exp.solver.validate()?;
    let noise = exp.data.noise_label();
    let records = (0..n_reps as u64)
        .into_par_iter()
        .map(|i| {
            let seed = base_seed + i;
            let ds = exp.data.load(seed)?;
            let mut rec = run_on(exp, exp.method, &ds, seed, &noise)?;
            rec.dataset = Some(ds.fingerprint());
            Ok(rec)
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&records).pop().expect("one method");
    Ok(Repetition { records, summary })
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutcome {
    /// Grouped by repetition, then by method.
    pub records: Vec<RunRecord>,
    /// `(seed, dataset sha256)` per repetition.
    pub datasets: Vec<(u64, String)>,
    pub summaries: Vec<Summary>,
}

impl BenchmarkOutcome {
    /// True when every record of `method` diverged or failed.
    pub fn all_failed(&self, method: &str) -> bool {
        self.summaries.iter().find(|s| s.method == method).map_or(true, |s| s.n_ok == 0)
    }
}

/// Runs every method that supports `exp.model` on the same dataset per repetition.
/// `exp.method` is ignored. A method that errors gets a `Diverged` record with the error in its notes.
pub fn benchmark(exp: &Experiment, methods: &[Method], n_reps: usize, base_seed: u64) -> Result<BenchmarkOutcome> {
    if n_reps == 0 {
        return Err(invalid("n_reps must be >= 1"));
    }
    exp.model.validate()?;
    let methods: Vec<Method> = methods.iter().copied().filter(|m| m.supports(&exp.model)).collect();
    if methods.is_empty() {
        return Err(invalid("no method applies to this model"));
    }
    let noise = exp.data.noise_label();
    let per_rep = (0..n_reps as u64)
        .into_par_iter()
        .map(|i| {
            let seed = base_seed + i;
            let ds = exp.data.load(seed)?;
            let hash = ds.fingerprint();
            let recs: Vec<RunRecord> = methods
                .iter()
                .map(|&m| {
                    let mut rec = run_on(exp, m, &ds, seed, &noise).unwrap_or_else(|e| {
                        let mut r = RunRecord::new(m.name(), "", seed);
                        r.noise = noise.clone();
                        r.status = RunStatus::Diverged;
                        r.notes.push(format!("failed: {e}"));
                        r
                    });
                    rec.dataset = Some(hash.clone());
                    rec
                })
                .collect();
            Ok(((seed, hash), recs))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut records = Vec::new();
    let mut datasets = Vec::new();
    for (d, recs) in per_rep {
        datasets.push(d);
        records.extend(recs);
    }
    let summaries = summarize(&records);
    Ok(BenchmarkOutcome { records, datasets, summaries })
}

pub const RESULTS_HEADER: [&str; 10] =
    ["method", "model", "noise", "seed", "status", "wall_time_s", "val_err", "test_err", "lambda1", "lambda2"];
pub const TRAJECTORY_HEADER: [&str; 4] = ["method", "seed", "elapsed_s", "test_err"];
pub const ITERATES_HEADER: [&str; 11] = [
    "method", "seed", "k", "inner_budget", "lambda1", "lambda2", "lambda1_next", "lambda2_next", "res_err", "rel_err", "val_err",
];

pub fn write_csv<W: Write>(records: &[RunRecord], out: W) -> Result<()> {
    if records.is_empty() {
        return Err(invalid("no records to write"));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    for r in records {
        w.write_record([
            r.method.clone(),
            r.model.clone(),
            r.noise.clone(),
            r.seed.to_string(),
            r.status.to_string(),
            fmt_real(r.wall_time_s),
            fmt_real(r.val_err),
            fmt_real(r.test_err),
            fmt_real(r.lambda[0]),
            fmt_real(r.lambda[1]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectory_csv<W: Write>(records: &[RunRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_HEADER)?;
    for r in records {
        for c in &r.trajectory {
            w.write_record([r.method.clone(), r.seed.to_string(), fmt_real(c.elapsed_s), fmt_real(c.test_err)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Outer iterates of the bilevel runs, enough to replay the stopping rule.
pub fn write_iterates_csv<W: Write>(records: &[RunRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ITERATES_HEADER)?;
    for r in records {
        for it in &r.iterates {
            w.write_record([
                r.method.clone(),
                r.seed.to_string(),
                it.k.to_string(),
                it.inner_budget.to_string(),
                fmt_real(it.lambda[0]),
                fmt_real(it.lambda[1]),
                fmt_real(it.lambda_next[0]),
                fmt_real(it.lambda_next[1]),
                fmt_real(it.res_err),
                fmt_real(it.rel_err),
                fmt_real(it.val_err),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn field<T: FromStr>(rec: &csv::StringRecord, i: usize, line: usize) -> Result<T> {
    let raw = rec.get(i).ok_or_else(|| Error::Parse { line, msg: format!("missing column {}", RESULTS_HEADER[i]) })?;
    raw.parse().map_err(|_| Error::Parse { line, msg: format!("bad {} value {raw:?}", RESULTS_HEADER[i]) })
}

/// Reads a results CSV back. Also accepts externally produced files with the
/// same header, e.g. results from another tuner for side-by-side summaries.
pub fn read_csv<R: Read>(input: R) -> Result<Vec<RunRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().ne(RESULTS_HEADER.iter().copied()) {
        return Err(Error::Parse { line: 1, msg: format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()) });
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let mut r = RunRecord::new(&row[0], &row[1], field(&row, 3, line)?);
        r.noise = row[2].to_string();
        r.status = field(&row, 4, line)?;
        r.wall_time_s = field(&row, 5, line)?;
        r.val_err = field(&row, 6, line)?;
        r.test_err = field(&row, 7, line)?;
        r.lambda = [field(&row, 8, line)?, field(&row, 9, line)?];
        out.push(r);
    }
    Ok(out)
}
