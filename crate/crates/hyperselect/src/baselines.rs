//! Grid search, random search and PGM-BDA.
//!
//! Grid and random search score each candidate `λ` by solving the lower
//! problem alone (no upper step) with the same ADMM sweeps as the bilevel
//! solver, checked every [`LOWER_CHUNK`] sweeps for up to `max_outer` checks,
//! then pick the lowest validation error. Ties go to the earlier candidate.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::admm_bda::{model_label, LowerStep, Solver, SolverConfig, StepPolicy};
use crate::data::DataSplit;
use crate::error::{invalid, Error, Result};
use crate::harness::{mse, PointEval, RunRecord, RunStatus};
use crate::problems::{HyperParams, LowerLevelModel, ModelKind, UpperLevelObjective};

/// Log-space bounds for `(λ₁, λ₂)` and the grid resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub lambda1: (f64, f64),
    pub lambda2: (f64, f64),
    /// Points per axis for grid search.
    pub grid: (usize, usize),
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self { lambda1: (1e-6, 1.0), lambda2: (1e-6, 1.0), grid: (6, 5) }
    }
}

fn log_axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)).collect()
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if !(lo > 0.0 && lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(invalid(format!("{name} search bounds must be positive and ordered, got [{lo}, {hi}]")));
            }
        }
        if self.grid.0 == 0 || self.grid.1 == 0 {
            return Err(invalid("grid needs at least one point per axis"));
        }
        Ok(())
    }

    /// Row-major grid: `λ₁` varies slowest.
    pub fn grid_points(&self) -> Vec<HyperParams> {
        let l1 = log_axis(self.lambda1.0, self.lambda1.1, self.grid.0);
        let l2 = log_axis(self.lambda2.0, self.lambda2.1, self.grid.1);
        l1.iter().flat_map(|&a| l2.iter().map(move |&b| HyperParams { lambda1: a, lambda2: b })).collect()
    }

    /// `n` points, log-uniform per axis.
    pub fn random_points(&self, n: usize, seed: u64) -> Vec<HyperParams> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Keep the draws independent of the data generator, which uses stream 0 of the same seed.
        rng.set_stream(1);
        let draw = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| {
            let (a, b) = (lo.log10(), hi.log10());
            if a == b {
                lo
            } else {
                10f64.powf(rng.random_range(a..b))
            }
        };
        (0..n)
            .map(|_| {
                let lambda1 = draw(&mut rng, self.lambda1);
                let lambda2 = draw(&mut rng, self.lambda2);
                HyperParams { lambda1, lambda2 }
            })
            .collect()
    }
}

/// Sweeps between convergence checks of a candidate's lower solve.
pub const LOWER_CHUNK: usize = 500;

fn search_config(cfg: &SolverConfig) -> SolverConfig {
    // The upper step is never taken, so its bound is irrelevant here.
    SolverConfig { step_policy: StepPolicy::Override, stabilize_lambda2: false, ..cfg.clone() }
}

/// Solves the lower problem at `lam` and scores the result.
pub fn evaluate_point(
    lam: HyperParams,
    model: &LowerLevelModel,
    ul: &UpperLevelObjective,
    test: &DataSplit,
    cfg: &SolverConfig,
) -> Result<PointEval> {
    let cfg = search_config(cfg);
    let solver = Solver::new(model, ul, &cfg)?;
    eval_with(&solver, lam, ul, test)
}

fn eval_with(solver: &Solver<'_>, lam: HyperParams, ul: &UpperLevelObjective, test: &DataSplit) -> Result<PointEval> {
    match solver.lower_solve(lam, LOWER_CHUNK, solver.config().max_outer) {
        Ok(sol) => Ok(PointEval {
            lambda: lam.to_array(),
            val_err: ul.value_unchecked(sol.x.view()),
            test_err: mse(test.a.view(), test.b.view(), sol.x.view())?,
            sweeps: sol.sweeps,
            converged: sol.converged,
            diverged: false,
        }),
        Err(Error::Diverged { sweep, .. }) => Ok(PointEval {
            lambda: lam.to_array(),
            val_err: f64::INFINITY,
            test_err: f64::INFINITY,
            sweeps: sweep,
            converged: false,
            diverged: true,
        }),
        Err(e) => Err(e),
    }
}

fn search(
    method: &str,
    points: &[HyperParams],
    model: &LowerLevelModel,
    ul: &UpperLevelObjective,
    test: &DataSplit,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<RunRecord> {
    if points.is_empty() {
        return Err(invalid("search needs at least one candidate"));
    }
    let cfg = search_config(cfg);
    let solver = Solver::new(model, ul, &cfg)?;
    let t0 = Instant::now();
    let mut rec = RunRecord::new(method, model_label(model), seed);
    rec.notes = solver.notes().to_vec();
    let mut best: Option<usize> = None;
    for lam in points {
        let p = eval_with(&solver, *lam, ul, test)?;
        rec.evaluations += 1;
        if p.diverged {
            rec.notes.push(format!("candidate {:?} diverged; skipped", p.lambda));
        } else if best.map_or(true, |b| p.val_err < rec.points[b].val_err) {
            best = Some(rec.points.len());
        }
        rec.points.push(p);
        if let Some(b) = best {
            let incumbent = rec.points[b].test_err;
            rec.push_checkpoint(t0.elapsed().as_secs_f64(), incumbent);
        }
    }
    rec.wall_time_s = t0.elapsed().as_secs_f64();
    match best {
        Some(b) => {
            let p = &rec.points[b];
            rec.status = RunStatus::Converged;
            rec.val_err = p.val_err;
            rec.test_err = p.test_err;
            rec.lambda = p.lambda;
        }
        None => {
            rec.status = RunStatus::Diverged;
            rec.val_err = f64::INFINITY;
            rec.test_err = f64::INFINITY;
            rec.lambda = points[0].to_array();
        }
    }
    Ok(rec)
}

/// Evaluates every grid point in row-major order.
pub fn grid_search(
    space: &SearchSpace,
    model: &LowerLevelModel,
    ul: &UpperLevelObjective,
    test: &DataSplit,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<RunRecord> {
    space.validate()?;
    search("grid", &space.grid_points(), model, ul, test, cfg, seed)
}

/// Evaluates `n_points` log-uniform draws seeded by `seed`.
pub fn random_search(
    space: &SearchSpace,
    model: &LowerLevelModel,
    ul: &UpperLevelObjective,
    test: &DataSplit,
    cfg: &SolverConfig,
    n_points: usize,
    seed: u64,
) -> Result<RunRecord> {
    space.validate()?;
    if n_points == 0 {
        return Err(invalid("random search needs n_points >= 1"));
    }
    search("random", &space.random_points(n_points, seed), model, ul, test, cfg, seed)
}

/// The bilevel loop with the lower ADMM step replaced by one proximal-gradient
/// step of length `1/λ_max(ÂᵀÂ)`. Elastic net only.
pub fn pgm_bda(
    model: &LowerLevelModel,
    ul: &UpperLevelObjective,
    test: &DataSplit,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<RunRecord> {
    if model.kind() != ModelKind::ElasticNet {
        return Err(Error::UnsupportedModel("pgm_bda needs a smooth loss (elastic net only)".into()));
    }
    let l_hat = model.gram_lambda_max();
    if l_hat <= 0.0 {
        return Err(invalid("training matrix is zero"));
    }
    Solver::with_lower(model, ul, cfg, LowerStep::ProxGrad { l_hat })?.run(test, seed)
}
