//! The ADMM-BDA solver.
//!
//! One inner sweep runs, in order:
//!
//! 1. `y_update`, `z_update`, `x_lower_update`: a linearized ADMM step on the
//!    lower-level problem, giving the lower candidate `x_l`;
//! 2. `x_upper_step`: a gradient step on the validation loss, giving `x_u`;
//! 3. `aggregate`: `x = Π_𝕏(μ·x_u + (1 − μ)·x_l)`.
//!
//! The outer loop moves `λ` along an estimate of `∂F(x^{(J)}(λ))/∂λ` and
//! stops once `min(ResErr, RelErr) ≤ tol`.
//!
//! The free functions (`y_update`, `inner_solve`, ...) mirror the individual
//! algorithm steps and are convenient for experimentation. [`Solver`] caches
//! the derived constants (Lipschitz estimate, effective step, `λ` box) and is
//! what the drivers use.

use std::time::Instant;

use ndarray::{Array1, ArrayView1, Zip};
use serde::{Deserialize, Serialize};

use crate::data::DataSplit;
use crate::error::{check_dims, invalid, Error, Result};
use crate::harness::{mse, rel_err, res_err, OuterIterate, RunRecord, RunStatus};
use crate::problems::{
    lipschitz_estimate, step_bound, HyperParams, LossNorm, LowerLevelModel, ModelKind, ScalingConfig,
    UpperLevelObjective,
};
use crate::prox::{prox_l2_inplace, prox_linf_inplace, soft, soft_threshold_inplace};

/// Inner iteration budget `J_k` for outer iteration `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BudgetSchedule {
    Constant(usize),
    /// `J_k = j0 + k·delta`
    Affine { j0: usize, delta: usize },
}

impl BudgetSchedule {
    pub fn at(&self, k: usize) -> usize {
        match *self {
            BudgetSchedule::Constant(j) => j,
            BudgetSchedule::Affine { j0, delta } => j0.saturating_add(k.saturating_mul(delta)),
        }
    }
}

/// What to do when the base step `s` violates `s < σζ/L_δ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepPolicy {
    /// Refuse to build the solver.
    Strict,
    /// Replace `s` by `0.99·σζ/L_δ` and record a note.
    Clamp,
    /// Keep `s` as given and record a note.
    Override,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HypergradientStrategy {
    /// Forward differences of `φ_J(λ) = F(x^{(J)}(λ))` through the inner solver.
    FiniteDifference,
    /// Differentiates only the last lower prox step through `λ`.
    OneStepProx,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LambdaUpdate {
    /// `λ ← Π_Λ(λ − α·g)`.
    ProjectedGradient,
    /// `λ ← argmin φ_J` over a fixed candidate set.
    CandidateArgmin(Vec<HyperParams>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaBox {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl LambdaBox {
    pub fn clamp(&self, lam: [f64; 2]) -> HyperParams {
        HyperParams {
            lambda1: lam[0].clamp(self.lo[0], self.hi[0]),
            lambda2: lam[1].clamp(self.lo[1], self.hi[1]),
        }
    }
}

impl Default for LambdaBox {
    fn default() -> Self {
        Self { lo: [1e-8, 1e-8], hi: [1e2, 1e2] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub scaling: ScalingConfig,
    /// Aggregation weight of the upper candidate, in `(0, 1)`.
    pub mu: f64,
    /// Base upper step; sweep `j` uses `s/(j + 1)`.
    pub s: f64,
    /// Step on `λ`.
    pub alpha: f64,
    pub budget: BudgetSchedule,
    pub tol: f64,
    pub max_outer: usize,
    /// Half-width of the box `𝕏 = [−x_max, x_max]ⁿ`.
    pub x_max: f64,
    pub lambda_box: LambdaBox,
    pub lambda0: HyperParams,
    pub step_policy: StepPolicy,
    pub hypergradient: HypergradientStrategy,
    pub update: LambdaUpdate,
    /// Raise the lower end of `λ₂` to `2σ(λ_max(ÂᵀÂ) − ζ)` whenever `S_x` is indefinite.
    pub stabilize_lambda2: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            scaling: ScalingConfig { sigma: 1e-4, zeta: 5e-10, eta: 1e-10 },
            mu: 0.7,
            s: 1.0,
            alpha: 1e-3,
            budget: BudgetSchedule::Constant(50),
            tol: 1e-4,
            max_outer: 100,
            x_max: 1e3,
            lambda_box: LambdaBox::default(),
            lambda0: HyperParams { lambda1: 1e-3, lambda2: 1e-3 },
            step_policy: StepPolicy::Strict,
            hypergradient: HypergradientStrategy::FiniteDifference,
            update: LambdaUpdate::ProjectedGradient,
            stabilize_lambda2: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        self.scaling.validate()?;
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(invalid(format!("mu must lie in (0, 1), got {}", self.mu)));
        }
        for (name, v) in [("s", self.s), ("alpha", self.alpha), ("x_max", self.x_max)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if !(self.tol > 0.0) {
            return Err(invalid(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_outer == 0 {
            return Err(invalid("max_outer must be >= 1"));
        }
        match self.budget {
            BudgetSchedule::Constant(0) | BudgetSchedule::Affine { j0: 0, .. } => {
                return Err(invalid("inner budget must be >= 1"));
            }
            _ => {}
        }
        let b = &self.lambda_box;
        for i in 0..2 {
            if !(b.lo[i] >= 0.0 && b.lo[i] <= b.hi[i] && b.hi[i].is_finite()) {
                return Err(invalid(format!("lambda box coordinate {i} is invalid: [{}, {}]", b.lo[i], b.hi[i])));
            }
        }
        if let LambdaUpdate::CandidateArgmin(c) = &self.update {
            if c.is_empty() {
                return Err(invalid("candidate set for the lambda argmin is empty"));
            }
        }
        HyperParams::new(self.lambda0.lambda1, self.lambda0.lambda2)?;
        Ok(())
    }
}

/// The iterates of one inner run.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerState {
    pub x: Array1<f64>,
    pub y_l: Array1<f64>,
    pub z_l: Array1<f64>,
    pub x_l: Array1<f64>,
    pub x_u: Array1<f64>,
    /// Sweeps completed in the current inner run.
    pub j: usize,
    /// Input `w` of the last lower prox step, with `x_l = soft(w, λ₁)/(λ₂ + c)`.
    pub prox_input: Array1<f64>,
}

impl InnerState {
    /// `x = x_l = 0`, `y_l = −b̂`, `z_l = 0`, which makes the first residual `Âx − y − b̂` zero.
    pub fn initial(model: &LowerLevelModel) -> Self {
        let n = model.n_features();
        let m = model.n_samples();
        Self {
            x: Array1::zeros(n),
            y_l: -&model.b(),
            z_l: Array1::zeros(m),
            x_l: Array1::zeros(n),
            x_u: Array1::zeros(n),
            j: 0,
            prox_input: Array1::zeros(n),
        }
    }

    fn check_dims(&self, model: &LowerLevelModel) -> Result<()> {
        let (n, m) = (model.n_features(), model.n_samples());
        check_dims("x", self.x.len(), n)?;
        check_dims("x_l", self.x_l.len(), n)?;
        check_dims("x_u", self.x_u.len(), n)?;
        check_dims("y_l", self.y_l.len(), m)?;
        check_dims("z_l", self.z_l.len(), m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hypergradient {
    pub g: [f64; 2],
    pub strategy: HypergradientStrategy,
}

fn y_kernel(r: &Array1<f64>, y: &Array1<f64>, z: &Array1<f64>, model: &LowerLevelModel, sc: &ScalingConfig) -> Array1<f64> {
    let (sigma, eta) = (sc.sigma, sc.eta);
    match model.loss() {
        None => {
            let denom = 1.0 + sigma + sigma * eta;
            let mut out = Array1::zeros(r.len());
            Zip::from(&mut out).and(r).and(y).and(z).for_each(|o, &ri, &yi, &zi| {
                *o = (zi + sigma * ri + sigma * eta * yi) / denom;
            });
            out
        }
        Some(q) => {
            let scale = sigma * (1.0 + eta);
            let t = 1.0 / scale;
            let mut v = Array1::zeros(r.len());
            Zip::from(&mut v).and(r).and(y).and(z).for_each(|o, &ri, &yi, &zi| {
                *o = (sigma * ri + zi + sigma * eta * yi) / scale;
            });
            match q {
                LossNorm::L1 => soft_threshold_inplace(v.view_mut(), t),
                LossNorm::L2 => prox_l2_inplace(v.view_mut(), t),
                LossNorm::Inf => prox_linf_inplace(v.view_mut(), t),
            }
            v
        }
    }
}

fn z_kernel(z: &Array1<f64>, r: &Array1<f64>, y_new: &Array1<f64>, sigma: f64) -> Array1<f64> {
    let mut out = z.clone();
    Zip::from(&mut out).and(r).and(y_new).for_each(|o, &ri, &yi| *o += sigma * (ri - yi));
    out
}

/// `w = Âᵀ(σ(y + b̂) − z − σÂx) + σζx`, which equals `σÂᵀ(y + b̂) − Âᵀz + σ(ζI − ÂᵀÂ)x`.
fn prox_input_kernel(
    model: &LowerLevelModel,
    ax: &Array1<f64>,
    x: ArrayView1<f64>,
    y_new: &Array1<f64>,
    z_new: &Array1<f64>,
    sc: &ScalingConfig,
) -> Array1<f64> {
    let sigma = sc.sigma;
    let mut t = Array1::zeros(ax.len());
    Zip::from(&mut t).and(y_new).and(model.b()).and(z_new).and(ax).for_each(|o, &y, &b, &z, &a| {
        *o = sigma * (y + b) - z - sigma * a;
    });
    let mut w = model.at().dot(&t);
    let sz = sc.s_scalar();
    Zip::from(&mut w).and(x).for_each(|wi, &xi| *wi += sz * xi);
    w
}

fn shrink(w: &Array1<f64>, lam: HyperParams, c: f64) -> Array1<f64> {
    let denom = lam.lambda2 + c;
    w.mapv(|wi| soft(wi, lam.lambda1) / denom)
}

fn upper_kernel(x: &Array1<f64>, grad: &Array1<f64>, step_j: f64, s_scalar: f64) -> Array1<f64> {
    let c = step_j / s_scalar;
    let mut out = x.clone();
    Zip::from(&mut out).and(grad).for_each(|o, &g| *o -= c * g);
    out
}

fn aggregate_kernel(x_u: &Array1<f64>, x_l: &Array1<f64>, mu: f64, x_max: f64) -> Array1<f64> {
    let mut out = Array1::zeros(x_u.len());
    Zip::from(&mut out).and(x_u).and(x_l).for_each(|o, &u, &l| {
        *o = (mu * u + (1.0 - mu) * l).clamp(-x_max, x_max);
    });
    out
}

fn residual(model: &LowerLevelModel, x: ArrayView1<f64>) -> (Array1<f64>, Array1<f64>) {
    let ax = model.a().dot(&x);
    let r = &ax - &model.b();
    (ax, r)
}

/// New `y_l` from the state's current `x`, `y_l`, `z_l`.
pub fn y_update(state: &InnerState, model: &LowerLevelModel, cfg: &SolverConfig) -> Result<Array1<f64>> {
    state.check_dims(model)?;
    let (_, r) = residual(model, state.x.view());
    Ok(y_kernel(&r, &state.y_l, &state.z_l, model, &cfg.scaling))
}

/// New `z_l`, reading `state.y_l` as the already-updated `y`.
pub fn z_update(state: &InnerState, model: &LowerLevelModel, cfg: &SolverConfig) -> Result<Array1<f64>> {
    state.check_dims(model)?;
    let (_, r) = residual(model, state.x.view());
    Ok(z_kernel(&state.z_l, &r, &state.y_l, cfg.scaling.sigma))
}

/// The prox input `w` of the x-subproblem, reading `state.y_l` and `state.z_l` as updated.
pub fn x_lower_prox_input(state: &InnerState, model: &LowerLevelModel, cfg: &SolverConfig) -> Result<Array1<f64>> {
    state.check_dims(model)?;
    let (ax, _) = residual(model, state.x.view());
    Ok(prox_input_kernel(model, &ax, state.x.view(), &state.y_l, &state.z_l, &cfg.scaling))
}

/// `x_l = sign(w)·max(|w| − λ₁, 0)/(λ₂ + σζ)`.
pub fn x_lower_update(
    state: &InnerState,
    model: &LowerLevelModel,
    lam: HyperParams,
    cfg: &SolverConfig,
) -> Result<Array1<f64>> {
    let w = x_lower_prox_input(state, model, cfg)?;
    Ok(shrink(&w, lam, cfg.scaling.s_scalar()))
}

/// `x_u = x − s_j·(σζ)⁻¹·∇F(x)` for the sweep `j = state.j + 1`, using `cfg.s` as given.
pub fn x_upper_step(state: &InnerState, ul: &UpperLevelObjective, cfg: &SolverConfig) -> Result<Array1<f64>> {
    check_dims("x", state.x.len(), ul.a().ncols())?;
    let grad = ul.grad_unchecked(state.x.view());
    Ok(upper_kernel(&state.x, &grad, step_at(cfg.s, state.j + 1), cfg.scaling.s_scalar()))
}

/// `s_j = s/(j + 1)`.
pub fn step_at(s: f64, j: usize) -> f64 {
    s / (j as f64 + 1.0)
}

/// `Π_𝕏(μ·x_u + (1 − μ)·x_l)`.
pub fn aggregate(x_u: ArrayView1<f64>, x_l: ArrayView1<f64>, cfg: &SolverConfig) -> Result<Array1<f64>> {
    check_dims("x_l", x_l.len(), x_u.len())?;
    Ok(aggregate_kernel(&x_u.to_owned(), &x_l.to_owned(), cfg.mu, cfg.x_max))
}

/// `Π_Λ(λ − α·g)` using the configured box.
pub fn lambda_update(lam: HyperParams, g: &Hypergradient, cfg: &SolverConfig) -> HyperParams {
    step_lambda(lam, g, cfg.alpha, &cfg.lambda_box)
}

fn step_lambda(lam: HyperParams, g: &Hypergradient, alpha: f64, bx: &LambdaBox) -> HyperParams {
    bx.clamp([lam.lambda1 - alpha * g.g[0], lam.lambda2 - alpha * g.g[1]])
}

/// Runs `J` sweeps from `warm` (or the initial state).
pub fn inner_solve(
    lam: HyperParams,
    j: usize,
    model: &LowerLevelModel,
    ul: &UpperLevelObjective,
    cfg: &SolverConfig,
    warm: Option<&InnerState>,
) -> Result<(Array1<f64>, InnerState)> {
    Solver::new(model, ul, cfg)?.inner_solve(lam, j, warm)
}

/// Finite-difference hypergradient with forward steps `hᵢ = 1e−6·(1 + |λᵢ|)`.
pub fn hypergradient_fd(
    lam: HyperParams,
    j: usize,
    model: &LowerLevelModel,
    ul: &UpperLevelObjective,
    cfg: &SolverConfig,
    warm: Option<&InnerState>,
) -> Result<Hypergradient> {
    Solver::new(model, ul, cfg)?.hypergradient_fd(lam, j, warm, None)
}

/// Analytic hypergradient through the final lower prox step.
pub fn hypergradient_onestep(
    lam: HyperParams,
    final_state: &InnerState,
    model: &LowerLevelModel,
    ul: &UpperLevelObjective,
    cfg: &SolverConfig,
) -> Result<Hypergradient> {
    final_state.check_dims(model)?;
    Ok(onestep(lam, final_state, ul, cfg.scaling.s_scalar()))
}

fn onestep(lam: HyperParams, st: &InnerState, ul: &UpperLevelObjective, c: f64) -> Hypergradient {
    let denom = lam.lambda2 + c;
    let tau = lam.lambda1 / denom;
    let grad = ul.grad_unchecked(st.x_l.view());
    let mut g = [0.0; 2];
    for ((&w, &xl), &gi) in st.prox_input.iter().zip(&st.x_l).zip(&grad) {
        let u = w / denom;
        if u.abs() > tau {
            g[0] -= u.signum() / denom * gi;
        }
        g[1] -= xl / denom * gi;
    }
    Hypergradient { g, strategy: HypergradientStrategy::OneStepProx }
}

/// Runs ADMM-BDA and reports the final validation/test errors.
pub fn outer_solve(
    model: &LowerLevelModel,
    ul: &UpperLevelObjective,
    test: &DataSplit,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<RunRecord> {
    Solver::new(model, ul, cfg)?.run(test, seed)
}

/// How the lower candidate `x_l` is produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum LowerStep {
    Admm,
    /// One proximal-gradient step on the elastic net with step `1/l_hat`.
    ProxGrad { l_hat: f64 },
}

/// Result of a lower-level-only solve.
#[derive(Debug, Clone)]
pub struct LowerSolution {
    pub x: Array1<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

/// A validated solver bound to one dataset and configuration.
#[derive(Debug)]
pub struct Solver<'a> {
    model: &'a LowerLevelModel,
    ul: &'a UpperLevelObjective,
    cfg: &'a SolverConfig,
    lower: LowerStep,
    step: f64,
    l_delta: f64,
    lambda_box: LambdaBox,
    sx_psd: bool,
    notes: Vec<String>,
}

impl<'a> Solver<'a> {
    pub fn new(model: &'a LowerLevelModel, ul: &'a UpperLevelObjective, cfg: &'a SolverConfig) -> Result<Self> {
        Self::with_lower(model, ul, cfg, LowerStep::Admm)
    }

    pub(crate) fn with_lower(
        model: &'a LowerLevelModel,
        ul: &'a UpperLevelObjective,
        cfg: &'a SolverConfig,
        lower: LowerStep,
    ) -> Result<Self> {
        cfg.validate()?;
        check_dims("validation feature count", ul.a().ncols(), model.n_features())?;
        let mut notes = Vec::new();
        let l_delta = lipschitz_estimate(ul).value;
        let bound = step_bound(&cfg.scaling, l_delta);
        let step = if cfg.s < bound {
            cfg.s
        } else {
            match cfg.step_policy {
                StepPolicy::Strict => return Err(Error::StepBound { s: cfg.s, bound }),
                StepPolicy::Clamp => {
                    notes.push(format!("step s={:e} exceeds sigma*zeta/L={bound:e}; clamped to {:e}", cfg.s, 0.99 * bound));
                    0.99 * bound
                }
                StepPolicy::Override => {
                    notes.push(format!("step s={:e} exceeds sigma*zeta/L={bound:e}; kept by override", cfg.s));
                    cfg.s
                }
            }
        };
        let mut lambda_box = cfg.lambda_box;
        let mut sx_psd = true;
        if lower == LowerStep::Admm {
            let check = cfg.scaling.check(model);
            sx_psd = check.sx_psd;
            if !sx_psd {
                notes.push(format!(
                    "S_x indefinite: zeta={:e} < lambda_max(A^T A)={:e}",
                    cfg.scaling.zeta, check.gram_lambda_max
                ));
                if cfg.stabilize_lambda2 {
                    let floor = 2.0 * cfg.scaling.sigma * (check.gram_lambda_max - cfg.scaling.zeta);
                    if floor > lambda_box.lo[1] {
                        lambda_box.lo[1] = floor.min(lambda_box.hi[1]);
                        notes.push(format!("lambda2 lower bound raised to {:e}", lambda_box.lo[1]));
                    }
                }
            }
        }
        for n in &notes {
            log::warn!("{n}");
        }
        Ok(Self { model, ul, cfg, lower, step, l_delta, lambda_box, sx_psd, notes })
    }

    pub fn config(&self) -> &SolverConfig {
        self.cfg
    }

    pub fn effective_step(&self) -> f64 {
        self.step
    }

    pub fn lipschitz(&self) -> f64 {
        self.l_delta
    }

    /// The `λ` box after any stabilization.
    pub fn lambda_box(&self) -> LambdaBox {
        self.lambda_box
    }

    pub fn sx_psd(&self) -> bool {
        self.sx_psd
    }

    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    fn prox_offset(&self) -> f64 {
        match self.lower {
            LowerStep::Admm => self.cfg.scaling.s_scalar(),
            LowerStep::ProxGrad { l_hat } => l_hat,
        }
    }

    fn sweep(&self, lam: HyperParams, st: &mut InnerState, upper: bool) -> Result<()> {
        let j = st.j + 1;
        let sc = &self.cfg.scaling;
        match self.lower {
            LowerStep::Admm => {
                let (ax, r) = residual(self.model, st.x.view());
                let y = y_kernel(&r, &st.y_l, &st.z_l, self.model, sc);
                let z = z_kernel(&st.z_l, &r, &y, sc.sigma);
                let w = prox_input_kernel(self.model, &ax, st.x.view(), &y, &z, sc);
                st.x_l = shrink(&w, lam, sc.s_scalar());
                st.prox_input = w;
                st.y_l = y;
                st.z_l = z;
            }
            LowerStep::ProxGrad { l_hat } => {
                let (_, r) = residual(self.model, st.x.view());
                let grad = self.model.at().dot(&r);
                let v = &st.x - &(grad / l_hat);
                let (t1, t2) = (lam.lambda1 / l_hat, lam.lambda2 / l_hat);
                st.x_l = v.mapv(|vi| soft(vi, t1) / (1.0 + t2));
                st.prox_input = v * l_hat;
            }
        }
        if upper {
            let grad = self.ul.grad_unchecked(st.x.view());
            st.x_u = upper_kernel(&st.x, &grad, step_at(self.step, j), sc.s_scalar());
            st.x = aggregate_kernel(&st.x_u, &st.x_l, self.cfg.mu, self.cfg.x_max);
        } else {
            let x_max = self.cfg.x_max;
            st.x = st.x_l.mapv(|v| v.clamp(-x_max, x_max));
        }
        st.j = j;
        for (what, v) in [("x", &st.x), ("x_l", &st.x_l), ("x_u", &st.x_u), ("y_l", &st.y_l), ("z_l", &st.z_l)] {
            if !v.iter().all(|e| e.is_finite()) {
                return Err(Error::Diverged { sweep: j, what });
            }
        }
        Ok(())
    }

    fn start(&self, warm: Option<&InnerState>) -> Result<InnerState> {
        let mut st = match warm {
            Some(w) => {
                w.check_dims(self.model)?;
                w.clone()
            }
            None => InnerState::initial(self.model),
        };
        st.j = 0;
        Ok(st)
    }

    /// Runs `j` full sweeps. The sweep counter restarts at zero on every call.
    pub fn inner_solve(&self, lam: HyperParams, j: usize, warm: Option<&InnerState>) -> Result<(Array1<f64>, InnerState)> {
        if j == 0 {
            return Err(invalid("inner budget must be >= 1"));
        }
        let mut st = self.start(warm)?;
        for _ in 0..j {
            self.sweep(lam, &mut st, true)?;
        }
        Ok((st.x.clone(), st))
    }

    /// Runs `j` lower-only sweeps (`x = Π_𝕏(x_l)`, no upper step).
    pub fn lower_sweeps(&self, lam: HyperParams, j: usize, warm: Option<&InnerState>) -> Result<InnerState> {
        let mut st = self.start(warm)?;
        for _ in 0..j {
            self.sweep(lam, &mut st, false)?;
        }
        Ok(st)
    }

    /// Plain lower-level solve in chunks of `chunk` sweeps, stopping once
    /// `min(ResErr, ‖x − x_prev‖/(1 + ‖x_prev‖)) ≤ tol` between chunks or after
    /// `max_chunks` chunks.
    pub fn lower_solve(&self, lam: HyperParams, chunk: usize, max_chunks: usize) -> Result<LowerSolution> {
        if chunk == 0 {
            return Err(invalid("chunk must be >= 1"));
        }
        let mut st = InnerState::initial(self.model);
        let mut sweeps = 0;
        for _ in 0..max_chunks {
            let prev = st.x.clone();
            st = self.lower_sweeps(lam, chunk, Some(&st))?;
            sweeps += chunk;
            let res = res_err(st.x.view(), self.model.a(), self.model.b())?;
            let rel = rel_err(st.x.view(), prev.view())?;
            if res.min(rel) <= self.cfg.tol {
                return Ok(LowerSolution { x: st.x, sweeps, converged: true });
            }
        }
        Ok(LowerSolution { x: st.x, sweeps, converged: false })
    }

    fn phi(&self, lam: HyperParams, j: usize, warm: Option<&InnerState>) -> Result<f64> {
        let (x, _) = self.inner_solve(lam, j, warm)?;
        Ok(self.ul.value_unchecked(x.view()))
    }

    /// Forward differences of `φ_J`; a coordinate whose forward step leaves
    /// the `λ` box switches to a backward difference. `phi_base` may carry an
    /// already computed `φ_J(λ)` from the same warm start.
    pub fn hypergradient_fd(
        &self,
        lam: HyperParams,
        j: usize,
        warm: Option<&InnerState>,
        phi_base: Option<f64>,
    ) -> Result<Hypergradient> {
        let base = match phi_base {
            Some(v) => v,
            None => self.phi(lam, j, warm)?,
        };
        let l = lam.to_array();
        let mut g = [0.0; 2];
        for i in 0..2 {
            let h = 1e-6 * (1.0 + l[i].abs());
            let mut p = l;
            if l[i] + h <= self.lambda_box.hi[i] {
                p[i] += h;
                g[i] = (self.phi(HyperParams::from_array(p), j, warm)? - base) / h;
            } else {
                p[i] -= h;
                g[i] = (base - self.phi(HyperParams::from_array(p), j, warm)?) / h;
            }
        }
        Ok(Hypergradient { g, strategy: HypergradientStrategy::FiniteDifference })
    }

    pub fn hypergradient_onestep(&self, lam: HyperParams, final_state: &InnerState) -> Hypergradient {
        onestep(lam, final_state, self.ul, self.prox_offset())
    }

    pub(crate) fn method_name(&self) -> &'static str {
        match self.lower {
            LowerStep::Admm => "admm_bda",
            LowerStep::ProxGrad { .. } => "pgm_bda",
        }
    }

    /// The outer loop. Divergence ends the run with `Diverged` status and
    /// keeps the iterates recorded so far.
    pub fn run(&self, test: &DataSplit, seed: u64) -> Result<RunRecord> {
        check_dims("test feature count", test.a.ncols(), self.model.n_features())?;
        let t0 = Instant::now();
        let mut rec = RunRecord::new(self.method_name(), model_label(self.model), seed);
        rec.notes = self.notes.clone();
        let mut lam = self.lambda_box.clamp(self.cfg.lambda0.to_array());
        if lam != self.cfg.lambda0 {
            rec.notes.push(format!("lambda0 moved into the box: {:?}", lam.to_array()));
        }
        let mut state = InnerState::initial(self.model);
        let mut last_x: Option<Array1<f64>> = None;
        let mut last_lam = lam;
        let mut status = RunStatus::MaxIter;
        for k in 0..self.cfg.max_outer {
            let jk = self.cfg.budget.at(k);
            match self.outer_step(lam, jk, &state) {
                Ok((x, new_state, lam_next)) => {
                    let res = res_err(x.view(), self.model.a(), self.model.b())?;
                    let rel = rel_err(ndarray::aview1(&lam_next.to_array()), ndarray::aview1(&lam.to_array()))?;
                    let val = self.ul.value_unchecked(x.view());
                    let tst = mse(test.a.view(), test.b.view(), x.view())?;
                    rec.evaluations += 1;
                    rec.iterates.push(OuterIterate {
                        k,
                        inner_budget: jk,
                        lambda: lam.to_array(),
                        lambda_next: lam_next.to_array(),
                        res_err: res,
                        rel_err: rel,
                        val_err: val,
                        test_err: tst,
                    });
                    rec.push_checkpoint(t0.elapsed().as_secs_f64(), tst);
                    state = new_state;
                    last_x = Some(x);
                    last_lam = lam;
                    lam = lam_next;
                    if res.min(rel) <= self.cfg.tol {
                        status = RunStatus::Converged;
                        break;
                    }
                }
                Err(e @ Error::Diverged { .. }) => {
                    rec.notes.push(format!("outer iteration {k}: {e}"));
                    status = RunStatus::Diverged;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        rec.wall_time_s = t0.elapsed().as_secs_f64();
        rec.status = status;
        rec.lambda = last_lam.to_array();
        match (&last_x, status) {
            (Some(x), RunStatus::Converged | RunStatus::MaxIter) => {
                rec.val_err = self.ul.value_unchecked(x.view());
                rec.test_err = mse(test.a.view(), test.b.view(), x.view())?;
                rec.x = Some(x.clone());
            }
            _ => {
                rec.val_err = f64::INFINITY;
                rec.test_err = f64::INFINITY;
            }
        }
        Ok(rec)
    }

    fn outer_step(&self, lam: HyperParams, jk: usize, warm: &InnerState) -> Result<(Array1<f64>, InnerState, HyperParams)> {
        let (x, new_state) = self.inner_solve(lam, jk, Some(warm))?;
        let lam_next = match &self.cfg.update {
            LambdaUpdate::ProjectedGradient => {
                let g = match self.cfg.hypergradient {
                    HypergradientStrategy::FiniteDifference => {
                        let phi = self.ul.value_unchecked(x.view());
                        self.hypergradient_fd(lam, jk, Some(warm), Some(phi))?
                    }
                    HypergradientStrategy::OneStepProx => self.hypergradient_onestep(lam, &new_state),
                };
                if !(g.g[0].is_finite() && g.g[1].is_finite()) {
                    return Err(Error::Diverged { sweep: jk, what: "hypergradient" });
                }
                step_lambda(lam, &g, self.cfg.alpha, &self.lambda_box)
            }
            LambdaUpdate::CandidateArgmin(cands) => {
                let mut best: Option<(f64, HyperParams)> = None;
                for c in cands {
                    let c = self.lambda_box.clamp(c.to_array());
                    let v = self.phi(c, jk, Some(warm))?;
                    if best.map_or(true, |(bv, _)| v < bv) {
                        best = Some((v, c));
                    }
                }
                best.expect("candidate set validated non-empty").1
            }
        };
        Ok((x, new_state, lam_next))
    }
}

/// `en`, `gen-q1`, `gen-q2` or `gen-qinf`.
pub fn model_label(model: &LowerLevelModel) -> String {
    match model.kind() {
        ModelKind::ElasticNet => "en".to_string(),
        ModelKind::GeneralizedElasticNet => format!("gen-q{}", model.loss().expect("generalized model has a loss")),
    }
}
