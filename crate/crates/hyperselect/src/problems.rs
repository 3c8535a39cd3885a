//! Upper- and lower-level problem definitions.
//!
//! The upper level is the validation mean-squared error
//! `F(x) = (1/2m_v)‖Ãx − b̃‖²`. The lower level is either the elastic net
//! `½‖Âx − b̂‖² + λ₁‖x‖₁ + (λ₂/2)‖x‖²` or its generalized form with an
//! `ℓ_q` data-fit term `‖Âx − b̂‖_q`, `q ∈ {1, 2, ∞}`.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, invalid, Error, Result};
use crate::linalg::{gram_lambda_max, norm2, POWER_MAX_ITER, POWER_TOL};

/// The hyperparameter pair `(λ₁, λ₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl HyperParams {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        for (name, v) in [("lambda1", lambda1), ("lambda2", lambda2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(Self { lambda1, lambda2 })
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.lambda1, self.lambda2]
    }

    pub fn from_array(a: [f64; 2]) -> Self {
        Self { lambda1: a[0], lambda2: a[1] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    ElasticNet,
    GeneralizedElasticNet,
}

/// The loss norm `q` of the generalized model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LossNorm {
    L1,
    L2,
    Inf,
}

impl LossNorm {
    pub fn norm(self, v: ArrayView1<f64>) -> f64 {
        match self {
            LossNorm::L1 => v.iter().map(|x| x.abs()).sum(),
            LossNorm::L2 => norm2(v),
            LossNorm::Inf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            LossNorm::L1 => "1",
            LossNorm::L2 => "2",
            LossNorm::Inf => "inf",
        }
    }
}

impl fmt::Display for LossNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for LossNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "l1" => Ok(LossNorm::L1),
            "2" | "l2" => Ok(LossNorm::L2),
            "inf" | "linf" | "∞" => Ok(LossNorm::Inf),
            _ => Err(invalid(format!("unknown loss norm {s:?} (expected 1, 2 or inf)"))),
        }
    }
}

/// Lower-level data and loss. The transpose of `Â` is cached because the
/// solver applies both `Â` and `Âᵀ` every sweep.
#[derive(Debug, Clone)]
pub struct LowerLevelModel {
    kind: ModelKind,
    loss: LossNorm,
    a: Array2<f64>,
    at: Array2<f64>,
    b: Array1<f64>,
}

impl LowerLevelModel {
    pub fn elastic_net(a: Array2<f64>, b: Array1<f64>) -> Result<Self> {
        Self::build(ModelKind::ElasticNet, LossNorm::L2, a, b)
    }

    pub fn generalized(a: Array2<f64>, b: Array1<f64>, q: LossNorm) -> Result<Self> {
        Self::build(ModelKind::GeneralizedElasticNet, q, a, b)
    }

    pub fn new(kind: ModelKind, q: LossNorm, a: Array2<f64>, b: Array1<f64>) -> Result<Self> {
        Self::build(kind, q, a, b)
    }

    fn build(kind: ModelKind, loss: LossNorm, a: Array2<f64>, b: Array1<f64>) -> Result<Self> {
        check_dims("train target length", b.len(), a.nrows())?;
        let at = a.t().as_standard_layout().into_owned();
        Ok(Self { kind, loss, a, at, b })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    /// Loss norm for the generalized model, `None` for the elastic net.
    pub fn loss(&self) -> Option<LossNorm> {
        match self.kind {
            ModelKind::ElasticNet => None,
            ModelKind::GeneralizedElasticNet => Some(self.loss),
        }
    }

    pub fn a(&self) -> ArrayView2<'_, f64> {
        self.a.view()
    }

    pub(crate) fn at(&self) -> ArrayView2<'_, f64> {
        self.at.view()
    }

    pub fn b(&self) -> ArrayView1<'_, f64> {
        self.b.view()
    }

    pub fn n_features(&self) -> usize {
        self.a.ncols()
    }

    pub fn n_samples(&self) -> usize {
        self.a.nrows()
    }

    /// `λ_max(ÂᵀÂ)` by power iteration.
    pub fn gram_lambda_max(&self) -> f64 {
        gram_lambda_max(self.a.view(), POWER_TOL, POWER_MAX_ITER).value
    }
}

/// Validation objective `F(x) = (1/2m_v)‖Ãx − b̃‖²`.
#[derive(Debug, Clone)]
pub struct UpperLevelObjective {
    a: Array2<f64>,
    at: Array2<f64>,
    b: Array1<f64>,
}

impl UpperLevelObjective {
    pub fn new(a: Array2<f64>, b: Array1<f64>) -> Result<Self> {
        check_dims("validation target length", b.len(), a.nrows())?;
        if a.nrows() == 0 {
            return Err(invalid("validation split is empty"));
        }
        let at = a.t().as_standard_layout().into_owned();
        Ok(Self { a, at, b })
    }

    pub fn a(&self) -> ArrayView2<'_, f64> {
        self.a.view()
    }

    pub fn b(&self) -> ArrayView1<'_, f64> {
        self.b.view()
    }

    pub fn n_samples(&self) -> usize {
        self.a.nrows()
    }

    pub(crate) fn value_unchecked(&self, x: ArrayView1<f64>) -> f64 {
        let r = self.a.dot(&x) - &self.b;
        r.dot(&r) / (2.0 * self.n_samples() as f64)
    }

    pub(crate) fn grad_unchecked(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let r = self.a.dot(&x) - &self.b;
        let mut g = self.at.dot(&r);
        g /= self.n_samples() as f64;
        g
    }
}

/// ADMM penalty `σ` and the proximal scalings `S_x = ζI − ÂᵀÂ`, `S_y = ηI`.
///
/// With these choices `S = σ(ÂᵀÂ + S_x) = σζI`, so every `S`-weighted
/// operation is a scalar rescaling of its Euclidean counterpart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingConfig {
    pub sigma: f64,
    pub zeta: f64,
    pub eta: f64,
}

/// Safety margin applied to `λ_max(ÂᵀÂ)` when checking or choosing `ζ`.
pub const ZETA_MARGIN: f64 = 1.01;

/// Outcome of checking `ζ` against the training data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingCheck {
    pub gram_lambda_max: f64,
    /// `S_x ⪰ 0` holds with the safety margin.
    pub sx_psd: bool,
}

impl ScalingConfig {
    pub fn new(sigma: f64, zeta: f64, eta: f64) -> Result<Self> {
        let c = Self { sigma, zeta, eta };
        c.validate()?;
        Ok(c)
    }

    /// `ζ = 1.01·λ_max(ÂᵀÂ)`, the smallest value that keeps `S_x` positive semidefinite with margin.
    pub fn compliant(sigma: f64, eta: f64, model: &LowerLevelModel) -> Result<Self> {
        let zeta = ZETA_MARGIN * model.gram_lambda_max();
        if zeta <= 0.0 {
            return Err(invalid("training matrix is zero; no compliant zeta exists"));
        }
        Self::new(sigma, zeta, eta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(invalid(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if !(self.zeta.is_finite() && self.zeta > 0.0) {
            return Err(invalid(format!("zeta must be > 0, got {}", self.zeta)));
        }
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(invalid(format!("eta must be >= 0, got {}", self.eta)));
        }
        Ok(())
    }

    pub fn check(&self, model: &LowerLevelModel) -> ScalingCheck {
        let lm = model.gram_lambda_max();
        ScalingCheck { gram_lambda_max: lm, sx_psd: self.zeta >= ZETA_MARGIN * lm }
    }

    /// The scalar `σζ` with `S = σζI`.
    pub fn s_scalar(&self) -> f64 {
        self.sigma * self.zeta
    }

    /// Applies `S = σ(ÂᵀÂ + S_x)` term by term, without using the scalar shortcut.
    pub fn apply_s(&self, model: &LowerLevelModel, x: ArrayView1<f64>) -> Array1<f64> {
        let gram_x = model.at().dot(&model.a().dot(&x));
        let sx_x = x.mapv(|v| self.zeta * v) - &gram_x;
        (gram_x + sx_x) * self.sigma
    }
}

/// `(1/2m_v)‖Ãx − b̃‖²`.
pub fn ul_value(x: ArrayView1<f64>, ul: &UpperLevelObjective) -> Result<f64> {
    check_dims("x length", x.len(), ul.a.ncols())?;
    Ok(ul.value_unchecked(x))
}

/// `(1/m_v)·Ãᵀ(Ãx − b̃)`.
pub fn ul_grad_x(x: ArrayView1<f64>, ul: &UpperLevelObjective) -> Result<Array1<f64>> {
    check_dims("x length", x.len(), ul.a.ncols())?;
    Ok(ul.grad_unchecked(x))
}

/// Lower-level objective value at `x`.
pub fn ll_objective(x: ArrayView1<f64>, model: &LowerLevelModel, lam: HyperParams) -> Result<f64> {
    check_dims("x length", x.len(), model.n_features())?;
    let r = model.a.dot(&x) - &model.b;
    let fit = match model.kind {
        ModelKind::ElasticNet => 0.5 * r.dot(&r),
        ModelKind::GeneralizedElasticNet => model.loss.norm(r.view()),
    };
    let l1: f64 = x.iter().map(|v| v.abs()).sum();
    Ok(fit + lam.lambda1 * l1 + 0.5 * lam.lambda2 * x.dot(&x))
}

/// Lipschitz constant of `∇F`, `λ_max(ÃᵀÃ)/m_v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzEstimate {
    pub value: f64,
    /// Set when `Ã` is zero and the estimate is therefore 0.
    pub degenerate: bool,
}

pub fn lipschitz_estimate(ul: &UpperLevelObjective) -> LipschitzEstimate {
    let e = gram_lambda_max(ul.a.view(), POWER_TOL, POWER_MAX_ITER);
    if e.value == 0.0 {
        log::warn!("validation matrix is zero; Lipschitz estimate is 0");
    }
    LipschitzEstimate { value: e.value / ul.n_samples() as f64, degenerate: e.value == 0.0 }
}

/// Largest admissible base step, `σζ/L_δ`. Infinite when `L_δ = 0`.
pub fn step_bound(scaling: &ScalingConfig, l_delta: f64) -> f64 {
    if l_delta > 0.0 {
        scaling.s_scalar() / l_delta
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(seed)
    }

    fn gaussian(r: &mut rand_chacha::ChaCha8Rng, m: usize, n: usize) -> Array2<f64> {
        Array2::from_shape_simple_fn((m, n), || StandardNormal.sample(r))
    }

    fn gvec(r: &mut rand_chacha::ChaCha8Rng, n: usize) -> Array1<f64> {
        Array1::from_shape_simple_fn(n, || StandardNormal.sample(r))
    }

    #[test]
    fn ul_value_examples() {
        let ul = UpperLevelObjective::new(Array2::eye(2), array![1.0, 1.0]).unwrap();
        assert_eq!(ul_value(array![0.0, 0.0].view(), &ul).unwrap(), 0.5);
        assert_eq!(ul_value(array![1.0, 1.0].view(), &ul).unwrap(), 0.0);
        assert!(ul_value(array![0.0].view(), &ul).is_err());
    }

    #[test]
    fn ul_value_matches_elementwise_sum() {
        let mut r = rng(1);
        let a = gaussian(&mut r, 7, 5);
        let b = gvec(&mut r, 7);
        let x = gvec(&mut r, 5);
        let mut acc = 0.0;
        for i in 0..7 {
            let mut ri = -b[i];
            for j in 0..5 {
                ri += a[[i, j]] * x[j];
            }
            acc += ri * ri;
        }
        let oracle = acc / 14.0;
        let ul = UpperLevelObjective::new(a, b).unwrap();
        assert!((ul_value(x.view(), &ul).unwrap() - oracle).abs() <= 1e-12 * oracle.max(1.0));
    }

    #[test]
    fn ul_grad_matches_central_differences() {
        let mut r = rng(2);
        for _ in 0..5 {
            let a = gaussian(&mut r, 9, 6);
            let b = gvec(&mut r, 9);
            let x = gvec(&mut r, 6);
            let ul = UpperLevelObjective::new(a, b).unwrap();
            let g = ul_grad_x(x.view(), &ul).unwrap();
            let h = 1e-6;
            let fd = Array1::from_shape_fn(6, |i| {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                (ul_value(xp.view(), &ul).unwrap() - ul_value(xm.view(), &ul).unwrap()) / (2.0 * h)
            });
            let rel = norm2((&g - &fd).view()) / norm2(g.view());
            assert!(rel <= 1e-5, "rel {rel}");
        }
    }

    #[test]
    fn ul_grad_stationary_and_translation() {
        let mut r = rng(3);
        let a = gaussian(&mut r, 8, 4);
        let x = gvec(&mut r, 4);
        let b = a.dot(&x);
        let ul = UpperLevelObjective::new(a.clone(), b.clone()).unwrap();
        assert!(ul_grad_x(x.view(), &ul).unwrap().iter().all(|v| v.abs() < 1e-12));
        let d = gvec(&mut r, 4);
        let shifted = UpperLevelObjective::new(a.clone(), &b + &a.dot(&d)).unwrap();
        let g = ul_grad_x((&x + &d).view(), &shifted).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn ll_objective_examples() {
        let a = array![[1.0, 2.0], [0.0, 1.0], [3.0, -1.0]];
        let lam = HyperParams::new(0.3, 0.7).unwrap();
        let zero_b = LowerLevelModel::elastic_net(a.clone(), Array1::zeros(3)).unwrap();
        assert_eq!(ll_objective(array![0.0, 0.0].view(), &zero_b, lam).unwrap(), 0.0);
        let b = array![1.0, -2.0, 2.0];
        let en = LowerLevelModel::elastic_net(a.clone(), b.clone()).unwrap();
        assert_eq!(ll_objective(array![0.0, 0.0].view(), &en, lam).unwrap(), 4.5);
        for (q, want) in [(LossNorm::L1, 5.0), (LossNorm::L2, 3.0), (LossNorm::Inf, 2.0)] {
            let g = LowerLevelModel::generalized(a.clone(), b.clone(), q).unwrap();
            assert_eq!(ll_objective(array![0.0, 0.0].view(), &g, lam).unwrap(), want);
        }
    }

    #[test]
    fn ll_objective_matches_term_by_term() {
        let mut r = rng(4);
        let a = gaussian(&mut r, 6, 3);
        let b = gvec(&mut r, 6);
        let x = gvec(&mut r, 3);
        let lam = HyperParams::new(0.2, 0.9).unwrap();
        let mut res = Vec::new();
        for i in 0..6 {
            res.push((0..3).map(|j| a[[i, j]] * x[j]).sum::<f64>() - b[i]);
        }
        let pen = 0.2 * x.iter().map(|v| v.abs()).sum::<f64>() + 0.45 * x.iter().map(|v| v * v).sum::<f64>();
        let en_oracle = 0.5 * res.iter().map(|v| v * v).sum::<f64>() + pen;
        let l1_oracle = res.iter().map(|v| v.abs()).sum::<f64>() + pen;
        let en = LowerLevelModel::elastic_net(a.clone(), b.clone()).unwrap();
        let g1 = LowerLevelModel::generalized(a, b, LossNorm::L1).unwrap();
        assert!((ll_objective(x.view(), &en, lam).unwrap() - en_oracle).abs() < 1e-12);
        assert!((ll_objective(x.view(), &g1, lam).unwrap() - l1_oracle).abs() < 1e-12);
    }

    #[test]
    fn lipschitz_examples() {
        let ul = UpperLevelObjective::new(Array2::eye(1), array![0.0]).unwrap();
        assert!((lipschitz_estimate(&ul).value - 1.0).abs() < 1e-12);
        let ul = UpperLevelObjective::new(array![[3.0, 0.0], [0.0, 1.0]], array![0.0, 0.0]).unwrap();
        assert!((lipschitz_estimate(&ul).value - 4.5).abs() < 1e-7);
        let ul = UpperLevelObjective::new(Array2::zeros((2, 2)), array![0.0, 0.0]).unwrap();
        let e = lipschitz_estimate(&ul);
        assert_eq!(e.value, 0.0);
        assert!(e.degenerate);
    }

    #[test]
    fn lipschitz_matches_eigensolver() {
        let mut r = rng(5);
        let a = gaussian(&mut r, 20, 30);
        let gram = a.t().dot(&a);
        let oracle = nalgebra::DMatrix::from_fn(30, 30, |i, j| gram[[i, j]]).symmetric_eigen().eigenvalues.max() / 20.0;
        let ul = UpperLevelObjective::new(a, Array1::zeros(20)).unwrap();
        let e = lipschitz_estimate(&ul).value;
        assert!((e - oracle).abs() <= 1e-6 * oracle);
    }

    #[test]
    fn scaling_s_is_scalar() {
        let mut r = rng(6);
        let a = gaussian(&mut r, 12, 8);
        let model = LowerLevelModel::elastic_net(a, gvec(&mut r, 12)).unwrap();
        let sc = ScalingConfig::compliant(0.5, 0.1, &model).unwrap();
        assert!(sc.check(&model).sx_psd);
        for _ in 0..10 {
            let x = gvec(&mut r, 8);
            let sx = sc.apply_s(&model, x.view());
            let scalar = x.mapv(|v| v * sc.s_scalar());
            assert!(norm2((&sx - &scalar).view()) <= 1e-12 * norm2(scalar.view()).max(1.0));
        }
        let paper = ScalingConfig::new(1e-4, 5e-10, 1e-10).unwrap();
        assert!(!paper.check(&model).sx_psd);
        assert!(ScalingConfig::new(0.0, 1.0, 0.0).is_err());
        assert!(ScalingConfig::new(1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn step_bound_formula() {
        let sc = ScalingConfig::new(2.0, 3.0, 0.0).unwrap();
        assert_eq!(step_bound(&sc, 4.0), 1.5);
        assert_eq!(step_bound(&sc, 0.0), f64::INFINITY);
    }

    #[test]
    fn loss_norm_parse() {
        assert_eq!("inf".parse::<LossNorm>().unwrap(), LossNorm::Inf);
        assert_eq!("1".parse::<LossNorm>().unwrap(), LossNorm::L1);
        assert!("3".parse::<LossNorm>().is_err());
    }

    proptest! {
        #[test]
        fn ll_objective_is_midpoint_convex(seed in 0u64..1000, l1 in 0.0f64..2.0, l2 in 0.0f64..2.0, q in 0usize..4) {
            let mut r = rng(seed);
            let a = gaussian(&mut r, 6, 4);
            let b = gvec(&mut r, 6);
            let model = match q {
                0 => LowerLevelModel::elastic_net(a, b).unwrap(),
                1 => LowerLevelModel::generalized(a, b, LossNorm::L1).unwrap(),
                2 => LowerLevelModel::generalized(a, b, LossNorm::L2).unwrap(),
                _ => LowerLevelModel::generalized(a, b, LossNorm::Inf).unwrap(),
            };
            let lam = HyperParams::new(l1, l2).unwrap();
            let u = gvec(&mut r, 4) * 3.0;
            let v = gvec(&mut r, 4) * 3.0;
            let mid = (&u + &v) * 0.5;
            let f = |x: &Array1<f64>| ll_objective(x.view(), &model, lam).unwrap();
            prop_assert!(f(&mid) <= 0.5 * (f(&u) + f(&v)) + 1e-10);
        }

        #[test]
        fn ul_value_nonnegative(x in prop::collection::vec(-1e3f64..1e3, 4), seed in 0u64..100) {
            let mut r = rng(seed);
            let ul = UpperLevelObjective::new(gaussian(&mut r, 5, 4), gvec(&mut r, 5)).unwrap();
            prop_assert!(ul_value(Array1::from(x).view(), &ul).unwrap() >= 0.0);
        }
    }
}
