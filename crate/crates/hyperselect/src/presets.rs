//! Bundled parameter settings for the standard experiments.
//!
//! Every preset uses `ζ = 5e−10`, `η = 1e−10` and `α = 1e−3`, clamps an
//! oversized upper step and raises the `λ₂` floor when `S_x` is indefinite.
//! The inner budget grows as `σ` shrinks, since the lower ADMM moves at a
//! rate proportional to `σ`: `J = 500·(1e−4/σ)`, capped at 5000.

use std::fmt;
use std::str::FromStr;

use crate::admm_bda::{BudgetSchedule, SolverConfig, StepPolicy};
use crate::data::NoiseKind;
use crate::error::{invalid, Error, Result};
use crate::harness::ModelSpec;
use crate::problems::{LossNorm, ScalingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    EnSynth,
    GenSynth(LossNorm),
    EnReal,
    GenReal(LossNorm),
}

pub const ZETA: f64 = 5e-10;
pub const ETA: f64 = 1e-10;
pub const BASE_BUDGET: usize = 500;
pub const MAX_BUDGET: usize = 5000;

impl Preset {
    pub const ALL: [Preset; 8] = [
        Preset::EnSynth,
        Preset::GenSynth(LossNorm::L1),
        Preset::GenSynth(LossNorm::L2),
        Preset::GenSynth(LossNorm::Inf),
        Preset::EnReal,
        Preset::GenReal(LossNorm::L1),
        Preset::GenReal(LossNorm::L2),
        Preset::GenReal(LossNorm::Inf),
    ];

    /// The synthetic preset for a model.
    pub fn synthetic(model: &ModelSpec) -> Preset {
        match model.q {
            None => Preset::EnSynth,
            Some(q) => Preset::GenSynth(q),
        }
    }

    /// The real-data preset for a model.
    pub fn real(model: &ModelSpec) -> Preset {
        match model.q {
            None => Preset::EnReal,
            Some(q) => Preset::GenReal(q),
        }
    }

    pub fn model(self) -> ModelSpec {
        match self {
            Preset::EnSynth | Preset::EnReal => ModelSpec::elastic_net(),
            Preset::GenSynth(q) | Preset::GenReal(q) => ModelSpec::generalized(q),
        }
    }

    pub fn is_real(self) -> bool {
        matches!(self, Preset::EnReal | Preset::GenReal(_))
    }

    /// Noise kind of the synthetic experiment; `None` for real data.
    pub fn noise(self) -> Option<NoiseKind> {
        match self {
            Preset::EnSynth | Preset::GenSynth(LossNorm::L2) => Some(NoiseKind::Gaussian),
            Preset::GenSynth(LossNorm::L1) => Some(NoiseKind::Laplace),
            Preset::GenSynth(LossNorm::Inf) => Some(NoiseKind::Uniform),
            Preset::EnReal | Preset::GenReal(_) => None,
        }
    }

    /// Random-search budget used alongside this preset.
    pub fn random_points(self) -> usize {
        match self {
            Preset::EnSynth | Preset::EnReal => 30,
            Preset::GenSynth(_) | Preset::GenReal(_) => 50,
        }
    }

    /// `(σ, s, μ)`.
    pub fn sigma_s_mu(self) -> (f64, f64, f64) {
        match self {
            Preset::EnSynth => (1e-4, 1.0, 0.7),
            Preset::GenSynth(LossNorm::Inf) => (1e-5, 1.0, 0.5),
            Preset::GenSynth(_) => (1e-4, 1.0, 0.5),
            Preset::EnReal => (1e-5, 1e-2, 0.9),
            Preset::GenReal(LossNorm::Inf) => (1e-7, 1e-4, 0.9),
            Preset::GenReal(_) => (1e-6, 1e-4, 0.9),
        }
    }

    pub fn inner_budget(self) -> usize {
        let (sigma, _, _) = self.sigma_s_mu();
        ((BASE_BUDGET as f64 * 1e-4 / sigma).round() as usize).clamp(BASE_BUDGET, MAX_BUDGET)
    }

    pub fn solver_config(self) -> SolverConfig {
        let (sigma, s, mu) = self.sigma_s_mu();
        SolverConfig {
            scaling: ScalingConfig { sigma, zeta: ZETA, eta: ETA },
            mu,
            s,
            alpha: 1e-3,
            budget: BudgetSchedule::Constant(self.inner_budget()),
            step_policy: StepPolicy::Clamp,
            stabilize_lambda2: true,
            ..SolverConfig::default()
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preset::EnSynth => f.write_str("en-synth"),
            Preset::GenSynth(q) => write!(f, "gen-synth-q{q}"),
            Preset::EnReal => f.write_str("en-real"),
            Preset::GenReal(q) => write!(f, "gen-real-q{q}"),
        }
    }
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.to_string() == s)
            .ok_or_else(|| invalid(format!("unknown preset {s:?}")))
    }
}
