//! Bilevel hyperparameter selection for elastic-net style regression.
//!
//! The regularization weights `λ = (λ₁, λ₂)` of an elastic net (or of a
//! generalized elastic net with an `ℓ_q` data-fit term) are chosen to minimize
//! the validation error of the fitted coefficients. [`admm_bda`] solves this
//! bilevel problem directly by interleaving linearized ADMM sweeps on the
//! training problem with gradient steps on the validation loss. [`baselines`]
//! provides grid search, random search and a proximal-gradient variant for
//! comparison, and [`harness`] runs repeated experiments and writes CSV.
//!
//! ```
//! use hyperselect::data::{synth_generate, SynthConfig};
//! use hyperselect::harness::{run_method, Method, ModelSpec};
//! use hyperselect::presets::Preset;
//! use hyperselect::baselines::SearchSpace;
//!
//! let ds = synth_generate(&SynthConfig { n: 40, m_train: 20, m_val: 10, m_test: 10, k: 3, ..Default::default() })?;
//! let mut cfg = Preset::EnSynth.solver_config();
//! cfg.max_outer = 3;
//! let rec = run_method(Method::AdmmBda, &ModelSpec::elastic_net(), &ds, &cfg, &SearchSpace::default(), 30, 0)?;
//! assert_eq!(rec.method, "admm_bda");
//! # Ok::<(), hyperselect::Error>(())
//! ```

pub mod admm_bda;
pub mod baselines;
pub mod data;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod presets;
pub mod problems;
pub mod prox;

pub use error::{Error, Result};

#[cfg(test)]
#[path = "../tests/common/oracle.rs"]
mod oracle;
