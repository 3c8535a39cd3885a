//! Closed-form proximal operators and Euclidean projections.
//!
//! Every public function validates that its inputs are finite and returns a
//! fresh vector. The `*_inplace` helpers skip validation and are meant for
//! solver hot loops that have already checked their data.
//!
//! The operators come in dual pairs. For a norm `f = t‖·‖_q` the Moreau
//! decomposition reads `prox_f(x) + Π_{B_p(t)}(x) = x` with `1/p + 1/q = 1`:
//!
//! | prox        | projection        |
//! |-------------|-------------------|
//! | `prox_l1`   | `proj_linf_ball`  |
//! | `prox_l2`   | `proj_l2_ball`    |
//! | `prox_linf` | `proj_l1_ball`    |
//!
//! ```
//! use hyperselect::prox::{prox_l1, proj_linf_ball};
//! use ndarray::array;
//!
//! let x = array![3.0, -0.5, 1.0];
//! let p = prox_l1(x.view(), 1.0).unwrap();
//! let q = proj_linf_ball(x.view(), 1.0).unwrap();
//! assert_eq!(p, array![2.0, 0.0, 0.0]);
//! assert_eq!(&p + &q, x);
//! ```

use ndarray::{Array1, ArrayView1, ArrayViewMut1, Zip};

use crate::error::{check_dims, invalid, Result};

fn check_finite(x: ArrayView1<f64>) -> Result<()> {
    match x.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(i) => Err(invalid(format!("non-finite entry {} at index {i}", x[i]))),
    }
}

fn check_radius(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("radius/threshold must be finite and >= 0, got {t}")))
    }
}

#[inline]
pub(crate) fn soft(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Soft-thresholds `x` in place.
pub fn soft_threshold_inplace(mut x: ArrayViewMut1<f64>, t: f64) {
    x.mapv_inplace(|v| soft(v, t));
}

/// `sign(xᵢ)·max(|xᵢ| − t, 0)`, the proximal map of `t‖·‖₁`.
///
/// Entries with `|xᵢ| = t` map to zero.
pub fn prox_l1(x: ArrayView1<f64>, t: f64) -> Result<Array1<f64>> {
    check_finite(x)?;
    check_radius(t)?;
    Ok(x.mapv(|v| soft(v, t)))
}

/// Componentwise clamp onto `[−t, t]`.
pub fn proj_linf_ball(x: ArrayView1<f64>, t: f64) -> Result<Array1<f64>> {
    check_finite(x)?;
    check_radius(t)?;
    Ok(x.mapv(|v| v.clamp(-t, t)))
}

fn norm2(x: ArrayView1<f64>) -> f64 {
    x.dot(&x).sqrt()
}

/// Proximal map of `t‖·‖₂` (block soft-threshold).
pub fn prox_l2(x: ArrayView1<f64>, t: f64) -> Result<Array1<f64>> {
    check_finite(x)?;
    check_radius(t)?;
    let mut out = x.to_owned();
    prox_l2_inplace(out.view_mut(), t);
    Ok(out)
}

pub(crate) fn prox_l2_inplace(mut x: ArrayViewMut1<f64>, t: f64) {
    let n = norm2(x.view());
    if n <= t {
        x.fill(0.0);
    } else {
        let scale = 1.0 - t / n;
        x.mapv_inplace(|v| v * scale);
    }
}

/// Radial projection onto the ℓ2 ball of radius `t`. The zero vector maps to itself.
pub fn proj_l2_ball(x: ArrayView1<f64>, t: f64) -> Result<Array1<f64>> {
    check_finite(x)?;
    check_radius(t)?;
    let n = norm2(x);
    if n <= t {
        Ok(x.to_owned())
    } else {
        Ok(x.mapv(|v| v * (t / n)))
    }
}

/// Euclidean projection onto the probability simplex `{x ≥ 0, Σxᵢ = 1}`.
///
/// Sorts descending, finds the largest `k` with
/// `x_(k) − (Σ_{i≤k} x_(i) − 1)/k > 0`, then subtracts that threshold and
/// clips at zero.
pub fn proj_simplex(x: ArrayView1<f64>) -> Result<Array1<f64>> {
    check_finite(x)?;
    if x.is_empty() {
        return Err(invalid("simplex projection needs at least one coordinate"));
    }
    let theta = simplex_threshold(x.iter().copied(), 1.0);
    Ok(x.mapv(|v| (v - theta).max(0.0)))
}

fn simplex_threshold(values: impl Iterator<Item = f64>, radius: f64) -> f64 {
    let mut u: Vec<f64> = values.collect();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cumsum += ui;
        let candidate = (cumsum - radius) / (i + 1) as f64;
        if ui - candidate > 0.0 {
            theta = candidate;
        }
    }
    theta
}

/// Euclidean projection onto the ℓ1 ball of radius `t`.
///
/// Points inside the ball are returned unchanged. Otherwise the magnitudes
/// are projected onto the scaled simplex and the signs restored. A zero
/// radius collapses everything to the origin.
pub fn proj_l1_ball(x: ArrayView1<f64>, t: f64) -> Result<Array1<f64>> {
    check_finite(x)?;
    check_radius(t)?;
    Ok(proj_l1_ball_unchecked(x, t))
}

fn proj_l1_ball_unchecked(x: ArrayView1<f64>, t: f64) -> Array1<f64> {
    let l1: f64 = x.iter().map(|v| v.abs()).sum();
    if l1 <= t {
        return x.to_owned();
    }
    if t == 0.0 {
        return Array1::zeros(x.len());
    }
    // t·P·Π_Δ(P·x/t) with P = diag(sign x); the simplex step is done on |x|/t.
    let theta = simplex_threshold(x.iter().map(|v| v.abs() / t), 1.0);
    x.mapv(|v| v.signum() * t * (v.abs() / t - theta).max(0.0))
}

/// Proximal map of `t‖·‖∞`, computed as `x − Π_{B₁(t)}(x)`.
pub fn prox_linf(x: ArrayView1<f64>, t: f64) -> Result<Array1<f64>> {
    check_finite(x)?;
    check_radius(t)?;
    let mut out = x.to_owned();
    prox_linf_inplace(out.view_mut(), t);
    Ok(out)
}

pub(crate) fn prox_linf_inplace(mut x: ArrayViewMut1<f64>, t: f64) {
    let l1: f64 = x.iter().map(|v| v.abs()).sum();
    if l1 <= t {
        x.fill(0.0);
        return;
    }
    let p = proj_l1_ball_unchecked(x.view(), t);
    x -= &p;
}

/// Proximal map of `τ₁‖·‖₁ + (τ₂/2)‖·‖₂²`: `soft(vᵢ, τ₁)/(1 + τ₂)`.
pub fn prox_en_composite(v: ArrayView1<f64>, tau1: f64, tau2: f64) -> Result<Array1<f64>> {
    check_finite(v)?;
    check_radius(tau1)?;
    check_radius(tau2)?;
    let denom = 1.0 + tau2;
    Ok(v.mapv(|vi| soft(vi, tau1) / denom))
}

/// Componentwise clamp of `x` to `[loᵢ, hiᵢ]`.
pub fn proj_box(x: ArrayView1<f64>, lo: ArrayView1<f64>, hi: ArrayView1<f64>) -> Result<Array1<f64>> {
    check_finite(x)?;
    check_dims("lower bound", lo.len(), x.len())?;
    check_dims("upper bound", hi.len(), x.len())?;
    if let Some(i) = lo.iter().zip(hi.iter()).position(|(l, h)| !(l <= h)) {
        return Err(invalid(format!("box has lo > hi at index {i}")));
    }
    let mut out = x.to_owned();
    Zip::from(&mut out).and(&lo).and(&hi).for_each(|v, &l, &h| *v = v.clamp(l, h));
    Ok(out)
}
