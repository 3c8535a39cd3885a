//! Small dense helpers shared by the solvers.

use ndarray::{Array1, ArrayView1, ArrayView2};

pub fn norm2(x: ArrayView1<f64>) -> f64 {
    x.dot(&x).sqrt()
}

/// Largest eigenvalue of `AᵀA` found by power iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub const POWER_TOL: f64 = 1e-8;
pub const POWER_MAX_ITER: usize = 10_000;

/// Estimates `λ_max(AᵀA)` without forming the Gram matrix.
///
/// The Rayleigh quotient `‖Av‖²` is tracked and the loop stops once it
/// changes by less than `tol` relative to its current value.
pub fn gram_lambda_max(a: ArrayView2<f64>, tol: f64, max_iter: usize) -> PowerEstimate {
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 {
        return PowerEstimate { value: 0.0, iterations: 0, converged: true };
    }
    // A fixed, non-symmetric start vector keeps the result deterministic
    // and unlikely to be orthogonal to the top eigenvector.
    let mut v = Array1::from_shape_fn(n, |i| 1.0 + ((i * 7919) % 13) as f64 / 13.0);
    v /= norm2(v.view());
    let mut lambda = 0.0;
    for it in 1..=max_iter {
        let av = a.dot(&v);
        let w = a.t().dot(&av);
        let rq = av.dot(&av);
        let wn = norm2(w.view());
        if wn == 0.0 {
            return PowerEstimate { value: 0.0, iterations: it, converged: true };
        }
        v = w / wn;
        if it > 1 && (rq - lambda).abs() <= tol * rq {
            // One more Rayleigh quotient at the refreshed vector.
            let av = a.dot(&v);
            return PowerEstimate { value: av.dot(&av).max(rq), iterations: it, converged: true };
        }
        lambda = rq;
    }
    PowerEstimate { value: lambda, iterations: max_iter, converged: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn identity_and_diagonal() {
        let e = gram_lambda_max(Array2::<f64>::eye(4).view(), POWER_TOL, POWER_MAX_ITER);
        assert!((e.value - 1.0).abs() < 1e-12);
        let d = array![[3.0, 0.0], [0.0, 1.0]];
        let e = gram_lambda_max(d.view(), POWER_TOL, POWER_MAX_ITER);
        assert!((e.value - 9.0).abs() < 1e-7);
        assert!(e.converged);
    }

    #[test]
    fn zero_matrix_gives_zero() {
        let e = gram_lambda_max(Array2::<f64>::zeros((3, 2)).view(), POWER_TOL, POWER_MAX_ITER);
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn matches_dense_eigensolver() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let a = Array2::from_shape_simple_fn((20, 30), || StandardNormal.sample(&mut rng));
            let gram = a.t().dot(&a);
            let m = nalgebra::DMatrix::from_fn(30, 30, |i, j| gram[[i, j]]);
            let oracle = m.symmetric_eigen().eigenvalues.max();
            let e = gram_lambda_max(a.view(), POWER_TOL, POWER_MAX_ITER);
            assert!((e.value - oracle).abs() <= 1e-6 * oracle, "{} vs {oracle}", e.value);
        }
    }
}
