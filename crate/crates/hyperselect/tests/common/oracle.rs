//! Brute-force minimizers used as independent test oracles.

pub struct GridMin {
    pub point: Vec<f64>,
    pub value: f64,
}

/// Coarse-to-fine grid minimization over a box.
///
/// Evaluates a full tensor grid with `pts` points per axis, then shrinks the
/// box around the incumbent by a factor of 4 and repeats until the spacing
/// drops below `step`. Infinite values mark infeasible points. Exact for the
/// convex objectives used in the tests up to the final spacing.
pub fn grid_min(f: &dyn Fn(&[f64]) -> f64, bounds: &[(f64, f64)], step: f64) -> GridMin {
    let n = bounds.len();
    let pts: usize = match n {
        1 => 401,
        2 => 61,
        3 => 21,
        _ => 11,
    };
    let mut lo: Vec<f64> = bounds.iter().map(|b| b.0).collect();
    let mut hi: Vec<f64> = bounds.iter().map(|b| b.1).collect();
    let mut best = GridMin { point: lo.clone(), value: f64::INFINITY };
    let mut y = vec![0.0; n];
    loop {
        let h: Vec<f64> = (0..n).map(|i| (hi[i] - lo[i]) / (pts - 1) as f64).collect();
        let total = pts.pow(n as u32);
        for idx in 0..total {
            let mut r = idx;
            for i in 0..n {
                y[i] = lo[i] + (r % pts) as f64 * h[i];
                r /= pts;
            }
            let v = f(&y);
            if v < best.value {
                best.value = v;
                best.point.copy_from_slice(&y);
            }
        }
        let hmax = h.iter().cloned().fold(0.0, f64::max);
        if hmax <= step {
            return best;
        }
        for i in 0..n {
            let half = 2.0 * h[i];
            lo[i] = (best.point[i] - half).max(bounds[i].0);
            hi[i] = (best.point[i] + half).min(bounds[i].1);
        }
    }
}
