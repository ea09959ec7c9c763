//! Small dense helpers shared by the numerical modules.

use ndarray::{Array1, Array2, ArrayView2, Zip};

/// Relative tolerance and iteration cap for power iteration.
pub const POWER_REL_TOL: f64 = 1e-10;
pub const POWER_MAX_ITERS: usize = 10_000;

/// Deterministic start vector with no special alignment to `1` (which lies in
/// the null space of `W - J` for row-stochastic `W`).
fn start_vector(n: usize) -> Array1<f64> {
    Array1::from_shape_fn(n, |k| {
        let t = ((k as f64 + 1.0) * 0.754_877_666_246_692_7).fract();
        if k % 2 == 0 {
            0.25 + t
        } else {
            -0.25 - t
        }
    })
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix.
pub fn max_eigenvalue_psd(a: ArrayView2<'_, f64>) -> f64 {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    if n == 0 {
        return 0.0;
    }
    let mut v = start_vector(n);
    let norm = v.dot(&v).sqrt();
    v /= norm;
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let w = a.dot(&v);
        let next = v.dot(&w);
        let wn = w.dot(&w).sqrt();
        if wn == 0.0 || !wn.is_finite() {
            return next.max(0.0);
        }
        v = w / wn;
        if (next - lambda).abs() <= POWER_REL_TOL * next.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda.max(0.0)
}

/// Squared largest singular value, using the smaller Gram matrix.
pub fn sigma_max_sq(a: ArrayView2<'_, f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let gram = if a.nrows() >= a.ncols() {
        a.t().dot(&a)
    } else {
        a.dot(&a.t())
    };
    max_eigenvalue_psd(gram.view())
}

/// Spectral norm ‖A‖₂.
pub fn spectral_norm(a: ArrayView2<'_, f64>) -> f64 {
    sigma_max_sq(a).sqrt()
}

#[inline]
pub fn soft_threshold(x: f64, theta: f64) -> f64 {
    if x > theta {
        x - theta
    } else if x < -theta {
        x + theta
    } else {
        0.0
    }
}

pub fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Entrywise max norm ‖A‖_{∞,∞}.
pub fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// ‖A − B‖_{∞,∞}.
pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let mut m = 0.0_f64;
    Zip::from(a).and(b).for_each(|x, y| m = m.max((x - y).abs()));
    m
}

pub fn frobenius_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let mut s = 0.0;
    Zip::from(a).and(b).for_each(|x, y| s += (x - y) * (x - y));
    s.sqrt()
}

pub fn all_finite(a: &Array2<f64>) -> bool {
    a.iter().all(|v| v.is_finite())
}
