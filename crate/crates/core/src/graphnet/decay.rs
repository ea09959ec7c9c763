use ndarray::{Array1, Array2};

use super::digraph::{check_b_strong_connectivity, GraphSequence};
use super::weights::{normalize_push_sum, WeightMatrix};
use crate::error::{Error, Result};
use crate::linalg::spectral_norm;

/// Distance of the normalized push-sum product `W^{ν:0}` from its rank-one
/// limit `J = (1/I)·1·(φ⁰)ᵀ`, for `ν = 0..horizon`, starting from `φ⁰ = 1`.
///
/// `weights[k]` is the mixing matrix used whenever slot `k` is active.
pub fn product_decay_curve(
    seq: &GraphSequence,
    weights: &[WeightMatrix],
    horizon: usize,
) -> Result<Vec<(usize, f64)>> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be ≥ 1".into()));
    }
    if weights.len() != seq.len() {
        return Err(Error::Shape(format!(
            "{} weight matrices for {} slots",
            weights.len(),
            seq.len()
        )));
    }
    let b = seq.window_b.unwrap_or(seq.len());
    if !check_b_strong_connectivity(seq, b) {
        log::warn!("graph sequence is not {b}-strongly connected; decay is not guaranteed");
    }
    let n = seq.num_nodes();
    let phi0 = Array1::<f64>::ones(n);
    let limit = Array2::from_elem((n, n), 1.0 / n as f64);
    let mut phi = phi0;
    let mut product = Array2::<f64>::eye(n);
    let mut curve = Vec::with_capacity(horizon);
    for nu in 0..horizon {
        let a = &weights[seq.slot_index(nu)];
        let (w, next) = normalize_push_sum(a, &phi)?;
        product = w.dot(&product);
        phi = next;
        curve.push((nu, spectral_norm((&product - &limit).view())));
    }
    Ok(curve)
}

/// Least-squares line through `(ν, ln d_ν)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Fits `ln d` against `ν` using only points with `d > floor`, so the
/// round-off plateau near machine precision does not enter the fit.
pub fn fit_log_linear(curve: &[(usize, f64)], floor: f64) -> Option<LogLinearFit> {
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .filter(|&&(_, d)| d > floor)
        .map(|&(nu, d)| (nu as f64, d.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Some(LogLinearFit {
        slope,
        intercept,
        r_squared,
        points: pts.len(),
    })
}
