//! Stationarity merit functions, consensus error, tracking residual and
//! image-quality scores.

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{frobenius, max_abs_diff};
use crate::problems::{grad_d_from_moments, ProblemInstance};
use crate::subsolvers::{linearized_dictionary_step, solve_x_subproblem, InnerSolverConfig, SurrogateChoice};

/// Proximal weights of the reference maps used by the merit functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeritConfig {
    pub tau_hat_d: f64,
    pub tau_hat_x: f64,
}

impl Default for MeritConfig {
    fn default() -> Self {
        Self {
            tau_hat_d: 1.0,
            tau_hat_x: 1.0,
        }
    }
}

impl MeritConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau_hat_d > 0.0 && self.tau_hat_x > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter("merit proximal weights must be > 0".into()))
        }
    }
}

/// Unweighted mean of the local copies.
pub fn mean_dictionary(stack: &[&Array2<f64>]) -> Array2<f64> {
    let mut acc = Array2::zeros(stack[0].dim());
    for d in stack {
        acc += *d;
    }
    acc / stack.len() as f64
}

/// `max_i ‖D_(i) − D̄‖_{∞,∞}` with `D̄` the unweighted mean.
pub fn consensus_error(stack: &[&Array2<f64>]) -> f64 {
    assert!(!stack.is_empty(), "consensus error of an empty stack");
    let mean = mean_dictionary(stack);
    stack.iter().map(|d| max_abs_diff(d, &mean)).fold(0.0, f64::max)
}

/// `‖X̂(D̄, X) − X‖_{∞,∞}`, where `X̂` is one linearized code step per agent
/// with weight `τ̂_X`.
pub fn stationarity_x(p: &ProblemInstance, dbar: &Array2<f64>, x: &[&Array2<f64>], cfg: &MeritConfig) -> Result<f64> {
    cfg.validate()?;
    let mut worst: f64 = 0.0;
    for (i, xi) in x.iter().enumerate() {
        let xh = solve_x_subproblem(
            p,
            i,
            dbar,
            xi,
            cfg.tau_hat_x,
            SurrogateChoice::LINEARIZED,
            &InnerSolverConfig::default(),
        )?;
        worst = worst.max(max_abs_diff(&xh.value, xi));
    }
    Ok(worst)
}

/// Summed code moments `(Σ_j X_jX_jᵀ, Σ_j S_jX_jᵀ)`, accumulated in agent order.
pub fn summed_moments(p: &ProblemInstance, x: &[&Array2<f64>]) -> (Array2<f64>, Array2<f64>) {
    let (m, k) = p.dict_shape();
    let mut gram = Array2::zeros((k, k));
    let mut cross = Array2::zeros((m, k));
    for (s, xi) in p.shards.iter().zip(x) {
        gram += &xi.dot(&xi.t());
        cross += &s.dot(&xi.t());
    }
    (gram, cross)
}

/// `‖D̂(D̄, X) − D̄‖_{∞,∞}`, where `D̂` is the linearized proximal step on the
/// full gradient `Σ_i ∇f_i(D̄, X_i)` plus `G`, with weight `τ̂_D`.
pub fn stationarity_d(p: &ProblemInstance, dbar: &Array2<f64>, x: &[&Array2<f64>], cfg: &MeritConfig) -> Result<f64> {
    cfg.validate()?;
    let (gram, cross) = summed_moments(p, x);
    let g = grad_d_from_moments(dbar, &gram, &cross);
    let dh = linearized_dictionary_step(p, dbar, &g, cfg.tau_hat_d)?;
    Ok(max_abs_diff(&dh, dbar))
}

pub fn delta_max(delta_d: f64, delta_x: f64) -> f64 {
    delta_d.max(delta_x)
}

/// `max_i ‖I·Θ_(i) − Σ_j ∇f_j(D_(i), X_j)‖_F`.
pub fn tracking_residual(p: &ProblemInstance, dicts: &[&Array2<f64>], thetas: &[&Array2<f64>], x: &[&Array2<f64>]) -> f64 {
    let agents = p.agents() as f64;
    let (gram, cross) = summed_moments(p, x);
    dicts
        .iter()
        .zip(thetas)
        .map(|(d, th)| {
            let mut r = grad_d_from_moments(d, &gram, &cross);
            Zip::from(&mut r).and(*th).for_each(|r, &t| *r = agents * t - *r);
            frobenius(&r)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageQuality {
    /// Mean squared entry difference.
    pub mse: f64,
    pub snr_db: f64,
    pub psnr_db: f64,
    /// Set when the two images coincide; the dB values are then infinite.
    pub exact: bool,
}

/// Quality of `test` against the clean reference `clean`. `max_ref`
/// overrides the peak value (defaults to the largest entry of `clean`).
pub fn image_quality(clean: &Array2<f64>, test: &Array2<f64>, max_ref: Option<f64>) -> Result<ImageQuality> {
    if clean.dim() != test.dim() || clean.is_empty() {
        return Err(Error::Shape(format!(
            "image shapes {:?} and {:?}",
            clean.dim(),
            test.dim()
        )));
    }
    let mse = Zip::from(clean)
        .and(test)
        .fold(0.0, |a, &c, &t| a + (c - t) * (c - t))
        / clean.len() as f64;
    let peak = max_ref.unwrap_or_else(|| clean.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    if mse == 0.0 {
        return Ok(ImageQuality {
            mse,
            snr_db: f64::INFINITY,
            psnr_db: f64::INFINITY,
            exact: true,
        });
    }
    let rmse = mse.sqrt();
    Ok(ImageQuality {
        mse,
        snr_db: 20.0 * (frobenius(clean) / rmse).log10(),
        psnr_db: 20.0 * (peak / rmse).log10(),
        exact: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{grad_d, Family, Params};
    use crate::testutil::{gaussian, rng};
    use ndarray::array;

    fn refs(v: &[Array2<f64>]) -> Vec<&Array2<f64>> {
        v.iter().collect()
    }

    #[test]
    fn consensus_examples() {
        let a = array![[1.0, 2.0]];
        assert_eq!(consensus_error(&[&a, &a, &a]), 0.0);
        assert_eq!(consensus_error(&[&array![[0.0]], &array![[2.0]]]), 1.0);
    }

    #[test]
    fn consensus_matches_naive_loop() {
        let mut r = rng(1);
        let stack: Vec<_> = (0..5).map(|_| gaussian(&mut r, 3, 4)).collect();
        let mut mean = Array2::<f64>::zeros((3, 4));
        for d in &stack {
            for a in 0..3 {
                for b in 0..4 {
                    mean[[a, b]] += d[[a, b]];
                }
            }
        }
        mean /= 5.0;
        let mut naive: f64 = 0.0;
        for d in &stack {
            for a in 0..3 {
                for b in 0..4 {
                    naive = naive.max((d[[a, b]] - mean[[a, b]]).abs());
                }
            }
        }
        assert_eq!(consensus_error(&refs(&stack)), naive);
        let mut rev = stack.clone();
        rev.reverse();
        assert!((consensus_error(&refs(&rev)) - naive).abs() < 1e-15);
    }

    fn instance(seed: u64, agents: usize) -> ProblemInstance {
        let mut r = rng(seed);
        let shards = (0..agents).map(|_| gaussian(&mut r, 4, 5)).collect();
        ProblemInstance::new(Family::ElasticNetDl, shards, 3, Params::elastic_net(0.1, 0.5, 1.0)).unwrap()
    }

    #[test]
    fn delta_x_zero_at_origin_without_data() {
        let p = ProblemInstance::new(
            Family::ElasticNetDl,
            vec![Array2::zeros((2, 3))],
            2,
            Params::elastic_net(0.0, 1.0, 1.0),
        )
        .unwrap();
        let x = Array2::zeros((2, 3));
        let d = Array2::zeros((2, 2));
        assert_eq!(stationarity_x(&p, &d, &[&x], &MeritConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn delta_x_positive_at_random_point() {
        let p = instance(2, 2);
        let mut r = rng(3);
        let d = p.project_dictionary(&gaussian(&mut r, 4, 3));
        let x: Vec<_> = (0..2).map(|_| gaussian(&mut r, 3, 5)).collect();
        assert!(stationarity_x(&p, &d, &refs(&x), &MeritConfig::default()).unwrap() > 0.0);
        assert!(stationarity_d(&p, &d, &refs(&x), &MeritConfig::default()).unwrap() > 0.0);
    }

    #[test]
    fn delta_x_vanishes_at_code_minimizer() {
        // coordinate-descent minimizer of the 1-agent code problem
        let p = instance(4, 1);
        let d = p.project_dictionary(&gaussian(&mut rng(5), 4, 3));
        let s = &p.shards[0];
        let (lambda, mu) = (p.params.lambda, p.params.mu);
        let mut x = Array2::<f64>::zeros((3, 5));
        let col_sq: Vec<f64> = d.columns().into_iter().map(|c| c.dot(&c)).collect();
        for _ in 0..10_000 {
            let mut change: f64 = 0.0;
            for n in 0..5 {
                for k in 0..3 {
                    let resid = &s.column(n) - &d.dot(&x.column(n));
                    let rho = d.column(k).dot(&resid) + col_sq[k] * x[[k, n]];
                    let z = crate::linalg::soft_threshold(rho, lambda) / (col_sq[k] + mu);
                    change = change.max((z - x[[k, n]]).abs());
                    x[[k, n]] = z;
                }
            }
            if change < 1e-13 {
                break;
            }
        }
        assert!(stationarity_x(&p, &d, &[&x], &MeritConfig::default()).unwrap() <= 1e-6);
    }

    #[test]
    fn delta_x_consistent_with_update_map() {
        let p = instance(6, 2);
        let mut r = rng(7);
        let d = p.project_dictionary(&gaussian(&mut r, 4, 3));
        let x0: Vec<_> = (0..2).map(|_| gaussian(&mut r, 3, 5)).collect();
        // iterate the update map to its fixed point, agent by agent
        let mut x = x0;
        for _ in 0..5_000 {
            for (i, xi) in x.iter_mut().enumerate() {
                *xi = solve_x_subproblem(&p, i, &d, xi, 1.0, SurrogateChoice::LINEARIZED, &InnerSolverConfig::default())
                    .unwrap()
                    .value;
            }
        }
        assert!(stationarity_x(&p, &d, &refs(&x), &MeritConfig::default()).unwrap() <= 1e-10);
    }

    #[test]
    fn delta_d_examples() {
        // zero gradient: S = 0 and X = 0
        let p = ProblemInstance::new(
            Family::ElasticNetDl,
            vec![Array2::zeros((2, 3))],
            2,
            Params::elastic_net(0.1, 1.0, 1.0),
        )
        .unwrap();
        let d = array![[0.1, 0.2], [0.3, -0.1]];
        let x = Array2::zeros((2, 3));
        assert_eq!(stationarity_d(&p, &d, &[&x], &MeritConfig::default()).unwrap(), 0.0);

        // 1×1: D̄ = 1, ∇F = DX² − SX = 1 − 4 = −3 with X = 1, S = 4
        let p = ProblemInstance::new(
            Family::ElasticNetDl,
            vec![array![[4.0]]],
            1,
            Params::elastic_net(0.1, 1.0, 1.0),
        )
        .unwrap();
        let x = array![[1.0]];
        assert_eq!(stationarity_d(&p, &array![[1.0]], &[&x], &MeritConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn delta_d_matches_projected_gradient_oracle() {
        for family in [Family::ElasticNetDl, Family::SparseSvd, Family::Nnsc] {
            let mut r = rng(8);
            let shards: Vec<_> = (0..3).map(|_| gaussian(&mut r, 4, 5)).collect();
            let mut params = Params::elastic_net(0.1, 0.5, 1.0);
            if family == Family::SparseSvd {
                params.lambda_d = 0.2;
                params.mu_d = 0.4;
            }
            let p = ProblemInstance::new(family, shards, 3, params).unwrap();
            let d = p.project_dictionary(&gaussian(&mut r, 4, 3));
            let x: Vec<_> = (0..3).map(|_| p.code_set().projected(&gaussian(&mut r, 3, 5))).collect();
            let mut g = Array2::zeros((4, 3));
            for (s, xi) in p.shards.iter().zip(&x) {
                g += &grad_d(&d, xi, s);
            }
            // projected gradient on ½‖Z − D̄‖² + ⟨g, Z⟩ + G(Z), unit step
            let pen = p.dict_penalty();
            let set = p.dict_set();
            let mut z = d.clone();
            for _ in 0..100_000 {
                let mut v = &z - &(&(&z - &d) + &g) * 0.5;
                pen.prox_inplace(&mut v, 0.5, set.is_nonneg());
                set.project(&mut v);
                let ch = max_abs_diff(&v, &z);
                z = v;
                if ch < 1e-13 {
                    break;
                }
            }
            let oracle = max_abs_diff(&z, &d);
            let got = stationarity_d(&p, &d, &refs(&x), &MeritConfig::default()).unwrap();
            assert!((got - oracle).abs() < 1e-6, "{family:?}: {got} vs {oracle}");
        }
    }

    #[test]
    fn delta_max_examples() {
        assert_eq!(delta_max(0.0, 0.0), 0.0);
        assert_eq!(delta_max(1.0, 2.0), 2.0);
        assert_eq!(delta_max(3.0, 1.0), 3.0);
    }

    #[test]
    fn tracking_residual_single_agent_is_zero() {
        let p = instance(9, 1);
        let mut r = rng(10);
        let d = gaussian(&mut r, 4, 3);
        let x = gaussian(&mut r, 3, 5);
        let theta = grad_d(&d, &x, &p.shards[0]);
        assert_eq!(tracking_residual(&p, &[&d], &[&theta], &[&x]), 0.0);
    }

    #[test]
    fn tracking_residual_matches_naive_loop() {
        let p = instance(11, 3);
        let mut r = rng(12);
        let d = gaussian(&mut r, 4, 3);
        let x: Vec<_> = (0..3).map(|_| gaussian(&mut r, 3, 5)).collect();
        let thetas: Vec<_> = (0..3).map(|i| grad_d(&d, &x[i], &p.shards[i])).collect();
        let dicts = vec![&d, &d, &d];
        let mut naive: f64 = 0.0;
        for th in &thetas {
            let mut sum = Array2::zeros((4, 3));
            for j in 0..3 {
                sum += &grad_d(&d, &x[j], &p.shards[j]);
            }
            naive = naive.max(frobenius(&(th * 3.0 - sum)));
        }
        let got = tracking_residual(&p, &dicts, &refs(&thetas), &refs(&x));
        assert!((got - naive).abs() < 1e-10 * naive.max(1.0));
    }

    #[test]
    fn image_quality_examples() {
        let a = Array2::ones((2, 2));
        assert!(image_quality(&a, &a, None).unwrap().exact);
        let q = image_quality(&a, &(&a + 1.0), None).unwrap();
        assert_eq!(q.mse, 1.0);
        assert_eq!(q.psnr_db, 0.0);
        assert!((q.snr_db - 20.0 * 2f64.log10()).abs() < 1e-12);
        assert!(image_quality(&a, &Array2::ones((1, 2)), None).is_err());
    }

    #[test]
    fn image_quality_matches_naive() {
        let mut r = rng(13);
        let a = gaussian(&mut r, 6, 7);
        let b = gaussian(&mut r, 6, 7);
        let mut sq = 0.0;
        let mut energy = 0.0;
        let mut peak = f64::NEG_INFINITY;
        for i in 0..6 {
            for j in 0..7 {
                sq += (a[[i, j]] - b[[i, j]]).powi(2);
                energy += a[[i, j]].powi(2);
                peak = peak.max(a[[i, j]]);
            }
        }
        let mse = sq / 42.0;
        let q = image_quality(&a, &b, None).unwrap();
        assert!((q.mse - mse).abs() < 1e-12);
        assert!((q.snr_db - 20.0 * (energy.sqrt() / mse.sqrt()).log10()).abs() < 1e-12);
        assert!((q.psnr_db - 20.0 * (peak / mse.sqrt()).log10()).abs() < 1e-12);
    }
}
