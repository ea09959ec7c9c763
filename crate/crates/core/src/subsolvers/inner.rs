use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, frobenius_diff, max_abs_diff};
use crate::problems::{ElasticNet, FeasibleSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InnerStep {
    /// Forward step on the smooth part, prox on the elastic net, projection.
    #[default]
    Proximal,
    /// Plain projected subgradient; the subgradient of |·| at 0 is taken as 0.
    Subgradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InnerStop {
    /// ∞-norm distance between the iterate and one unit prox-linear step.
    #[default]
    FixedPoint,
    /// Frobenius length of the last move.
    IterateChange,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InnerSolverConfig {
    pub step0: f64,
    pub eps_inner: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub step: InnerStep,
    pub stop: InnerStop,
}

impl Default for InnerSolverConfig {
    fn default() -> Self {
        Self {
            step0: 0.9,
            eps_inner: 1e-3,
            tol: 1e-6,
            max_iters: 500,
            step: InnerStep::Proximal,
            stop: InnerStop::FixedPoint,
        }
    }
}

impl InnerSolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step0 > 0.0 && self.step0 <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "inner step0 {} outside (0, 1]",
                self.step0
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter("inner tolerance must be > 0".into()));
        }
        if !(self.eps_inner > 0.0 && self.eps_inner * self.step0 < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "inner contraction {} outside (0, 1/step0)",
                self.eps_inner
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("inner max_iters must be ≥ 1".into()));
        }
        Ok(())
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iters(mut self, n: usize) -> Self {
        self.max_iters = n;
        self
    }
}

/// `min s(z) + penalty(z)` over `set`, with `s` smooth and `lipschitz` an
/// upper bound on the Lipschitz constant of `∇s`.
pub struct CompositeProblem<'a> {
    pub grad: &'a (dyn Fn(&Array2<f64>) -> Array2<f64> + Sync),
    pub lipschitz: f64,
    pub penalty: ElasticNet,
    pub set: FeasibleSet,
}

impl CompositeProblem<'_> {
    /// `P_set[prox_{t·penalty}(v)]`, exact for every set used here since all of
    /// them commute with entrywise soft-thresholding.
    fn prox_project(&self, v: &mut Array2<f64>, t: f64) {
        self.penalty.prox_inplace(v, t, self.set.is_nonneg());
        self.set.project(v);
    }

    /// One unit-step prox-linear map from `z`, given `g = ∇s(z)`.
    pub fn prox_linear(&self, z: &Array2<f64>, g: &Array2<f64>) -> Array2<f64> {
        let mut v = z - g;
        self.prox_project(&mut v, 1.0);
        v
    }

    /// Fixed-point residual `‖z − T(z)‖_{∞,∞}`.
    pub fn residual(&self, z: &Array2<f64>) -> f64 {
        let g = (self.grad)(z);
        max_abs_diff(z, &self.prox_linear(z, &g))
    }
}

#[derive(Debug, Clone)]
pub struct InnerOutcome {
    pub solution: Array2<f64>,
    pub iters: usize,
    /// Residual of the returned iterate under the configured stop rule.
    pub residual: f64,
    pub converged: bool,
}

/// Diminishing-step inner solver `z⁺ = P[z − (γʳ/L)·gʳ]`, with
/// `γʳ = γʳ⁻¹(1 − ε·γʳ⁻¹)`. With [`InnerStep::Proximal`] the elastic-net part
/// of `gʳ` enters through its prox.
///
/// Hitting `max_iters` is not an error: the best iterate seen is returned
/// with `converged = false`.
pub fn inner_projected_subgradient(
    problem: &CompositeProblem<'_>,
    warm_start: &Array2<f64>,
    cfg: &InnerSolverConfig,
) -> Result<InnerOutcome> {
    cfg.validate()?;
    if !all_finite(warm_start) {
        return Err(Error::InvalidParameter("non-finite warm start".into()));
    }
    let lip = if problem.lipschitz.is_finite() && problem.lipschitz > 1e-12 {
        problem.lipschitz
    } else {
        1e-12
    };
    let mut z = problem.set.projected(warm_start);
    let mut gamma = cfg.step0;
    let mut best: Option<(f64, Array2<f64>)> = None;
    for r in 0..cfg.max_iters {
        let g = (problem.grad)(&z);
        if !all_finite(&g) {
            return Err(Error::InvalidParameter("non-finite gradient in inner solver".into()));
        }
        if cfg.stop == InnerStop::FixedPoint {
            let j = max_abs_diff(&z, &problem.prox_linear(&z, &g));
            if j <= cfg.tol {
                return Ok(InnerOutcome {
                    solution: z,
                    iters: r,
                    residual: j,
                    converged: true,
                });
            }
            if best.as_ref().is_none_or(|(b, _)| j < *b) {
                best = Some((j, z.clone()));
            }
        }
        let t = gamma / lip;
        let next = match cfg.step {
            InnerStep::Proximal => {
                let mut v = z.clone();
                Zip::from(&mut v).and(&g).for_each(|a, &b| *a -= t * b);
                problem.prox_project(&mut v, t);
                v
            }
            InnerStep::Subgradient => {
                let pen = problem.penalty;
                let mut v = z.clone();
                Zip::from(&mut v).and(&g).for_each(|a, &b| {
                    let sg = if *a > 0.0 {
                        pen.l1
                    } else if *a < 0.0 {
                        -pen.l1
                    } else {
                        0.0
                    };
                    *a -= t * (b + sg + pen.l2 * *a);
                });
                problem.set.project(&mut v);
                v
            }
        };
        if cfg.stop == InnerStop::IterateChange {
            let step = frobenius_diff(&next, &z);
            z = next;
            if step <= cfg.tol {
                return Ok(InnerOutcome {
                    solution: z,
                    iters: r + 1,
                    residual: step,
                    converged: true,
                });
            }
            best = Some((step, z.clone()));
        } else {
            z = next;
        }
        gamma *= 1.0 - cfg.eps_inner * gamma;
    }
    let (residual, solution) = if cfg.stop == InnerStop::FixedPoint {
        let j = problem.residual(&z);
        match best {
            Some((b, bz)) if b < j => (b, bz),
            _ => (j, z),
        }
    } else {
        best.expect("at least one iteration ran")
    };
    Ok(InnerOutcome {
        solution,
        iters: cfg.max_iters,
        residual,
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn quadratic(c: Array2<f64>) -> impl Fn(&Array2<f64>) -> Array2<f64> + Sync {
        move |z: &Array2<f64>| z - &c
    }

    #[test]
    fn unconstrained_quadratic_reaches_center() {
        let c = array![[1.5, -2.0]];
        let grad = quadratic(c.clone());
        let prob = CompositeProblem {
            grad: &grad,
            lipschitz: 1.0,
            penalty: ElasticNet::ZERO,
            set: FeasibleSet::Free,
        };
        let out = inner_projected_subgradient(&prob, &Array2::zeros((1, 2)), &InnerSolverConfig::default()).unwrap();
        assert!(out.converged);
        assert!(max_abs_diff(&out.solution, &c) <= 1e-6);
    }

    #[test]
    fn box_projection_lands_on_boundary() {
        // unit column ball in 1-D is the interval [-1, 1]
        let c = array![[3.0]];
        let grad = quadratic(c);
        let prob = CompositeProblem {
            grad: &grad,
            lipschitz: 1.0,
            penalty: ElasticNet::ZERO,
            set: FeasibleSet::ColumnBall(1.0),
        };
        let out = inner_projected_subgradient(&prob, &array![[0.0]], &InnerSolverConfig::default()).unwrap();
        assert!(out.converged);
        assert!((out.solution[[0, 0]] - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn max_iters_returns_best_iterate() {
        let c = array![[100.0]];
        let grad = quadratic(c);
        let prob = CompositeProblem {
            grad: &grad,
            lipschitz: 1e6,
            penalty: ElasticNet::ZERO,
            set: FeasibleSet::Free,
        };
        let cfg = InnerSolverConfig::default().with_max_iters(3);
        let out = inner_projected_subgradient(&prob, &array![[0.0]], &cfg).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iters, 3);
        assert!(out.residual > 1.0);
    }

    #[test]
    fn iterate_change_stop() {
        let c = array![[0.5]];
        let grad = quadratic(c);
        let prob = CompositeProblem {
            grad: &grad,
            lipschitz: 1.0,
            penalty: ElasticNet::new(0.1, 0.0),
            set: FeasibleSet::Free,
        };
        let cfg = InnerSolverConfig {
            stop: InnerStop::IterateChange,
            tol: 1e-10,
            ..Default::default()
        };
        let out = inner_projected_subgradient(&prob, &array![[0.0]], &cfg).unwrap();
        assert!(out.converged);
        assert!((out.solution[[0, 0]] - 0.4).abs() < 1e-9);
    }

    #[test]
    fn diagonal_lasso_matches_closed_form() {
        use crate::linalg::soft_threshold;
        use crate::testutil::{gaussian, rng};
        use rand::Rng;
        let mut r = rng(5);
        for _ in 0..20 {
            let c = gaussian(&mut r, 3, 4) * 2.0;
            let h = Array2::from_shape_simple_fn((3, 4), || r.random_range(0.5..5.0));
            let lambda = r.random_range(0.05..1.0);
            let (hc, cc) = (h.clone(), c.clone());
            let grad = move |z: &Array2<f64>| &hc * &(z - &cc);
            let prob = CompositeProblem {
                grad: &grad,
                lipschitz: h.iter().cloned().fold(0.0, f64::max),
                penalty: ElasticNet::new(lambda, 0.0),
                set: FeasibleSet::Free,
            };
            let cfg = InnerSolverConfig::default().with_max_iters(5_000);
            let out = inner_projected_subgradient(&prob, &Array2::zeros((3, 4)), &cfg).unwrap();
            assert!(out.converged && out.residual <= cfg.tol);
            let obj = |z: &Array2<f64>| {
                let q: f64 = Zip::from(z).and(&h).and(&c).fold(0.0, |a, &z, &h, &c| a + 0.5 * h * (z - c).powi(2));
                q + lambda * z.iter().map(|v| v.abs()).sum::<f64>()
            };
            let mut star = c.clone();
            Zip::from(&mut star).and(&h).for_each(|z, &h| *z = soft_threshold(*z, lambda / h));
            assert!(obj(&out.solution) - obj(&star) < 1e-8);
        }
    }

    #[test]
    fn literal_subgradient_mode_descends() {
        let c = array![[2.0, -1.0]];
        let grad = quadratic(c.clone());
        let prob = CompositeProblem {
            grad: &grad,
            lipschitz: 1.0,
            penalty: ElasticNet::ZERO,
            set: FeasibleSet::Free,
        };
        let cfg = InnerSolverConfig {
            step: InnerStep::Subgradient,
            max_iters: 2_000,
            ..Default::default()
        };
        let out = inner_projected_subgradient(&prob, &Array2::zeros((1, 2)), &cfg).unwrap();
        assert!(max_abs_diff(&out.solution, &c) <= 1e-6);
    }

    #[test]
    fn rejects_bad_config() {
        let grad = quadratic(array![[0.0]]);
        let prob = CompositeProblem {
            grad: &grad,
            lipschitz: 1.0,
            penalty: ElasticNet::ZERO,
            set: FeasibleSet::Free,
        };
        let cfg = InnerSolverConfig { step0: 1.5, ..Default::default() };
        assert!(inner_projected_subgradient(&prob, &array![[0.0]], &cfg).is_err());
        let cfg = InnerSolverConfig { tol: 0.0, ..Default::default() };
        assert!(inner_projected_subgradient(&prob, &array![[0.0]], &cfg).is_err());
    }
}
