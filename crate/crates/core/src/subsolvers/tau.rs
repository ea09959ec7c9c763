use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::sigma_max_sq;
use crate::problems::{FeasibleSet, ProblemInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TauXRule {
    /// Upper bound on `σ_max(D)²` over the whole dictionary set.
    Constant,
    /// `max(σ_max(U)², ε̃)`.
    #[default]
    AdaptiveMax,
    /// Midpoint of `[max(L, ε̃), L + μ̃]`, `L = σ_max(U)²`.
    Banded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TauXConfig {
    pub rule: TauXRule,
    pub eps_tilde: f64,
    pub mu_tilde: f64,
}

impl Default for TauXConfig {
    fn default() -> Self {
        Self {
            rule: TauXRule::AdaptiveMax,
            eps_tilde: 1.0,
            mu_tilde: 0.0,
        }
    }
}

impl TauXConfig {
    pub fn validate(&self, mu: f64) -> Result<()> {
        if !(self.eps_tilde > 0.0 && self.eps_tilde.is_finite()) {
            return Err(Error::InvalidParameter(format!("ε̃ = {} must be > 0", self.eps_tilde)));
        }
        if self.rule == TauXRule::Banded && !(self.eps_tilde <= self.mu_tilde && self.mu_tilde < mu) {
            return Err(Error::InvalidParameter(format!(
                "banded rule needs 0 < ε̃ ≤ μ̃ < μ (ε̃={}, μ̃={}, μ={mu})",
                self.eps_tilde, self.mu_tilde
            )));
        }
        Ok(())
    }
}

/// Proximal weight of the code subproblem at the dictionary `u`.
pub fn tau_x_rule(p: &ProblemInstance, u: &Array2<f64>, cfg: &TauXConfig) -> Result<f64> {
    cfg.validate(p.params.mu)?;
    let eps = cfg.eps_tilde;
    Ok(match cfg.rule {
        TauXRule::Constant => {
            let (m, k) = p.dict_shape();
            let bound = match p.dict_set() {
                FeasibleSet::ColumnBall(a) => k as f64 * a * a,
                FeasibleSet::RowBall(a) | FeasibleSet::NonnegRowBall(a) => m as f64 * a * a,
                FeasibleSet::Free | FeasibleSet::Nonneg => {
                    return Err(Error::InvalidParameter(
                        "constant rule needs a bounded dictionary set".into(),
                    ))
                }
            };
            bound.max(eps)
        }
        TauXRule::AdaptiveMax => sigma_max_sq(u.view()).max(eps),
        TauXRule::Banded => {
            let l = sigma_max_sq(u.view());
            0.5 * (l.max(eps) + l + cfg.mu_tilde)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{Family, Params};
    use ndarray::array;

    fn instance(family: Family, mu: f64) -> ProblemInstance {
        ProblemInstance::new(family, vec![Array2::zeros((2, 4))], 2, Params::elastic_net(0.1, mu, 1.0)).unwrap()
    }

    #[test]
    fn adaptive_examples() {
        let p = instance(Family::ElasticNetDl, 1.0);
        let cfg = TauXConfig::default();
        assert_eq!(tau_x_rule(&p, &Array2::zeros((2, 2)), &cfg).unwrap(), 1.0);
        let cfg = TauXConfig { eps_tilde: 0.5, ..cfg };
        let eye = array![[1.0, 0.0], [0.0, 1.0]];
        assert!((tau_x_rule(&p, &eye, &cfg).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn denoising_rule_is_max_with_one() {
        let p = instance(Family::ElasticNetDl, 1.0);
        let u = array![[2.0, 0.0], [0.0, 0.5]];
        let tau = tau_x_rule(&p, &u, &TauXConfig::default()).unwrap();
        assert!((tau - 4.0).abs() < 1e-9);
        let tau = tau_x_rule(&p, &(u * 0.1), &TauXConfig::default()).unwrap();
        assert_eq!(tau, 1.0);
    }

    #[test]
    fn constant_bounds_cover_set() {
        let p = instance(Family::ElasticNetDl, 1.0);
        let cfg = TauXConfig { rule: TauXRule::Constant, ..Default::default() };
        assert_eq!(tau_x_rule(&p, &Array2::zeros((2, 2)), &cfg).unwrap(), 2.0);
        let p = instance(Family::SparseSvd, 1.0);
        assert_eq!(tau_x_rule(&p, &Array2::zeros((2, 2)), &cfg).unwrap(), 2.0);
        // an extreme point of the column ball never exceeds the bound
        let u = array![[1.0, 1.0], [0.0, 0.0]];
        assert!(sigma_max_sq(u.view()) <= 2.0 + 1e-12);
    }

    #[test]
    fn banded_midpoint_and_bounds() {
        let p = instance(Family::ElasticNetDl, 1.0);
        let cfg = TauXConfig { rule: TauXRule::Banded, eps_tilde: 0.2, mu_tilde: 0.6 };
        let u = array![[1.0, 0.0], [0.0, 0.0]];
        let tau = tau_x_rule(&p, &u, &cfg).unwrap();
        assert!((tau - 1.3).abs() < 1e-9);
        let bad = TauXConfig { mu_tilde: 1.0, ..cfg };
        assert!(tau_x_rule(&p, &u, &bad).is_err());
        let bad = TauXConfig { eps_tilde: 0.7, ..cfg };
        assert!(tau_x_rule(&p, &u, &bad).is_err());
    }
}
