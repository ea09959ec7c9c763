use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Diminishing step-size rule for the convex combination `U = D + γ(D̃ − D)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StepSchedule {
    /// `γ⁰` given, `γ^ν = γ^{ν−1}(1 − ε·γ^{ν−1})`.
    Recursive { gamma0: f64, eps: f64 },
    /// `γ^ν = min(1, c/(ν+1)^p)` with `p ∈ (½, 1]`.
    Power { c: f64, p: f64 },
}

impl Default for StepSchedule {
    fn default() -> Self {
        StepSchedule::Recursive {
            gamma0: 0.5,
            eps: 1e-2,
        }
    }
}

impl StepSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StepSchedule::Recursive { gamma0, eps } => {
                if !(gamma0 > 0.0 && gamma0 <= 1.0) {
                    return Err(Error::InvalidParameter(format!("γ⁰ = {gamma0} outside (0, 1]")));
                }
                if !(eps > 0.0 && eps * gamma0 < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "ε = {eps} outside (0, 1/γ⁰)"
                    )));
                }
            }
            StepSchedule::Power { c, p } => {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(Error::InvalidParameter(format!("step constant {c} must be > 0")));
                }
                if !(p > 0.5 && p <= 1.0) {
                    return Err(Error::InvalidParameter(format!("step exponent {p} outside (½, 1]")));
                }
            }
        }
        Ok(())
    }
}

/// Sequential generator of `γ^ν`; [`GammaSchedule::current`] is `γ^ν` for
/// the current `ν`, [`GammaSchedule::advance`] moves to `ν + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaSchedule {
    rule: StepSchedule,
    iter: usize,
    gamma: f64,
}

impl GammaSchedule {
    pub fn new(rule: StepSchedule) -> Result<Self> {
        rule.validate()?;
        let gamma = match rule {
            StepSchedule::Recursive { gamma0, .. } => gamma0,
            StepSchedule::Power { c, .. } => c.min(1.0),
        };
        Ok(Self { rule, iter: 0, gamma })
    }

    pub fn current(&self) -> f64 {
        self.gamma
    }

    pub fn iter(&self) -> usize {
        self.iter
    }

    pub fn rule(&self) -> StepSchedule {
        self.rule
    }

    pub fn advance(&mut self) -> f64 {
        self.iter += 1;
        self.gamma = match self.rule {
            StepSchedule::Recursive { eps, .. } => self.gamma * (1.0 - eps * self.gamma),
            StepSchedule::Power { c, p } => (c / ((self.iter + 1) as f64).powf(p)).min(1.0),
        };
        self.gamma
    }
}

impl Iterator for GammaSchedule {
    type Item = f64;

    /// Yields `γ⁰, γ¹, …`.
    fn next(&mut self) -> Option<f64> {
        let g = self.gamma;
        self.advance();
        Some(g)
    }
}

pub fn gamma_schedule(gamma0: f64, eps: f64) -> Result<GammaSchedule> {
    GammaSchedule::new(StepSchedule::Recursive { gamma0, eps })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_step_values() {
        let mut g = gamma_schedule(0.5, 0.01).unwrap();
        assert_eq!(g.current(), 0.5);
        assert!((g.advance() - 0.4975).abs() < 1e-15);
        let mut g = gamma_schedule(1.0, 0.5).unwrap();
        assert_eq!(g.advance(), 0.5);
    }

    #[test]
    fn long_run_shape() {
        let seq: Vec<f64> = gamma_schedule(0.5, 0.01).unwrap().take(10_001).collect();
        assert!(seq.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
        let nu = 10_000.0;
        let scaled = nu * seq[10_000];
        assert!((scaled - 100.0).abs() < 10.0, "ν·γ^ν = {scaled}");
    }

    #[test]
    fn partial_sums_diverge_squares_converge() {
        let seq: Vec<f64> = gamma_schedule(0.5, 0.01).unwrap().take(10_000).collect();
        let sum: f64 = seq.iter().sum();
        assert!(sum >= 10.0);
        // telescoping: Σ_{ν<N} γ² = (γ⁰ − γ^N)/ε stays below γ⁰/ε
        let mut g = gamma_schedule(0.5, 0.01).unwrap();
        let mut sq = 0.0;
        for _ in 0..10_000 {
            let cur = g.current();
            sq += cur * cur;
            g.advance();
        }
        assert!((sq - (0.5 - g.current()) / 0.01).abs() < 1e-9 * sq);
        assert!(sq < 50.0);
        let last = seq[9_999];
        assert!(last * last < 1e-4);
    }

    #[test]
    fn power_rule() {
        let mut g = GammaSchedule::new(StepSchedule::Power { c: 2.0, p: 1.0 }).unwrap();
        assert_eq!(g.current(), 1.0);
        assert_eq!(g.advance(), 1.0);
        assert!((g.advance() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(gamma_schedule(0.0, 0.1).is_err());
        assert!(gamma_schedule(1.5, 0.1).is_err());
        assert!(gamma_schedule(0.5, 2.0).is_err());
        assert!(gamma_schedule(0.5, 0.0).is_err());
        assert!(GammaSchedule::new(StepSchedule::Power { c: 1.0, p: 0.5 }).is_err());
    }
}
