use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphnet::{check_b_strong_connectivity, GraphSequence, WeightRule};
use crate::metrics::MeritConfig;
use crate::problems::ProblemInstance;
use crate::subsolvers::{InnerSolverConfig, StepSchedule, SurrogateChoice, TauXConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Horizon {
    Iterations(usize),
    /// Stop before an iteration would push the exchange count past the budget.
    Messages(u64),
}

/// Loop control shared by every algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunControl {
    pub horizon: Horizon,
    /// Stop once `Δ^ν` is at most this (together with `tol_consensus`).
    pub tol_delta: Option<f64>,
    pub tol_consensus: Option<f64>,
    pub merit: MeritConfig,
    /// Merit functions are evaluated every `merit_stride` iterations.
    pub merit_stride: usize,
    /// Record wall time; when off, `wall_ms` is written as 0.
    pub timing: bool,
    pub parallel: bool,
    /// Verify the per-iteration identities and abort on violation.
    pub check_invariants: bool,
}

impl Default for RunControl {
    fn default() -> Self {
        Self {
            horizon: Horizon::Messages(1000),
            tol_delta: None,
            tol_consensus: None,
            merit: MeritConfig::default(),
            merit_stride: 1,
            timing: true,
            parallel: false,
            check_invariants: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: ProblemInstance,
    pub graphs: GraphSequence,
    pub weights: WeightRule,
    pub surrogates: SurrogateChoice,
    pub tau_d: f64,
    pub tau_x: TauXConfig,
    pub step: StepSchedule,
    pub inner: InnerSolverConfig,
    pub control: RunControl,
    pub seed: u64,
}

impl RunConfig {
    /// Defaults for everything except the problem and the network.
    pub fn new(problem: ProblemInstance, graphs: GraphSequence) -> Self {
        Self {
            problem,
            graphs,
            weights: WeightRule::PushSum,
            surrogates: SurrogateChoice::LINEARIZED,
            tau_d: 10.0,
            tau_x: TauXConfig::default(),
            step: StepSchedule::default(),
            inner: InnerSolverConfig::default(),
            control: RunControl::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.graphs.num_nodes() != self.problem.agents() {
            return Err(Error::Config(format!(
                "graph has {} nodes for {} agents",
                self.graphs.num_nodes(),
                self.problem.agents()
            )));
        }
        if !(self.tau_d > 0.0 && self.tau_d.is_finite()) {
            return Err(Error::InvalidParameter(format!("τ_D = {} must be > 0", self.tau_d)));
        }
        self.tau_x.validate(self.problem.params.mu)?;
        self.step.validate()?;
        self.inner.validate()?;
        self.control.merit.validate()?;
        if self.control.merit_stride == 0 {
            return Err(Error::InvalidParameter("merit stride must be ≥ 1".into()));
        }
        if self.weights == WeightRule::MetropolisHastings && !self.graphs.is_symmetric() {
            return Err(Error::Config("Metropolis-Hastings weights need undirected graphs".into()));
        }
        let b = self.graphs.window_b.unwrap_or(self.graphs.len());
        if !check_b_strong_connectivity(&self.graphs, b) {
            log::warn!("graph sequence is not {b}-strongly connected; consensus is not guaranteed");
        }
        Ok(())
    }
}
