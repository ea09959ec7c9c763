use ndarray::Array2;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::linalg::{frobenius, frobenius_diff, max_abs_diff};
use crate::problems::{grad_d, ProblemInstance, FEASIBILITY_TOL};
use crate::subsolvers::GammaSchedule;

/// Local variables of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    /// Local copy `D_(i)` of the dictionary.
    pub d: Array2<f64>,
    pub x: Array2<f64>,
    /// Gradient-tracking variable `Θ_(i)`.
    pub theta: Array2<f64>,
    /// Push-sum weight `φ_i`.
    pub phi: f64,
    /// `∇_D f_i(D_(i), X_i)` at the current iterate.
    pub cached_grad: Array2<f64>,
}

impl AgentState {
    /// Fresh agent with `Θ` set to its own gradient and `φ = 1`.
    pub fn new(p: &ProblemInstance, i: usize, d: Array2<f64>, x: Array2<f64>) -> Self {
        let g = grad_d(&d, &x, &p.shards[i]);
        Self {
            d,
            x,
            theta: g.clone(),
            phi: 1.0,
            cached_grad: g,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    pub agents: Vec<AgentState>,
    pub iter: usize,
    pub gamma: GammaSchedule,
    pub msg_count: u64,
    pub seed: u64,
    /// Agents whose initial dictionary came from Gaussian columns because
    /// their shard had fewer than `K` columns.
    pub init_fallback: Vec<usize>,
}

impl NetworkState {
    pub fn from_agents(agents: Vec<AgentState>, gamma: GammaSchedule, seed: u64) -> Self {
        Self {
            agents,
            iter: 0,
            gamma,
            msg_count: 0,
            seed,
            init_fallback: Vec::new(),
        }
    }

    pub fn dictionaries(&self) -> Vec<&Array2<f64>> {
        self.agents.iter().map(|a| &a.d).collect()
    }

    pub fn codes(&self) -> Vec<&Array2<f64>> {
        self.agents.iter().map(|a| &a.x).collect()
    }

    pub fn thetas(&self) -> Vec<&Array2<f64>> {
        self.agents.iter().map(|a| &a.theta).collect()
    }

    /// `(1/I) Σ_i φ_i D_(i)`.
    pub fn weighted_mean_dictionary(&self) -> Array2<f64> {
        let mut acc = Array2::zeros(self.agents[0].d.dim());
        for a in &self.agents {
            acc.scaled_add(a.phi, &a.d);
        }
        acc / self.agents.len() as f64
    }
}

/// Starting point: `K` distinct random columns of each shard projected onto
/// the dictionary set, zero codes, `φ = 1` and `Θ` equal to the local
/// gradient. Shards narrower than `K` get Gaussian columns instead.
pub fn init_network(cfg: &RunConfig) -> Result<NetworkState> {
    let p = &cfg.problem;
    let (m, k) = p.dict_shape();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut agents = Vec::with_capacity(p.agents());
    let mut fallback = Vec::new();
    for (i, s) in p.shards.iter().enumerate() {
        let raw = if k <= s.ncols() {
            let cols = sample(&mut rng, s.ncols(), k);
            let mut d = Array2::zeros((m, k));
            for (dst, src) in cols.iter().enumerate() {
                d.column_mut(dst).assign(&s.column(src));
            }
            d
        } else {
            fallback.push(i);
            Array2::from_shape_simple_fn((m, k), || rng.sample::<f64, _>(StandardNormal))
        };
        let d = p.project_dictionary(&raw);
        agents.push(AgentState::new(p, i, d, Array2::zeros((k, s.ncols()))));
    }
    if !fallback.is_empty() {
        log::warn!("agents {fallback:?} have fewer than {k} columns; using Gaussian initial dictionaries");
    }
    let mut state = NetworkState::from_agents(agents, GammaSchedule::new(cfg.step)?, cfg.seed);
    state.init_fallback = fallback;
    Ok(state)
}

/// Deviations measured by [`check_state`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateReport {
    pub phi_mass_err: f64,
    pub tracking_mass_rel_err: f64,
    pub cached_grad_err: f64,
    pub max_infeasibility: f64,
    pub min_phi: f64,
}

pub(crate) const PHI_MASS_TOL: f64 = 1e-12;
pub(crate) const TRACKING_MASS_TOL: f64 = 1e-8;
pub(crate) const CACHE_TOL: f64 = 1e-12;

/// `Σ_i φ_iΘ_(i)` against `Σ_i ∇f_i`, relative to `Σ_i ‖∇f_i‖_F`.
pub(crate) fn tracking_mass_error(agents: &[AgentState]) -> f64 {
    let mut lhs = Array2::zeros(agents[0].theta.dim());
    let mut rhs = Array2::zeros(agents[0].theta.dim());
    let mut scale = 0.0;
    for a in agents {
        lhs.scaled_add(a.phi, &a.theta);
        rhs += &a.cached_grad;
        scale += frobenius(&a.cached_grad);
    }
    let diff = frobenius_diff(&lhs, &rhs);
    if diff == 0.0 {
        0.0
    } else {
        diff / scale.max(f64::MIN_POSITIVE)
    }
}

/// Checks the state-level invariants: φ positivity and mass, tracking mass,
/// cached gradients and feasibility of every local dictionary.
pub fn check_state(p: &ProblemInstance, state: &NetworkState) -> Result<StateReport> {
    if state.agents.len() != p.agents() {
        return Err(Error::Shape(format!(
            "state has {} agents, problem {}",
            state.agents.len(),
            p.agents()
        )));
    }
    let n = p.agents() as f64;
    let phi_sum: f64 = state.agents.iter().map(|a| a.phi).sum();
    let set = p.dict_set();
    let mut cached_grad_err: f64 = 0.0;
    let mut max_infeasibility: f64 = 0.0;
    for (i, a) in state.agents.iter().enumerate() {
        if a.d.dim() != p.dict_shape() {
            return Err(Error::Shape(format!("agent {i} dictionary {:?}", a.d.dim())));
        }
        let g = grad_d(&a.d, &a.x, &p.shards[i]);
        let scale = frobenius(&g).max(1.0);
        cached_grad_err = cached_grad_err.max(max_abs_diff(&g, &a.cached_grad) / scale);
        max_infeasibility = max_infeasibility.max(max_abs_diff(&a.d, &set.projected(&a.d)));
    }
    let report = StateReport {
        phi_mass_err: (phi_sum - n).abs(),
        tracking_mass_rel_err: tracking_mass_error(&state.agents),
        cached_grad_err,
        max_infeasibility,
        min_phi: state.agents.iter().map(|a| a.phi).fold(f64::INFINITY, f64::min),
    };
    if !(report.min_phi > 0.0) {
        return Err(Error::Invariant(format!("φ not positive (min {})", report.min_phi)));
    }
    if report.phi_mass_err > PHI_MASS_TOL * n {
        return Err(Error::Invariant(format!("Σφ deviates from I by {}", report.phi_mass_err)));
    }
    if report.tracking_mass_rel_err > TRACKING_MASS_TOL {
        return Err(Error::Invariant(format!(
            "tracking mass relative error {}",
            report.tracking_mass_rel_err
        )));
    }
    if report.cached_grad_err > CACHE_TOL {
        return Err(Error::Invariant(format!("cached gradient off by {}", report.cached_grad_err)));
    }
    if report.max_infeasibility > FEASIBILITY_TOL {
        return Err(Error::Infeasible(format!(
            "local dictionary {} away from its set",
            report.max_infeasibility
        )));
    }
    Ok(report)
}
