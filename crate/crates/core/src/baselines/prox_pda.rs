use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::engine::step_support::{check_feasible, ensure_finite, per_agent};
use crate::engine::{drive, init_network, Algorithm, RunConfig, RunSummary, StepContext, StepStats, TraceSink};
use crate::error::{Error, Result};
use crate::graphnet::Digraph;
use crate::linalg::{frobenius, frobenius_diff, sigma_max_sq};
use crate::problems::ProblemInstance;
use crate::subsolvers::{inner_projected_subgradient, CompositeProblem, InnerSolverConfig, InnerStop};

/// Penalty growth: `β^ν = BETA_RATE·ν`.
pub const BETA_RATE: f64 = 0.002;
pub const PROX_PDA_MESSAGES_PER_ITER: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxPdaState {
    pub d: Vec<Array2<f64>>,
    pub x: Vec<Array2<f64>>,
    /// Undirected edges `(a, b)` with `a < b`; incidence `+1` at `a`, `−1` at `b`.
    pub edges: Vec<(usize, usize)>,
    /// One dual matrix per edge.
    pub omega: Vec<Array2<f64>>,
    pub iter: usize,
    pub msg_count: u64,
}

impl ProxPdaState {
    pub fn init(cfg: &RunConfig) -> Result<Self> {
        if cfg.graphs.len() != 1 || !cfg.graphs.is_symmetric() {
            return Err(Error::Config(
                "the primal-dual baseline needs a single undirected graph".into(),
            ));
        }
        let s = init_network(cfg)?;
        let g = &cfg.graphs.slots()[0];
        let edges: Vec<(usize, usize)> = g.edges().filter(|&(a, b)| a < b).collect();
        let shape = cfg.problem.dict_shape();
        Ok(Self {
            omega: vec![Array2::zeros(shape); edges.len()],
            edges,
            d: s.agents.iter().map(|a| a.d.clone()).collect(),
            x: s.agents.into_iter().map(|a| a.x).collect(),
            iter: 0,
            msg_count: 0,
        })
    }

    /// Penalty of the next iteration, `β^{ν+1}`.
    pub fn next_beta(&self) -> f64 {
        BETA_RATE * (self.iter + 1) as f64
    }
}

/// `max_e ‖D_a − D_b‖_F` over the edges.
pub fn disagreement(state: &ProxPdaState) -> f64 {
    state
        .edges
        .iter()
        .map(|&(a, b)| frobenius_diff(&state.d[a], &state.d[b]))
        .fold(0.0, f64::max)
}

fn inner_cfg(cfg: &InnerSolverConfig) -> InnerSolverConfig {
    InnerSolverConfig {
        stop: InnerStop::IterateChange,
        ..*cfg
    }
}

fn code_update(p: &ProblemInstance, i: usize, d: &Array2<f64>, x: &Array2<f64>, beta: f64, cfg: &InnerSolverConfig) -> Result<(Array2<f64>, usize, bool)> {
    let s = &p.shards[i];
    let resid = d.dot(x) - s;
    let theta = frobenius(&resid).powi(2);
    let dtd = d.t().dot(d);
    let dts = d.t().dot(s);
    // Dᵀ(DX − S) + βθ(X − Xᵛ) + βDᵀD(X − Xᵛ)
    let anchor_term = dtd.dot(x) * beta;
    let anchor = x.clone();
    let grad = move |z: &Array2<f64>| {
        let mut g = dtd.dot(z) * (1.0 + beta);
        Zip::from(&mut g)
            .and(z)
            .and(&anchor)
            .and(&dts)
            .and(&anchor_term)
            .for_each(|g, &z, &a, &c, &t| *g += beta * theta * (z - a) - c - t);
        g
    };
    let problem = CompositeProblem {
        grad: &grad,
        lipschitz: (1.0 + beta) * sigma_max_sq(d.view()) + beta * theta,
        penalty: p.code_penalty(),
        set: p.code_set(),
    };
    let out = inner_projected_subgradient(&problem, x, &inner_cfg(cfg))?;
    Ok((out.solution, out.iters, out.converged))
}

#[allow(clippy::too_many_arguments)]
fn dictionary_update(
    p: &ProblemInstance,
    i: usize,
    g: &Digraph,
    state: &ProxPdaState,
    x_new: &Array2<f64>,
    beta: f64,
    cfg: &InnerSolverConfig,
) -> Result<(Array2<f64>, usize, bool)> {
    let s = &p.shards[i];
    let gram = x_new.dot(&x_new.t());
    let cross = s.dot(&x_new.t());
    let neighbors: Vec<usize> = g.in_neighbors(i).into_iter().filter(|&j| j != i).collect();
    let deg = neighbors.len() as f64;
    // constant part: Σ_e M_ei Ω_e − β((d_i − 1)D_i + Σ_j D_j) − SXᵀ
    let mut lin = Array2::zeros(p.dict_shape());
    for (e, &(a, b)) in state.edges.iter().enumerate() {
        if a == i {
            lin += &state.omega[e];
        } else if b == i {
            lin -= &state.omega[e];
        }
    }
    lin.scaled_add(-beta * (deg - 1.0), &state.d[i]);
    for &j in &neighbors {
        lin.scaled_add(-beta, &state.d[j]);
    }
    lin -= &cross;
    let lip = sigma_max_sq(x_new.view()) + 2.0 * beta * deg;
    let grad = move |z: &Array2<f64>| {
        let mut gz = z.dot(&gram);
        Zip::from(&mut gz)
            .and(z)
            .and(&lin)
            .for_each(|gz, &z, &l| *gz += 2.0 * beta * deg * z + l);
        gz
    };
    let problem = CompositeProblem {
        grad: &grad,
        lipschitz: lip,
        penalty: p.dict_penalty(),
        set: p.dict_set(),
    };
    let out = inner_projected_subgradient(&problem, &state.d[i], &inner_cfg(cfg))?;
    Ok((out.solution, out.iters, out.converged))
}

/// One iteration: code update, dictionary update against the duals and the
/// neighbors' previous copies, then dual ascent on every edge.
pub fn prox_pda_ip_step(state: &mut ProxPdaState, ctx: &StepContext<'_>) -> Result<StepStats> {
    let cfg = ctx.cfg;
    let p = &cfg.problem;
    if !ctx.graph.is_symmetric() {
        return Err(Error::Graph("the primal-dual baseline needs an undirected graph".into()));
    }
    let beta = state.next_beta();
    let n = state.d.len();
    let st: &ProxPdaState = state;
    let updates = per_agent(n, cfg.control.parallel, |i| {
        let (x, ix, cx) = code_update(p, i, &st.d[i], &st.x[i], beta, &cfg.inner)?;
        ensure_finite(&x, i, "code step")?;
        let (d, id, cd) = dictionary_update(p, i, ctx.graph, st, &x, beta, &cfg.inner)?;
        ensure_finite(&d, i, "dictionary step")?;
        Ok((d, x, id, cd, ix, cx))
    })?;
    let mut stats = StepStats::default();
    for (i, (d, x, id, cd, ix, cx)) in updates.into_iter().enumerate() {
        stats.add(id, cd, ix, cx);
        state.d[i] = d;
        state.x[i] = x;
    }
    for (e, &(a, b)) in state.edges.iter().enumerate() {
        let om = &mut state.omega[e];
        Zip::from(om)
            .and(&state.d[a])
            .and(&state.d[b])
            .for_each(|o, &da, &db| *o += beta * (da - db));
    }
    if cfg.control.check_invariants {
        let refs: Vec<&Array2<f64>> = state.d.iter().collect();
        check_feasible(p, &refs)?;
    }
    state.iter += 1;
    state.msg_count += PROX_PDA_MESSAGES_PER_ITER;
    Ok(stats)
}

impl Algorithm for ProxPdaState {
    fn name(&self) -> &'static str {
        "prox-pda-ip"
    }

    fn iter(&self) -> usize {
        self.iter
    }

    fn msg_count(&self) -> u64 {
        self.msg_count
    }

    fn messages_per_iter(&self) -> u64 {
        PROX_PDA_MESSAGES_PER_ITER
    }

    fn gamma(&self) -> Option<f64> {
        None
    }

    fn dictionaries(&self) -> Vec<&Array2<f64>> {
        self.d.iter().collect()
    }

    fn codes(&self) -> Vec<&Array2<f64>> {
        self.x.iter().collect()
    }

    fn step(&mut self, ctx: &StepContext<'_>) -> Result<StepStats> {
        prox_pda_ip_step(self, ctx)
    }
}

pub fn run_prox_pda(cfg: &RunConfig, sink: &mut dyn TraceSink) -> Result<(ProxPdaState, RunSummary)> {
    cfg.validate()?;
    let mut state = ProxPdaState::init(cfg)?;
    let summary = drive(&mut state, cfg, sink)?;
    Ok((state, summary))
}
