use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::engine::{drive, init_network, Algorithm, RunConfig, RunSummary, StepContext, StepStats, TraceSink};
use crate::engine::step_support::{check_feasible, check_mixing, check_phi_mass, ensure_finite, per_agent, relax, Mixing};
use crate::error::Result;
use crate::problems::grad_d;
use crate::subsolvers::{
    linearized_dictionary_step, solve_d_subproblem, solve_x_subproblem, tau_x_rule, GammaSchedule, SurrogateKind,
};

pub const ATC_MESSAGES_PER_ITER: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtcAgent {
    pub d: Array2<f64>,
    pub x: Array2<f64>,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtcState {
    pub agents: Vec<AtcAgent>,
    pub iter: usize,
    pub gamma: GammaSchedule,
    pub msg_count: u64,
}

impl AtcState {
    /// Same starting point as the tracked method for the same config.
    pub fn init(cfg: &RunConfig) -> Result<Self> {
        let s = init_network(cfg)?;
        Ok(Self {
            agents: s
                .agents
                .into_iter()
                .map(|a| AtcAgent {
                    d: a.d,
                    x: a.x,
                    phi: a.phi,
                })
                .collect(),
            iter: 0,
            gamma: s.gamma,
            msg_count: 0,
        })
    }
}

/// Adapt with the local gradient only, then push-sum combine the relaxed
/// dictionaries.
pub fn atc_step(state: &mut AtcState, ctx: &StepContext<'_>) -> Result<StepStats> {
    let cfg = ctx.cfg;
    let p = &cfg.problem;
    let n = state.agents.len();
    let gamma = state.gamma.current();
    let agents_f = n as f64;
    let local = per_agent(n, cfg.control.parallel, |i| {
        let a = &state.agents[i];
        let g = grad_d(&a.d, &a.x, &p.shards[i]);
        let (dt, iters_d, conv_d) = match cfg.surrogates.f_kind {
            SurrogateKind::Linearized => (linearized_dictionary_step(p, &a.d, &g, cfg.tau_d)?, 0, true),
            SurrogateKind::Plain => {
                let theta = g / agents_f;
                let out = solve_d_subproblem(p, i, &a.d, &a.x, &theta, cfg.tau_d, cfg.surrogates, &cfg.inner)?;
                (out.value, out.inner_iters, out.converged)
            }
        };
        let u = relax(&a.d, &dt, gamma);
        ensure_finite(&u, i, "dictionary step")?;
        let tau_x = tau_x_rule(p, &u, &cfg.tau_x)?;
        let xs = solve_x_subproblem(p, i, &u, &a.x, tau_x, cfg.surrogates, &cfg.inner)?;
        ensure_finite(&xs.value, i, "code step")?;
        let mut stats = StepStats::default();
        stats.add(iters_d, conv_d, xs.inner_iters, xs.converged);
        Ok((u, xs.value, stats))
    })?;
    let phi: Vec<f64> = state.agents.iter().map(|a| a.phi).collect();
    let mix = Mixing::new(ctx.graph, ctx.weights, &phi)?;
    let us: Vec<&Array2<f64>> = local.iter().map(|l| &l.0).collect();
    let d_next = per_agent(n, cfg.control.parallel, |i| {
        let d = mix.mix(i, &us);
        ensure_finite(&d, i, "dictionary mixing")?;
        Ok(d)
    })?;
    if cfg.control.check_invariants {
        let dn: Vec<&Array2<f64>> = d_next.iter().collect();
        check_mixing(&mix, &phi, &us, &dn)?;
        check_feasible(p, &dn)?;
        check_phi_mass(&mix.phi_next)?;
    }
    let mut stats = StepStats::default();
    for (i, ((_, x, s), d)) in local.into_iter().zip(d_next).enumerate() {
        stats.inner_iters_d += s.inner_iters_d;
        stats.inner_iters_x += s.inner_iters_x;
        stats.failures_d += s.failures_d;
        stats.failures_x += s.failures_x;
        let a = &mut state.agents[i];
        a.d = d;
        a.x = x;
        a.phi = mix.phi_next[i];
    }
    state.iter += 1;
    state.msg_count += ATC_MESSAGES_PER_ITER;
    state.gamma.advance();
    Ok(stats)
}

impl Algorithm for AtcState {
    fn name(&self) -> &'static str {
        "atc"
    }

    fn iter(&self) -> usize {
        self.iter
    }

    fn msg_count(&self) -> u64 {
        self.msg_count
    }

    fn messages_per_iter(&self) -> u64 {
        ATC_MESSAGES_PER_ITER
    }

    fn gamma(&self) -> Option<f64> {
        Some(self.gamma.current())
    }

    fn dictionaries(&self) -> Vec<&Array2<f64>> {
        self.agents.iter().map(|a| &a.d).collect()
    }

    fn codes(&self) -> Vec<&Array2<f64>> {
        self.agents.iter().map(|a| &a.x).collect()
    }

    fn step(&mut self, ctx: &StepContext<'_>) -> Result<StepStats> {
        atc_step(self, ctx)
    }
}

pub fn run_atc(cfg: &RunConfig, sink: &mut dyn TraceSink) -> Result<(AtcState, RunSummary)> {
    cfg.validate()?;
    let mut state = AtcState::init(cfg)?;
    let summary = drive(&mut state, cfg, sink)?;
    Ok((state, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Horizon;
    use crate::graphnet::{complete_digraph, Digraph, GraphSequence};
    use crate::linalg::{max_abs_diff, sigma_max_sq};
    use crate::problems::{Family, Params, ProblemInstance};
    use crate::subsolvers::SurrogateChoice;
    use crate::testutil::{gaussian, rng};

    fn problem(agents: usize, seed: u64) -> ProblemInstance {
        let mut r = rng(seed);
        let shards = (0..agents).map(|_| gaussian(&mut r, 6, 10)).collect();
        ProblemInstance::new(Family::ElasticNetDl, shards, 3, Params::elastic_net(0.2, 0.3, 1.0)).unwrap()
    }

    fn config(p: ProblemInstance, g: Digraph, iters: usize) -> RunConfig {
        let mut cfg = RunConfig::new(p, GraphSequence::single(g));
        cfg.control.horizon = Horizon::Iterations(iters);
        cfg.control.timing = false;
        cfg
    }

    #[test]
    fn single_agent_matches_direct_loop() {
        let p = problem(1, 1);
        let cfg = config(p.clone(), Digraph::empty(1).unwrap(), 200);
        let (state, _) = run_atc(&cfg, &mut Vec::new()).unwrap();
        let init = AtcState::init(&cfg).unwrap();
        let s = &p.shards[0];
        let (mut d, mut x) = (init.agents[0].d.clone(), init.agents[0].x.clone());
        let mut gamma = init.gamma;
        for _ in 0..200 {
            let g = grad_d(&d, &x, s);
            let step = 1.0 / cfg.tau_d;
            let mut dt = d.clone();
            ndarray::Zip::from(&mut dt).and(&g).for_each(|a, &b| *a -= step * b);
            p.dict_set().project(&mut dt);
            let gm = gamma.current();
            let mut u = d.clone();
            ndarray::Zip::from(&mut u).and(&dt).for_each(|u, &t| *u += gm * (t - *u));
            let tau_x = sigma_max_sq(u.view()).max(1.0);
            let mut v = u.t().dot(&u).dot(&x);
            let uts = u.t().dot(s);
            let sx = 1.0 / tau_x;
            ndarray::Zip::from(&mut v).and(&x).and(&uts).for_each(|v, &x, &c| *v = x - sx * (*v - c));
            p.code_penalty().prox_inplace(&mut v, sx, false);
            x = v;
            d = u;
            gamma.advance();
        }
        assert_eq!(state.agents[0].d, d);
        assert_eq!(state.agents[0].x, x);
    }

    #[test]
    fn identical_agents_stay_identical() {
        let p = ProblemInstance::new(
            Family::ElasticNetDl,
            vec![gaussian(&mut rng(2), 4, 5); 3],
            2,
            Params::elastic_net(0.1, 0.1, 1.0),
        )
        .unwrap();
        let cfg = config(p.clone(), complete_digraph(3).unwrap(), 3);
        let d = p.project_dictionary(&gaussian(&mut rng(3), 4, 2));
        let mut state = AtcState {
            agents: (0..3)
                .map(|_| AtcAgent {
                    d: d.clone(),
                    x: Array2::zeros((2, 5)),
                    phi: 1.0,
                })
                .collect(),
            iter: 0,
            gamma: GammaSchedule::new(cfg.step).unwrap(),
            msg_count: 0,
        };
        let trace = &mut Vec::new();
        drive(&mut state, &cfg, trace).unwrap();
        for a in &state.agents[1..] {
            assert!(max_abs_diff(&a.d, &state.agents[0].d) < 1e-14);
        }
        assert_eq!(state.msg_count, 3);
        assert!(trace.iter().all(|r| r.tracking_residual.is_none()));
    }

    #[test]
    fn phi_mass_preserved_on_directed_graph() {
        let g = Digraph::from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]).unwrap();
        let mut cfg = config(problem(4, 4), g, 40);
        cfg.surrogates = SurrogateChoice::PLAIN_CODES;
        let (state, _) = run_atc(&cfg, &mut Vec::new()).unwrap();
        let s: f64 = state.agents.iter().map(|a| a.phi).sum();
        assert!((s - 4.0).abs() <= 4e-12);
    }
}
