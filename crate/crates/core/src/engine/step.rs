use ndarray::{Array2, Zip};
use rayon::prelude::*;

use super::driver::{Algorithm, StepContext, StepStats};
use super::state::{tracking_mass_error, NetworkState, PHI_MASS_TOL, TRACKING_MASS_TOL};
use crate::error::{Error, Result};
use crate::graphnet::{Digraph, WeightKind, WeightMatrix};
use crate::linalg::{all_finite, max_abs, max_abs_diff};
use crate::metrics::tracking_residual;
use crate::problems::{grad_d, ProblemInstance, FEASIBILITY_TOL};
use crate::subsolvers::{solve_d_subproblem, solve_x_subproblem, tau_x_rule};

/// Two rounds per iteration: one for the dictionaries, one for `Θ`.
pub const MESSAGES_PER_ITER: u64 = 2;

const ROW_SUM_TOL: f64 = 1e-12;
const AVERAGE_TOL: f64 = 1e-12;

pub(crate) fn ensure_finite(a: &Array2<f64>, agent: usize, phase: &'static str) -> Result<()> {
    if all_finite(a) {
        Ok(())
    } else {
        Err(Error::NonFinite { agent, phase })
    }
}

/// Maps `f` over `0..n`, on the rayon pool when `parallel`. Results come back
/// in index order either way.
pub(crate) fn per_agent<T, F>(n: usize, parallel: bool, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    if parallel {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

/// Mixing coefficients of one push-sum round: `φ⁺` and, for each receiver,
/// its in-neighbors in ascending order with weight `a_ij·φ_j`. With doubly
/// stochastic weights `φ` is left untouched and the coefficients are `a_ij`.
pub(crate) struct Mixing {
    pub phi_next: Vec<f64>,
    pub coef: Vec<Vec<(usize, f64)>>,
    pub normalize: bool,
}

impl Mixing {
    pub fn new(g: &Digraph, a: &WeightMatrix, phi: &[f64]) -> Result<Self> {
        let n = phi.len();
        let normalize = a.kind != WeightKind::DoublyStochastic;
        let mut coef = Vec::with_capacity(n);
        let mut phi_next = Vec::with_capacity(n);
        for i in 0..n {
            let row: Vec<(usize, f64)> = g
                .in_neighbors(i)
                .into_iter()
                .map(|j| (j, if normalize { a.get(i, j) * phi[j] } else { a.get(i, j) }))
                .collect();
            let next = if normalize { row.iter().map(|&(_, c)| c).sum() } else { phi[i] };
            if !(next > 0.0) {
                return Err(Error::Invariant(format!("φ⁺[{i}] = {next} is not positive")));
            }
            phi_next.push(next);
            coef.push(row);
        }
        Ok(Self {
            phi_next,
            coef,
            normalize,
        })
    }

    /// `Σ_j c_ij Z_j`, summed in ascending `j`.
    pub fn combine(&self, i: usize, z: &[&Array2<f64>]) -> Array2<f64> {
        let row = &self.coef[i];
        let (j0, c0) = row[0];
        let mut acc = z[j0] * c0;
        for &(j, c) in &row[1..] {
            acc.scaled_add(c, z[j]);
        }
        acc
    }

    /// `Σ_j c_ij Z_j / φ⁺_i`.
    pub fn mix(&self, i: usize, z: &[&Array2<f64>]) -> Array2<f64> {
        let mut acc = self.combine(i, z);
        if self.normalize {
            let p = self.phi_next[i];
            acc.mapv_inplace(|v| v / p);
        }
        acc
    }

    /// Row sums of `W = diag(φ⁺)⁻¹ A diag(φ)`, worst deviation from 1.
    pub fn row_sum_error(&self) -> f64 {
        self.coef
            .iter()
            .zip(&self.phi_next)
            .map(|(row, &p)| {
                let s: f64 = row.iter().map(|&(_, c)| if self.normalize { c / p } else { c }).sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// `(1/I) Σ_i w_i Z_i`.
fn weighted_mean(weights: &[f64], z: &[&Array2<f64>]) -> Array2<f64> {
    let mut acc = Array2::zeros(z[0].dim());
    for (w, m) in weights.iter().zip(z) {
        acc.scaled_add(*w, *m);
    }
    acc / z.len() as f64
}

pub(crate) fn check_mixing(mix: &Mixing, phi: &[f64], u: &[&Array2<f64>], d_next: &[&Array2<f64>]) -> Result<()> {
    let rs = mix.row_sum_error();
    if rs > ROW_SUM_TOL {
        return Err(Error::Invariant(format!("normalized weights have row-sum error {rs}")));
    }
    let before = weighted_mean(phi, u);
    let after = weighted_mean(&mix.phi_next, d_next);
    let dev = max_abs_diff(&before, &after);
    if dev > AVERAGE_TOL * max_abs(&before).max(1.0) {
        return Err(Error::Invariant(format!("weighted average moved by {dev} during mixing")));
    }
    Ok(())
}

pub(crate) fn check_feasible(p: &ProblemInstance, d: &[&Array2<f64>]) -> Result<()> {
    let set = p.dict_set();
    for (i, di) in d.iter().enumerate() {
        if !set.contains(di, FEASIBILITY_TOL) {
            return Err(Error::Infeasible(format!("agent {i} left the dictionary set")));
        }
    }
    Ok(())
}

pub(crate) fn check_phi_mass(phi: &[f64]) -> Result<()> {
    let n = phi.len() as f64;
    let s: f64 = phi.iter().sum();
    if (s - n).abs() > PHI_MASS_TOL * n {
        return Err(Error::Invariant(format!("Σφ = {s}, expected {n}")));
    }
    Ok(())
}

/// `U = D + γ(D̃ − D)`.
pub(crate) fn relax(d: &Array2<f64>, d_tilde: &Array2<f64>, gamma: f64) -> Array2<f64> {
    let mut u = d.clone();
    Zip::from(&mut u).and(d_tilde).for_each(|u, &t| *u += gamma * (t - *u));
    u
}

struct Local {
    u: Array2<f64>,
    x: Array2<f64>,
    iters_d: usize,
    conv_d: bool,
    iters_x: usize,
    conv_x: bool,
}

/// One iteration: local dictionary and code steps on every agent, then
/// push-sum mixing of the dictionaries and the tracking variables.
pub fn d4l_step(state: &mut NetworkState, ctx: &StepContext<'_>) -> Result<StepStats> {
    let cfg = ctx.cfg;
    let p = &cfg.problem;
    let n = state.agents.len();
    let gamma = state.gamma.current();
    let parallel = cfg.control.parallel;

    let local = per_agent(n, parallel, |i| {
        let a = &state.agents[i];
        let dt = solve_d_subproblem(p, i, &a.d, &a.x, &a.theta, cfg.tau_d, cfg.surrogates, &cfg.inner)?;
        let u = relax(&a.d, &dt.value, gamma);
        ensure_finite(&u, i, "dictionary step")?;
        let tau_x = tau_x_rule(p, &u, &cfg.tau_x)?;
        let xs = solve_x_subproblem(p, i, &u, &a.x, tau_x, cfg.surrogates, &cfg.inner)?;
        ensure_finite(&xs.value, i, "code step")?;
        Ok(Local {
            u,
            x: xs.value,
            iters_d: dt.inner_iters,
            conv_d: dt.converged,
            iters_x: xs.inner_iters,
            conv_x: xs.converged,
        })
    })?;

    let phi: Vec<f64> = state.agents.iter().map(|a| a.phi).collect();
    let mix = Mixing::new(ctx.graph, ctx.weights, &phi)?;
    let us: Vec<&Array2<f64>> = local.iter().map(|l| &l.u).collect();
    let d_next = per_agent(n, parallel, |i| {
        let d = mix.mix(i, &us);
        ensure_finite(&d, i, "dictionary mixing")?;
        let g = grad_d(&d, &local[i].x, &p.shards[i]);
        Ok((d, g))
    })?;
    let thetas = state.thetas();
    let theta_next = per_agent(n, parallel, |i| {
        let mut t = mix.combine(i, &thetas);
        Zip::from(&mut t)
            .and(&state.agents[i].cached_grad)
            .and(&d_next[i].1)
            .for_each(|t, &old, &new| *t = (*t - old) + new);
        if mix.normalize {
            let pn = mix.phi_next[i];
            t.mapv_inplace(|v| v / pn);
        }
        ensure_finite(&t, i, "tracking update")?;
        Ok(t)
    })?;

    if cfg.control.check_invariants {
        let dn: Vec<&Array2<f64>> = d_next.iter().map(|(d, _)| d).collect();
        check_mixing(&mix, &phi, &us, &dn)?;
        check_feasible(p, &dn)?;
    }

    let mut stats = StepStats::default();
    for (i, ((l, (d, g)), t)) in local.into_iter().zip(d_next).zip(theta_next).enumerate() {
        stats.add(l.iters_d, l.conv_d, l.iters_x, l.conv_x);
        let a = &mut state.agents[i];
        a.d = d;
        a.x = l.x;
        a.theta = t;
        a.cached_grad = g;
        a.phi = mix.phi_next[i];
    }

    if cfg.control.check_invariants {
        let phi: Vec<f64> = state.agents.iter().map(|a| a.phi).collect();
        check_phi_mass(&phi)?;
        let err = tracking_mass_error(&state.agents);
        if err > TRACKING_MASS_TOL {
            return Err(Error::Invariant(format!("tracking mass relative error {err}")));
        }
    }

    state.iter += 1;
    state.msg_count += MESSAGES_PER_ITER;
    state.gamma.advance();
    Ok(stats)
}

impl Algorithm for NetworkState {
    fn name(&self) -> &'static str {
        "d4l"
    }

    fn iter(&self) -> usize {
        self.iter
    }

    fn msg_count(&self) -> u64 {
        self.msg_count
    }

    fn messages_per_iter(&self) -> u64 {
        MESSAGES_PER_ITER
    }

    fn gamma(&self) -> Option<f64> {
        Some(self.gamma.current())
    }

    fn dictionaries(&self) -> Vec<&Array2<f64>> {
        NetworkState::dictionaries(self)
    }

    fn codes(&self) -> Vec<&Array2<f64>> {
        NetworkState::codes(self)
    }

    fn tracking_residual(&self, p: &ProblemInstance) -> Option<f64> {
        Some(tracking_residual(p, &self.dictionaries(), &self.thetas(), &self.codes()))
    }

    fn step(&mut self, ctx: &StepContext<'_>) -> Result<StepStats> {
        d4l_step(self, ctx)
    }
}
