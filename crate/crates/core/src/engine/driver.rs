use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::config::{Horizon, RunConfig};
use crate::error::Result;
use crate::graphnet::{Digraph, WeightMatrix};
use crate::metrics::{consensus_error, delta_max, mean_dictionary, stationarity_d, stationarity_x};
use crate::problems::ProblemInstance;

/// Per-iteration inputs handed to [`Algorithm::step`].
pub struct StepContext<'a> {
    pub cfg: &'a RunConfig,
    pub graph: &'a Digraph,
    pub weights: &'a WeightMatrix,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub inner_iters_d: usize,
    pub inner_iters_x: usize,
    pub failures_d: usize,
    pub failures_x: usize,
}

impl StepStats {
    pub(crate) fn add(&mut self, iters_d: usize, conv_d: bool, iters_x: usize, conv_x: bool) {
        self.inner_iters_d += iters_d;
        self.inner_iters_x += iters_x;
        self.failures_d += usize::from(!conv_d);
        self.failures_x += usize::from(!conv_x);
    }
}

/// A decentralized method the driver can iterate and measure.
pub trait Algorithm {
    fn name(&self) -> &'static str;
    fn iter(&self) -> usize;
    fn msg_count(&self) -> u64;
    fn messages_per_iter(&self) -> u64;
    /// Step size the next iteration will use, if the method has one.
    fn gamma(&self) -> Option<f64>;
    fn dictionaries(&self) -> Vec<&Array2<f64>>;
    fn codes(&self) -> Vec<&Array2<f64>>;
    fn tracking_residual(&self, _p: &ProblemInstance) -> Option<f64> {
        None
    }
    fn step(&mut self, ctx: &StepContext<'_>) -> Result<StepStats>;
}

/// One line of the iteration trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub msg_exchanges: u64,
    pub gamma: Option<f64>,
    /// `U(D̄, X)` at the unweighted mean dictionary.
    pub objective: f64,
    pub consensus_err: f64,
    pub delta_d: Option<f64>,
    pub delta_x: Option<f64>,
    pub delta_max: Option<f64>,
    pub tracking_residual: Option<f64>,
    pub inner_iters_d: usize,
    pub inner_iters_x: usize,
    pub wall_ms: f64,
}

pub trait TraceSink {
    fn record(&mut self, row: &TraceRow) -> Result<()>;
    fn flush(&mut self) -> Result<()> {
        Ok(())
    }
}

impl TraceSink for Vec<TraceRow> {
    fn record(&mut self, row: &TraceRow) -> Result<()> {
        self.push(*row);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Horizon,
    Converged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub algorithm: String,
    pub iterations: usize,
    pub msg_exchanges: u64,
    pub stop_reason: StopReason,
    pub final_row: TraceRow,
    /// Inner-solver calls that stopped at their iteration cap.
    pub inner_failures_d: usize,
    pub inner_failures_x: usize,
    pub wall_ms: f64,
}

fn measure<A: Algorithm + ?Sized>(
    alg: &A,
    cfg: &RunConfig,
    stats: StepStats,
    with_merit: bool,
    wall_ms: f64,
) -> Result<TraceRow> {
    let p = &cfg.problem;
    let dicts = alg.dictionaries();
    let codes = alg.codes();
    let dbar = mean_dictionary(&dicts);
    let (delta_d, delta_x) = if with_merit {
        let m = &cfg.control.merit;
        (
            Some(stationarity_d(p, &dbar, &codes, m)?),
            Some(stationarity_x(p, &dbar, &codes, m)?),
        )
    } else {
        (None, None)
    };
    let owned: Vec<Array2<f64>> = codes.iter().map(|x| (*x).clone()).collect();
    Ok(TraceRow {
        iter: alg.iter(),
        msg_exchanges: alg.msg_count(),
        gamma: alg.gamma(),
        objective: p.objective(&dbar, &owned)?,
        consensus_err: consensus_error(&dicts),
        delta_d,
        delta_x,
        delta_max: delta_d.zip(delta_x).map(|(a, b)| delta_max(a, b)),
        tracking_residual: alg.tracking_residual(p),
        inner_iters_d: stats.inner_iters_d,
        inner_iters_x: stats.inner_iters_x,
        wall_ms,
    })
}

fn converged(row: &TraceRow, cfg: &RunConfig) -> bool {
    let c = &cfg.control;
    if c.tol_delta.is_none() && c.tol_consensus.is_none() {
        return false;
    }
    let delta_ok = match c.tol_delta {
        Some(t) => row.delta_max.is_some_and(|d| d <= t),
        None => true,
    };
    let cons_ok = c.tol_consensus.is_none_or(|t| row.consensus_err <= t);
    delta_ok && cons_ok
}

/// Iterates `alg` until the horizon or the stopping tolerances are met.
/// The initial state is recorded as row 0. The sink is flushed before
/// returning, also when a step fails.
pub fn drive<A: Algorithm + ?Sized>(alg: &mut A, cfg: &RunConfig, sink: &mut dyn TraceSink) -> Result<RunSummary> {
    let result = drive_inner(alg, cfg, sink);
    let flushed = sink.flush();
    let summary = result?;
    flushed?;
    Ok(summary)
}

fn drive_inner<A: Algorithm + ?Sized>(alg: &mut A, cfg: &RunConfig, sink: &mut dyn TraceSink) -> Result<RunSummary> {
    let control = &cfg.control;
    let weights = cfg
        .graphs
        .slots()
        .iter()
        .map(|g| cfg.weights.build(g))
        .collect::<Result<Vec<_>>>()?;
    let start = Instant::now();
    let elapsed = |on: bool| if on { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
    let mut row = measure(alg, cfg, StepStats::default(), true, elapsed(control.timing))?;
    sink.record(&row)?;
    let (mut fail_d, mut fail_x) = (0, 0);
    let mut stop_reason = StopReason::Horizon;
    loop {
        let more = match control.horizon {
            Horizon::Iterations(n) => alg.iter() < n,
            Horizon::Messages(m) => alg.msg_count() + alg.messages_per_iter() <= m,
        };
        if !more {
            break;
        }
        if converged(&row, cfg) {
            stop_reason = StopReason::Converged;
            break;
        }
        let slot = cfg.graphs.slot_index(alg.iter());
        let ctx = StepContext {
            cfg,
            graph: &cfg.graphs.slots()[slot],
            weights: &weights[slot],
        };
        let stats = alg.step(&ctx)?;
        fail_d += stats.failures_d;
        fail_x += stats.failures_x;
        let last = match control.horizon {
            Horizon::Iterations(n) => alg.iter() >= n,
            Horizon::Messages(m) => alg.msg_count() + alg.messages_per_iter() > m,
        };
        let with_merit = last || alg.iter().is_multiple_of(control.merit_stride);
        row = measure(alg, cfg, stats, with_merit, elapsed(control.timing))?;
        sink.record(&row)?;
    }
    if fail_d + fail_x > 0 {
        log::warn!("inner solver hit its iteration cap {fail_d} times (dictionary) and {fail_x} times (codes)");
    }
    Ok(RunSummary {
        algorithm: alg.name().to_string(),
        iterations: alg.iter(),
        msg_exchanges: alg.msg_count(),
        stop_reason,
        final_row: row,
        inner_failures_d: fail_d,
        inner_failures_x: fail_x,
        wall_ms: elapsed(true),
    })
}
