//! The decentralized iteration: local convexified steps on every agent
//! followed by push-sum mixing of the dictionaries and of the
//! gradient-tracking variables.

mod config;
mod driver;
mod state;
mod step;

pub use config::{Horizon, RunConfig, RunControl};
pub use driver::{drive, Algorithm, RunSummary, StepContext, StepStats, StopReason, TraceRow, TraceSink};
pub use state::{check_state, init_network, AgentState, NetworkState, StateReport};
pub use step::{d4l_step, MESSAGES_PER_ITER};

/// Mixing and checking helpers shared with the baselines.
pub(crate) mod step_support {
    pub(crate) use super::step::{
        check_feasible, check_mixing, check_phi_mass, ensure_finite, per_agent, relax, Mixing,
    };
}

use crate::error::Result;

/// Initializes the network from `cfg` and iterates to the horizon, writing
/// one trace row per iteration (plus the initial row) to `sink`.
pub fn run(cfg: &RunConfig, sink: &mut dyn TraceSink) -> Result<(NetworkState, RunSummary)> {
    cfg.validate()?;
    let mut state = init_network(cfg)?;
    let summary = drive(&mut state, cfg, sink)?;
    Ok((state, summary))
}
