//! Per-agent strongly convex subproblems for the dictionary and the codes,
//! step-size schedules and proximal-weight rules.

mod dict;
mod inner;
mod schedule;
mod tau;

pub use dict::{linearized_dictionary_step, solve_d_subproblem, solve_x_subproblem, SubproblemOutcome};
pub use inner::{
    inner_projected_subgradient, CompositeProblem, InnerOutcome, InnerSolverConfig, InnerStep,
    InnerStop,
};
pub use schedule::{gamma_schedule, GammaSchedule, StepSchedule};
pub use tau::{tau_x_rule, TauXConfig, TauXRule};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SurrogateKind {
    /// Original function plus a proximal term.
    Plain,
    /// First-order model plus a proximal term.
    #[default]
    Linearized,
}

/// Surrogate for the dictionary step (`f_kind`) and the code step (`h_kind`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurrogateChoice {
    pub f_kind: SurrogateKind,
    pub h_kind: SurrogateKind,
}

impl SurrogateChoice {
    pub const LINEARIZED: SurrogateChoice = SurrogateChoice {
        f_kind: SurrogateKind::Linearized,
        h_kind: SurrogateKind::Linearized,
    };
    /// Linearized dictionary step, exact LASSO code step.
    pub const PLAIN_CODES: SurrogateChoice = SurrogateChoice {
        f_kind: SurrogateKind::Linearized,
        h_kind: SurrogateKind::Plain,
    };
}

impl Default for SurrogateChoice {
    fn default() -> Self {
        Self::LINEARIZED
    }
}
