//! Comparison methods: push-sum adapt-then-combine without gradient
//! tracking, and the increasing-penalty proximal primal-dual method for
//! undirected networks.

mod atc;
mod prox_pda;

pub use atc::{atc_step, run_atc, AtcAgent, AtcState, ATC_MESSAGES_PER_ITER};
pub use prox_pda::{
    disagreement, prox_pda_ip_step, run_prox_pda, ProxPdaState, BETA_RATE, PROX_PDA_MESSAGES_PER_ITER,
};
