//! Decentralized dictionary learning over time-varying directed networks.
//!
//! Every agent holds a private data shard `S_i`, a private sparse code `X_i`
//! and a local copy `D_(i)` of the shared dictionary. Agents alternate a
//! successive-convex-approximation step on their local copy with a
//! push-sum mixing round that also tracks the network-wide gradient sum.
//!
//! Module map:
//!
//! * [`graphnet`]: digraphs, time-varying sequences, consensus weights.
//! * [`problems`]: elastic-net DL, sparse SVD and non-negative sparse coding.
//! * [`subsolvers`]: per-agent dictionary and code subproblems.
//! * [`engine`]: the decentralized iteration over a [`engine::NetworkState`].
//! * [`baselines`]: Prox-PDA-IP and the push-sum variant of ATC.
//! * [`metrics`]: merit functions, consensus error, image quality.
//! * [`harness`]: configuration, data generation, traces and the CLI driver.

// negated comparisons are used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod engine;
pub mod error;
pub mod graphnet;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod problems;
pub mod subsolvers;

pub use error::{Error, Result};

#[cfg(test)]
pub(crate) mod testutil {
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
        Array2::from_shape_simple_fn((rows, cols), || rng.sample::<f64, _>(StandardNormal))
    }
}
