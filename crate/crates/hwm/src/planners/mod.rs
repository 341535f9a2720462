//! Sampling-based planners over frozen latent world models: CEM and MPPI
//! inner loops, flat and hierarchical planning, and closed-loop MPC.

mod cem;
mod energy;
mod hier;
mod mpc;
mod mppi;

pub use cem::optimize_cem;
pub use energy::{final_state_energy, rollout_high, rollout_low, Bounds};
pub use hier::{plan_flat, plan_hier, verify_subgoal, PlanResult};
pub use mpc::{mpc_run, EpisodeResult, PlannerKind};
pub use mppi::optimize_mppi;

use crate::config::{Algo, OptimizerConfig};
use rand_chacha::ChaCha8Rng;

/// Outcome of one inner-loop optimization.
#[derive(Debug, Clone)]
pub struct Optimized {
    pub x: Vec<f32>,
    pub energy: f32,
    pub iterations: usize,
    pub samples_evaluated: usize,
}

/// Run the configured inner-loop optimizer on a `dim`-dimensional
/// decision variable. `eval` maps a flat candidate batch `[s * dim]` to
/// `s` costs.
pub fn optimize(
    cfg: &OptimizerConfig,
    dim: usize,
    bounds: &Bounds,
    rng: &mut ChaCha8Rng,
    eval: &mut dyn FnMut(&[f32], usize) -> Vec<f32>,
) -> Optimized {
    match cfg.algo {
        Algo::Cem => optimize_cem(cfg, dim, bounds, rng, eval),
        Algo::Mppi => optimize_mppi(cfg, dim, bounds, rng, eval),
    }
}
