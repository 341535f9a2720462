use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::energy::{final_state_energy, rollout_high, rollout_low, Bounds};
use super::optimize;
use crate::config::PlannerConfig;
use crate::models::{HighModel, LowModel};

/// One planning call: the chosen action sequence plus search statistics.
#[derive(Debug, Clone, Serialize)]
pub struct PlanResult {
    pub mode: String,
    pub horizon: usize,
    pub energy: f32,
    pub iterations: usize,
    pub samples_evaluated: usize,
    pub actions: Vec<[f32; 2]>,
    /// Hierarchical only: the optimized latent-action plan, flat `[H * d_l]`.
    pub latents: Vec<f32>,
    /// Hierarchical only: the subgoal latent handed to the low level.
    pub subgoal: Option<Vec<f32>>,
}

/// Recompute the subgoal from a hierarchical plan's latent actions and
/// check it matches bit-exactly (it must be the first unrolled subgoal,
/// or the second when the degenerate-subgoal fallback fired).
pub fn verify_subgoal(high: &HighModel, z1: &[f32], plan: &PlanResult) -> bool {
    let (Some(sub), false) = (&plan.subgoal, plan.latents.is_empty()) else {
        return false;
    };
    let hh = plan.latents.len() / high.hp.d_l;
    let unrolled = rollout_high(high, z1, &plan.latents, 1, hh);
    unrolled[0].data() == sub.as_slice()
        || (unrolled.len() > 1 && unrolled[1].data() == sub.as_slice())
}

/// Flat planning: optimize a primitive action sequence directly against
/// the goal latent.
pub fn plan_flat(
    low: &LowModel,
    z1: &[f32],
    z_goal: &[f32],
    cfg: &PlannerConfig,
    rng: &mut ChaCha8Rng,
) -> PlanResult {
    let oc = &cfg.flat;
    let h = oc.horizon;
    let dim = h * 2;
    let bounds = Bounds::uniform(dim, -1.0, 1.0);
    let mut eval = |cands: &[f32], s: usize| {
        let z = rollout_low(low, z1, cands, s, h);
        final_state_energy(&z, z_goal)
    };
    let opt = optimize(oc, dim, &bounds, rng, &mut eval);
    PlanResult {
        mode: "flat".into(),
        horizon: h,
        energy: opt.energy,
        iterations: opt.iterations,
        samples_evaluated: opt.samples_evaluated,
        actions: (0..h).map(|t| [opt.x[2 * t], opt.x[2 * t + 1]]).collect(),
        latents: Vec::new(),
        subgoal: None,
    }
}

/// Hierarchical planning: search latent actions against the high-level
/// model, take the first predicted subgoal, then plan primitive actions
/// toward it with the low-level model.
pub fn plan_hier(
    low: &LowModel,
    high: &HighModel,
    z1: &[f32],
    z_goal: &[f32],
    cfg: &PlannerConfig,
    rng: &mut ChaCha8Rng,
) -> PlanResult {
    let hc = &cfg.hier_high;
    let lc = &cfg.hier_low;
    let d_l = high.hp.d_l;
    let hh = hc.horizon;
    let dim_h = hh * d_l;
    let h_bounds = Bounds::tiled(&high.l_action_std, hh, cfg.latent_bound_sigmas as f32);
    let mut h_eval = |cands: &[f32], s: usize| {
        let traj = rollout_high(high, z1, cands, s, hh);
        final_state_energy(traj.last().unwrap(), z_goal)
    };
    let h_opt = optimize(hc, dim_h, &h_bounds, rng, &mut h_eval);

    // Unroll the chosen latent plan into subgoals; target the first one,
    // or the second if the first is degenerate (already at z1).
    let subgoals = rollout_high(high, z1, &h_opt.x, 1, hh);
    let d_z = z1.len();
    let sg1 = subgoals[0].data();
    let delta: f32 = sg1.iter().zip(z1).map(|(a, b)| (a - b).abs()).sum::<f32>() / d_z as f32;
    let target: Vec<f32> = if delta < cfg.subgoal_epsilon as f32 && subgoals.len() > 1 {
        subgoals[1].data().to_vec()
    } else {
        sg1.to_vec()
    };

    let lh = lc.horizon;
    let dim_l = lh * 2;
    let l_bounds = Bounds::uniform(dim_l, -1.0, 1.0);
    let mut l_eval = |cands: &[f32], s: usize| {
        let z = rollout_low(low, z1, cands, s, lh);
        final_state_energy(&z, &target)
    };
    let l_opt = optimize(lc, dim_l, &l_bounds, rng, &mut l_eval);

    PlanResult {
        mode: "hier".into(),
        horizon: lh,
        energy: l_opt.energy,
        iterations: h_opt.iterations + l_opt.iterations,
        samples_evaluated: h_opt.samples_evaluated + l_opt.samples_evaluated,
        actions: (0..lh).map(|t| [l_opt.x[2 * t], l_opt.x[2 * t + 1]]).collect(),
        latents: h_opt.x,
        subgoal: Some(target),
    }
}
