use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::hier::{plan_flat, plan_hier};
use crate::config::PlannerConfig;
use crate::env::{render_with_walls, step_repeated, wall_channel, EnvState, MazeLayout};
use crate::models::{HighModel, LowModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PlannerKind {
    Flat,
    Hier,
}

impl PlannerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PlannerKind::Flat => "flat",
            PlannerKind::Hier => "hier",
        }
    }
}

/// One closed-loop goal-reaching attempt.
#[derive(Debug, Clone, Serialize)]
pub struct EpisodeResult {
    pub success: bool,
    /// Raw simulator steps consumed (recorded steps x action_repeat).
    pub steps_used: usize,
    pub final_dist: f32,
    pub min_dist: f32,
    pub samples_evaluated: usize,
    pub replans: usize,
    /// Hierarchical plans whose executed k actions moved the latent state
    /// closer to the chosen subgoal.
    pub valid_plans: usize,
    /// True when every hierarchical plan's subgoal matched a bit-exact
    /// recomputation from its latent actions.
    pub subgoals_consistent: bool,
    pub plan_seconds: f64,
}

/// Run receding-horizon control from `start` toward `goal` until the
/// success threshold or the raw-step budget is hit. Replans every
/// `cfg.k` executed actions.
pub fn mpc_run(
    low: &LowModel,
    high: Option<&HighModel>,
    layout: &MazeLayout,
    start: EnvState,
    goal: EnvState,
    budget_raw: usize,
    cfg: &PlannerConfig,
    rng: &mut ChaCha8Rng,
) -> EpisodeResult {
    let hp = &low.hp;
    let rp = hp.render_params();
    let sim = hp.sim_params();
    let walls = wall_channel(layout, &rp);
    let threshold = cfg.success_threshold * hp.cell_size;

    let goal_obs = render_with_walls(&goal, layout, &rp, &walls);
    let z_goal = low.encode_one(&goal_obs.image, goal_obs.proprio);

    let mut state = start;
    let mut raw_used = 0usize;
    let mut samples = 0usize;
    let mut replans = 0usize;
    let mut valid_plans = 0usize;
    let mut subgoals_consistent = true;
    let mut min_dist = state.dist_to(&goal);
    let mut plan_seconds = 0.0f64;

    while raw_used < budget_raw {
        if state.dist_to(&goal) <= threshold {
            break;
        }
        let obs = render_with_walls(&state, layout, &rp, &walls);
        let z1 = low.encode_one(&obs.image, obs.proprio);

        let t0 = std::time::Instant::now();
        let plan = match high {
            Some(h) => plan_hier(low, h, &z1, &z_goal, cfg, rng),
            None => plan_flat(low, &z1, &z_goal, cfg, rng),
        };
        plan_seconds += t0.elapsed().as_secs_f64();
        samples += plan.samples_evaluated;
        replans += 1;

        for a in plan.actions.iter().take(cfg.k) {
            state = step_repeated(&state, *a, hp.action_repeat, layout, &sim);
            raw_used += hp.action_repeat;
            min_dist = min_dist.min(state.dist_to(&goal));
            if state.dist_to(&goal) <= threshold || raw_used >= budget_raw {
                break;
            }
        }

        if let Some(h) = high {
            subgoals_consistent &= super::hier::verify_subgoal(h, &z1, &plan);
        }
        if let Some(sub) = &plan.subgoal {
            let obs2 = render_with_walls(&state, layout, &rp, &walls);
            let z2 = low.encode_one(&obs2.image, obs2.proprio);
            let before: f32 = z1.iter().zip(sub).map(|(a, b)| (a - b).abs()).sum();
            let after: f32 = z2.iter().zip(sub).map(|(a, b)| (a - b).abs()).sum();
            if after < before {
                valid_plans += 1;
            }
        }
    }

    let final_dist = state.dist_to(&goal);
    EpisodeResult {
        success: final_dist <= threshold,
        steps_used: raw_used,
        final_dist,
        min_dist,
        samples_evaluated: samples,
        replans,
        valid_plans,
        subgoals_consistent,
        plan_seconds,
    }
}
