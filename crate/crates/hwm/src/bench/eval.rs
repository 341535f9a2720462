use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::tasks::TaskSpec;
use crate::config::PlannerConfig;
use crate::env::MazeLayout;
use crate::error::{HwmError, Result};
use crate::models::{HighModel, LowModel};
use crate::planners::{mpc_run, PlannerKind};
use crate::seed::stream_seed;

/// One (task, trial) evaluation row.
#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkRecord {
    pub task_id: usize,
    pub layout_id: usize,
    pub d: usize,
    pub planner: String,
    pub trial: usize,
    pub success: bool,
    pub steps_used: usize,
    pub final_dist: f32,
    pub samples_evaluated: usize,
    pub replans: usize,
    pub valid_plans: usize,
    pub subgoals_consistent: bool,
    pub plan_ms_total: f64,
    pub plan_ms_mean: f64,
    pub config_hash: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalSummary {
    pub planner: String,
    pub n: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub mean_plan_seconds: f64,
    pub records: Vec<BenchmarkRecord>,
}

/// Wilson score interval for a binomial proportion at z = 1.96.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.96f64;
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = (z / denom) * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Raw-step budget for a task, from the band its grid distance falls in.
pub fn budget_for(cfg: &PlannerConfig, bench_bands: [[usize; 2]; 3], d: usize) -> usize {
    let [easy, medium, _hard] = bench_bands;
    if d <= easy[1] {
        cfg.budget_easy
    } else if d <= medium[1] {
        cfg.budget_medium
    } else {
        cfg.budget_hard
    }
}

/// Run every task x trial through closed-loop MPC and aggregate.
#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    tasks: &[TaskSpec],
    layouts: &[MazeLayout],
    layout_ids: &[usize],
    kind: PlannerKind,
    cfg: &PlannerConfig,
    bench_bands: [[usize; 2]; 3],
    low: &LowModel,
    high: Option<&HighModel>,
    trials: usize,
    seed: u64,
    config_hash: &str,
) -> Result<EvalSummary> {
    if kind == PlannerKind::Hier && high.is_none() {
        return Err(HwmError::Invalid("hierarchical evaluation needs a high-level model".into()));
    }
    let mut records = Vec::with_capacity(tasks.len() * trials);
    let mut successes = 0;
    let mut plan_s = 0.0;
    for task in tasks {
        let li = layout_ids
            .iter()
            .position(|&id| id == task.layout_id)
            .ok_or_else(|| HwmError::Invalid(format!("task references unknown layout {}", task.layout_id)))?;
        let layout = &layouts[li];
        let budget = budget_for(cfg, bench_bands, task.d);
        for trial in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(
                seed,
                &[task.id as u64, trial as u64, kind as u64],
            ));
            let high_in = match kind {
                PlannerKind::Flat => None,
                PlannerKind::Hier => high,
            };
            let ep = mpc_run(low, high_in, layout, task.start, task.goal, budget, cfg, &mut rng);
            if ep.success {
                successes += 1;
            }
            plan_s += ep.plan_seconds;
            records.push(BenchmarkRecord {
                task_id: task.id,
                layout_id: task.layout_id,
                d: task.d,
                planner: kind.as_str().into(),
                trial,
                success: ep.success,
                steps_used: ep.steps_used,
                final_dist: ep.final_dist,
                samples_evaluated: ep.samples_evaluated,
                replans: ep.replans,
                valid_plans: ep.valid_plans,
                subgoals_consistent: ep.subgoals_consistent,
                plan_ms_total: ep.plan_seconds * 1e3,
                plan_ms_mean: if ep.replans > 0 {
                    ep.plan_seconds * 1e3 / ep.replans as f64
                } else {
                    0.0
                },
                config_hash: config_hash.to_string(),
            });
        }
    }
    let n = records.len();
    let (lo, hi) = wilson_interval(successes, n);
    Ok(EvalSummary {
        planner: kind.as_str().into(),
        n,
        successes,
        success_rate: if n > 0 { successes as f64 / n as f64 } else { 0.0 },
        ci_lo: lo,
        ci_hi: hi,
        mean_plan_seconds: if n > 0 { plan_s / n as f64 } else { 0.0 },
        records,
    })
}
