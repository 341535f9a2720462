use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::tasks::TaskSpec;
use crate::config::PlannerConfig;
use crate::env::{grid_path, render, Dataset, MazeLayout};
use crate::error::{HwmError, Result};
use crate::models::{chunk_features, encode_states_raw, HighModel, LowModel};
use crate::planners::{plan_flat, plan_hier, rollout_high, rollout_low};
use ndcompute::Tensor;

/// Prediction error at one horizon for both model levels, with
/// bootstrap 95% intervals over the held-out windows.
#[derive(Debug, Clone, Serialize)]
pub struct HorizonRow {
    pub horizon: usize,
    pub l1_low: f64,
    pub l1_low_lo: f64,
    pub l1_low_hi: f64,
    pub l1_high: f64,
    pub l1_high_lo: f64,
    pub l1_high_hi: f64,
}

fn bootstrap_ci(errors: &[f64], rng: &mut ChaCha8Rng) -> (f64, f64) {
    let n = errors.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let reps = 1000;
    let mut means: Vec<f64> = (0..reps)
        .map(|_| {
            (0..n).map(|_| errors[rng.gen_range(0..n)]).sum::<f64>() / n as f64
        })
        .collect();
    means.sort_by(f64::total_cmp);
    (means[(reps as f64 * 0.025) as usize], means[(reps as f64 * 0.975) as usize])
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Autoregressive prediction error against encoded ground truth, for the
/// low-level model at each horizon and the high-level model at the
/// minimal number of strides covering it.
pub fn horizon_error_curve(
    low: &LowModel,
    high: &HighModel,
    ds: &Dataset,
    horizons: &[usize],
    windows_per_horizon: usize,
    seed: u64,
) -> Result<Vec<HorizonRow>> {
    let stride = high.hp.stride;
    if horizons.iter().any(|&h| h == 0) {
        return Err(HwmError::Invalid("horizons must be positive".into()));
    }
    let latents = encode_states_raw(low, ds);
    let d_z = low.hp.d_z;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(horizons.len());
    for &h in horizons {
        // The high level predicts in whole strides: use the minimal number
        // of strides covering h, each against its own ground-truth target.
        let steps = h.div_ceil(stride);
        let h_high = steps * stride;
        let span = h.max(h_high);
        let ok: Vec<usize> = (0..ds.trajectories.len())
            .filter(|&i| ds.trajectories[i].len() > span)
            .collect();
        if ok.is_empty() {
            return Err(HwmError::Invalid(format!(
                "no held-out trajectory covers horizon {h}"
            )));
        }
        let mut err_low = Vec::with_capacity(windows_per_horizon);
        let mut err_high = Vec::with_capacity(windows_per_horizon);
        for _ in 0..windows_per_horizon {
            let ti = ok[rng.gen_range(0..ok.len())];
            let tr = &ds.trajectories[ti];
            let start = rng.gen_range(0..tr.len() - span);
            let z1 = &latents[ti][start * d_z..(start + 1) * d_z];
            let zt = &latents[ti][(start + h) * d_z..(start + h + 1) * d_z];
            let zt_high = &latents[ti][(start + h_high) * d_z..(start + h_high + 1) * d_z];

            let mut acts = Vec::with_capacity(h * 2);
            for t in 0..h {
                acts.extend_from_slice(&tr.actions[start + t]);
            }
            let zf = rollout_low(low, z1, &acts, 1, h);
            err_low.push(l1(zf.data(), zt));

            let mut lats = Vec::with_capacity(steps * high.hp.d_l);
            for i in 0..steps {
                let t0 = start + i * stride;
                let feats = chunk_features::<f32>(&tr.actions[t0..t0 + stride], high.hp.max_chunk)
                    .ok_or_else(|| HwmError::Invalid("stride exceeds max_chunk".into()))?;
                let f = Tensor::new(vec![1, high.hp.chunk_feat_dim()], feats).unwrap();
                lats.extend_from_slice(high.action_encoder.forward_raw(&f).data());
            }
            let zh = rollout_high(high, z1, &lats, 1, steps);
            err_high.push(l1(zh.last().unwrap().data(), zt_high));
        }
        let (lo_lo, lo_hi) = bootstrap_ci(&err_low, &mut rng);
        let (hi_lo, hi_hi) = bootstrap_ci(&err_high, &mut rng);
        rows.push(HorizonRow {
            horizon: h,
            l1_low: mean(&err_low),
            l1_low_lo: lo_lo,
            l1_low_hi: lo_hi,
            l1_high: mean(&err_high),
            l1_high_lo: hi_lo,
            l1_high_hi: hi_hi,
        });
    }
    Ok(rows)
}

fn l1(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() as f64).sum::<f64>() / a.len() as f64
}

/// Aggregate-action alignment against a scripted BFS expert.
#[derive(Debug, Clone, Serialize)]
pub struct PlanMetric {
    pub mean_cosine: f64,
    pub mean_l1: f64,
    /// Plans whose aggregate action was the zero vector (cosine recorded
    /// as 0).
    pub zero_plans: usize,
}

/// Cosine and unit-normalized L1 between an aggregate plan action and the
/// expert displacement; a degenerate (near-zero) vector on either side is
/// flagged and recorded as cosine 0 / L1 2.
pub fn action_alignment(agg: [f32; 2], expert: [f32; 2]) -> (f64, f64, bool) {
    let na = (agg[0] * agg[0] + agg[1] * agg[1]).sqrt();
    let ne = (expert[0] * expert[0] + expert[1] * expert[1]).sqrt();
    if na < 1e-9 || ne < 1e-9 {
        return (0.0, 2.0, true);
    }
    let cos = ((agg[0] * expert[0] + agg[1] * expert[1]) / (na * ne)) as f64;
    // L1 between unit-normalized vectors so action and displacement
    // scales are comparable.
    let l1n = ((agg[0] / na - expert[0] / ne).abs() + (agg[1] / na - expert[1] / ne).abs()) as f64;
    (cos, l1n, false)
}

/// Compare the aggregate inferred action of each task's first plan with
/// the net displacement of the first few cells of the BFS shortest path.
#[allow(clippy::too_many_arguments)]
pub fn offline_plan_metric(
    low: &LowModel,
    high: Option<&HighModel>,
    tasks: &[TaskSpec],
    layouts: &[MazeLayout],
    layout_ids: &[usize],
    cfg: &PlannerConfig,
    seed: u64,
) -> Result<PlanMetric> {
    let rp = low.hp.render_params();
    let mut cosines = Vec::with_capacity(tasks.len());
    let mut l1s = Vec::with_capacity(tasks.len());
    let mut zero_plans = 0;
    for task in tasks {
        let li = layout_ids
            .iter()
            .position(|&id| id == task.layout_id)
            .ok_or_else(|| HwmError::Invalid(format!("task references unknown layout {}", task.layout_id)))?;
        let layout = &layouts[li];
        let path = grid_path(layout, task.start_cell, task.goal_cell)
            .ok_or_else(|| HwmError::Invalid("task cells are disconnected".into()))?;
        let leg = path.len().min(6) - 1; // net displacement of the first 5 cells
        let expert = [
            (path[leg].0 as f32 - path[0].0 as f32) * layout.cell_size(),
            (path[leg].1 as f32 - path[0].1 as f32) * layout.cell_size(),
        ];

        let start_obs = render(&task.start, layout, &rp);
        let goal_obs = render(&task.goal, layout, &rp);
        let z1 = low.encode_one(&start_obs.image, start_obs.proprio);
        let zg = low.encode_one(&goal_obs.image, goal_obs.proprio);
        let mut rng = ChaCha8Rng::seed_from_u64(crate::seed::stream_seed(seed, &[task.id as u64]));
        let plan = match high {
            Some(h) => plan_hier(low, h, &z1, &zg, cfg, &mut rng),
            None => plan_flat(low, &z1, &zg, cfg, &mut rng),
        };
        let agg = plan.actions.iter().fold([0.0f32; 2], |a, x| [a[0] + x[0], a[1] + x[1]]);
        let (cos, l1n, zero) = action_alignment(agg, expert);
        if zero {
            zero_plans += 1;
        }
        cosines.push(cos);
        l1s.push(l1n);
    }
    Ok(PlanMetric {
        mean_cosine: mean(&cosines),
        mean_l1: mean(&l1s),
        zero_plans,
    })
}
