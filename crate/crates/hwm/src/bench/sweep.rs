use serde::{Deserialize, Serialize};

use super::eval::evaluate;
use super::tasks::TaskSpec;
use crate::config::{PlannerConfig, RunConfig};
use crate::env::{Dataset, MazeLayout};
use crate::error::Result;
use crate::models::{train_high, HighModel, LowModel};
use crate::planners::PlannerKind;
use crate::seed::stream_seed;

/// Grid of planner configurations to sweep; defaults are the full paper
/// grids, desk-scale runs load a reduced grid file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepGrid {
    pub flat_samples: Vec<usize>,
    pub flat_horizons: Vec<usize>,
    pub hier_low_samples: Vec<usize>,
    pub hier_high_samples: Vec<usize>,
    pub hier_high_horizons: Vec<usize>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        let samples = vec![70, 125, 250, 500, 1000, 2000, 4000];
        SweepGrid {
            flat_samples: samples.clone(),
            flat_horizons: vec![100, 125, 150, 175, 200, 225, 250, 275],
            hier_low_samples: samples.clone(),
            hier_high_samples: samples,
            hier_high_horizons: vec![25, 35, 45],
        }
    }
}

/// One sweep point with its evaluation outcome.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub id: usize,
    pub kind: String,
    pub samples: usize,
    pub high_samples: usize,
    pub horizon: usize,
    pub n: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Deterministic compute proxy: mean model evaluations per plan.
    /// Pareto flags use this rather than wall time so sweep artifacts are
    /// byte-reproducible; wall time is logged separately.
    pub mean_samples_per_plan: f64,
    pub mean_plan_seconds: f64,
    pub pareto: bool,
}

/// Mark rows not dominated by any other row (higher success, lower or
/// equal compute — or equal success, strictly lower compute).
pub fn mark_pareto(rows: &mut [SweepRow]) {
    let snapshot: Vec<(f64, f64)> = rows.iter().map(|r| (r.success_rate, r.mean_samples_per_plan)).collect();
    for (i, row) in rows.iter_mut().enumerate() {
        let (s, t) = snapshot[i];
        row.pareto = !snapshot.iter().enumerate().any(|(j, &(s2, t2))| {
            j != i && s2 >= s && t2 <= t && (s2 > s || t2 < t)
        });
    }
}

fn mean_samples(records: &[super::eval::BenchmarkRecord]) -> f64 {
    let (samples, replans) = records
        .iter()
        .fold((0usize, 0usize), |(s, r), rec| (s + rec.samples_evaluated, r + rec.replans));
    if replans > 0 {
        samples as f64 / replans as f64
    } else {
        0.0
    }
}

/// Evaluate every grid point on the same task set; rows carry Pareto
/// flags over (success rate, mean plan time).
#[allow(clippy::too_many_arguments)]
pub fn compute_sweep(
    grid: &SweepGrid,
    tasks: &[TaskSpec],
    layouts: &[MazeLayout],
    layout_ids: &[usize],
    base: &PlannerConfig,
    bench_bands: [[usize; 2]; 3],
    low: &LowModel,
    high: &HighModel,
    trials: usize,
    seed: u64,
    config_hash: &str,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    let mut id = 0;
    for &s in &grid.flat_samples {
        for &h in &grid.flat_horizons {
            let mut cfg = base.clone();
            cfg.flat.samples = s;
            cfg.flat.horizon = h;
            let sum = evaluate(
                tasks, layouts, layout_ids, PlannerKind::Flat, &cfg, bench_bands, low, None,
                trials, stream_seed(seed, &[id as u64]), config_hash,
            )?;
            rows.push(SweepRow {
                id,
                kind: "flat".into(),
                samples: s,
                high_samples: 0,
                horizon: h,
                n: sum.n,
                successes: sum.successes,
                success_rate: sum.success_rate,
                ci_lo: sum.ci_lo,
                ci_hi: sum.ci_hi,
                mean_samples_per_plan: mean_samples(&sum.records),
                mean_plan_seconds: sum.mean_plan_seconds,
                pareto: false,
            });
            id += 1;
        }
    }
    for &ls in &grid.hier_low_samples {
        for &hs in &grid.hier_high_samples {
            for &hh in &grid.hier_high_horizons {
                let mut cfg = base.clone();
                cfg.hier_low.samples = ls;
                cfg.hier_high.samples = hs;
                cfg.hier_high.horizon = hh;
                let sum = evaluate(
                    tasks, layouts, layout_ids, PlannerKind::Hier, &cfg, bench_bands, low,
                    Some(high), trials, stream_seed(seed, &[id as u64]), config_hash,
                )?;
                rows.push(SweepRow {
                    id,
                    kind: "hier".into(),
                    samples: ls,
                    high_samples: hs,
                    horizon: hh,
                    n: sum.n,
                    successes: sum.successes,
                    success_rate: sum.success_rate,
                    ci_lo: sum.ci_lo,
                    ci_hi: sum.ci_hi,
                    mean_samples_per_plan: mean_samples(&sum.records),
                    mean_plan_seconds: sum.mean_plan_seconds,
                    pareto: false,
                });
                id += 1;
            }
        }
    }
    mark_pareto(&mut rows);
    Ok(rows)
}

/// Hierarchical success and plan validity as a function of the latent
/// action dimension; trains one high-level model per value.
#[derive(Debug, Clone, Serialize)]
pub struct DimRow {
    pub d_l: usize,
    pub n: usize,
    pub success_rate: f64,
    /// Fraction of plans whose executed prefix made latent progress
    /// toward the chosen subgoal.
    pub plan_validity: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn latent_dim_sweep(
    d_ls: &[usize],
    cfg: &RunConfig,
    train_ds: &Dataset,
    tasks: &[TaskSpec],
    layouts: &[MazeLayout],
    layout_ids: &[usize],
    low: &LowModel,
    seed: u64,
) -> Result<Vec<DimRow>> {
    let bands = [cfg.bench.band_easy, cfg.bench.band_medium, cfg.bench.band_hard];
    let hash = cfg.hash();
    let mut rows = Vec::with_capacity(d_ls.len());
    for (i, &d_l) in d_ls.iter().enumerate() {
        let mut c = cfg.clone();
        c.model.d_l = d_l;
        c.validate()?;
        let (high, _) = train_high(&c, train_ds, low, stream_seed(seed, &[i as u64, 0]))?;
        let sum = evaluate(
            tasks, layouts, layout_ids, PlannerKind::Hier, &c.planner, bands, low, Some(&high),
            cfg.bench.trials, stream_seed(seed, &[i as u64, 1]), &hash,
        )?;
        let (replans, valid): (usize, usize) = sum
            .records
            .iter()
            .fold((0, 0), |(r, v), rec| (r + rec.replans, v + rec.valid_plans));
        rows.push(DimRow {
            d_l,
            n: sum.n,
            success_rate: sum.success_rate,
            plan_validity: if replans > 0 { valid as f64 / replans as f64 } else { 0.0 },
        });
    }
    Ok(rows)
}
