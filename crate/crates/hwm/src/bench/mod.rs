//! Benchmark harness: task generation at controlled grid distance,
//! closed-loop evaluation with binomial intervals, compute-success
//! sweeps, and offline plan-quality metrics.

mod eval;
mod metrics;
mod sweep;
mod tasks;

pub use eval::{evaluate, wilson_interval, BenchmarkRecord, EvalSummary};
pub use metrics::{action_alignment, horizon_error_curve, offline_plan_metric, HorizonRow, PlanMetric};
pub use sweep::{compute_sweep, latent_dim_sweep, mark_pareto, DimRow, SweepGrid, SweepRow};
pub use tasks::{band_for, sample_tasks, TaskSpec};
