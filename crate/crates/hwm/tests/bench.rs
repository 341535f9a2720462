use hwm::bench::{sample_tasks, SweepGrid};
use hwm::env::generate_layout;

fn layouts(n: usize) -> Vec<hwm::env::MazeLayout> {
    (0..n as u64)
        .map(|s| generate_layout(100 + s, 8, (0.5, 0.8), 1.0, 10_000).unwrap())
        .collect()
}

#[test]
fn sampled_tasks_stay_in_band() {
    let ls = layouts(3);
    let ids = vec![10, 11, 12];
    let tasks = sample_tasks(&ls, &ids, [5, 8], 30, 1);
    assert_eq!(tasks.len(), 30);
    for t in &tasks {
        assert!((5..=8).contains(&t.d), "task distance {} out of band", t.d);
        assert!(ids.contains(&t.layout_id));
        let li = ids.iter().position(|&i| i == t.layout_id).unwrap();
        assert!(!ls[li].is_wall_cell(t.start_cell.0 as isize, t.start_cell.1 as isize));
        assert!(!ls[li].is_wall_cell(t.goal_cell.0 as isize, t.goal_cell.1 as isize));
    }
}

#[test]
fn zero_count_yields_empty() {
    let ls = layouts(1);
    assert!(sample_tasks(&ls, &[0], [5, 8], 0, 1).is_empty());
}

#[test]
fn task_sampling_is_deterministic() {
    let ls = layouts(2);
    let a = sample_tasks(&ls, &[0, 1], [3, 10], 15, 9);
    let b = sample_tasks(&ls, &[0, 1], [3, 10], 15, 9);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.start_cell, y.start_cell);
        assert_eq!(x.goal_cell, y.goal_cell);
        assert_eq!(x.d, y.d);
    }
}

#[test]
fn every_free_cell_appears_as_a_start() {
    let ls = layouts(1);
    let tasks = sample_tasks(&ls, &[0], [1, 16], 1000, 3);
    let free = ls[0].free_cells();
    for &cell in &free {
        assert!(
            tasks.iter().any(|t| t.start_cell == cell),
            "free cell {cell:?} never sampled as a start in 1000 tasks"
        );
    }
}

#[test]
fn pareto_flags_match_bruteforce_dominance() {
    use hwm::bench::SweepRow;
    // fixture points (success, compute): c is dominated by b; e dominated
    // by d; a, b, d are the frontier.
    let pts = [
        ("a", 0.2, 1.0),
        ("b", 0.6, 2.0),
        ("c", 0.5, 3.0),
        ("d", 0.9, 5.0),
        ("e", 0.9, 6.0),
    ];
    let mut rows: Vec<SweepRow> = pts
        .iter()
        .enumerate()
        .map(|(i, &(_, s, c))| SweepRow {
            id: i,
            kind: "flat".into(),
            samples: 0,
            high_samples: 0,
            horizon: 0,
            n: 10,
            successes: (s * 10.0) as usize,
            success_rate: s,
            ci_lo: 0.0,
            ci_hi: 1.0,
            mean_samples_per_plan: c,
            mean_plan_seconds: 0.0,
            pareto: false,
        })
        .collect();
    hwm::bench::mark_pareto(&mut rows);
    let expected = [true, true, false, true, false];
    for (row, (&exp, &(name, _, _))) in rows.iter().zip(expected.iter().zip(pts.iter())) {
        assert_eq!(row.pareto, exp, "point {name}");
    }
    // brute-force oracle over all pairs
    for i in 0..rows.len() {
        let dominated = (0..rows.len()).any(|j| {
            j != i
                && rows[j].success_rate >= rows[i].success_rate
                && rows[j].mean_samples_per_plan <= rows[i].mean_samples_per_plan
                && (rows[j].success_rate > rows[i].success_rate
                    || rows[j].mean_samples_per_plan < rows[i].mean_samples_per_plan)
        });
        assert_eq!(rows[i].pareto, !dominated);
    }
}

#[test]
fn default_sweep_grid_matches_paper() {
    let g = SweepGrid::default();
    assert_eq!(g.flat_samples, vec![70, 125, 250, 500, 1000, 2000, 4000]);
    assert_eq!(g.flat_horizons, vec![100, 125, 150, 175, 200, 225, 250, 275]);
    assert_eq!(g.hier_low_samples, g.flat_samples);
    assert_eq!(g.hier_high_samples, g.flat_samples);
    assert_eq!(g.hier_high_horizons, vec![25, 35, 45]);
}

#[test]
fn action_alignment_trivial_cases() {
    use hwm::bench::action_alignment;
    // exact match
    let (cos, l1, zero) = action_alignment([0.3, 0.4], [0.3, 0.4]);
    assert!((cos - 1.0).abs() < 1e-6 && l1 < 1e-6 && !zero);
    // scale invariance
    let (cos, l1, _) = action_alignment([0.6, 0.8], [0.3, 0.4]);
    assert!((cos - 1.0).abs() < 1e-6 && l1 < 1e-6);
    // antiparallel
    let (cos, _, zero) = action_alignment([-1.0, 0.0], [2.0, 0.0]);
    assert!((cos + 1.0).abs() < 1e-6 && !zero);
    // zero-vector plan flagged
    let (cos, l1, zero) = action_alignment([0.0, 0.0], [1.0, 0.0]);
    assert!(cos == 0.0 && (l1 - 2.0).abs() < 1e-12 && zero);
}

#[test]
fn latent_dim_sweep_smoke() {
    use hwm::bench::{latent_dim_sweep, sample_tasks};
    use hwm::config::RunConfig;
    use hwm::env::{collect_dataset, SimParams};
    use hwm::models::train_low;

    let toml = r#"
[env]
resolution = 16
border_px = 2
action_repeat = 2

[data]
train_layouts = 1
test_layouts = 1
episodes_per_layout = 6
steps = 30

[model]
d_z = 8
d_l = 4
enc_channels = [4, 4, 4]
hidden_low = 16
hidden_high = 16
hidden_action = 16
max_chunk = 4
stride = 4
waypoints = 3

[train_low]
epochs = 1
steps_per_epoch = 3
batch = 8
pred_t = 4

[train_high]
epochs = 1
steps_per_epoch = 3
batch = 8
pred_t = 3

[planner]
budget_easy = 40
budget_medium = 40
budget_hard = 40

[planner.flat]
samples = 8
iters = 1
horizon = 4
elites = 4

[planner.hier_high]
samples = 8
iters = 1
horizon = 2
elites = 4

[planner.hier_low]
samples = 8
iters = 1
horizon = 4
elites = 4

[bench]
tasks_per_band = 2
trials = 1
curve_horizons = [4]
"#;
    let cfg = RunConfig::from_toml(toml).unwrap();
    let ls = layouts(1);
    let sim = SimParams {
        a_scale: cfg.env.a_scale,
        v_max: cfg.env.v_max,
    };
    let ds = collect_dataset(
        &ls,
        cfg.data.episodes_per_layout,
        cfg.data.steps,
        cfg.env.action_repeat,
        &sim,
        cfg.env.resolution as u32,
        5,
    );
    let (low, _) = train_low(&cfg, &ds, 5).unwrap();
    let ids = vec![0usize];
    let tasks = sample_tasks(&ls, &ids, [2, 6], 2, 5);
    let rows = latent_dim_sweep(&[1, 2], &cfg, &ds, &tasks, &ls, &ids, &low, 5).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].d_l, 1);
    assert_eq!(rows[1].d_l, 2);
    for r in &rows {
        assert_eq!(r.n, 2);
        assert!((0.0..=1.0).contains(&r.success_rate));
        assert!((0.0..=1.0).contains(&r.plan_validity));
    }
}
