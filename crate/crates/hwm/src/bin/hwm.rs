use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hwm::bench::{
    compute_sweep, evaluate, horizon_error_curve, sample_tasks, BenchmarkRecord, EvalSummary,
    SweepGrid, SweepRow, TaskSpec,
};
use hwm::config::RunConfig;
use hwm::env::{
    collect_dataset, generate_layout, load_dataset, render, save_dataset, Dataset, EnvState,
    MazeLayout,
};
use hwm::error::{HwmError, Result};
use hwm::models::{
    load_high, load_low, save_high, save_low, train_high, train_low, HighModel, LowModel,
};
use hwm::planners::{plan_flat, plan_hier, PlannerKind};
use hwm::seed::{stage_seed, stream_seed};

#[derive(Parser)]
#[command(name = "hwm", about = "Hierarchical latent world-model planning on procedural mazes")]
struct Cli {
    /// Worker count (this build evaluates sequentially; values > 1 are
    /// accepted and ignored for reproducibility).
    #[arg(long, default_value_t = 1, global = true)]
    workers: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate train/test maze layouts and exploration datasets.
    GenData {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (train.hwmd / test.hwmd).
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train the low- or high-level world model.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Training dataset (.hwmd).
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_parser = ["low", "high"])]
        level: String,
        /// Low-level checkpoint; required when --level high.
        #[arg(long)]
        low_model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Plan once from a start to a goal cell and print PlanResult JSON.
    Plan {
        #[arg(long)]
        config: PathBuf,
        /// Directory with low.hwmp (and high.hwmp for --mode hier).
        #[arg(long)]
        models: PathBuf,
        /// Dataset holding the layout to plan in.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        layout: usize,
        /// Start cell "cx,cy".
        #[arg(long)]
        start: String,
        /// Goal cell "cx,cy".
        #[arg(long)]
        goal: String,
        #[arg(long, value_parser = ["flat", "hier"])]
        mode: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Closed-loop benchmark on held-out layouts; writes the four CSVs.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        models: PathBuf,
        /// Held-out dataset (.hwmd) whose layouts define the tasks.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_parser = ["easy", "medium", "hard"])]
        band: String,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Full compute sweep over a planner grid; writes sweep.csv/pareto.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// TOML grid file; defaults to the full paper grid when omitted.
        #[arg(long)]
        grid_file: Option<PathBuf>,
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_parser = ["easy", "medium", "hard"], default_value = "medium")]
        band: String,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::GenData { config, out, seed } => gen_data(&config, &out, seed),
        Cmd::Train {
            config,
            data,
            level,
            low_model,
            out,
            seed,
        } => train(&config, &data, &level, low_model.as_deref(), &out, seed),
        Cmd::Plan {
            config,
            models,
            data,
            layout,
            start,
            goal,
            mode,
            seed,
        } => plan(&config, &models, &data, layout, &start, &goal, &mode, seed),
        Cmd::Bench {
            config,
            models,
            data,
            band,
            out_dir,
            seed,
        } => bench(&config, &models, &data, &band, &out_dir, seed),
        Cmd::Sweep {
            config,
            grid_file,
            models,
            data,
            band,
            out_dir,
            seed,
        } => sweep(&config, grid_file.as_deref(), &models, &data, &band, &out_dir, seed),
    }
}

fn make_layouts(cfg: &RunConfig, count: usize, stage: u64, offset: u64) -> Result<Vec<MazeLayout>> {
    (0..count)
        .map(|i| {
            generate_layout(
                stream_seed(stage, &[offset + i as u64]),
                cfg.env.g,
                (cfg.env.free_frac[0], cfg.env.free_frac[1]),
                cfg.env.cell_size,
                cfg.env.max_layout_attempts,
            )
        })
        .collect()
}

fn gen_data(config: &Path, out: &Path, seed: u64) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    std::fs::create_dir_all(out)?;
    let sim = hwm::env::SimParams {
        a_scale: cfg.env.a_scale,
        v_max: cfg.env.v_max,
    };
    let stage = stage_seed(seed, "gen-data");
    let train_layouts = make_layouts(&cfg, cfg.data.train_layouts, stage, 0)?;
    let test_layouts = make_layouts(&cfg, cfg.data.test_layouts, stage, cfg.data.train_layouts as u64)?;
    let train_ds = collect_dataset(
        &train_layouts,
        cfg.data.episodes_per_layout,
        cfg.data.steps,
        cfg.env.action_repeat,
        &sim,
        cfg.env.resolution as u32,
        stream_seed(stage, &[1_000_000]),
    );
    let test_ds = collect_dataset(
        &test_layouts,
        cfg.data.episodes_per_layout / 4 + 1,
        cfg.data.steps,
        cfg.env.action_repeat,
        &sim,
        cfg.env.resolution as u32,
        stream_seed(stage, &[1_000_001]),
    );
    save_dataset(&out.join("train.hwmd"), &train_ds)?;
    save_dataset(&out.join("test.hwmd"), &test_ds)?;
    println!(
        "wrote {} train trajectories on {} layouts, {} test trajectories on {} layouts",
        train_ds.trajectories.len(),
        train_ds.layouts.len(),
        test_ds.trajectories.len(),
        test_ds.layouts.len()
    );
    Ok(())
}

fn train(
    config: &Path,
    data: &Path,
    level: &str,
    low_model: Option<&Path>,
    out: &Path,
    seed: u64,
) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let ds = load_dataset(data)?;
    if let Some(dir) = out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    match level {
        "low" => {
            let (model, log) = train_low(&cfg, &ds, stage_seed(seed, "train-low"))?;
            save_low(out, &model, &cfg.hash())?;
            write_train_log(out, &log)?;
            println!("low-level model saved to {}", out.display());
        }
        "high" => {
            let low_path = low_model.ok_or_else(|| {
                HwmError::Invalid("--low-model is required when training the high level".into())
            })?;
            let (low, _) = load_low(low_path)?;
            let (model, log) = train_high(&cfg, &ds, &low, stage_seed(seed, "train-high"))?;
            save_high(out, &model, &cfg.hash())?;
            write_train_log(out, &log)?;
            println!("high-level model saved to {}", out.display());
        }
        other => return Err(HwmError::Invalid(format!("unknown level `{other}`"))),
    }
    Ok(())
}

fn write_train_log(model_path: &Path, log: &[hwm::models::TrainLogRow]) -> Result<()> {
    let mut s = model_path.as_os_str().to_owned();
    s.push(".log.csv");
    let mut w = csv::Writer::from_path(PathBuf::from(s)).map_err(csv_err)?;
    for row in log {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> HwmError {
    HwmError::Format(e.to_string())
}

fn parse_cell(s: &str) -> Result<(usize, usize)> {
    let mut it = s.split(',');
    let parse = |v: Option<&str>| -> Result<usize> {
        v.and_then(|x| x.trim().parse().ok())
            .ok_or_else(|| HwmError::Invalid(format!("bad cell spec `{s}`, expected \"cx,cy\"")))
    };
    let x = parse(it.next())?;
    let y = parse(it.next())?;
    if it.next().is_some() {
        return Err(HwmError::Invalid(format!("bad cell spec `{s}`")));
    }
    Ok((x, y))
}

fn load_models(dir: &Path, need_high: bool) -> Result<(LowModel, Option<HighModel>)> {
    let (low, _) = load_low(&dir.join("low.hwmp"))?;
    let high = if need_high {
        let (h, _) = load_high(&dir.join("high.hwmp"))?;
        let enc = hwm::models::encoder_hash(&low.encoder);
        if h.encoder_hash != enc {
            return Err(HwmError::Lineage(format!(
                "high-level model was trained against encoder {}, supplied low-level model has {enc}",
                h.encoder_hash
            )));
        }
        Some(h)
    } else {
        None
    };
    Ok((low, high))
}

#[allow(clippy::too_many_arguments)]
fn plan(
    config: &Path,
    models: &Path,
    data: &Path,
    layout_idx: usize,
    start: &str,
    goal: &str,
    mode: &str,
    seed: u64,
) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let ds = load_dataset(data)?;
    let layout = ds
        .layouts
        .get(layout_idx)
        .ok_or_else(|| HwmError::Invalid(format!("layout index {layout_idx} out of range")))?;
    let (low, high) = load_models(models, mode == "hier")?;
    let sc = parse_cell(start)?;
    let gc = parse_cell(goal)?;
    let cs = layout.cell_size();
    let s = EnvState::at_rest((sc.0 as f32 + 0.5) * cs, (sc.1 as f32 + 0.5) * cs);
    let g = EnvState::at_rest((gc.0 as f32 + 0.5) * cs, (gc.1 as f32 + 0.5) * cs);
    let rp = low.hp.render_params();
    let so = render(&s, layout, &rp);
    let go = render(&g, layout, &rp);
    let z1 = low.encode_one(&so.image, so.proprio);
    let zg = low.encode_one(&go.image, go.proprio);
    let mut rng = ChaCha8Rng::seed_from_u64(stage_seed(seed, "plan"));
    let result = match &high {
        Some(h) => plan_hier(&low, h, &z1, &zg, &cfg.planner, &mut rng),
        None => plan_flat(&low, &z1, &zg, &cfg.planner, &mut rng),
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&result).map_err(|e| HwmError::Format(e.to_string()))?
    );
    Ok(())
}

fn write_results_csv(path: &Path, records: &[BenchmarkRecord]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        f,
        "task_id,layout_id,d,planner,trial,success,steps_used,final_dist,samples_evaluated,replans,valid_plans,subgoals_consistent,config_hash"
    )?;
    for r in records {
        writeln!(
            f,
            "{},{},{},{},{},{},{},{:.6},{},{},{},{},{}",
            r.task_id,
            r.layout_id,
            r.d,
            r.planner,
            r.trial,
            r.success,
            r.steps_used,
            r.final_dist,
            r.samples_evaluated,
            r.replans,
            r.valid_plans,
            r.subgoals_consistent,
            r.config_hash
        )?;
    }
    Ok(())
}

fn write_timing_csv(path: &Path, records: &[BenchmarkRecord]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "task_id,planner,trial,plan_ms_total,plan_ms_mean")?;
    for r in records {
        writeln!(
            f,
            "{},{},{},{:.3},{:.3}",
            r.task_id, r.planner, r.trial, r.plan_ms_total, r.plan_ms_mean
        )?;
    }
    Ok(())
}

fn write_sweep_csv(path: &Path, rows: &[SweepRow], pareto_only: bool) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        f,
        "id,kind,samples,high_samples,horizon,n,successes,success_rate,ci_lo,ci_hi,mean_samples_per_plan,pareto"
    )?;
    for r in rows {
        if pareto_only && !r.pareto {
            continue;
        }
        writeln!(
            f,
            "{},{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.3},{}",
            r.id,
            r.kind,
            r.samples,
            r.high_samples,
            r.horizon,
            r.n,
            r.successes,
            r.success_rate,
            r.ci_lo,
            r.ci_hi,
            r.mean_samples_per_plan,
            r.pareto
        )?;
    }
    Ok(())
}

fn eval_both(
    cfg: &RunConfig,
    tasks: &[TaskSpec],
    layouts: &[MazeLayout],
    layout_ids: &[usize],
    low: &LowModel,
    high: &HighModel,
    seed: u64,
) -> Result<(EvalSummary, EvalSummary)> {
    let bands = [cfg.bench.band_easy, cfg.bench.band_medium, cfg.bench.band_hard];
    let hash = cfg.hash();
    let flat = evaluate(
        tasks,
        layouts,
        layout_ids,
        PlannerKind::Flat,
        &cfg.planner,
        bands,
        low,
        None,
        cfg.bench.trials,
        stream_seed(seed, &[0]),
        &hash,
    )?;
    let hier = evaluate(
        tasks,
        layouts,
        layout_ids,
        PlannerKind::Hier,
        &cfg.planner,
        bands,
        low,
        Some(high),
        cfg.bench.trials,
        stream_seed(seed, &[1]),
        &hash,
    )?;
    Ok((flat, hier))
}

fn test_layout_ids(cfg: &RunConfig, ds: &Dataset) -> Vec<usize> {
    // Held-out layouts get ids after the training block so the two sets
    // can never collide.
    (0..ds.layouts.len()).map(|i| cfg.data.train_layouts + i).collect()
}

fn bench(config: &Path, models: &Path, data: &Path, band: &str, out_dir: &Path, seed: u64) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let ds = load_dataset(data)?;
    let (low, high) = load_models(models, true)?;
    let high = high.expect("hier model requested");
    std::fs::create_dir_all(out_dir)?;
    let band_bounds = hwm::bench::band_for(&cfg.bench, band)
        .ok_or_else(|| HwmError::Invalid(format!("unknown band `{band}`")))?;
    let stage = stage_seed(seed, "bench");
    let layout_ids = test_layout_ids(&cfg, &ds);
    let tasks = sample_tasks(
        &ds.layouts,
        &layout_ids,
        band_bounds,
        cfg.bench.tasks_per_band,
        stream_seed(stage, &[0]),
    );
    if tasks.is_empty() {
        return Err(HwmError::Invalid(format!(
            "no layout in the held-out set supports the {band} band"
        )));
    }

    let (flat, hier) = eval_both(&cfg, &tasks, &ds.layouts, &layout_ids, &low, &high, stage)?;
    let mut records = flat.records.clone();
    records.extend(hier.records.iter().cloned());
    write_results_csv(&out_dir.join("results.csv"), &records)?;
    write_timing_csv(&out_dir.join("timing.csv"), &records)?;

    let curve = horizon_error_curve(
        &low,
        &high,
        &ds,
        &cfg.bench.curve_horizons,
        64,
        stream_seed(stage, &[2]),
    )?;
    {
        let mut f = std::io::BufWriter::new(std::fs::File::create(out_dir.join("horizon_curve.csv"))?);
        writeln!(f, "horizon,l1_low,l1_low_lo,l1_low_hi,l1_high,l1_high_lo,l1_high_hi")?;
        for r in &curve {
            writeln!(
                f,
                "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                r.horizon, r.l1_low, r.l1_low_lo, r.l1_low_hi, r.l1_high, r.l1_high_lo, r.l1_high_hi
            )?;
        }
    }

    // Small built-in grid so a plain bench run still emits the sweep
    // artifacts; the sweep command covers the full paper grid.
    let grid = SweepGrid {
        flat_samples: vec![cfg.planner.flat.samples],
        flat_horizons: vec![cfg.planner.flat.horizon],
        hier_low_samples: vec![cfg.planner.hier_low.samples],
        hier_high_samples: vec![cfg.planner.hier_high.samples],
        hier_high_horizons: vec![cfg.planner.hier_high.horizon],
    };
    let bands = [cfg.bench.band_easy, cfg.bench.band_medium, cfg.bench.band_hard];
    let rows = compute_sweep(
        &grid,
        &tasks,
        &ds.layouts,
        &layout_ids,
        &cfg.planner,
        bands,
        &low,
        &high,
        1,
        stream_seed(stage, &[3]),
        &cfg.hash(),
    )?;
    write_sweep_csv(&out_dir.join("sweep.csv"), &rows, false)?;
    write_sweep_csv(&out_dir.join("pareto.csv"), &rows, true)?;

    // Episode traces with probed positions for external plotting.
    write_traces(&out_dir.join("traces.json"), &cfg, &tasks, &ds.layouts, &layout_ids, &low)?;

    println!(
        "band {band}: flat {}/{} ({:.0}%), hier {}/{} ({:.0}%)",
        flat.successes,
        flat.n,
        flat.success_rate * 100.0,
        hier.successes,
        hier.n,
        hier.success_rate * 100.0
    );
    Ok(())
}

fn write_traces(
    path: &Path,
    _cfg: &RunConfig,
    tasks: &[TaskSpec],
    layouts: &[MazeLayout],
    layout_ids: &[usize],
    low: &LowModel,
) -> Result<()> {
    #[derive(serde::Serialize)]
    struct Trace<'a> {
        task: &'a TaskSpec,
        start_probe: [f32; 2],
        goal_probe: [f32; 2],
    }
    let rp = low.hp.render_params();
    let mut traces = Vec::with_capacity(tasks.len());
    for t in tasks {
        let li = layout_ids.iter().position(|&id| id == t.layout_id).unwrap();
        let so = render(&t.start, &layouts[li], &rp);
        let go = render(&t.goal, &layouts[li], &rp);
        traces.push(Trace {
            task: t,
            start_probe: low.probe(&low.encode_one(&so.image, so.proprio)),
            goal_probe: low.probe(&low.encode_one(&go.image, go.proprio)),
        });
    }
    let json = serde_json::to_string_pretty(&traces).map_err(|e| HwmError::Format(e.to_string()))?;
    std::fs::write(path, json)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    config: &Path,
    grid_file: Option<&Path>,
    models: &Path,
    data: &Path,
    band: &str,
    out_dir: &Path,
    seed: u64,
) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let ds = load_dataset(data)?;
    let (low, high) = load_models(models, true)?;
    let high = high.expect("hier model requested");
    std::fs::create_dir_all(out_dir)?;
    let grid: SweepGrid = match grid_file {
        Some(p) => toml::from_str(&std::fs::read_to_string(p)?)
            .map_err(|e| HwmError::Config(e.to_string()))?,
        None => SweepGrid::default(),
    };
    let band_bounds = hwm::bench::band_for(&cfg.bench, band)
        .ok_or_else(|| HwmError::Invalid(format!("unknown band `{band}`")))?;
    let stage = stage_seed(seed, "sweep");
    let layout_ids = test_layout_ids(&cfg, &ds);
    let tasks = sample_tasks(
        &ds.layouts,
        &layout_ids,
        band_bounds,
        cfg.bench.tasks_per_band,
        stream_seed(stage, &[0]),
    );
    let bands = [cfg.bench.band_easy, cfg.bench.band_medium, cfg.bench.band_hard];
    let rows = compute_sweep(
        &grid,
        &tasks,
        &ds.layouts,
        &layout_ids,
        &cfg.planner,
        bands,
        &low,
        &high,
        cfg.bench.trials,
        stream_seed(stage, &[1]),
        &cfg.hash(),
    )?;
    write_sweep_csv(&out_dir.join("sweep.csv"), &rows, false)?;
    write_sweep_csv(&out_dir.join("pareto.csv"), &rows, true)?;
    {
        let mut f = std::io::BufWriter::new(std::fs::File::create(out_dir.join("sweep_timing.csv"))?);
        writeln!(f, "id,kind,mean_plan_seconds")?;
        for r in &rows {
            writeln!(f, "{},{},{:.6}", r.id, r.kind, r.mean_plan_seconds)?;
        }
    }
    println!("swept {} configurations", rows.len());
    Ok(())
}
