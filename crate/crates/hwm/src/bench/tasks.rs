use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::BenchConfig;
use crate::env::{grid_distance, EnvState, MazeLayout};

/// One goal-reaching task on a held-out layout.
#[derive(Debug, Clone, Serialize)]
pub struct TaskSpec {
    pub id: usize,
    pub layout_id: usize,
    pub start_cell: (usize, usize),
    pub goal_cell: (usize, usize),
    pub start: EnvState,
    pub goal: EnvState,
    /// BFS grid distance between the two cells.
    pub d: usize,
    pub seed: u64,
}

/// Difficulty band bounds by name.
pub fn band_for(bc: &BenchConfig, name: &str) -> Option<[usize; 2]> {
    match name {
        "easy" => Some(bc.band_easy),
        "medium" => Some(bc.band_medium),
        "hard" => Some(bc.band_hard),
        _ => None,
    }
}

fn cell_center(cell: (usize, usize), cell_size: f32) -> [f32; 2] {
    [
        (cell.0 as f32 + 0.5) * cell_size,
        (cell.1 as f32 + 0.5) * cell_size,
    ]
}

/// Rejection-sample `count` start/goal free-cell pairs whose grid
/// distance falls in `band`. Layouts on which the band is unsatisfiable
/// are skipped.
pub fn sample_tasks(
    layouts: &[MazeLayout],
    layout_ids: &[usize],
    band: [usize; 2],
    count: usize,
    seed: u64,
) -> Vec<TaskSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let usable: Vec<usize> = (0..layouts.len())
        .filter(|&i| band_satisfiable(&layouts[i], band))
        .collect();
    if usable.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(count);
    let mut id = 0;
    while out.len() < count {
        let li = usable[rng.gen_range(0..usable.len())];
        let layout = &layouts[li];
        let free = layout.free_cells();
        let start_cell = free[rng.gen_range(0..free.len())];
        let goal_cell = free[rng.gen_range(0..free.len())];
        let Some(d) = grid_distance(layout, start_cell, goal_cell) else {
            continue;
        };
        if d < band[0] || d > band[1] {
            continue;
        }
        let cs = layout.cell_size();
        let s = cell_center(start_cell, cs);
        let g = cell_center(goal_cell, cs);
        out.push(TaskSpec {
            id,
            layout_id: layout_ids[li],
            start_cell,
            goal_cell,
            start: EnvState::at_rest(s[0], s[1]),
            goal: EnvState::at_rest(g[0], g[1]),
            d,
            seed,
        });
        id += 1;
    }
    out
}

fn band_satisfiable(layout: &MazeLayout, band: [usize; 2]) -> bool {
    let free = layout.free_cells();
    for &a in &free {
        for &b in &free {
            if let Some(d) = grid_distance(layout, a, b) {
                if d >= band[0] && d <= band[1] {
                    return true;
                }
            }
        }
    }
    false
}
