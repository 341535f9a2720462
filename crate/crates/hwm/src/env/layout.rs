use crate::error::{HwmError, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;

/// G x G boolean wall grid with an implicit solid outer wall. All free
/// cells form one 4-connected component and the free fraction lies in the
/// configured range.
#[derive(Debug, Clone, PartialEq)]
pub struct MazeLayout {
    grid: Vec<bool>, // true = wall, row-major [y * g + x]
    g: usize,
    cell_size: f32,
}

impl MazeLayout {
    pub fn from_grid(grid: Vec<bool>, g: usize, cell_size: f32) -> Result<Self> {
        if grid.len() != g * g {
            return Err(HwmError::Invalid(format!(
                "grid length {} does not match G={g}",
                grid.len()
            )));
        }
        Ok(MazeLayout { grid, g, cell_size })
    }

    pub fn g(&self) -> usize {
        self.g
    }

    pub fn cell_size(&self) -> f32 {
        self.cell_size
    }

    /// World-units extent per side.
    pub fn extent(&self) -> f32 {
        self.g as f32 * self.cell_size
    }

    /// Cells outside the grid count as wall (implicit outer wall).
    pub fn is_wall_cell(&self, x: isize, y: isize) -> bool {
        if x < 0 || y < 0 || x >= self.g as isize || y >= self.g as isize {
            return true;
        }
        self.grid[y as usize * self.g + x as usize]
    }

    /// Wall test for a world-coordinate point.
    pub fn is_wall_at(&self, wx: f32, wy: f32) -> bool {
        let cx = (wx / self.cell_size).floor() as isize;
        let cy = (wy / self.cell_size).floor() as isize;
        self.is_wall_cell(cx, cy)
    }

    pub fn free_cells(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for y in 0..self.g {
            for x in 0..self.g {
                if !self.grid[y * self.g + x] {
                    out.push((x, y));
                }
            }
        }
        out
    }

    pub fn free_fraction(&self) -> f64 {
        let free = self.grid.iter().filter(|&&w| !w).count();
        free as f64 / (self.g * self.g) as f64
    }

    /// Flood fill from the first free cell; true iff every free cell is
    /// reached through 4-connected moves.
    pub fn is_connected(&self) -> bool {
        let free = self.free_cells();
        if free.is_empty() {
            return false;
        }
        let mut seen = vec![false; self.g * self.g];
        let mut q = VecDeque::new();
        let (sx, sy) = free[0];
        seen[sy * self.g + sx] = true;
        q.push_back((sx as isize, sy as isize));
        let mut count = 1;
        while let Some((x, y)) = q.pop_front() {
            for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                let (nx, ny) = (x + dx, y + dy);
                if !self.is_wall_cell(nx, ny) && !seen[ny as usize * self.g + nx as usize] {
                    seen[ny as usize * self.g + nx as usize] = true;
                    count += 1;
                    q.push_back((nx, ny));
                }
            }
        }
        count == free.len()
    }

    /// One row of '#'/'.' per grid row.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.g * (self.g + 1));
        for y in 0..self.g {
            for x in 0..self.g {
                s.push(if self.grid[y * self.g + x] { '#' } else { '.' });
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str, cell_size: f32) -> Result<Self> {
        let rows: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        let g = rows.len();
        let mut grid = Vec::with_capacity(g * g);
        for row in &rows {
            if row.chars().count() != g {
                return Err(HwmError::Format(format!(
                    "layout row '{row}' length != {g}"
                )));
            }
            for c in row.chars() {
                match c {
                    '#' => grid.push(true),
                    '.' => grid.push(false),
                    _ => return Err(HwmError::Format(format!("bad layout char '{c}'"))),
                }
            }
        }
        MazeLayout::from_grid(grid, g, cell_size)
    }

    pub fn grid_bytes(&self) -> Vec<u8> {
        self.grid.iter().map(|&w| w as u8).collect()
    }

    pub fn from_grid_bytes(bytes: &[u8], g: usize, cell_size: f32) -> Result<Self> {
        MazeLayout::from_grid(bytes.iter().map(|&b| b != 0).collect(), g, cell_size)
    }
}

/// Rejection sampling over uniform wall placement with flood-fill
/// validation, capped at `max_attempts` per seed.
pub fn generate_layout(
    seed: u64,
    g: usize,
    free_frac_range: (f64, f64),
    cell_size: f32,
    max_attempts: usize,
) -> Result<MazeLayout> {
    assert!(g >= 4, "G must be >= 4");
    assert!(
        free_frac_range.0 > 0.0 && free_frac_range.1 < 1.0 && free_frac_range.0 <= free_frac_range.1,
        "free_frac_range must be within (0,1)"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..max_attempts {
        let wall_p = rng.gen_range(1.0 - free_frac_range.1..1.0 - free_frac_range.0);
        let grid: Vec<bool> = (0..g * g).map(|_| rng.gen_bool(wall_p)).collect();
        let layout = MazeLayout {
            grid,
            g,
            cell_size,
        };
        let ff = layout.free_fraction();
        if ff >= free_frac_range.0 && ff <= free_frac_range.1 && layout.is_connected() {
            return Ok(layout);
        }
    }
    Err(HwmError::LayoutConstraintUnsatisfied {
        seed,
        attempts: max_attempts,
    })
}

/// BFS shortest-path length in cells between two free cells.
pub fn grid_distance(layout: &MazeLayout, a: (usize, usize), b: (usize, usize)) -> Option<usize> {
    if layout.is_wall_cell(a.0 as isize, a.1 as isize) || layout.is_wall_cell(b.0 as isize, b.1 as isize)
    {
        return None;
    }
    let g = layout.g();
    let mut dist = vec![usize::MAX; g * g];
    let mut q = VecDeque::new();
    dist[a.1 * g + a.0] = 0;
    q.push_back((a.0 as isize, a.1 as isize));
    while let Some((x, y)) = q.pop_front() {
        let d = dist[y as usize * g + x as usize];
        if (x as usize, y as usize) == b {
            return Some(d);
        }
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let (nx, ny) = (x + dx, y + dy);
            if !layout.is_wall_cell(nx, ny) && dist[ny as usize * g + nx as usize] == usize::MAX {
                dist[ny as usize * g + nx as usize] = d + 1;
                q.push_back((nx, ny));
            }
        }
    }
    None
}

/// Full BFS path (inclusive of endpoints) between free cells.
pub fn grid_path(layout: &MazeLayout, a: (usize, usize), b: (usize, usize)) -> Option<Vec<(usize, usize)>> {
    let g = layout.g();
    let mut prev = vec![usize::MAX; g * g];
    let mut seen = vec![false; g * g];
    let mut q = VecDeque::new();
    seen[a.1 * g + a.0] = true;
    q.push_back((a.0 as isize, a.1 as isize));
    while let Some((x, y)) = q.pop_front() {
        if (x as usize, y as usize) == b {
            let mut path = vec![b];
            let mut cur = b.1 * g + b.0;
            while prev[cur] != usize::MAX {
                cur = prev[cur];
                path.push((cur % g, cur / g));
            }
            path.reverse();
            return Some(path);
        }
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let (nx, ny) = (x + dx, y + dy);
            if !layout.is_wall_cell(nx, ny) && !seen[ny as usize * g + nx as usize] {
                seen[ny as usize * g + nx as usize] = true;
                prev[ny as usize * g + nx as usize] = y as usize * g + x as usize;
                q.push_back((nx, ny));
            }
        }
    }
    None
}
