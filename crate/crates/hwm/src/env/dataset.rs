use super::layout::MazeLayout;
use super::sim::{step_repeated, EnvState, SimParams};
use crate::error::{HwmError, Result};
use crate::seed::stream_seed;
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"HWMD";
const VERSION: u32 = 1;

/// One episode: recorded at the post-action-repeat cadence.
/// `len(actions) = len(states) - 1`; replaying actions (each applied
/// `action_repeat` times) from `states[0]` reproduces `states` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<EnvState>,
    pub actions: Vec<[f32; 2]>,
    pub layout_id: u32,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub layouts: Vec<MazeLayout>,
    pub trajectories: Vec<Trajectory>,
    pub sim: SimParams,
    pub action_repeat: usize,
    pub resolution: u32,
}

/// Random-exploration episodes: uniform free start position, random initial
/// velocity, uniform actions resampled every `action_repeat` raw steps.
pub fn collect_dataset(
    layouts: &[MazeLayout],
    episodes_per_layout: usize,
    steps: usize,
    action_repeat: usize,
    sim: &SimParams,
    resolution: u32,
    seed: u64,
) -> Dataset {
    assert!(steps >= 2, "steps must be >= 2");
    let mut trajectories = Vec::with_capacity(layouts.len() * episodes_per_layout);
    for (li, layout) in layouts.iter().enumerate() {
        let free = layout.free_cells();
        for ep in 0..episodes_per_layout {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, &[li as u64, ep as u64]));
            let (cx, cy) = free[rng.gen_range(0..free.len())];
            let x = (cx as f32 + rng.gen_range(0.05..0.95)) * layout.cell_size();
            let y = (cy as f32 + rng.gen_range(0.05..0.95)) * layout.cell_size();
            let mut state = EnvState {
                pos: [x, y],
                vel: [
                    rng.gen_range(-sim.v_max..sim.v_max),
                    rng.gen_range(-sim.v_max..sim.v_max),
                ],
            };
            let mut states = vec![state];
            let mut actions = Vec::with_capacity(steps);
            for _ in 0..steps {
                let a = [rng.gen_range(-1.0f32..1.0), rng.gen_range(-1.0f32..1.0)];
                state = step_repeated(&state, a, action_repeat, layout, sim);
                actions.push(a);
                states.push(state);
            }
            trajectories.push(Trajectory {
                states,
                actions,
                layout_id: li as u32,
            });
        }
    }
    Dataset {
        layouts: layouts.to_vec(),
        trajectories,
        sim: *sim,
        action_repeat,
        resolution,
    }
}

pub fn save_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    let g = ds.layouts.first().map(|l| l.g()).unwrap_or(0) as u32;
    w.write_u32::<LittleEndian>(g)?;
    w.write_u32::<LittleEndian>(ds.resolution)?;
    let cell = ds.layouts.first().map(|l| l.cell_size()).unwrap_or(1.0);
    w.write_f32::<LittleEndian>(cell)?;
    w.write_f32::<LittleEndian>(ds.sim.a_scale)?;
    w.write_f32::<LittleEndian>(ds.sim.v_max)?;
    w.write_u32::<LittleEndian>(ds.action_repeat as u32)?;
    w.write_u32::<LittleEndian>(ds.layouts.len() as u32)?;
    w.write_u32::<LittleEndian>(ds.trajectories.len() as u32)?;
    for l in &ds.layouts {
        w.write_all(&l.grid_bytes())?;
    }
    for t in &ds.trajectories {
        let n = t.actions.len() as u32;
        let byte_len = 4 + 4 + (n + 1) * 16 + n * 8;
        w.write_u32::<LittleEndian>(byte_len)?;
        w.write_u32::<LittleEndian>(t.layout_id)?;
        w.write_u32::<LittleEndian>(n)?;
        for s in &t.states {
            w.write_f32::<LittleEndian>(s.pos[0])?;
            w.write_f32::<LittleEndian>(s.pos[1])?;
            w.write_f32::<LittleEndian>(s.vel[0])?;
            w.write_f32::<LittleEndian>(s.vel[1])?;
        }
        for a in &t.actions {
            w.write_f32::<LittleEndian>(a[0])?;
            w.write_f32::<LittleEndian>(a[1])?;
        }
    }
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(HwmError::Format("bad magic, not an HWMD dataset".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(HwmError::Format(format!("unsupported version {version}")));
    }
    let g = r.read_u32::<LittleEndian>()? as usize;
    let resolution = r.read_u32::<LittleEndian>()?;
    let cell = r.read_f32::<LittleEndian>()?;
    let a_scale = r.read_f32::<LittleEndian>()?;
    let v_max = r.read_f32::<LittleEndian>()?;
    let action_repeat = r.read_u32::<LittleEndian>()? as usize;
    let n_layouts = r.read_u32::<LittleEndian>()? as usize;
    let n_traj = r.read_u32::<LittleEndian>()? as usize;
    let mut layouts = Vec::with_capacity(n_layouts);
    for _ in 0..n_layouts {
        let mut bytes = vec![0u8; g * g];
        r.read_exact(&mut bytes)?;
        layouts.push(MazeLayout::from_grid_bytes(&bytes, g, cell)?);
    }
    let mut trajectories = Vec::with_capacity(n_traj);
    for _ in 0..n_traj {
        let _byte_len = r.read_u32::<LittleEndian>()?;
        let layout_id = r.read_u32::<LittleEndian>()?;
        let n = r.read_u32::<LittleEndian>()? as usize;
        let mut states = Vec::with_capacity(n + 1);
        for _ in 0..=n {
            let mut f = [0f32; 4];
            r.read_f32_into::<LittleEndian>(&mut f)?;
            states.push(EnvState {
                pos: [f[0], f[1]],
                vel: [f[2], f[3]],
            });
        }
        let mut actions = Vec::with_capacity(n);
        for _ in 0..n {
            let mut f = [0f32; 2];
            r.read_f32_into::<LittleEndian>(&mut f)?;
            actions.push([f[0], f[1]]);
        }
        trajectories.push(Trajectory {
            states,
            actions,
            layout_id,
        });
    }
    Ok(Dataset {
        layouts,
        trajectories,
        sim: SimParams { a_scale, v_max },
        action_repeat,
        resolution,
    })
}
