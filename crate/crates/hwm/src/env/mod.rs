//! Deterministic point-mass maze simulator: procedural layouts, double
//! integrator dynamics with per-axis collision resolution, top-down pixel
//! rendering, and offline dataset collection.

mod dataset;
mod layout;
mod render;
mod sim;

pub use dataset::{collect_dataset, load_dataset, save_dataset, Dataset, Trajectory};
pub use layout::{generate_layout, grid_distance, grid_path, MazeLayout};
pub use render::{render, render_with_walls, wall_channel, Observation, RenderParams};
pub use sim::{replay, step, step_repeated, EnvState, SimParams};
