use super::layout::MazeLayout;
use serde::{Deserialize, Serialize};

/// Point-mass state: position in world units, velocity in units/step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub pos: [f32; 2],
    pub vel: [f32; 2],
}

impl EnvState {
    pub fn at_rest(x: f32, y: f32) -> Self {
        EnvState {
            pos: [x, y],
            vel: [0.0, 0.0],
        }
    }

    pub fn dist_to(&self, other: &EnvState) -> f32 {
        let dx = self.pos[0] - other.pos[0];
        let dy = self.pos[1] - other.pos[1];
        (dx * dx + dy * dy).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub a_scale: f32,
    pub v_max: f32,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            a_scale: 0.1,
            v_max: 0.5,
        }
    }
}

/// Double-integrator update with per-axis collision resolution: the
/// offending axis's motion is cancelled and its velocity zeroed. Inputs are
/// clamped, never rejected.
pub fn step(state: &EnvState, action: [f32; 2], layout: &MazeLayout, p: &SimParams) -> EnvState {
    let ax = action[0].clamp(-1.0, 1.0);
    let ay = action[1].clamp(-1.0, 1.0);
    let mut vx = (state.vel[0] + ax * p.a_scale).clamp(-p.v_max, p.v_max);
    let mut vy = (state.vel[1] + ay * p.a_scale).clamp(-p.v_max, p.v_max);
    let mut px = state.pos[0];
    let py0 = state.pos[1];
    if layout.is_wall_at(px + vx, py0) {
        vx = 0.0;
    } else {
        px += vx;
    }
    let mut py = py0;
    if layout.is_wall_at(px, py + vy) {
        vy = 0.0;
    } else {
        py += vy;
    }
    EnvState {
        pos: [px, py],
        vel: [vx, vy],
    }
}

/// Apply the same action `repeat` times (the recorded-transition cadence).
pub fn step_repeated(
    state: &EnvState,
    action: [f32; 2],
    repeat: usize,
    layout: &MazeLayout,
    p: &SimParams,
) -> EnvState {
    let mut s = *state;
    for _ in 0..repeat {
        s = step(&s, action, layout, p);
    }
    s
}

/// Replay recorded actions from an initial state; used by the exact-replay
/// determinism check.
pub fn replay(
    start: &EnvState,
    actions: &[[f32; 2]],
    repeat: usize,
    layout: &MazeLayout,
    p: &SimParams,
) -> Vec<EnvState> {
    let mut states = Vec::with_capacity(actions.len() + 1);
    states.push(*start);
    for &a in actions {
        let next = step_repeated(states.last().unwrap(), a, repeat, layout, p);
        states.push(next);
    }
    states
}
