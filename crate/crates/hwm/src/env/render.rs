use super::layout::MazeLayout;
use super::sim::EnvState;
use ndcompute::Tensor32;
use serde::{Deserialize, Serialize};

/// Top-down three-channel observation: walls, agent blob, zeros. Values in
/// [0,1]; velocity is not visible in pixels and rides along as proprio.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// [3, res, res] row-major
    pub image: Tensor32,
    pub proprio: [f32; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderParams {
    pub resolution: usize,
    /// Outer wall ring thickness in pixels; also bounds the blob radius so
    /// the agent mass never leaves the image.
    pub border_px: usize,
    pub blob_sigma: f32,
    /// Total agent-channel mass after renormalization.
    pub blob_mass: f32,
}

impl Default for RenderParams {
    fn default() -> Self {
        RenderParams {
            resolution: 64,
            border_px: 4,
            blob_sigma: 1.5,
            blob_mass: 4.0,
        }
    }
}

impl RenderParams {
    /// Pixels per world unit inside the border.
    pub fn scale(&self, layout: &MazeLayout) -> f32 {
        (self.resolution - 2 * self.border_px) as f32 / layout.extent()
    }

    pub fn world_to_px(&self, layout: &MazeLayout, w: f32) -> f32 {
        self.border_px as f32 + w * self.scale(layout)
    }
}

/// Wall channel: pure function of the layout (cached by callers).
pub fn wall_channel(layout: &MazeLayout, rp: &RenderParams) -> Vec<f32> {
    let res = rp.resolution;
    let mut chan = vec![0.0f32; res * res];
    let scale = rp.scale(layout);
    for py in 0..res {
        for px in 0..res {
            // pixel center in world coords
            let wx = (px as f32 + 0.5 - rp.border_px as f32) / scale;
            let wy = (py as f32 + 0.5 - rp.border_px as f32) / scale;
            if layout.is_wall_at(wx, wy) {
                chan[py * res + px] = 1.0;
            }
        }
    }
    chan
}

/// Agent channel: fixed-sigma Gaussian blob truncated at the border radius
/// and renormalized so its total mass is constant.
pub fn agent_channel(state: &EnvState, layout: &MazeLayout, rp: &RenderParams) -> Vec<f32> {
    let res = rp.resolution;
    let mut chan = vec![0.0f32; res * res];
    let cx = rp.world_to_px(layout, state.pos[0]);
    let cy = rp.world_to_px(layout, state.pos[1]);
    let r = rp.border_px as isize; // truncation radius fits within border
    let icx = cx.floor() as isize;
    let icy = cy.floor() as isize;
    let inv2s2 = 1.0 / (2.0 * rp.blob_sigma * rp.blob_sigma);
    let mut sum = 0.0f32;
    let mut vals = Vec::with_capacity(((2 * r + 1) * (2 * r + 1)) as usize);
    for py in icy - r..=icy + r {
        for px in icx - r..=icx + r {
            let dx = px as f32 + 0.5 - cx;
            let dy = py as f32 + 0.5 - cy;
            let d2 = dx * dx + dy * dy;
            if d2 > (r as f32) * (r as f32) {
                continue;
            }
            let v = (-d2 * inv2s2).exp();
            sum += v;
            vals.push((px, py, v));
        }
    }
    if sum > 0.0 {
        let norm = rp.blob_mass / sum;
        for (px, py, v) in vals {
            if px >= 0 && py >= 0 && (px as usize) < res && (py as usize) < res {
                chan[py as usize * res + px as usize] = v * norm;
            }
        }
    }
    chan
}

/// Deterministic render of walls + agent blob + zero channel.
pub fn render(state: &EnvState, layout: &MazeLayout, rp: &RenderParams) -> Observation {
    render_with_walls(state, layout, rp, &wall_channel(layout, rp))
}

/// Render with a precomputed wall channel (hot path during training).
pub fn render_with_walls(
    state: &EnvState,
    layout: &MazeLayout,
    rp: &RenderParams,
    walls: &[f32],
) -> Observation {
    let res = rp.resolution;
    let mut data = Vec::with_capacity(3 * res * res);
    data.extend_from_slice(walls);
    data.extend_from_slice(&agent_channel(state, layout, rp));
    data.extend(std::iter::repeat(0.0f32).take(res * res));
    Observation {
        image: Tensor32::new(vec![3, res, res], data).unwrap(),
        proprio: state.vel,
    }
}
