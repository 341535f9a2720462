use ndcompute::{Tensor, Tensor32};

use crate::models::{HighModel, LowModel};

/// Per-dimension box constraints applied to sampled candidates.
#[derive(Debug, Clone)]
pub struct Bounds {
    pub lo: Vec<f32>,
    pub hi: Vec<f32>,
}

impl Bounds {
    /// Same interval for every dimension.
    pub fn uniform(dim: usize, lo: f32, hi: f32) -> Self {
        Bounds {
            lo: vec![lo; dim],
            hi: vec![hi; dim],
        }
    }

    /// Tile a per-step bound pattern across `steps` steps.
    pub fn tiled(per_step: &[f32], steps: usize, scale: f32) -> Self {
        let dim = per_step.len() * steps;
        let mut lo = Vec::with_capacity(dim);
        let mut hi = Vec::with_capacity(dim);
        for _ in 0..steps {
            for &s in per_step {
                lo.push(-s * scale);
                hi.push(s * scale);
            }
        }
        Bounds { lo, hi }
    }

    pub fn clamp(&self, x: &mut [f32]) {
        let d = self.lo.len();
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lo[i % d].min(self.hi[i % d]), self.hi[i % d]);
        }
    }
}

/// Mean absolute distance between each rolled-out final latent and the
/// goal latent.
pub fn final_state_energy(z_final: &Tensor32, z_goal: &[f32]) -> Vec<f32> {
    let s = z_final.shape()[0];
    let d = z_final.shape()[1];
    (0..s)
        .map(|i| {
            let row = &z_final.data()[i * d..(i + 1) * d];
            row.iter()
                .zip(z_goal)
                .map(|(a, b)| (a - b).abs())
                .sum::<f32>()
                / d as f32
        })
        .collect()
}

/// Roll `s` primitive-action sequences through the low-level predictor.
/// `actions` is flat `[s * horizon * 2]`; returns the final latents
/// `[s, d_z]`.
pub fn rollout_low(model: &LowModel, z1: &[f32], actions: &[f32], s: usize, horizon: usize) -> Tensor32 {
    let d = z1.len();
    let mut z = Tensor::new(vec![s, d], z1.iter().cloned().cycle().take(s * d).collect()).unwrap();
    for t in 0..horizon {
        let mut a = Vec::with_capacity(s * 2);
        for i in 0..s {
            let base = (i * horizon + t) * 2;
            a.push(actions[base]);
            a.push(actions[base + 1]);
        }
        let a = Tensor::new(vec![s, 2], a).unwrap();
        z = model.predictor.step_raw(&z, &a);
    }
    z
}

/// Roll `s` latent-action sequences through the high-level predictor,
/// returning every intermediate latent: `out[j]` is `[s, d_z]` after
/// applying j+1 latent actions.
pub fn rollout_high(model: &HighModel, z1: &[f32], lats: &[f32], s: usize, horizon: usize) -> Vec<Tensor32> {
    let d = z1.len();
    let d_l = model.hp.d_l;
    let mut z = Tensor::new(vec![s, d], z1.iter().cloned().cycle().take(s * d).collect()).unwrap();
    let mut out = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let mut l = Vec::with_capacity(s * d_l);
        for i in 0..s {
            let base = (i * horizon + t) * d_l;
            l.extend_from_slice(&lats[base..base + d_l]);
        }
        let l = Tensor::new(vec![s, d_l], l).unwrap();
        z = model.predictor.step_raw(&z, &l);
        out.push(z.clone());
    }
    out
}
