
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::energy::Bounds;
use super::Optimized;
use crate::config::OptimizerConfig;

/// Cross-entropy method with a factorized Gaussian and EMA-smoothed
/// refit of the elite statistics.
pub fn optimize_cem(
    cfg: &OptimizerConfig,
    dim: usize,
    bounds: &Bounds,
    rng: &mut ChaCha8Rng,
    eval: &mut dyn FnMut(&[f32], usize) -> Vec<f32>,
) -> Optimized {
    let s = cfg.samples;
    let mut mean = vec![0.0f32; dim];
    let mut std = vec![cfg.sigma as f32; dim];
    let mut best_x = mean.clone();
    let mut best_e = f32::INFINITY;
    let mut evaluated = 0;

    for _ in 0..cfg.iters {
        let mut cands = Vec::with_capacity(s * dim);
        for _ in 0..s {
            for j in 0..dim {
                let n: f32 = StandardNormal.sample(rng);
                cands.push(mean[j] + std[j] * n);
            }
        }
        bounds.clamp(&mut cands);
        let costs = eval(&cands, s);
        evaluated += s;

        let mut order: Vec<usize> = (0..s).collect();
        order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]));
        if costs[order[0]] < best_e {
            best_e = costs[order[0]];
            best_x = cands[order[0] * dim..(order[0] + 1) * dim].to_vec();
        }

        let elites = &order[..cfg.elites.min(s)];
        let ne = elites.len() as f32;
        let mut e_mean = vec![0.0f32; dim];
        for &i in elites {
            for j in 0..dim {
                e_mean[j] += cands[i * dim + j] / ne;
            }
        }
        let mut e_std = vec![0.0f32; dim];
        for &i in elites {
            for j in 0..dim {
                e_std[j] += (cands[i * dim + j] - e_mean[j]).powi(2);
            }
        }
        let denom = (ne - 1.0).max(1.0);
        for j in 0..dim {
            e_std[j] = (e_std[j] / denom).sqrt();
        }
        let ema = cfg.var_ema as f32;
        for j in 0..dim {
            mean[j] = e_mean[j];
            std[j] = (ema * std[j] + (1.0 - ema) * e_std[j]).max(1e-4);
        }
    }
    Optimized {
        x: best_x,
        energy: best_e,
        iterations: cfg.iters,
        samples_evaluated: evaluated,
    }
}
