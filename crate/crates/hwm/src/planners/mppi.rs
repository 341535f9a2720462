use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::energy::Bounds;
use super::Optimized;
use crate::config::OptimizerConfig;

/// Model-predictive path integral update: perturb the nominal sequence,
/// weight candidates by exp(-(c - c_min) / lambda), refit the nominal to
/// the weighted mean.
pub fn optimize_mppi(
    cfg: &OptimizerConfig,
    dim: usize,
    bounds: &Bounds,
    rng: &mut ChaCha8Rng,
    eval: &mut dyn FnMut(&[f32], usize) -> Vec<f32>,
) -> Optimized {
    let s = cfg.samples;
    let sigma = cfg.sigma as f32;
    let lambda = cfg.lambda as f32;
    let mut nominal = vec![0.0f32; dim];
    let mut evaluated = 0;
    let mut best_x = nominal.clone();
    let mut best_e = f32::INFINITY;

    for _ in 0..cfg.iters {
        let mut cands = Vec::with_capacity(s * dim);
        for _ in 0..s {
            for j in 0..dim {
                let n: f32 = StandardNormal.sample(rng);
                cands.push(nominal[j] + sigma * n);
            }
        }
        bounds.clamp(&mut cands);
        let costs = eval(&cands, s);
        evaluated += s;

        let c_min = costs.iter().cloned().fold(f32::INFINITY, f32::min);
        let mut weights = Vec::with_capacity(s);
        let mut w_sum = 0.0f32;
        for &c in &costs {
            let w = (-(c - c_min) / lambda).exp();
            weights.push(w);
            w_sum += w;
        }
        let mut new_nom = vec![0.0f32; dim];
        for i in 0..s {
            let w = weights[i] / w_sum;
            for j in 0..dim {
                new_nom[j] += w * cands[i * dim + j];
            }
        }
        bounds.clamp(&mut new_nom);
        nominal = new_nom;

        for i in 0..s {
            if costs[i] < best_e {
                best_e = costs[i];
                best_x = cands[i * dim..(i + 1) * dim].to_vec();
            }
        }
    }

    // The returned sequence is the nominal; score it so the reported
    // energy matches what will actually be executed.
    let final_cost = eval(&nominal, 1)[0];
    if final_cost.is_finite() && final_cost <= best_e {
        best_x = nominal;
        best_e = final_cost;
    }
    Optimized {
        x: best_x,
        energy: best_e,
        iterations: cfg.iters,
        samples_evaluated: evaluated,
    }
}
