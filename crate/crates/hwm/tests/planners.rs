use hwm::bench::wilson_interval;
use hwm::config::{Algo, OptimizerConfig};
use hwm::planners::{optimize, optimize_cem, Bounds};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Discretized 2-step toy: double-integrator-free point, x' = x + a,
/// final-state L1 to a goal that is off the discrete action grid.
fn toy_energy(cands: &[f32], s: usize) -> Vec<f32> {
    let goal = [0.63f32, -0.77];
    (0..s)
        .map(|i| {
            let c = &cands[i * 4..(i + 1) * 4];
            let x = c[0] + c[2];
            let y = c[1] + c[3];
            ((x - goal[0]).abs() + (y - goal[1]).abs()) / 2.0
        })
        .collect()
}

/// Exhaustive search over the 5-level discretization of each action dim.
fn toy_exhaustive_optimum() -> f32 {
    let grid = [-1.0f32, -0.5, 0.0, 0.5, 1.0];
    let mut best = f32::INFINITY;
    for &a in &grid {
        for &b in &grid {
            for &c in &grid {
                for &d in &grid {
                    best = best.min(toy_energy(&[a, b, c, d], 1)[0]);
                }
            }
        }
    }
    best
}

fn toy_cfg(algo: Algo) -> OptimizerConfig {
    OptimizerConfig {
        algo,
        samples: 100,
        iters: 10,
        horizon: 2,
        sigma: 0.5,
        lambda: 0.01,
        elites: 10,
        var_ema: 0.5,
        init_std: 0.5,
    }
}

#[test]
fn cem_recovers_toy_optimum_on_95_of_100_seeds() {
    let e_star = toy_exhaustive_optimum();
    assert!(e_star > 0.0, "goal should be off the discrete grid");
    let bounds = Bounds::uniform(4, -1.0, 1.0);
    let cfg = toy_cfg(Algo::Cem);
    let mut wins = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let opt = optimize(&cfg, 4, &bounds, &mut rng, &mut toy_energy);
        if opt.energy <= e_star * 1.01 {
            wins += 1;
        }
    }
    assert!(wins >= 95, "CEM hit the discrete optimum on only {wins}/100 seeds");
}

#[test]
fn mppi_recovers_toy_optimum_on_95_of_100_seeds() {
    let e_star = toy_exhaustive_optimum();
    let bounds = Bounds::uniform(4, -1.0, 1.0);
    let cfg = toy_cfg(Algo::Mppi);
    let mut wins = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let opt = optimize(&cfg, 4, &bounds, &mut rng, &mut toy_energy);
        if opt.energy <= e_star * 1.01 {
            wins += 1;
        }
    }
    assert!(wins >= 95, "MPPI hit the discrete optimum on only {wins}/100 seeds");
}

#[test]
fn cem_solves_4dim_quadratic_to_1e2() {
    let u_star = [0.31f32, -0.22, 0.53, -0.44];
    let mut quad = |cands: &[f32], s: usize| -> Vec<f32> {
        (0..s)
            .map(|i| {
                let c = &cands[i * 4..(i + 1) * 4];
                c.iter().zip(&u_star).map(|(a, b)| (a - b) * (a - b)).sum()
            })
            .collect()
    };
    let cfg = OptimizerConfig {
        samples: 200,
        iters: 40,
        elites: 20,
        ..toy_cfg(Algo::Cem)
    };
    let bounds = Bounds::uniform(4, -1.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let opt = optimize_cem(&cfg, 4, &bounds, &mut rng, &mut quad);
    let inf: f32 = opt
        .x
        .iter()
        .zip(&u_star)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f32::max);
    assert!(inf < 1e-2, "CEM ended {inf} away from the optimum in sup norm");
}

#[test]
fn optimizers_are_deterministic_per_seed() {
    let bounds = Bounds::uniform(4, -1.0, 1.0);
    for algo in [Algo::Cem, Algo::Mppi] {
        let cfg = toy_cfg(algo);
        let mut r1 = ChaCha8Rng::seed_from_u64(5);
        let mut r2 = ChaCha8Rng::seed_from_u64(5);
        let a = optimize(&cfg, 4, &bounds, &mut r1, &mut toy_energy);
        let b = optimize(&cfg, 4, &bounds, &mut r2, &mut toy_energy);
        assert_eq!(a.x, b.x);
        assert_eq!(a.energy, b.energy);
        assert_eq!(a.samples_evaluated, cfg.samples * cfg.iters);
    }
}

#[test]
fn candidates_respect_bounds() {
    let bounds = Bounds::uniform(4, -0.25, 0.25);
    let cfg = toy_cfg(Algo::Cem);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut eval = |cands: &[f32], s: usize| {
        for v in cands {
            assert!((-0.25..=0.25).contains(v), "candidate {v} out of bounds");
        }
        toy_energy(cands, s)
    };
    let opt = optimize(&cfg, 4, &bounds, &mut rng, &mut eval);
    for v in &opt.x {
        assert!((-0.25..=0.25).contains(v));
    }
}

#[test]
fn wilson_matches_bruteforce_inversion_for_small_n() {
    // The Wilson interval is exactly {p : (p_hat - p)^2 <= z^2 p(1-p)/n};
    // recover it by scanning p and compare endpoints.
    let z = 1.96f64;
    for n in 1..=10usize {
        for k in 0..=n {
            let (lo, hi) = wilson_interval(k, n);
            let p_hat = k as f64 / n as f64;
            let inside = |p: f64| (p_hat - p).powi(2) <= z * z * p * (1.0 - p) / n as f64 + 1e-12;
            let step = 1e-5;
            let mut b_lo = f64::NAN;
            let mut b_hi = f64::NAN;
            let mut p = 0.0;
            while p <= 1.0 {
                if inside(p) {
                    if b_lo.is_nan() {
                        b_lo = p;
                    }
                    b_hi = p;
                }
                p += step;
            }
            assert!((lo - b_lo).abs() < 2e-5, "n={n} k={k}: lo {lo} vs {b_lo}");
            assert!((hi - b_hi).abs() < 2e-5, "n={n} k={k}: hi {hi} vs {b_hi}");
        }
    }
}

#[test]
fn wilson_edge_cases() {
    let (lo, hi) = wilson_interval(0, 0);
    assert_eq!((lo, hi), (0.0, 1.0));
    let (lo, hi) = wilson_interval(0, 5);
    assert_eq!(lo, 0.0);
    assert!(hi > 0.0 && hi < 1.0);
    let (lo, hi) = wilson_interval(5, 5);
    assert_eq!(hi, 1.0);
    assert!(lo > 0.0);
}
