use hwm::models::losses::{covariance_penalty, variance_hinge, weighted_sum};
use hwm::models::{HighModel, LowModel, ModelHyper};
use hwm::planners::{final_state_energy, rollout_high, rollout_low};
use ndcompute::{Tape, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const STD_EPS: f64 = 1e-4;

fn tiny_hyper() -> ModelHyper {
    ModelHyper {
        d_z: 3,
        d_l: 2,
        enc_channels: [2, 2, 2],
        hidden_low: 4,
        hidden_high: 4,
        hidden_action: 4,
        max_chunk: 4,
        stride: 2,
        waypoints: 3,
        resolution: 16,
        border_px: 2,
        blob_sigma: 1.0,
        blob_mass: 2.0,
        g: 8,
        cell_size: 1.0,
        a_scale: 0.1,
        v_max: 0.5,
        action_repeat: 2,
    }
}

/// Fixture: X = [[0.0, 0.0], [0.2, 1.0], [0.4, 2.0]].
/// Column sample stds: 0.2 and 1.0; hinge uses sqrt(var + 1e-4).
#[test]
fn variance_hinge_matches_hand_computation() {
    let x = Tensor::new(vec![3, 2], vec![0.0f64, 0.0, 0.2, 1.0, 0.4, 2.0]).unwrap();
    let mut tape: Tape<f64> = Tape::new();
    let v = tape.input(x);
    let h = variance_hinge(&mut tape, v);
    let got = tape.value(h).item();

    let s1 = (0.04f64 + STD_EPS).sqrt();
    let s2 = (1.0f64 + STD_EPS).sqrt();
    let expect = ((1.0 - s1).max(0.0) + (1.0 - s2).max(0.0)) / 2.0;
    assert!((got - expect).abs() < 1e-6, "got {got}, expected {expect}");
}

/// Fixture: X = [[1, 2], [2, 4], [3, 6]] — perfectly correlated columns.
/// Centered X'X/(n-1) has off-diagonal 2; penalty = (2^2 + 2^2)/d = 4.
#[test]
fn covariance_penalty_matches_hand_computation() {
    let x = Tensor::new(vec![3, 2], vec![1.0f64, 2.0, 2.0, 4.0, 3.0, 6.0]).unwrap();
    let mut tape: Tape<f64> = Tape::new();
    let v = tape.input(x);
    let c = covariance_penalty(&mut tape, v);
    let got = tape.value(c).item();
    assert!((got - 4.0).abs() < 1e-6, "got {got}, expected 4");
}

#[test]
fn weighted_sum_combines_terms_and_skips_zero_coefficients() {
    let mut tape: Tape<f64> = Tape::new();
    let a = tape.input(Tensor::scalar(2.0));
    let b = tape.input(Tensor::scalar(3.0));
    let c = tape.input(Tensor::scalar(100.0));
    let s = weighted_sum(&mut tape, &[(0.5, a), (2.0, b), (0.0, c)]);
    let got = tape.value(s).item();
    assert!((got - 7.0).abs() < 1e-12);
}

/// The full low-level training loss formula on a documented latent
/// fixture (encoder bypassed): windows of T=2 transitions over 3 latents.
#[test]
fn loss_total_low_matches_hand_computation() {
    // One window, d_z = 2: z0=(0,0), z1=(1,0), z2=(1,1).
    // A predictor that adds exactly the action vector: z' = z + a,
    // actions a0=(1,0), a1=(0,1) -> perfect one-step and rollout fits.
    // Perturb z2 to (1, 1.5) so errors are nonzero and hand-computable.
    let z0 = [0.0f64, 0.0];
    let z1 = [1.0, 0.0];
    let z2 = [1.0, 1.5];
    let a0 = [1.0, 0.0];
    let a1 = [0.0, 1.0];

    // gammas / coefficients from a documented toy config
    let (gamma_tf, gamma_roll, lambda_vic) = (1.0f64, 1.0, 2.0);
    let (alpha, beta) = (3.0f64, 0.5);

    // Hand computation.
    // one-step: zhat1 = z0+a0 = (1,0) vs z1 -> 0; zhat2 = z1+a1 = (1,1) vs
    // (1,1.5) -> mean abs = 0.25. L_one = mean over both rows = 0.125.
    let l_one = 0.125f64;
    // rollout from z0: step1 -> (1,0); step2 -> (1,1) vs z2 -> 0.25.
    let l_roll = 0.25f64;
    // variance hinge over the 3 latents (cols: {0,1,1}, {0,0,1.5}):
    let sd1 = ((2.0 / 3.0) / 2.0 + STD_EPS).sqrt(); // var of {0,1,1}, n-1
    let sd2 = (0.75 + STD_EPS).sqrt(); // var of {0,0,1.5}, n-1
    let l_var = ((1.0 - sd1).max(0.0) + (1.0 - sd2).max(0.0)) / 2.0;
    // covariance: centered cols c1={-2/3,1/3,1/3}, c2={-0.5,-0.5,1.0};
    // off-diag = (1/2)*sum(c1*c2) = (1/2)*(1/3 - 1/6 + 1/3) = 0.25.
    let l_cov = (0.25f64.powi(2) * 2.0) / 2.0;
    let expect =
        (gamma_tf + lambda_vic) * l_one + gamma_roll * l_roll + alpha * l_var + beta * l_cov;

    // Tape computation mirroring the training composition.
    let mut tape: Tape<f64> = Tape::new();
    let z_all = tape.input(
        Tensor::new(vec![3, 2], vec![z0[0], z0[1], z1[0], z1[1], z2[0], z2[1]]).unwrap(),
    );
    let zs0 = tape.gather_rows(z_all, &[0]).unwrap();
    let zs1 = tape.gather_rows(z_all, &[1]).unwrap();
    let zs2 = tape.gather_rows(z_all, &[2]).unwrap();
    // additive toy predictor: step(z, a) = z + a
    let a0v = tape.input(Tensor::new(vec![1, 2], a0.to_vec()).unwrap());
    let a1v = tape.input(Tensor::new(vec![1, 2], a1.to_vec()).unwrap());
    let p0 = tape.add(zs0, a0v).unwrap();
    let p1 = tape.add(zs1, a1v).unwrap();
    let e0 = tape.l1_loss(p0, zs1).unwrap();
    let e1 = tape.l1_loss(p1, zs2).unwrap();
    let sum01 = tape.add(e0, e1).unwrap();
    let l_one_t = tape.affine(sum01, 0.5, 0.0);
    // rollout: r1 = z0 + a0; r2 = r1 + a1; only j >= 2 terms count.
    let r1 = tape.add(zs0, a0v).unwrap();
    let r2 = tape.add(r1, a1v).unwrap();
    let l_roll_t = tape.l1_loss(r2, zs2).unwrap();
    let l_var_t = variance_hinge(&mut tape, z_all);
    let l_cov_t = covariance_penalty(&mut tape, z_all);
    let total = weighted_sum(
        &mut tape,
        &[
            (gamma_tf + lambda_vic, l_one_t),
            (gamma_roll, l_roll_t),
            (alpha, l_var_t),
            (beta, l_cov_t),
        ],
    );
    let got = tape.value(total).item();
    assert!((got - expect).abs() < 1e-6, "got {got}, expected {expect}");
}

/// High-level loss structure (Eq. 1 teacher-forcing form) with a zeroed
/// predictor: P(z, l) = z, so the loss reduces to mean L1 between
/// consecutive waypoint latents.
#[test]
fn loss_high_matches_hand_computation_with_zero_predictor() {
    let hp = tiny_hyper();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut high = HighModel::init(&mut rng, &hp, "test".into());
    for l in &mut high.predictor.layers {
        for v in l.w.data_mut() {
            *v = 0.0;
        }
        for v in l.b.data_mut() {
            *v = 0.0;
        }
    }
    // Waypoints z0=(0,0,0), z1=(1,0,0), z2=(1,2,0); latent actions free.
    let z0 = [0.0f32, 0.0, 0.0];
    let lats = vec![0.3f32; 2 * hp.d_l];
    let traj = rollout_high(&high, &z0, &lats, 1, 2);
    // zeroed predictor: every prediction stays at z0
    assert_eq!(traj[0].data(), &z0);
    assert_eq!(traj[1].data(), &z0);
    // teacher forcing: mean |P(z_i, l_i) - z_{i+1}| with P(z,l) = z
    // = mean(|z0 - z1|) and mean(|z1 - z2|), here checked via energies.
    let e = final_state_energy(&traj[1], &[1.0, 2.0, 0.0]);
    assert!((e[0] - 1.0).abs() < 1e-6); // (1 + 2 + 0) / 3
}

#[test]
fn rollout_low_with_zero_predictor_is_identity() {
    let hp = tiny_hyper();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut low = LowModel::init(&mut rng, &hp);
    for l in &mut low.predictor.layers {
        for v in l.w.data_mut() {
            *v = 0.0;
        }
        for v in l.b.data_mut() {
            *v = 0.0;
        }
    }
    let z0 = [0.5f32, -0.25, 0.125];
    let actions = vec![0.7f32; 2 * 5 * 2]; // 2 candidates, horizon 5
    let z = rollout_low(&low, &z0, &actions, 2, 5);
    assert_eq!(&z.data()[0..3], &z0);
    assert_eq!(&z.data()[3..6], &z0);
    let e = final_state_energy(&z, &z0);
    assert_eq!(e, vec![0.0, 0.0]);
}
