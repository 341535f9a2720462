use ndcompute::{Adam, Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn relu_and_l1_basics() {
    let mut t = Tape::<f32>::new();
    let x = t.input(Tensor::from_vec(vec![-1.0f32, 2.0]));
    let y = t.relu(x);
    assert_eq!(t.value(y).data(), &[0.0, 2.0]);
    let a = t.input(Tensor::from_vec(vec![0.3f32, -0.7, 1.1]));
    let l = t.l1_loss(a, a).unwrap();
    assert_eq!(t.value(l).item(), 0.0);
}

#[test]
fn conv_identity_kernel() {
    let mut t = Tape::<f32>::new();
    let x = t.input(Tensor::new(vec![1, 1, 3, 3], (0..9).map(|i| i as f32).collect()).unwrap());
    let w = t.input(Tensor::new(vec![1, 1, 1, 1], vec![1.0]).unwrap());
    let y = t.conv2d(x, w, 1, 0).unwrap();
    assert_eq!(t.value(y).data(), t.value(x).data());
}

#[test]
fn shape_mismatch_names_op() {
    let mut t = Tape::<f32>::new();
    let a = t.input(Tensor::zeros(vec![2, 3]));
    let b = t.input(Tensor::zeros(vec![3, 3]));
    let err = t.add(a, b).unwrap_err().to_string();
    assert!(err.contains("add"), "{err}");
    assert!(err.contains("[2, 3]"), "{err}");
}

#[test]
fn backward_rejects_non_scalar() {
    let mut t = Tape::<f32>::new();
    let a = t.input(Tensor::zeros(vec![2, 2]));
    let b = t.relu(a);
    assert!(t.backward(b).is_err());
}

#[test]
fn l1_grad_sign() {
    // d/dx of l1_loss(x, 0) at x=2 is +1 (per-element mean normalizer n=1)
    let mut t = Tape::<f64>::new();
    let x = t.param(Tensor::scalar(2.0));
    let zero = t.input(Tensor::scalar(0.0));
    let l = t.l1_loss(x, zero).unwrap();
    let g = t.backward(l).unwrap();
    assert_eq!(t.param_grads(&g)[0].item(), 1.0);
}

#[test]
fn repeated_backward_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut t = Tape::<f32>::new();
    let x = t.param(Tensor::new(vec![3, 3], (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap());
    let y = t.tanh(x);
    let l = t.mean(y);
    let g1 = t.backward(l).unwrap();
    let g2 = t.backward(l).unwrap();
    assert_eq!(t.param_grads(&g1)[0], t.param_grads(&g2)[0]);
}

#[test]
fn adam_zero_grad_keeps_params() {
    let mut p = Tensor::from_vec(vec![1.0f32, -2.0]);
    let mut opt = Adam::new(0.05, &[vec![2]]);
    let g = Tensor::zeros(vec![2]);
    opt.step(&mut [&mut p], std::slice::from_ref(&g)).unwrap();
    assert_eq!(p.data(), &[1.0, -2.0]);
    assert_eq!(opt.step_count(), 1);
}

#[test]
fn adam_descends_constant_gradient() {
    let mut p = Tensor::from_vec(vec![0.0f32]);
    let mut opt = Adam::new(0.05, &[vec![1]]);
    let g = Tensor::from_vec(vec![3.0f32]);
    for _ in 0..10 {
        opt.step(&mut [&mut p], std::slice::from_ref(&g)).unwrap();
    }
    assert!(p.data()[0] < 0.0);
}

#[test]
fn adam_converges_on_quadratic() {
    // minimize (theta - 3)^2, lr 0.05, 500 steps -> |theta - 3| < 1e-2
    let mut p = Tensor::from_vec(vec![0.0f32]);
    let mut opt = Adam::new(0.05, &[vec![1]]);
    for _ in 0..500 {
        let g = Tensor::from_vec(vec![2.0 * (p.data()[0] - 3.0)]);
        opt.step(&mut [&mut p], std::slice::from_ref(&g)).unwrap();
    }
    assert!((p.data()[0] - 3.0).abs() < 1e-2, "theta = {}", p.data()[0]);
}

#[test]
fn checkpoint_roundtrip() {
    let dir = std::env::temp_dir().join("ndcompute_ckpt_test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("p.hwmp");
    let mut params = std::collections::BTreeMap::new();
    params.insert("enc.w".to_string(), Tensor::new(vec![2, 3], vec![1.0f32, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
    params.insert("enc.b".to_string(), Tensor::from_vec(vec![-0.5f32]));
    ndcompute::checkpoint::save(&path, &params).unwrap();
    let loaded = ndcompute::checkpoint::load(&path).unwrap();
    assert_eq!(loaded, params);
}
