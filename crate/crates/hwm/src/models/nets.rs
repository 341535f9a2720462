use crate::config::RunConfig;
use crate::env::{RenderParams, SimParams};
use ndcompute::kernels;
use ndcompute::{Scalar, Tape, Tensor, Var};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Everything the model files need to rebuild nets and renderers without
/// the original config.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelHyper {
    pub d_z: usize,
    pub d_l: usize,
    pub enc_channels: [usize; 3],
    pub hidden_low: usize,
    pub hidden_high: usize,
    pub hidden_action: usize,
    pub max_chunk: usize,
    pub stride: usize,
    pub waypoints: usize,
    pub resolution: usize,
    pub border_px: usize,
    pub blob_sigma: f32,
    pub blob_mass: f32,
    pub g: usize,
    pub cell_size: f32,
    pub a_scale: f32,
    pub v_max: f32,
    pub action_repeat: usize,
}

impl ModelHyper {
    pub fn from_config(cfg: &RunConfig) -> Self {
        ModelHyper {
            d_z: cfg.model.d_z,
            d_l: cfg.model.d_l,
            enc_channels: cfg.model.enc_channels,
            hidden_low: cfg.model.hidden_low,
            hidden_high: cfg.model.hidden_high,
            hidden_action: cfg.model.hidden_action,
            max_chunk: cfg.model.max_chunk,
            stride: cfg.model.stride,
            waypoints: cfg.model.waypoints,
            resolution: cfg.env.resolution,
            border_px: cfg.env.border_px,
            blob_sigma: cfg.env.blob_sigma,
            blob_mass: cfg.env.blob_mass,
            g: cfg.env.g,
            cell_size: cfg.env.cell_size,
            a_scale: cfg.env.a_scale,
            v_max: cfg.env.v_max,
            action_repeat: cfg.env.action_repeat,
        }
    }

    pub fn render_params(&self) -> RenderParams {
        RenderParams {
            resolution: self.resolution,
            border_px: self.border_px,
            blob_sigma: self.blob_sigma,
            blob_mass: self.blob_mass,
        }
    }

    pub fn sim_params(&self) -> SimParams {
        SimParams {
            a_scale: self.a_scale,
            v_max: self.v_max,
        }
    }

    /// Input width of the action encoder: padded chunk plus length scalar.
    pub fn chunk_feat_dim(&self) -> usize {
        2 * self.max_chunk + 1
    }

    /// Spatial side after the three stride-2 convs.
    pub fn conv_out_side(&self) -> usize {
        let mut s = self.resolution;
        for _ in 0..3 {
            s = kernels::conv2d_out_dim(s, 3, 2, 1);
        }
        s
    }
}

fn xavier<T: Scalar>(rng: &mut impl Rng, fan_in: usize, fan_out: usize, n: usize) -> Vec<T> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n)
        .map(|_| T::from_f64c(rng.gen_range(-bound..bound)))
        .collect()
}

/// He-uniform init for layers feeding a relu.
fn he<T: Scalar>(rng: &mut impl Rng, fan_in: usize, n: usize) -> Vec<T> {
    let bound = (6.0 / fan_in as f64).sqrt();
    (0..n)
        .map(|_| T::from_f64c(rng.gen_range(-bound..bound)))
        .collect()
}

/// Fully connected layer, weight stored as `[in, out]`.
#[derive(Debug, Clone)]
pub struct Linear<T> {
    pub w: Tensor<T>,
    pub b: Tensor<T>,
}

pub struct LinearVars {
    pub w: Var,
    pub b: Var,
}

impl<T: Scalar> Linear<T> {
    pub fn init(rng: &mut impl Rng, fan_in: usize, fan_out: usize) -> Self {
        Linear {
            w: Tensor::new(vec![fan_in, fan_out], xavier(rng, fan_in, fan_out, fan_in * fan_out))
                .unwrap(),
            b: Tensor::zeros(vec![fan_out]),
        }
    }

    /// Init for layers followed by a relu.
    pub fn init_relu(rng: &mut impl Rng, fan_in: usize, fan_out: usize) -> Self {
        Linear {
            w: Tensor::new(vec![fan_in, fan_out], he(rng, fan_in, fan_in * fan_out)).unwrap(),
            b: Tensor::zeros(vec![fan_out]),
        }
    }

    pub fn register(&self, tape: &mut Tape<T>) -> LinearVars {
        LinearVars {
            w: tape.param(self.w.clone()),
            b: tape.param(self.b.clone()),
        }
    }

    pub fn forward_raw(&self, x: &Tensor<T>) -> Tensor<T> {
        let mut y = kernels::matmul(x, &self.w);
        let d = self.b.len();
        for (i, v) in y.data_mut().iter_mut().enumerate() {
            *v = *v + self.b.data()[i % d];
        }
        y
    }

    pub fn cast<U: Scalar>(&self) -> Linear<U> {
        Linear {
            w: self.w.cast(),
            b: self.b.cast(),
        }
    }
}

impl LinearVars {
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, x: Var) -> Var {
        let y = tape.matmul(x, self.w).expect("linear matmul");
        tape.add_row(y, self.b).expect("linear bias")
    }
}

/// 3x3 conv layer, stride 2, padding 1.
#[derive(Debug, Clone)]
pub struct ConvLayer<T> {
    pub w: Tensor<T>,
    pub b: Tensor<T>,
}

pub struct ConvVars {
    pub w: Var,
    pub b: Var,
}

impl<T: Scalar> ConvLayer<T> {
    pub fn init(rng: &mut impl Rng, cin: usize, cout: usize) -> Self {
        let fan_in = cin * 9;
        ConvLayer {
            w: Tensor::new(vec![cout, cin, 3, 3], he(rng, fan_in, cout * cin * 9)).unwrap(),
            b: Tensor::zeros(vec![cout]),
        }
    }

    pub fn register(&self, tape: &mut Tape<T>) -> ConvVars {
        ConvVars {
            w: tape.param(self.w.clone()),
            b: tape.param(self.b.clone()),
        }
    }

    pub fn forward_raw(&self, x: &Tensor<T>) -> Tensor<T> {
        let mut y = kernels::conv2d(x, &self.w, 2, 1);
        let s = y.shape().to_vec();
        let (c, hw) = (s[1], s[2] * s[3]);
        for (i, v) in y.data_mut().iter_mut().enumerate() {
            *v = *v + self.b.data()[(i / hw) % c];
        }
        y
    }

    pub fn cast<U: Scalar>(&self) -> ConvLayer<U> {
        ConvLayer {
            w: self.w.cast(),
            b: self.b.cast(),
        }
    }
}

impl ConvVars {
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, x: Var) -> Var {
        let y = tape.conv2d(x, self.w, 2, 1).expect("conv2d");
        tape.add_chan(y, self.b).expect("conv bias")
    }
}

fn relu_raw<T: Scalar>(mut x: Tensor<T>) -> Tensor<T> {
    for v in x.data_mut() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
    x
}

/// Observation encoder: three stride-2 convs, flatten, concat proprio,
/// linear projection to d_z.
#[derive(Debug, Clone)]
pub struct Encoder<T> {
    pub convs: Vec<ConvLayer<T>>,
    pub fc: Linear<T>,
    pub d_z: usize,
    pub flat_dim: usize,
}

pub struct EncoderVars {
    convs: Vec<ConvVars>,
    fc: LinearVars,
    flat_dim: usize,
}

impl<T: Scalar> Encoder<T> {
    pub fn init(rng: &mut impl Rng, hp: &ModelHyper) -> Self {
        let [c1, c2, c3] = hp.enc_channels;
        let side = hp.conv_out_side();
        let flat_dim = c3 * side * side;
        Encoder {
            convs: vec![
                ConvLayer::init(rng, 3, c1),
                ConvLayer::init(rng, c1, c2),
                ConvLayer::init(rng, c2, c3),
            ],
            fc: Linear::init(rng, flat_dim + 2, hp.d_z),
            d_z: hp.d_z,
            flat_dim,
        }
    }

    pub fn register(&self, tape: &mut Tape<T>) -> EncoderVars {
        EncoderVars {
            convs: self.convs.iter().map(|c| c.register(tape)).collect(),
            fc: self.fc.register(tape),
            flat_dim: self.flat_dim,
        }
    }

    /// No-grad encode of a frame batch `[N,3,H,W]` with proprio `[N,2]`.
    pub fn forward_raw(&self, images: &Tensor<T>, proprio: &Tensor<T>) -> Tensor<T> {
        let mut x = images.clone();
        for c in &self.convs {
            x = relu_raw(c.forward_raw(&x));
        }
        let n = x.shape()[0];
        let flat = x.reshaped(vec![n, self.flat_dim]).expect("flatten");
        let mut cat = Vec::with_capacity(n * (self.flat_dim + 2));
        for r in 0..n {
            cat.extend_from_slice(&flat.data()[r * self.flat_dim..(r + 1) * self.flat_dim]);
            cat.extend_from_slice(&proprio.data()[r * 2..(r + 1) * 2]);
        }
        let cat = Tensor::new(vec![n, self.flat_dim + 2], cat).unwrap();
        self.fc.forward_raw(&cat)
    }

    pub fn cast<U: Scalar>(&self) -> Encoder<U> {
        Encoder {
            convs: self.convs.iter().map(|c| c.cast()).collect(),
            fc: self.fc.cast(),
            d_z: self.d_z,
            flat_dim: self.flat_dim,
        }
    }
}

impl EncoderVars {
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, images: Var, proprio: Var) -> Var {
        let mut x = images;
        for c in &self.convs {
            let y = c.forward(tape, x);
            x = tape.relu(y);
        }
        let n = tape.shape(x)[0];
        let flat = tape.reshape(x, vec![n, self.flat_dim]).expect("flatten");
        let cat = tape.concat(&[flat, proprio]).expect("proprio concat");
        self.fc.forward(tape, cat)
    }
}

/// MLP over `[z, in]` with a residual connection back onto z.
#[derive(Debug, Clone)]
pub struct ResidualMlp<T> {
    pub layers: Vec<Linear<T>>,
    pub d_z: usize,
}

pub struct ResidualMlpVars {
    layers: Vec<LinearVars>,
}

impl<T: Scalar> ResidualMlp<T> {
    pub fn init(rng: &mut impl Rng, d_z: usize, d_in: usize, hidden: usize, depth: usize) -> Self {
        let mut layers = Vec::new();
        let mut prev = d_z + d_in;
        for _ in 0..depth {
            layers.push(Linear::init_relu(rng, prev, hidden));
            prev = hidden;
        }
        layers.push(Linear::init(rng, prev, d_z));
        ResidualMlp { layers, d_z }
    }

    pub fn register(&self, tape: &mut Tape<T>) -> ResidualMlpVars {
        ResidualMlpVars {
            layers: self.layers.iter().map(|l| l.register(tape)).collect(),
        }
    }

    /// One latent step without the tape: `z' = z + mlp([z, u])`.
    pub fn step_raw(&self, z: &Tensor<T>, u: &Tensor<T>) -> Tensor<T> {
        let n = z.shape()[0];
        let (dz, du) = (z.shape()[1], u.shape()[1]);
        let mut cat = Vec::with_capacity(n * (dz + du));
        for r in 0..n {
            cat.extend_from_slice(&z.data()[r * dz..(r + 1) * dz]);
            cat.extend_from_slice(&u.data()[r * du..(r + 1) * du]);
        }
        let mut x = Tensor::new(vec![n, dz + du], cat).unwrap();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            x = l.forward_raw(&x);
            if i < last {
                x = relu_raw(x);
            }
        }
        x.add_assign(z);
        x
    }

    pub fn cast<U: Scalar>(&self) -> ResidualMlp<U> {
        ResidualMlp {
            layers: self.layers.iter().map(|l| l.cast()).collect(),
            d_z: self.d_z,
        }
    }
}

impl ResidualMlpVars {
    pub fn step<T: Scalar>(&self, tape: &mut Tape<T>, z: Var, u: Var) -> Var {
        let mut x = tape.concat(&[z, u]).expect("predictor concat");
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            x = l.forward(tape, x);
            if i < last {
                x = tape.relu(x);
            }
        }
        tape.add(x, z).expect("residual add")
    }
}

pub type LowPredictor<T> = ResidualMlp<T>;
pub type HighPredictor<T> = ResidualMlp<T>;

/// Encodes a zero-padded primitive-action chunk (plus a length scalar)
/// into a d_l-dimensional latent action.
#[derive(Debug, Clone)]
pub struct ActionEncoder<T> {
    pub l1: Linear<T>,
    pub l2: Linear<T>,
    pub max_chunk: usize,
    pub d_l: usize,
}

pub struct ActionEncoderVars {
    l1: LinearVars,
    l2: LinearVars,
}

impl<T: Scalar> ActionEncoder<T> {
    pub fn init(rng: &mut impl Rng, hp: &ModelHyper) -> Self {
        ActionEncoder {
            l1: Linear::init_relu(rng, hp.chunk_feat_dim(), hp.hidden_action),
            l2: Linear::init(rng, hp.hidden_action, hp.d_l),
            max_chunk: hp.max_chunk,
            d_l: hp.d_l,
        }
    }

    pub fn register(&self, tape: &mut Tape<T>) -> ActionEncoderVars {
        ActionEncoderVars {
            l1: self.l1.register(tape),
            l2: self.l2.register(tape),
        }
    }

    pub fn forward_raw(&self, feats: &Tensor<T>) -> Tensor<T> {
        self.l2.forward_raw(&relu_raw(self.l1.forward_raw(feats)))
    }

    pub fn cast<U: Scalar>(&self) -> ActionEncoder<U> {
        ActionEncoder {
            l1: self.l1.cast(),
            l2: self.l2.cast(),
            max_chunk: self.max_chunk,
            d_l: self.d_l,
        }
    }
}

impl ActionEncoderVars {
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, feats: Var) -> Var {
        let h = self.l1.forward(tape, feats);
        let h = tape.relu(h);
        self.l2.forward(tape, h)
    }
}

/// Pack a variable-length chunk into the padded feature row.
/// Fails when the chunk is longer than `max_chunk`.
pub fn chunk_features<T: Scalar>(actions: &[[f32; 2]], max_chunk: usize) -> Option<Vec<T>> {
    if actions.is_empty() || actions.len() > max_chunk {
        return None;
    }
    let mut row = vec![T::zero(); 2 * max_chunk + 1];
    for (i, a) in actions.iter().enumerate() {
        row[2 * i] = T::from_f64c(a[0] as f64);
        row[2 * i + 1] = T::from_f64c(a[1] as f64);
    }
    row[2 * max_chunk] = T::from_f64c(actions.len() as f64 / max_chunk as f64);
    Some(row)
}

/// Linear head predicting normalized (x, y, vx, vy) from z; training-time
/// auxiliary loss only.
#[derive(Debug, Clone)]
pub struct ProprioHead<T> {
    pub l: Linear<T>,
}

impl<T: Scalar> ProprioHead<T> {
    pub fn init(rng: &mut impl Rng, d_z: usize) -> Self {
        ProprioHead {
            l: Linear::init(rng, d_z, 4),
        }
    }

    pub fn cast<U: Scalar>(&self) -> ProprioHead<U> {
        ProprioHead { l: self.l.cast() }
    }
}

/// Diagnostic prober: small MLP mapping latents to (x, y) world coords.
#[derive(Debug, Clone)]
pub struct Prober<T> {
    pub l1: Linear<T>,
    pub l2: Linear<T>,
}

impl<T: Scalar> Prober<T> {
    pub fn init(rng: &mut impl Rng, d_z: usize) -> Self {
        Prober {
            l1: Linear::init_relu(rng, d_z, 32),
            l2: Linear::init(rng, 32, 2),
        }
    }

    pub fn forward_raw(&self, z: &Tensor<T>) -> Tensor<T> {
        self.l2.forward_raw(&relu_raw(self.l1.forward_raw(z)))
    }
}

/// Low-level world model bundle: encoder, one-step predictor, training
/// heads, prober.
#[derive(Debug, Clone)]
pub struct LowModel {
    pub hp: ModelHyper,
    pub encoder: Encoder<f32>,
    pub predictor: LowPredictor<f32>,
    pub proprio_head: ProprioHead<f32>,
    pub prober: Prober<f32>,
}

/// High-level world model bundle, tied to a frozen encoder by hash.
#[derive(Debug, Clone)]
pub struct HighModel {
    pub hp: ModelHyper,
    pub predictor: HighPredictor<f32>,
    pub action_encoder: ActionEncoder<f32>,
    /// Per-dimension std of latent actions over the training set; bounds
    /// planner sampling.
    pub l_action_std: Vec<f32>,
    pub encoder_hash: String,
}

impl LowModel {
    pub fn init(rng: &mut impl Rng, hp: &ModelHyper) -> Self {
        LowModel {
            hp: hp.clone(),
            encoder: Encoder::init(rng, hp),
            predictor: ResidualMlp::init(rng, hp.d_z, 2, hp.hidden_low, 2),
            proprio_head: ProprioHead::init(rng, hp.d_z),
            prober: Prober::init(rng, hp.d_z),
        }
    }

    /// Encode a single observation.
    pub fn encode_one(&self, image: &Tensor<f32>, proprio: [f32; 2]) -> Vec<f32> {
        let n = image.len();
        let img = image.reshaped(vec![1, 3, self.hp.resolution, self.hp.resolution]).unwrap_or_else(
            |_| panic!("observation has {n} elements, expected trained resolution {}", self.hp.resolution),
        );
        let p = Tensor::new(vec![1, 2], vec![proprio[0], proprio[1]]).unwrap();
        self.encoder.forward_raw(&img, &p).data().to_vec()
    }

    /// Probe a latent back to (x, y) world coordinates.
    pub fn probe(&self, z: &[f32]) -> [f32; 2] {
        let t = Tensor::new(vec![1, z.len()], z.to_vec()).unwrap();
        let out = self.prober.forward_raw(&t);
        [out.data()[0], out.data()[1]]
    }
}

impl HighModel {
    pub fn init(rng: &mut impl Rng, hp: &ModelHyper, encoder_hash: String) -> Self {
        HighModel {
            hp: hp.clone(),
            predictor: ResidualMlp::init(rng, hp.d_z, hp.d_l, hp.hidden_high, 3),
            action_encoder: ActionEncoder::init(rng, hp),
            l_action_std: vec![1.0; hp.d_l],
            encoder_hash,
        }
    }
}
