use ndcompute::{Adam, Tape, Tensor, Tensor32, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::losses::{covariance_penalty, variance_hinge, weighted_sum};
use super::nets::{chunk_features, HighModel, LowModel, ModelHyper};
use crate::config::{RunConfig, TrainConfig};
use crate::env::{render_with_walls, wall_channel, Dataset};
use crate::error::{HwmError, Result};

/// One logged optimization step.
#[derive(Debug, Clone, Serialize)]
pub struct TrainLogRow {
    pub stage: String,
    pub epoch: usize,
    pub step: usize,
    pub loss: f64,
    pub loss_pred: f64,
    pub loss_var: f64,
    pub loss_cov: f64,
    pub loss_proprio: f64,
}

fn low_params_mut(m: &mut LowModel) -> Vec<&mut Tensor32> {
    let mut p: Vec<&mut Tensor32> = Vec::new();
    for c in &mut m.encoder.convs {
        p.push(&mut c.w);
        p.push(&mut c.b);
    }
    p.push(&mut m.encoder.fc.w);
    p.push(&mut m.encoder.fc.b);
    for l in &mut m.predictor.layers {
        p.push(&mut l.w);
        p.push(&mut l.b);
    }
    p.push(&mut m.proprio_head.l.w);
    p.push(&mut m.proprio_head.l.b);
    p
}

fn high_params_mut(m: &mut HighModel) -> Vec<&mut Tensor32> {
    let mut p: Vec<&mut Tensor32> = Vec::new();
    for l in &mut m.predictor.layers {
        p.push(&mut l.w);
        p.push(&mut l.b);
    }
    p.push(&mut m.action_encoder.l1.w);
    p.push(&mut m.action_encoder.l1.b);
    p.push(&mut m.action_encoder.l2.w);
    p.push(&mut m.action_encoder.l2.b);
    p
}

/// Sample (trajectory index, start step) pairs that leave room for a
/// window of `t_len` recorded steps.
fn sample_windows(
    rng: &mut ChaCha8Rng,
    ds: &Dataset,
    batch: usize,
    t_len: usize,
) -> Result<Vec<(usize, usize)>> {
    let ok: Vec<usize> = (0..ds.trajectories.len())
        .filter(|&i| ds.trajectories[i].len() > t_len)
        .collect();
    if ok.is_empty() {
        return Err(HwmError::Training(format!(
            "no trajectory is longer than the {t_len}-step training window"
        )));
    }
    Ok((0..batch)
        .map(|_| {
            let ti = ok[rng.gen_range(0..ok.len())];
            let max_start = ds.trajectories[ti].len() - 1 - t_len;
            (ti, rng.gen_range(0..=max_start))
        })
        .collect())
}

/// Render a window batch into one `[B*(t_len+1), 3, res, res]` image
/// tensor plus matching proprio rows and per-step action tensors.
struct WindowBatch {
    images: Tensor32,
    proprio: Tensor32,
    /// actions[j] is `[B, 2]`, the action taken at window step j.
    actions: Vec<Tensor32>,
    /// Normalized (x, y, vx, vy) target rows aligned with `images`.
    proprio_targets: Tensor32,
}

fn render_windows(
    ds: &Dataset,
    hp: &ModelHyper,
    walls: &[Vec<f32>],
    windows: &[(usize, usize)],
    t_len: usize,
) -> WindowBatch {
    let rp = hp.render_params();
    let res = hp.resolution;
    let b = windows.len();
    let frames = t_len + 1;
    let extent = hp.g as f32 * hp.cell_size;
    let mut img = Vec::with_capacity(b * frames * 3 * res * res);
    let mut prop = Vec::with_capacity(b * frames * 2);
    let mut targ = Vec::with_capacity(b * frames * 4);
    let mut actions = vec![Vec::with_capacity(b * 2); t_len];
    for &(ti, start) in windows {
        let tr = &ds.trajectories[ti];
        let layout = &ds.layouts[tr.layout_id as usize];
        for j in 0..frames {
            let s = &tr.states[start + j];
            let obs = render_with_walls(s, layout, &rp, &walls[tr.layout_id as usize]);
            img.extend_from_slice(obs.image.data());
            prop.extend_from_slice(&s.vel);
            targ.extend_from_slice(&[
                s.pos[0] / extent,
                s.pos[1] / extent,
                s.vel[0] / hp.v_max,
                s.vel[1] / hp.v_max,
            ]);
        }
        for (j, row) in actions.iter_mut().enumerate() {
            row.extend_from_slice(&tr.actions[start + j]);
        }
    }
    WindowBatch {
        images: Tensor::new(vec![b * frames, 3, res, res], img).unwrap(),
        proprio: Tensor::new(vec![b * frames, 2], prop).unwrap(),
        actions: actions
            .into_iter()
            .map(|a| Tensor::new(vec![b, 2], a).unwrap())
            .collect(),
        proprio_targets: Tensor::new(vec![b * frames, 4], targ).unwrap(),
    }
}

/// Row indices of frame j for every window in an interleaved
/// `[B*(t_len+1), ...]` layout.
fn frame_rows(b: usize, frames: usize, j: usize) -> Vec<usize> {
    (0..b).map(|i| i * frames + j).collect()
}

/// Train the low-level model (encoder + one-step predictor + heads).
pub fn train_low(cfg: &RunConfig, ds: &Dataset, seed: u64) -> Result<(LowModel, Vec<TrainLogRow>)> {
    let hp = ModelHyper::from_config(cfg);
    let tc = &cfg.train_low;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = LowModel::init(&mut rng, &hp);
    let rp = hp.render_params();
    let walls: Vec<Vec<f32>> = ds.layouts.iter().map(|l| wall_channel(l, &rp)).collect();

    let shapes: Vec<Vec<usize>> = low_params_mut(&mut model)
        .iter()
        .map(|p| p.shape().to_vec())
        .collect();
    let mut adam = Adam::new(tc.lr as f32, &shapes);
    let mut log = Vec::new();
    let t_len = tc.pred_t;
    for epoch in 0..tc.epochs {
        for step in 0..tc.steps_per_epoch {
            let windows = sample_windows(&mut rng, ds, tc.batch, t_len)?;
            let wb = render_windows(ds, &hp, &walls, &windows, t_len);
            let b = tc.batch;
            let frames = t_len + 1;

            let mut tape: Tape<f32> = Tape::new();
            let enc = model.encoder.register(&mut tape);
            let pred = model.predictor.register(&mut tape);
            let prop_head = model.proprio_head.l.register(&mut tape);

            let images = tape.input(wb.images);
            let proprio = tape.input(wb.proprio);
            let z_all = enc.forward(&mut tape, images, proprio);

            // Per-frame latent slices; targets optionally gradient-blocked.
            let z_j: Vec<Var> = (0..frames)
                .map(|j| tape.gather_rows(z_all, &frame_rows(b, frames, j)).unwrap())
                .collect();
            let tgt = |tape: &mut Tape<f32>, v: Var| {
                if tc.stop_grad_targets {
                    tape.stop_grad(v)
                } else {
                    v
                }
            };

            // One-step (teacher forcing / invariance) loss over the whole
            // window in a single batched predictor pass.
            let src_rows: Vec<usize> = (0..t_len).flat_map(|j| frame_rows(b, frames, j)).collect();
            let dst_rows: Vec<usize> = (1..frames).flat_map(|j| frame_rows(b, frames, j)).collect();
            let z_src = tape.gather_rows(z_all, &src_rows).unwrap();
            let z_dst = tape.gather_rows(z_all, &dst_rows).unwrap();
            let z_dst = tgt(&mut tape, z_dst);
            let mut a_stack = Vec::with_capacity(b * t_len * 2);
            for a in &wb.actions {
                a_stack.extend_from_slice(a.data());
            }
            let a_all = tape.input(Tensor::new(vec![b * t_len, 2], a_stack).unwrap());
            let z_hat = pred.step(&mut tape, z_src, a_all);
            let one_step = tape.l1_loss(z_hat, z_dst).unwrap();

            // Open-loop rollout from the first frame.
            let mut roll_terms = Vec::new();
            let mut z_roll = z_j[0];
            for j in 0..t_len {
                let a = tape.input(wb.actions[j].clone());
                z_roll = pred.step(&mut tape, z_roll, a);
                if j >= 1 {
                    let target = tgt(&mut tape, z_j[j + 1]);
                    roll_terms.push(tape.l1_loss(z_roll, target).unwrap());
                }
            }
            let l_roll = if roll_terms.is_empty() {
                tape.input(Tensor::scalar(0.0))
            } else {
                let mut acc = roll_terms[0];
                for &t in &roll_terms[1..] {
                    acc = tape.add(acc, t).unwrap();
                }
                acc
            };

            // VICReg anti-collapse on encoded latents + proprio readout.
            let l_var = variance_hinge(&mut tape, z_all);
            let l_cov = covariance_penalty(&mut tape, z_all);
            let prop_pred = prop_head.forward(&mut tape, z_all);
            let prop_t = tape.input(wb.proprio_targets);
            let l_prop = tape.mse_loss(prop_pred, prop_t).unwrap();
            let zp = tape.concat(&[z_all, prop_pred]).unwrap();
            let l_var_p = variance_hinge(&mut tape, zp);

            let loss = weighted_sum(
                &mut tape,
                &[
                    (tc.gamma_tf + tc.lambda_vic, one_step),
                    (tc.gamma_roll, l_roll),
                    (tc.alpha, l_var),
                    (tc.beta, l_cov),
                    (tc.omega, l_var_p),
                    (tc.proprio_coef, l_prop),
                ],
            );

            let grads = tape.backward(loss)?;
            let g = tape.param_grads(&grads);
            adam.step(&mut low_params_mut(&mut model), &g)?;

            log.push(TrainLogRow {
                stage: "low".into(),
                epoch,
                step,
                loss: tape.value(loss).item() as f64,
                loss_pred: tape.value(one_step).item() as f64,
                loss_var: tape.value(l_var).item() as f64,
                loss_cov: tape.value(l_cov).item() as f64,
                loss_proprio: tape.value(l_prop).item() as f64,
            });
        }
    }

    train_prober(&mut model, ds, &walls, tc, &mut rng)?;
    Ok((model, log))
}

/// Fit the diagnostic prober on frozen latents; the main model is not
/// touched.
pub fn train_prober(
    model: &mut LowModel,
    ds: &Dataset,
    walls: &[Vec<f32>],
    tc: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let hp = model.hp.clone();
    let rp = hp.render_params();
    let steps = (tc.steps_per_epoch * tc.epochs).max(50);
    let shapes = [
        model.prober.l1.w.shape().to_vec(),
        model.prober.l1.b.shape().to_vec(),
        model.prober.l2.w.shape().to_vec(),
        model.prober.l2.b.shape().to_vec(),
    ];
    let mut adam = Adam::new(1e-2, &shapes);
    for _ in 0..steps {
        let windows = sample_windows(rng, ds, tc.batch.min(64), 0)?;
        let b = windows.len();
        let mut img = Vec::new();
        let mut prop = Vec::new();
        let mut pos = Vec::new();
        for &(ti, start) in &windows {
            let tr = &ds.trajectories[ti];
            let layout = &ds.layouts[tr.layout_id as usize];
            let s = &tr.states[start];
            let obs = render_with_walls(s, layout, &rp, &walls[tr.layout_id as usize]);
            img.extend_from_slice(obs.image.data());
            prop.extend_from_slice(&s.vel);
            pos.extend_from_slice(&s.pos);
        }
        let images = Tensor::new(vec![b, 3, hp.resolution, hp.resolution], img).unwrap();
        let proprio = Tensor::new(vec![b, 2], prop).unwrap();
        let z = model.encoder.forward_raw(&images, &proprio);

        let mut tape: Tape<f32> = Tape::new();
        let l1 = model.prober.l1.register(&mut tape);
        let l2 = model.prober.l2.register(&mut tape);
        let zv = tape.input(z);
        let h = l1.forward(&mut tape, zv);
        let h = tape.relu(h);
        let out = l2.forward(&mut tape, h);
        let target = tape.input(Tensor::new(vec![b, 2], pos).unwrap());
        let loss = tape.mse_loss(out, target).unwrap();
        let grads = tape.backward(loss)?;
        let g = tape.param_grads(&grads);
        adam.step(
            &mut [
                &mut model.prober.l1.w,
                &mut model.prober.l1.b,
                &mut model.prober.l2.w,
                &mut model.prober.l2.b,
            ],
            &g,
        )?;
    }
    Ok(())
}

/// Encode every recorded state of a dataset with a frozen encoder.
/// Returns one latent row-major `Vec<f32>` per trajectory.
pub fn encode_states_raw(model: &LowModel, ds: &Dataset) -> Vec<Vec<f32>> {
    let hp = &model.hp;
    let rp = hp.render_params();
    let walls: Vec<Vec<f32>> = ds.layouts.iter().map(|l| wall_channel(l, &rp)).collect();
    let chunk = 64;
    ds.trajectories
        .iter()
        .map(|tr| {
            let layout = &ds.layouts[tr.layout_id as usize];
            let mut out = Vec::with_capacity(tr.states.len() * hp.d_z);
            for states in tr.states.chunks(chunk) {
                let n = states.len();
                let mut img = Vec::with_capacity(n * 3 * hp.resolution * hp.resolution);
                let mut prop = Vec::with_capacity(n * 2);
                for s in states {
                    let obs = render_with_walls(s, layout, &rp, &walls[tr.layout_id as usize]);
                    img.extend_from_slice(obs.image.data());
                    prop.extend_from_slice(&s.vel);
                }
                let images = Tensor::new(vec![n, 3, hp.resolution, hp.resolution], img).unwrap();
                let proprio = Tensor::new(vec![n, 2], prop).unwrap();
                out.extend_from_slice(model.encoder.forward_raw(&images, &proprio).data());
            }
            out
        })
        .collect()
}

/// Train the high-level model against latents from a frozen low-level
/// encoder.
pub fn train_high(
    cfg: &RunConfig,
    ds: &Dataset,
    low: &LowModel,
    seed: u64,
) -> Result<(HighModel, Vec<TrainLogRow>)> {
    let hp = ModelHyper::from_config(cfg);
    let tc = &cfg.train_high;
    let stride = hp.stride;
    let n_way = tc.pred_t; // waypoint transitions per training window
    let span = stride * n_way;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let enc_hash = super::checkpoint::encoder_hash(&low.encoder);
    let mut model = HighModel::init(&mut rng, &hp, enc_hash);

    let latents = encode_states_raw(low, ds);
    let ok: Vec<usize> = (0..ds.trajectories.len())
        .filter(|&i| ds.trajectories[i].len() > span)
        .collect();
    if ok.is_empty() {
        return Err(HwmError::Training(format!(
            "no trajectory covers a high-level window of {span} recorded steps"
        )));
    }

    let d_z = hp.d_z;
    let feat_dim = hp.chunk_feat_dim();
    let shapes: Vec<Vec<usize>> = high_params_mut(&mut model)
        .iter()
        .map(|p| p.shape().to_vec())
        .collect();
    let mut adam = Adam::new(tc.lr as f32, &shapes);
    let mut log = Vec::new();
    for epoch in 0..tc.epochs {
        for step in 0..tc.steps_per_epoch {
            let b = tc.batch;
            // Gather waypoint latents [B*(n_way+1), d_z] and per-segment
            // chunk features [B*n_way, feat_dim].
            let mut zrows = Vec::with_capacity(b * (n_way + 1) * d_z);
            let mut feats = Vec::with_capacity(b * n_way * feat_dim);
            for _ in 0..b {
                let ti = ok[rng.gen_range(0..ok.len())];
                let tr = &ds.trajectories[ti];
                let start = rng.gen_range(0..tr.len() - span);
                for i in 0..=n_way {
                    let t = start + i * stride;
                    zrows.extend_from_slice(&latents[ti][t * d_z..(t + 1) * d_z]);
                    if i < n_way {
                        let row = chunk_features::<f32>(
                            &tr.actions[t..t + stride],
                            hp.max_chunk,
                        )
                        .ok_or_else(|| {
                            HwmError::Training(format!(
                                "stride {stride} exceeds max_chunk {}",
                                hp.max_chunk
                            ))
                        })?;
                        feats.extend_from_slice(&row);
                    }
                }
            }
            let frames = n_way + 1;
            let mut tape: Tape<f32> = Tape::new();
            let pred = model.predictor.register(&mut tape);
            let ae = model.action_encoder.register(&mut tape);

            let z_all = tape.input(Tensor::new(vec![b * frames, d_z], zrows).unwrap());
            let f_all = tape.input(Tensor::new(vec![b * n_way, feat_dim], feats).unwrap());
            let l_all = ae.forward(&mut tape, f_all);

            let z_j: Vec<Var> = (0..frames)
                .map(|j| tape.gather_rows(z_all, &frame_rows(b, frames, j)).unwrap())
                .collect();
            let l_j: Vec<Var> = (0..n_way)
                .map(|j| tape.gather_rows(l_all, &frame_rows(b, n_way, j)).unwrap())
                .collect();

            // One-step teacher forcing across all segments at once.
            let src_rows: Vec<usize> =
                (0..n_way).flat_map(|j| frame_rows(b, frames, j)).collect();
            let dst_rows: Vec<usize> =
                (1..frames).flat_map(|j| frame_rows(b, frames, j)).collect();
            let z_src = tape.gather_rows(z_all, &src_rows).unwrap();
            let z_dst = tape.gather_rows(z_all, &dst_rows).unwrap();
            let z_hat = pred.step(&mut tape, z_src, l_all);
            let one_step = tape.l1_loss(z_hat, z_dst).unwrap();

            // Open-loop rollout through latent actions.
            let mut roll_terms = Vec::new();
            let mut z_roll = z_j[0];
            for j in 0..n_way {
                z_roll = pred.step(&mut tape, z_roll, l_j[j]);
                if j >= 1 {
                    roll_terms.push(tape.l1_loss(z_roll, z_j[j + 1]).unwrap());
                }
            }
            let l_roll = if roll_terms.is_empty() {
                tape.input(Tensor::scalar(0.0))
            } else {
                let mut acc = roll_terms[0];
                for &t in &roll_terms[1..] {
                    acc = tape.add(acc, t).unwrap();
                }
                acc
            };

            // Anti-collapse on the latent-action batch.
            let l_var = variance_hinge(&mut tape, l_all);
            let l_cov = covariance_penalty(&mut tape, l_all);

            let loss = weighted_sum(
                &mut tape,
                &[
                    (tc.gamma_tf + tc.lambda_vic, one_step),
                    (tc.gamma_roll, l_roll),
                    (tc.alpha, l_var),
                    (tc.beta, l_cov),
                ],
            );
            let grads = tape.backward(loss)?;
            let g = tape.param_grads(&grads);
            adam.step(&mut high_params_mut(&mut model), &g)?;

            log.push(TrainLogRow {
                stage: "high".into(),
                epoch,
                step,
                loss: tape.value(loss).item() as f64,
                loss_pred: tape.value(one_step).item() as f64,
                loss_var: tape.value(l_var).item() as f64,
                loss_cov: tape.value(l_cov).item() as f64,
                loss_proprio: 0.0,
            });
        }
    }

    model.l_action_std = latent_action_std(&model, ds, &mut rng)?;
    Ok((model, log))
}

/// Per-dimension std of encoded latent actions over sampled training
/// chunks; the planner uses it to bound its search space.
fn latent_action_std(model: &HighModel, ds: &Dataset, rng: &mut ChaCha8Rng) -> Result<Vec<f32>> {
    let hp = &model.hp;
    let stride = hp.stride;
    let ok: Vec<usize> = (0..ds.trajectories.len())
        .filter(|&i| ds.trajectories[i].len() > stride)
        .collect();
    if ok.is_empty() {
        return Err(HwmError::Training("dataset too short for latent action statistics".into()));
    }
    let n = 512.min(ok.len() * 8);
    let feat_dim = hp.chunk_feat_dim();
    let mut feats = Vec::with_capacity(n * feat_dim);
    for _ in 0..n {
        let ti = ok[rng.gen_range(0..ok.len())];
        let tr = &ds.trajectories[ti];
        let start = rng.gen_range(0..tr.len() - stride);
        let row = chunk_features::<f32>(&tr.actions[start..start + stride], hp.max_chunk)
            .ok_or_else(|| HwmError::Training("chunk longer than max_chunk".into()))?;
        feats.extend_from_slice(&row);
    }
    let l = model
        .action_encoder
        .forward_raw(&Tensor::new(vec![n, feat_dim], feats).unwrap());
    let d = hp.d_l;
    let mut std = vec![0.0f32; d];
    for j in 0..d {
        let col: Vec<f32> = (0..n).map(|i| l.data()[i * d + j]).collect();
        let mean = col.iter().sum::<f32>() / n as f32;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f32>() / (n as f32 - 1.0);
        std[j] = var.sqrt().max(1e-3);
    }
    Ok(std)
}
