use std::collections::BTreeMap;
use std::path::Path;

use ndcompute::{checkpoint, Tensor};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::nets::{
    ActionEncoder, ConvLayer, Encoder, HighModel, Linear, LowModel, ModelHyper, Prober,
    ProprioHead, ResidualMlp,
};
use crate::config::hex_str;
use crate::error::{HwmError, Result};

/// TOML sidecar written next to every checkpoint; records model shape and
/// provenance so later stages can check lineage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sidecar {
    pub kind: String,
    pub config_hash: String,
    /// Hash over the encoder weights this model was trained with/against.
    pub encoder_hash: String,
    pub hyper: ModelHyper,
    #[serde(default)]
    pub l_action_std: Vec<f32>,
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".toml");
    std::path::PathBuf::from(s)
}

fn write_sidecar(path: &Path, sc: &Sidecar) -> Result<()> {
    let text = toml::to_string_pretty(sc).map_err(|e| HwmError::Format(e.to_string()))?;
    std::fs::write(sidecar_path(path), text)?;
    Ok(())
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar> {
    let text = std::fs::read_to_string(sidecar_path(path))?;
    toml::from_str(&text).map_err(|e| HwmError::Format(e.to_string()))
}

/// Hash of encoder weights: shape dims and raw f32 LE bytes, in param
/// order.
pub fn encoder_hash(enc: &Encoder<f32>) -> String {
    let mut h = Sha256::new();
    let mut feed = |t: &Tensor<f32>| {
        for d in t.shape() {
            h.update((*d as u64).to_le_bytes());
        }
        for v in t.data() {
            h.update(v.to_le_bytes());
        }
    };
    for c in &enc.convs {
        feed(&c.w);
        feed(&c.b);
    }
    feed(&enc.fc.w);
    feed(&enc.fc.b);
    hex_str(&h.finalize())
}

fn put_linear(m: &mut BTreeMap<String, Tensor<f32>>, name: &str, l: &Linear<f32>) {
    m.insert(format!("{name}.w"), l.w.clone());
    m.insert(format!("{name}.b"), l.b.clone());
}

fn get(m: &BTreeMap<String, Tensor<f32>>, name: &str) -> Result<Tensor<f32>> {
    m.get(name)
        .cloned()
        .ok_or_else(|| HwmError::Format(format!("checkpoint missing tensor `{name}`")))
}

fn get_linear(m: &BTreeMap<String, Tensor<f32>>, name: &str) -> Result<Linear<f32>> {
    Ok(Linear {
        w: get(m, &format!("{name}.w"))?,
        b: get(m, &format!("{name}.b"))?,
    })
}

fn put_mlp(m: &mut BTreeMap<String, Tensor<f32>>, name: &str, mlp: &ResidualMlp<f32>) {
    for (i, l) in mlp.layers.iter().enumerate() {
        put_linear(m, &format!("{name}.{i}"), l);
    }
}

fn get_mlp(m: &BTreeMap<String, Tensor<f32>>, name: &str, depth: usize, d_z: usize) -> Result<ResidualMlp<f32>> {
    let layers = (0..depth + 1)
        .map(|i| get_linear(m, &format!("{name}.{i}")))
        .collect::<Result<Vec<_>>>()?;
    Ok(ResidualMlp { layers, d_z })
}

pub fn save_low(path: &Path, model: &LowModel, config_hash: &str) -> Result<()> {
    let mut m = BTreeMap::new();
    for (i, c) in model.encoder.convs.iter().enumerate() {
        m.insert(format!("encoder.conv{i}.w"), c.w.clone());
        m.insert(format!("encoder.conv{i}.b"), c.b.clone());
    }
    put_linear(&mut m, "encoder.fc", &model.encoder.fc);
    put_mlp(&mut m, "predictor", &model.predictor);
    put_linear(&mut m, "proprio", &model.proprio_head.l);
    put_linear(&mut m, "prober.0", &model.prober.l1);
    put_linear(&mut m, "prober.1", &model.prober.l2);
    checkpoint::save(path, &m)?;
    write_sidecar(
        path,
        &Sidecar {
            kind: "low".into(),
            config_hash: config_hash.to_string(),
            encoder_hash: encoder_hash(&model.encoder),
            hyper: model.hp.clone(),
            l_action_std: Vec::new(),
        },
    )
}

pub fn load_low(path: &Path) -> Result<(LowModel, Sidecar)> {
    let sc = read_sidecar(path)?;
    if sc.kind != "low" {
        return Err(HwmError::Lineage(format!(
            "expected a low-level checkpoint, sidecar says kind=`{}`",
            sc.kind
        )));
    }
    let m = checkpoint::load(path)?;
    let hp = sc.hyper.clone();
    let convs = (0..3)
        .map(|i| {
            Ok(ConvLayer {
                w: get(&m, &format!("encoder.conv{i}.w"))?,
                b: get(&m, &format!("encoder.conv{i}.b"))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fc = get_linear(&m, "encoder.fc")?;
    let side = hp.conv_out_side();
    let flat_dim = hp.enc_channels[2] * side * side;
    let model = LowModel {
        encoder: Encoder {
            convs,
            fc,
            d_z: hp.d_z,
            flat_dim,
        },
        predictor: get_mlp(&m, "predictor", 2, hp.d_z)?,
        proprio_head: ProprioHead {
            l: get_linear(&m, "proprio")?,
        },
        prober: Prober {
            l1: get_linear(&m, "prober.0")?,
            l2: get_linear(&m, "prober.1")?,
        },
        hp,
    };
    let actual = encoder_hash(&model.encoder);
    if actual != sc.encoder_hash {
        return Err(HwmError::Lineage(format!(
            "encoder weights hash {actual} does not match sidecar {}",
            sc.encoder_hash
        )));
    }
    Ok((model, sc))
}

pub fn save_high(path: &Path, model: &HighModel, config_hash: &str) -> Result<()> {
    let mut m = BTreeMap::new();
    put_mlp(&mut m, "predictor", &model.predictor);
    put_linear(&mut m, "action_encoder.0", &model.action_encoder.l1);
    put_linear(&mut m, "action_encoder.1", &model.action_encoder.l2);
    checkpoint::save(path, &m)?;
    write_sidecar(
        path,
        &Sidecar {
            kind: "high".into(),
            config_hash: config_hash.to_string(),
            encoder_hash: model.encoder_hash.clone(),
            hyper: model.hp.clone(),
            l_action_std: model.l_action_std.clone(),
        },
    )
}

pub fn load_high(path: &Path) -> Result<(HighModel, Sidecar)> {
    let sc = read_sidecar(path)?;
    if sc.kind != "high" {
        return Err(HwmError::Lineage(format!(
            "expected a high-level checkpoint, sidecar says kind=`{}`",
            sc.kind
        )));
    }
    let m = checkpoint::load(path)?;
    let hp = sc.hyper.clone();
    let model = HighModel {
        predictor: get_mlp(&m, "predictor", 3, hp.d_z)?,
        action_encoder: ActionEncoder {
            l1: get_linear(&m, "action_encoder.0")?,
            l2: get_linear(&m, "action_encoder.1")?,
            max_chunk: hp.max_chunk,
            d_l: hp.d_l,
        },
        l_action_std: sc.l_action_std.clone(),
        encoder_hash: sc.encoder_hash.clone(),
        hp,
    };
    Ok((model, sc))
}
