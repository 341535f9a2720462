//! Run configuration: nested TOML document with explicit types, unknown
//! keys rejected, and a stable canonical hash (sorted-key JSON -> SHA-256).

use crate::error::{HwmError, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train_low: TrainConfig,
    #[serde(default = "TrainConfig::default_high")]
    pub train_high: TrainConfig,
    pub planner: PlannerConfig,
    pub bench: BenchConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            env: EnvConfig::default(),
            data: DataConfig::default(),
            model: ModelConfig::default(),
            train_low: TrainConfig::default(),
            train_high: TrainConfig::default_high(),
            planner: PlannerConfig::default(),
            bench: BenchConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub g: usize,
    pub cell_size: f32,
    pub resolution: usize,
    pub border_px: usize,
    pub blob_sigma: f32,
    pub blob_mass: f32,
    pub a_scale: f32,
    pub v_max: f32,
    pub action_repeat: usize,
    pub free_frac: [f64; 2],
    pub max_layout_attempts: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            g: 8,
            cell_size: 1.0,
            resolution: 64,
            border_px: 4,
            blob_sigma: 1.5,
            blob_mass: 4.0,
            a_scale: 0.1,
            v_max: 0.5,
            action_repeat: 4,
            free_frac: [0.5, 0.8],
            max_layout_attempts: 10_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub train_layouts: usize,
    pub test_layouts: usize,
    pub episodes_per_layout: usize,
    /// Recorded (post-action-repeat) steps per episode.
    pub steps: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            train_layouts: 5,
            test_layouts: 4,
            episodes_per_layout: 200,
            steps: 100,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub d_z: usize,
    pub d_l: usize,
    pub enc_channels: [usize; 3],
    pub hidden_low: usize,
    pub hidden_high: usize,
    pub hidden_action: usize,
    /// Maximum primitive-action chunk length the action encoder accepts;
    /// also the high-level stride in recorded steps.
    pub max_chunk: usize,
    pub stride: usize,
    pub waypoints: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_z: 32,
            d_l: 8,
            enc_channels: [8, 16, 32],
            hidden_low: 64,
            hidden_high: 128,
            hidden_action: 64,
            max_chunk: 10,
            stride: 10,
            waypoints: 6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub batch: usize,
    pub lr: f64,
    pub gamma_tf: f64,
    pub gamma_roll: f64,
    pub pred_t: usize,
    pub alpha: f64,
    pub beta: f64,
    pub lambda_vic: f64,
    pub omega: f64,
    pub proprio_coef: f64,
    pub stop_grad_targets: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 3,
            steps_per_epoch: 200,
            batch: 128,
            lr: 0.018,
            gamma_tf: 0.0,
            gamma_roll: 1.0,
            pred_t: 15,
            alpha: 29.4,
            beta: 17.9,
            lambda_vic: 2.80,
            omega: 4.81,
            proprio_coef: 2.42,
            stop_grad_targets: true,
        }
    }
}

impl TrainConfig {
    /// High-level defaults: no VICReg terms, waypoint context of 6.
    pub fn default_high() -> Self {
        TrainConfig {
            epochs: 5,
            pred_t: 6,
            alpha: 0.0,
            beta: 0.0,
            lambda_vic: 0.0,
            omega: 0.0,
            proprio_coef: 0.0,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Cem,
    Mppi,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub algo: Algo,
    pub samples: usize,
    pub iters: usize,
    pub horizon: usize,
    /// MPPI noise sigma (in action units for the low level, in latent-action
    /// std units for the high level).
    pub sigma: f64,
    /// MPPI temperature.
    pub lambda: f64,
    /// CEM elite count.
    pub elites: usize,
    /// CEM std EMA smoothing.
    pub var_ema: f64,
    /// CEM initial std.
    pub init_std: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            algo: Algo::Mppi,
            samples: 250,
            iters: 4,
            horizon: 200,
            sigma: 5.0,
            lambda: 0.0025,
            elites: 30,
            var_ema: 0.0,
            init_std: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerConfig {
    pub flat: OptimizerConfig,
    pub hier_high: OptimizerConfig,
    pub hier_low: OptimizerConfig,
    /// Replan every k recorded interactions.
    pub k: usize,
    /// Success when agent-goal distance drops below this (world units).
    pub success_threshold: f32,
    /// Episode budgets in raw env steps for the three difficulty bands.
    pub budget_easy: usize,
    pub budget_medium: usize,
    pub budget_hard: usize,
    /// Latent-action sample clamp, in units of training-set std.
    pub latent_bound_sigmas: f64,
    /// Degenerate-subgoal threshold: if L1(z1, subgoal) falls below this,
    /// target the next subgoal instead.
    pub subgoal_epsilon: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            flat: OptimizerConfig::default(),
            hier_high: OptimizerConfig {
                sigma: 10.0,
                samples: 2000,
                horizon: 35,
                ..Default::default()
            },
            hier_low: OptimizerConfig {
                sigma: 5.0,
                samples: 500,
                horizon: 15,
                ..Default::default()
            },
            k: 4,
            success_threshold: 0.5,
            budget_easy: 200,
            budget_medium: 300,
            budget_hard: 400,
            latent_bound_sigmas: 3.0,
            subgoal_epsilon: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub tasks_per_band: usize,
    pub trials: usize,
    pub band_easy: [usize; 2],
    pub band_medium: [usize; 2],
    pub band_hard: [usize; 2],
    /// Horizons (recorded steps) for the prediction-error curve; multiples
    /// of the high-level stride.
    pub curve_horizons: Vec<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            tasks_per_band: 20,
            trials: 3,
            band_easy: [5, 8],
            band_medium: [9, 12],
            band_hard: [13, 16],
            curve_horizons: vec![10, 20, 30, 40],
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| HwmError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(HwmError::Config(m.to_string()));
        if self.env.g < 4 {
            return fail("env.g must be >= 4");
        }
        if self.model.d_l == 0 {
            return fail("model.d_l must be positive");
        }
        if self.model.d_z == 0 {
            return fail("model.d_z must be positive");
        }
        if self.env.free_frac[0] <= 0.0
            || self.env.free_frac[1] >= 1.0
            || self.env.free_frac[0] > self.env.free_frac[1]
        {
            return fail("env.free_frac must be an interval within (0,1)");
        }
        if self.env.resolution < 2 * self.env.border_px + self.env.g {
            return fail("env.resolution too small for border and grid");
        }
        if self.model.stride > self.model.max_chunk {
            return fail("model.stride must be <= model.max_chunk");
        }
        if self.model.waypoints < 2 {
            return fail("model.waypoints must be >= 2");
        }
        for (name, oc) in [
            ("planner.flat", &self.planner.flat),
            ("planner.hier_high", &self.planner.hier_high),
            ("planner.hier_low", &self.planner.hier_low),
        ] {
            if oc.horizon == 0 || oc.samples == 0 {
                return fail(&format!("{name}: horizon and samples must be positive"));
            }
            if oc.lambda <= 0.0 || oc.sigma <= 0.0 {
                return fail(&format!("{name}: sigma and lambda must be positive"));
            }
            if oc.elites > oc.samples {
                return fail(&format!("{name}: elites must be <= samples"));
            }
            if !(0.0..1.0).contains(&oc.var_ema) {
                return fail(&format!("{name}: var_ema must be in [0,1)"));
            }
        }
        Ok(())
    }

    /// Digest of the canonicalized document: serde_json sorts map keys, so
    /// the hash is stable across field order and platforms.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let canonical = serde_json::to_string(&value).expect("canonical json");
        let mut h = Sha256::new();
        h.update(canonical.as_bytes());
        hex_str(&h.finalize())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

pub fn hex_str(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
