//! Hyperparameters, with a desk-scale preset and the published preset.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::env::EnvId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Small networks and budgets that train in minutes on one core.
    Desk,
    /// Network sizes and learning rates of the published experiments.
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    Gail,
    LapalAgnostic,
    LapalAware,
}

impl Algo {
    pub fn uses_codec(self) -> bool {
        !matches!(self, Algo::Gail)
    }

    pub fn name(self) -> &'static str {
        match self {
            Algo::Gail => "gail",
            Algo::LapalAgnostic => "lapal-agnostic",
            Algo::LapalAware => "lapal-aware",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "gail" => Some(Algo::Gail),
            "lapal-agnostic" | "lapal_agnostic" => Some(Algo::LapalAgnostic),
            "lapal-aware" | "lapal_aware" => Some(Algo::LapalAware),
            _ => None,
        }
    }
}

/// Conditional action autoencoder settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvaeConfig {
    pub latent_dim: usize,
    /// Weight of the KL term.
    pub beta: f64,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Discriminator inputs are posterior samples instead of posterior means
    /// (frozen codecs only).
    pub sampled_encoding: bool,
}

impl Default for CvaeConfig {
    fn default() -> Self {
        Self::preset(Preset::Desk)
    }
}

impl CvaeConfig {
    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Desk => CvaeConfig {
                latent_dim: 4,
                beta: 0.01,
                hidden: vec![64, 64],
                epochs: 200,
                batch_size: 128,
                lr: 1e-3,
                sampled_encoding: false,
            },
            Preset::Paper => CvaeConfig {
                latent_dim: 4,
                beta: 0.01,
                hidden: vec![256, 256],
                epochs: 200,
                batch_size: 256,
                lr: 3e-4,
                sampled_encoding: false,
            },
        }
    }
}

/// Soft actor-critic settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SacConfig {
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub gamma: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub alpha_lr: f64,
    pub initial_alpha: f64,
    /// Tune the entropy temperature towards `-action_dim`; fixed otherwise.
    pub auto_alpha: bool,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self::preset(Preset::Desk)
    }
}

impl SacConfig {
    pub fn preset(preset: Preset) -> Self {
        let (actor_hidden, critic_hidden, batch_size) = match preset {
            Preset::Desk => (vec![64, 64], vec![64, 64], 128),
            Preset::Paper => (vec![256, 256, 256], vec![256, 256], 256),
        };
        SacConfig {
            actor_hidden,
            critic_hidden,
            gamma: 0.99,
            tau: 0.005,
            batch_size,
            buffer_capacity: 100_000,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            alpha_lr: 3e-4,
            initial_alpha: 1.0,
            auto_alpha: true,
        }
    }
}

/// Discriminator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    /// Total minibatch size, split evenly between expert and agent samples.
    pub batch_size: usize,
}

impl Default for DiscConfig {
    fn default() -> Self {
        Self::preset(Preset::Desk)
    }
}

impl DiscConfig {
    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Desk => DiscConfig {
                hidden: vec![64, 64],
                lr: 1e-4,
                batch_size: 256,
            },
            Preset::Paper => DiscConfig {
                hidden: vec![256, 256],
                lr: 3e-5,
                batch_size: 256,
            },
        }
    }
}

/// One adversarial training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub algo: Algo,
    #[serde(with = "env_id_serde")]
    pub env: EnvId,
    pub total_env_steps: usize,
    pub steps_per_iteration: usize,
    pub disc_updates_per_iteration: usize,
    pub gen_updates_per_iteration: usize,
    /// Evaluate every this many environment steps (a multiple of
    /// `steps_per_iteration`).
    pub eval_every: usize,
    pub eval_episodes: usize,
    /// Base seed of the evaluation episodes, shared by every run so that
    /// returns are comparable.
    pub eval_seed: u64,
    /// Policy outputs in (-1, 1) are scaled by this before decoding.
    pub latent_scale: f64,
    /// Feed the latent the policy emitted to the discriminator and critic
    /// instead of re-encoding the stored raw action.
    pub reuse_emitted_latent: bool,
    /// Encoder / decoder learning rates in task-aware mode.
    pub encoder_lr: f64,
    pub decoder_lr: f64,
    /// Weight of an auxiliary reconstruction loss on expert data in
    /// task-aware mode. Zero disables it.
    pub aware_recon_weight: f64,
    /// Abort when evaluation falls below the random baseline after half the budget.
    pub divergence_check: bool,
    pub sac: SacConfig,
    pub disc: DiscConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::preset(Preset::Desk, Algo::LapalAgnostic, EnvId::PointMass)
    }
}

impl RunConfig {
    pub fn preset(preset: Preset, algo: Algo, env: EnvId) -> Self {
        RunConfig {
            algo,
            env,
            total_env_steps: 50_000,
            steps_per_iteration: 1000,
            disc_updates_per_iteration: 500,
            gen_updates_per_iteration: 1000,
            eval_every: 1000,
            eval_episodes: 16,
            eval_seed: 1_000_000,
            latent_scale: 3.0,
            reuse_emitted_latent: false,
            encoder_lr: 3e-5,
            decoder_lr: match preset {
                Preset::Paper => 3e-4,
                Preset::Desk => 1e-6,
            },
            aware_recon_weight: 0.0,
            divergence_check: true,
            sac: SacConfig::preset(preset),
            disc: DiscConfig::preset(preset),
        }
    }
}

pub mod env_id_serde {
    use alloc::string::{String, ToString};

    use serde::{Deserialize, Deserializer, Serializer};

    use crate::env::EnvId;

    pub fn serialize<S: Serializer>(id: &EnvId, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&id.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<EnvId, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
