//! Conditional action autoencoder.
//!
//! The encoder maps `(state, action)` to a diagonal Gaussian posterior over a
//! low dimensional latent action; the decoder maps `(state, latent)` back to
//! an action inside the action box (tanh output scaled to the bounds). It is
//! trained on expert pairs with a reconstruction term plus a `beta` weighted
//! KL divergence to a standard normal prior.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::config::CvaeConfig;
use crate::env::{DemoBuffer, EnvSpec};
use crate::gaussian::{self, GaussianDist};
use crate::nn::{Activation, AdamConfig, Mlp, MlpSpec, Trace};
use crate::rng::{self, StreamId};
use crate::{Error, Result};

/// Row-wise concatenation of two row-major matrices.
pub fn concat_rows(a: &[f64], a_cols: usize, b: &[f64], b_cols: usize, batch: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), a_cols * batch);
    debug_assert_eq!(b.len(), b_cols * batch);
    let mut out = Vec::with_capacity(batch * (a_cols + b_cols));
    for n in 0..batch {
        out.extend_from_slice(&a[n * a_cols..(n + 1) * a_cols]);
        out.extend_from_slice(&b[n * b_cols..(n + 1) * b_cols]);
    }
    out
}

/// Columns `[from, from + cols)` of a row-major matrix with `width` columns.
pub fn take_cols(m: &[f64], width: usize, from: usize, cols: usize) -> Vec<f64> {
    let batch = m.len() / width;
    let mut out = Vec::with_capacity(batch * cols);
    for n in 0..batch {
        out.extend_from_slice(&m[n * width + from..n * width + from + cols]);
    }
    out
}

/// Loss value and its two parts, each averaged over the batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvaeLoss {
    pub loss: f64,
    pub recon: f64,
    pub kl: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionCodec {
    encoder: Mlp,
    decoder: Mlp,
    config: CvaeConfig,
    state_dim: usize,
    action_dim: usize,
    action_high: Vec<f64>,
    frozen: bool,
}

impl ActionCodec {
    pub fn encoder_spec(env: &EnvSpec, config: &CvaeConfig) -> Result<MlpSpec> {
        MlpSpec::new(
            env.state_dim + env.action_dim,
            &config.hidden,
            2 * config.latent_dim,
            Activation::LeakyRelu,
            Activation::Identity,
        )
    }

    pub fn decoder_spec(env: &EnvSpec, config: &CvaeConfig) -> Result<MlpSpec> {
        MlpSpec::new(
            env.state_dim + config.latent_dim,
            &config.hidden,
            env.action_dim,
            Activation::LeakyRelu,
            Activation::Tanh,
        )
    }

    pub fn new(env: &EnvSpec, config: CvaeConfig, rng: &mut impl Rng) -> Result<Self> {
        if config.latent_dim == 0 {
            return Err(Error::Config("latent_dim must be positive".into()));
        }
        let encoder = Mlp::new(Self::encoder_spec(env, &config)?, rng)?;
        let decoder = Mlp::new(Self::decoder_spec(env, &config)?, rng)?;
        Ok(ActionCodec {
            encoder,
            decoder,
            state_dim: env.state_dim,
            action_dim: env.action_dim,
            action_high: env.action_high.clone(),
            config,
            frozen: false,
        })
    }

    /// Reassemble a codec from stored networks.
    pub fn from_parts(env: &EnvSpec, config: CvaeConfig, encoder: Mlp, decoder: Mlp) -> Result<Self> {
        if encoder.spec() != &Self::encoder_spec(env, &config)? || decoder.spec() != &Self::decoder_spec(env, &config)? {
            return Err(Error::Config(format!(
                "codec networks do not match environment {} and latent dim {}",
                env.id, config.latent_dim
            )));
        }
        Ok(ActionCodec {
            encoder,
            decoder,
            state_dim: env.state_dim,
            action_dim: env.action_dim,
            action_high: env.action_high.clone(),
            config,
            frozen: false,
        })
    }

    /// True when `latent_dim >= action_dim`, i.e. the abstraction does not compress.
    pub fn is_vacuous(&self) -> bool {
        self.config.latent_dim >= self.action_dim
    }

    pub fn config(&self) -> &CvaeConfig {
        &self.config
    }

    pub fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn action_high(&self) -> &[f64] {
        &self.action_high
    }

    pub fn encoder(&self) -> &Mlp {
        &self.encoder
    }

    pub fn decoder(&self) -> &Mlp {
        &self.decoder
    }

    pub fn encoder_mut(&mut self) -> Result<&mut Mlp> {
        self.ensure_mutable()?;
        Ok(&mut self.encoder)
    }

    pub fn decoder_mut(&mut self) -> Result<&mut Mlp> {
        self.ensure_mutable()?;
        Ok(&mut self.decoder)
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    fn ensure_mutable(&self) -> Result<()> {
        if self.frozen {
            Err(Error::State("codec is frozen".into()))
        } else {
            Ok(())
        }
    }

    /// Posterior `E(latent | s, a)`.
    pub fn encode(&self, s: &[f64], a: &[f64]) -> Result<GaussianDist> {
        if s.len() != self.state_dim || a.len() != self.action_dim {
            return Err(Error::Config("encode: state/action length mismatch".into()));
        }
        if s.iter().chain(a).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("encode input".into()));
        }
        let mut x = s.to_vec();
        x.extend_from_slice(a);
        Ok(GaussianDist::from_head(&self.encoder.forward(&x)?))
    }

    /// Decode a latent action into the action box.
    pub fn decode(&self, s: &[f64], latent: &[f64]) -> Result<Vec<f64>> {
        if s.len() != self.state_dim || latent.len() != self.config.latent_dim {
            return Err(Error::Config("decode: state/latent length mismatch".into()));
        }
        let mut x = s.to_vec();
        x.extend_from_slice(latent);
        let out = self.decoder.forward(&x)?;
        Ok(out.iter().zip(&self.action_high).map(|(o, h)| o * h).collect())
    }

    /// Batched posterior means, recording the encoder pass in `trace`.
    pub fn encode_mean_batch(&self, states: &[f64], actions: &[f64], batch: usize, trace: &mut Trace) -> Result<Vec<f64>> {
        let x = concat_rows(states, self.state_dim, actions, self.action_dim, batch);
        self.encoder.forward_batch(&x, batch, trace)?;
        Ok(take_cols(trace.output(), 2 * self.config.latent_dim, 0, self.config.latent_dim))
    }

    /// Batched decode, recording the decoder pass in `trace`.
    pub fn decode_batch(&self, states: &[f64], latents: &[f64], batch: usize, trace: &mut Trace) -> Result<Vec<f64>> {
        let x = concat_rows(states, self.state_dim, latents, self.config.latent_dim, batch);
        self.decoder.forward_batch(&x, batch, trace)?;
        let a = self.action_dim;
        Ok(trace
            .output()
            .iter()
            .enumerate()
            .map(|(i, o)| o * self.action_high[i % a])
            .collect())
    }

    /// Gradient w.r.t. the posterior mean pushed back through the encoder.
    ///
    /// Returns the gradient w.r.t. the action inputs; if `accumulate` the
    /// encoder parameter gradients are accumulated as well.
    pub fn encoder_mean_backward(&mut self, trace: &Trace, d_mean: &[f64], accumulate: bool) -> Result<Vec<f64>> {
        let l = self.config.latent_dim;
        let batch = trace.batch();
        let mut head = vec![0.0; batch * 2 * l];
        for n in 0..batch {
            head[n * 2 * l..n * 2 * l + l].copy_from_slice(&d_mean[n * l..(n + 1) * l]);
        }
        let gx = if accumulate {
            self.encoder_mut()?.backward(trace, &head)?
        } else {
            self.encoder.input_gradient(trace, &head)?
        };
        Ok(take_cols(&gx, self.state_dim + self.action_dim, self.state_dim, self.action_dim))
    }

    /// Gradient w.r.t. decoded actions pushed back through the decoder.
    ///
    /// Returns the gradient w.r.t. the latent inputs; if `accumulate` the
    /// decoder parameter gradients are accumulated as well.
    pub fn decoder_backward(&mut self, trace: &Trace, d_action: &[f64], accumulate: bool) -> Result<Vec<f64>> {
        let a = self.action_dim;
        let d_out: Vec<f64> = d_action
            .iter()
            .enumerate()
            .map(|(i, d)| d * self.action_high[i % a])
            .collect();
        let gx = if accumulate {
            self.decoder_mut()?.backward(trace, &d_out)?
        } else {
            self.decoder.input_gradient(trace, &d_out)?
        };
        Ok(take_cols(&gx, self.state_dim + self.config.latent_dim, self.state_dim, self.config.latent_dim))
    }

    /// Loss on a batch with the given reparameterization noise, without gradients.
    pub fn loss(&self, states: &[f64], actions: &[f64], noise: &[f64]) -> Result<CvaeLoss> {
        let mut probe = self.clone();
        probe.frozen = false;
        probe.loss_impl(states, actions, noise, None)
    }

    /// Loss on a batch, accumulating `weight * d loss` into both networks.
    pub fn loss_and_grad(&mut self, states: &[f64], actions: &[f64], noise: &[f64], weight: f64) -> Result<CvaeLoss> {
        self.ensure_mutable()?;
        self.loss_impl(states, actions, noise, Some(weight))
    }

    fn loss_impl(&mut self, states: &[f64], actions: &[f64], noise: &[f64], grad_weight: Option<f64>) -> Result<CvaeLoss> {
        let (sd, ad, l) = (self.state_dim, self.action_dim, self.config.latent_dim);
        let batch = states.len() / sd;
        if batch == 0 || states.len() != batch * sd || actions.len() != batch * ad || noise.len() != batch * l {
            return Err(Error::Config("cvae loss: batch shapes do not match".into()));
        }
        let beta = self.config.beta;
        let mut enc_trace = Trace::new();
        let x = concat_rows(states, sd, actions, ad, batch);
        self.encoder.forward_batch(&x, batch, &mut enc_trace)?;
        let head = enc_trace.output().to_vec();
        let mut z = vec![0.0; batch * l];
        let mut kl = 0.0;
        for n in 0..batch {
            for k in 0..l {
                let mu = head[n * 2 * l + k];
                let ls = gaussian::clamp_log_std(head[n * 2 * l + l + k]);
                z[n * l + k] = mu + libm::exp(ls) * noise[n * l + k];
                kl += gaussian::kl_term(mu, ls);
            }
        }
        let mut dec_trace = Trace::new();
        let recon_actions = self.decode_batch(states, &z, batch, &mut dec_trace)?;
        let mut recon = 0.0;
        for (a, r) in actions.iter().zip(&recon_actions) {
            recon += (a - r) * (a - r);
        }
        let inv = 1.0 / batch as f64;
        let parts = CvaeLoss {
            loss: (recon + beta * kl) * inv,
            recon: recon * inv,
            kl: kl * inv,
        };
        if !parts.loss.is_finite() {
            return Err(Error::NonFinite(format!("cvae loss {}", parts.loss)));
        }
        let Some(w) = grad_weight else {
            return Ok(parts);
        };
        let d_action: Vec<f64> = actions
            .iter()
            .zip(&recon_actions)
            .map(|(a, r)| -2.0 * (a - r) * inv * w)
            .collect();
        let dz = self.decoder_backward(&dec_trace, &d_action, true)?;
        let mut d_head = vec![0.0; batch * 2 * l];
        for n in 0..batch {
            for k in 0..l {
                let mu = head[n * 2 * l + k];
                let raw = head[n * 2 * l + l + k];
                let ls = gaussian::clamp_log_std(raw);
                let (gm, gl) = gaussian::kl_term_grad(mu, ls);
                let g = dz[n * l + k];
                d_head[n * 2 * l + k] = g + beta * inv * w * gm;
                d_head[n * 2 * l + l + k] =
                    (g * libm::exp(ls) * noise[n * l + k] + beta * inv * w * gl) * gaussian::clamp_log_std_grad(raw);
            }
        }
        self.encoder.backward(&enc_trace, &d_head)?;
        Ok(parts)
    }

    /// Adam step on both networks with the accumulated gradients.
    pub fn adam_step(&mut self, cfg: &AdamConfig) -> Result<()> {
        self.ensure_mutable()?;
        self.encoder.params_mut().adam_step(cfg)?;
        self.decoder.params_mut().adam_step(cfg)
    }

    /// Mean squared reconstruction error `|a - decode(s, mean(encode(s, a)))|^2`.
    pub fn reconstruction_mse(&self, states: &[f64], actions: &[f64]) -> Result<f64> {
        let batch = states.len() / self.state_dim;
        if batch == 0 {
            return Err(Error::Config("empty reconstruction batch".into()));
        }
        let mut t = Trace::new();
        let means = self.encode_mean_batch(states, actions, batch, &mut t)?;
        let rec = self.decode_batch(states, &means, batch, &mut t)?;
        let se: f64 = actions.iter().zip(&rec).map(|(a, r)| (a - r) * (a - r)).sum();
        Ok(se / batch as f64)
    }
}

/// Per-epoch record of codec training.
#[derive(Debug, Clone, PartialEq)]
pub struct CodecEpoch {
    pub epoch: usize,
    pub loss: f64,
    pub recon: f64,
    pub kl: f64,
    pub heldout_recon: f64,
    pub heldout_kl: f64,
}

/// Outcome of [`train_codec`].
#[derive(Debug, Clone, PartialEq)]
pub struct CodecReport {
    pub curve: Vec<CodecEpoch>,
    pub heldout_recon: f64,
    pub heldout_kl: f64,
    /// Held-out MSE of always predicting the training-set mean action.
    pub baseline_mse: f64,
    /// Mean `|a|^2` over the held-out actions.
    pub heldout_action_power: f64,
    pub train_episodes: Vec<usize>,
    pub heldout_episodes: Vec<usize>,
}

/// Flattened states and actions of a set of demo transitions.
pub fn flatten_pairs<'a>(transitions: impl Iterator<Item = &'a crate::env::Transition>) -> (Vec<f64>, Vec<f64>) {
    let mut s = Vec::new();
    let mut a = Vec::new();
    for t in transitions {
        s.extend_from_slice(&t.state);
        a.extend_from_slice(&t.action);
    }
    (s, a)
}

/// Episode-level 90/10 split; single-episode corpora are split by transition.
pub fn heldout_split(demos: &DemoBuffer, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut episodes: Vec<usize> = (0..demos.n_episodes()).collect();
    let mut r = rng::stream(seed, StreamId::Codec);
    episodes.shuffle(&mut r);
    let n_held = libm::round(episodes.len() as f64 * 0.1).max(1.0) as usize;
    if episodes.len() < 2 {
        return (episodes, Vec::new());
    }
    let held = episodes.split_off(episodes.len() - n_held);
    (episodes, held)
}

fn gather(demos: &DemoBuffer, episodes: &[usize]) -> (Vec<f64>, Vec<f64>) {
    flatten_pairs(episodes.iter().flat_map(|&e| demos.episode(e).iter()))
}

/// Average KL of the posterior to the prior over a set of pairs.
pub fn mean_kl(codec: &ActionCodec, states: &[f64], actions: &[f64]) -> Result<f64> {
    let batch = states.len() / codec.state_dim();
    let mut t = Trace::new();
    let x = concat_rows(states, codec.state_dim(), actions, codec.action_dim(), batch);
    codec.encoder().forward_batch(&x, batch, &mut t)?;
    let l = codec.latent_dim();
    let head = t.output();
    let mut kl = 0.0;
    for n in 0..batch {
        for k in 0..l {
            kl += gaussian::kl_term(head[n * 2 * l + k], gaussian::clamp_log_std(head[n * 2 * l + l + k]));
        }
    }
    Ok(kl / batch as f64)
}

/// Train a codec on expert pairs only.
pub fn train_codec(demos: &DemoBuffer, env: &EnvSpec, config: &CvaeConfig, seed: u64) -> Result<(ActionCodec, CodecReport)> {
    if demos.is_empty() {
        return Err(Error::Config("cannot train a codec on an empty corpus".into()));
    }
    if demos.state_dim != env.state_dim || demos.action_dim != env.action_dim {
        return Err(Error::Config(format!(
            "demonstrations ({}) do not match environment {}",
            demos.env_digest(),
            env.id
        )));
    }
    if config.batch_size == 0 {
        return Err(Error::Config("codec batch size must be positive".into()));
    }
    let mut init = rng::stream(seed, StreamId::Init);
    let mut codec = ActionCodec::new(env, config.clone(), &mut init)?;
    let (train_eps, held_eps) = heldout_split(demos, seed);
    let (train_s, train_a) = gather(demos, &train_eps);
    let (held_s, held_a) = if held_eps.is_empty() {
        (train_s.clone(), train_a.clone())
    } else {
        gather(demos, &held_eps)
    };
    let (sd, ad, l) = (env.state_dim, env.action_dim, config.latent_dim);
    let n_train = train_s.len() / sd;

    let mut mean_action = vec![0.0; ad];
    for n in 0..n_train {
        for k in 0..ad {
            mean_action[k] += train_a[n * ad + k] / n_train as f64;
        }
    }
    let n_held = held_s.len() / sd;
    let mut baseline = 0.0;
    let mut power = 0.0;
    for n in 0..n_held {
        for k in 0..ad {
            let a = held_a[n * ad + k];
            baseline += (a - mean_action[k]) * (a - mean_action[k]);
            power += a * a;
        }
    }
    baseline /= n_held as f64;
    power /= n_held as f64;

    let adam = AdamConfig::with_lr(config.lr);
    let mut r = rng::stream(seed, StreamId::Codec);
    let mut order: Vec<usize> = (0..n_train).collect();
    let mut curve = Vec::with_capacity(config.epochs);
    let mut bs = Vec::new();
    let mut ba = Vec::new();
    let mut noise = Vec::new();
    for epoch in 0..config.epochs {
        order.shuffle(&mut r);
        let (mut sum_loss, mut sum_recon, mut sum_kl, mut batches) = (0.0, 0.0, 0.0, 0usize);
        for chunk in order.chunks(config.batch_size) {
            bs.clear();
            ba.clear();
            for &i in chunk {
                bs.extend_from_slice(&train_s[i * sd..(i + 1) * sd]);
                ba.extend_from_slice(&train_a[i * ad..(i + 1) * ad]);
            }
            noise.resize(chunk.len() * l, 0.0);
            rng::fill_normal(&mut r, &mut noise);
            let parts = codec.loss_and_grad(&bs, &ba, &noise, 1.0).map_err(|e| match e {
                Error::NonFinite(m) => Error::NonFinite(format!("epoch {epoch}: {m}")),
                other => other,
            })?;
            codec.adam_step(&adam)?;
            sum_loss += parts.loss;
            sum_recon += parts.recon;
            sum_kl += parts.kl;
            batches += 1;
        }
        let b = batches.max(1) as f64;
        curve.push(CodecEpoch {
            epoch,
            loss: sum_loss / b,
            recon: sum_recon / b,
            kl: sum_kl / b,
            heldout_recon: codec.reconstruction_mse(&held_s, &held_a)?,
            heldout_kl: mean_kl(&codec, &held_s, &held_a)?,
        });
    }
    let heldout_recon = codec.reconstruction_mse(&held_s, &held_a)?;
    let heldout_kl = mean_kl(&codec, &held_s, &held_a)?;
    if !heldout_recon.is_finite() {
        return Err(Error::NonFinite("held-out reconstruction".into()));
    }
    if config.epochs > 0 && heldout_recon >= baseline {
        return Err(Error::CodecRejected(format!(
            "held-out reconstruction {heldout_recon:.4e} is no better than the mean-action baseline {baseline:.4e}"
        )));
    }
    Ok((
        codec,
        CodecReport {
            curve,
            heldout_recon,
            heldout_kl,
            baseline_mse: baseline,
            heldout_action_power: power,
            train_episodes: train_eps,
            heldout_episodes: held_eps,
        },
    ))
}
