//! Soft actor-critic over a squashed control `u` in `(-1, 1)^k`.
//!
//! The agent never sees environment actions directly. An [`ActionMap`]
//! turns `u` into the environment action and into the vector `c` that the
//! critics (and the discriminator) consume, and carries gradients from `c`
//! back to `u`. [`RawMap`] is the identity-up-to-scale map of plain GAIL;
//! [`LatentMap`] decodes a latent action through an [`ActionCodec`].

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::codec::{concat_rows, ActionCodec};
use crate::config::SacConfig;
use crate::gaussian::{clamp_log_std, clamp_log_std_grad};
use crate::math;
use crate::nn::{Activation, AdamConfig, AdamState, Mlp, MlpSpec, Trace};
use crate::replay::Batch;
use crate::rng;
use crate::{Error, Result};

/// Result of pushing a batch of controls through an [`ActionMap`].
#[derive(Debug, Clone, Default)]
pub struct MapPass {
    pub batch: usize,
    /// Environment actions, `batch x action_dim`.
    pub actions: Vec<f64>,
    /// Critic / discriminator input, `batch x critic_dim`.
    pub critic_input: Vec<f64>,
    decoder: Trace,
    encoder: Trace,
}

pub trait ActionMap {
    fn control_dim(&self) -> usize;
    fn critic_dim(&self) -> usize;
    fn forward(&self, states: &[f64], u: &[f64], batch: usize) -> Result<MapPass>;
    /// Maps `d/dc` to `d/du`, accumulating any trainable map parameters.
    fn backward(&mut self, pass: &MapPass, d_critic: &[f64]) -> Result<Vec<f64>>;
    /// Critic input for stored transitions.
    fn stored_input(&self, states: &[f64], actions: &[f64], emitted: &[f64], batch: usize) -> Result<Vec<f64>>;
}

/// `a = high * u`, `c = a`.
#[derive(Debug, Clone)]
pub struct RawMap {
    high: Vec<f64>,
}

impl RawMap {
    pub fn new(action_high: &[f64]) -> Self {
        RawMap { high: action_high.to_vec() }
    }
}

impl ActionMap for RawMap {
    fn control_dim(&self) -> usize {
        self.high.len()
    }

    fn critic_dim(&self) -> usize {
        self.high.len()
    }

    fn forward(&self, _states: &[f64], u: &[f64], batch: usize) -> Result<MapPass> {
        let k = self.high.len();
        let actions: Vec<f64> = u.iter().enumerate().map(|(i, x)| x * self.high[i % k]).collect();
        Ok(MapPass { batch, critic_input: actions.clone(), actions, ..MapPass::default() })
    }

    fn backward(&mut self, _pass: &MapPass, d_critic: &[f64]) -> Result<Vec<f64>> {
        let k = self.high.len();
        Ok(d_critic.iter().enumerate().map(|(i, d)| d * self.high[i % k]).collect())
    }

    fn stored_input(&self, _states: &[f64], actions: &[f64], _emitted: &[f64], _batch: usize) -> Result<Vec<f64>> {
        Ok(actions.to_vec())
    }
}

/// `z = scale * u`, `a = h(s, z)`, `c = mean g(s, a)`; with `reuse_emitted`
/// the critic sees `z` itself instead of the re-encoded latent.
#[derive(Debug)]
pub struct LatentMap<'a> {
    codec: &'a mut ActionCodec,
    scale: f64,
    reuse_emitted: bool,
    train_decoder: bool,
}

impl<'a> LatentMap<'a> {
    pub fn new(codec: &'a mut ActionCodec, scale: f64, reuse_emitted: bool) -> Self {
        LatentMap { codec, scale, reuse_emitted, train_decoder: false }
    }

    /// Accumulate decoder gradients in `backward`, the generator side of the
    /// task-aware objective.
    pub fn training_decoder(mut self, on: bool) -> Self {
        self.train_decoder = on;
        self
    }

    pub fn codec(&self) -> &ActionCodec {
        self.codec
    }
}

impl ActionMap for LatentMap<'_> {
    fn control_dim(&self) -> usize {
        self.codec.latent_dim()
    }

    fn critic_dim(&self) -> usize {
        self.codec.latent_dim()
    }

    fn forward(&self, states: &[f64], u: &[f64], batch: usize) -> Result<MapPass> {
        let z: Vec<f64> = u.iter().map(|x| x * self.scale).collect();
        let mut decoder = Trace::new();
        let actions = self.codec.decode_batch(states, &z, batch, &mut decoder)?;
        let mut encoder = Trace::new();
        let critic_input = if self.reuse_emitted {
            z
        } else {
            self.codec.encode_mean_batch(states, &actions, batch, &mut encoder)?
        };
        Ok(MapPass { batch, actions, critic_input, decoder, encoder })
    }

    fn backward(&mut self, pass: &MapPass, d_critic: &[f64]) -> Result<Vec<f64>> {
        let dz = if self.reuse_emitted {
            d_critic.to_vec()
        } else {
            let da = self.codec.encoder_mean_backward(&pass.encoder, d_critic, false)?;
            self.codec.decoder_backward(&pass.decoder, &da, self.train_decoder)?
        };
        Ok(dz.into_iter().map(|d| d * self.scale).collect())
    }

    fn stored_input(&self, states: &[f64], actions: &[f64], emitted: &[f64], batch: usize) -> Result<Vec<f64>> {
        if self.reuse_emitted {
            if emitted.len() != batch * self.codec.latent_dim() {
                return Err(Error::State("stored transitions carry no emitted latent".into()));
            }
            return Ok(emitted.iter().map(|x| x * self.scale).collect());
        }
        self.codec.encode_mean_batch(states, actions, batch, &mut Trace::new())
    }
}

/// Largest magnitude of an emitted control; `tanh` rounds to exactly 1 in
/// double precision beyond |x| ~ 19.
pub const MAX_CONTROL: f64 = 1.0 - 1e-9;

pub fn squash(x: f64) -> f64 {
    math::tanh(x).clamp(-MAX_CONTROL, MAX_CONTROL)
}

/// `log` density of `tanh(x)` at `x = pre` for `x ~ N(mean, e^{2 log_std})`,
/// with respect to Lebesgue measure on the squashed value.
pub fn squashed_log_prob(mean: &[f64], log_std: &[f64], pre: &[f64]) -> f64 {
    let mut lp = 0.0;
    for i in 0..mean.len() {
        let z = (pre[i] - mean[i]) * math::exp(-log_std[i]);
        lp += -0.5 * z * z - log_std[i] - 0.5 * math::LN_2PI - math::log_one_minus_tanh_sq(pre[i]);
    }
    lp
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CriticStats {
    pub q1_loss: f64,
    pub q2_loss: f64,
    pub mean_target: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActorStats {
    pub loss: f64,
    /// Mean `-log pi(u|s)` over the batch.
    pub entropy: f64,
    pub alpha: f64,
}

/// Squashed samples and everything needed to differentiate them.
struct PolicyPass {
    trace: Trace,
    mean: Vec<f64>,
    log_std: Vec<f64>,
    raw_log_std: Vec<f64>,
    noise: Vec<f64>,
    u: Vec<f64>,
    log_prob: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SacAgent {
    config: SacConfig,
    state_dim: usize,
    control_dim: usize,
    critic_dim: usize,
    actor: Mlp,
    critics: [Mlp; 2],
    targets: [Mlp; 2],
    log_alpha: f64,
    alpha_adam: AdamState,
    target_entropy: f64,
}

impl SacAgent {
    pub fn actor_spec(state_dim: usize, control_dim: usize, config: &SacConfig) -> Result<MlpSpec> {
        MlpSpec::new(state_dim, &config.actor_hidden, 2 * control_dim, Activation::Relu, Activation::Identity)
    }

    pub fn critic_spec(state_dim: usize, critic_dim: usize, config: &SacConfig) -> Result<MlpSpec> {
        MlpSpec::new(state_dim + critic_dim, &config.critic_hidden, 1, Activation::Relu, Activation::Identity)
    }

    pub fn new(state_dim: usize, control_dim: usize, critic_dim: usize, config: SacConfig, rng: &mut impl Rng) -> Result<Self> {
        if !(config.initial_alpha > 0.0) {
            return Err(Error::Config("initial temperature must be positive".into()));
        }
        let actor = Mlp::new(Self::actor_spec(state_dim, control_dim, &config)?, rng)?;
        let cspec = Self::critic_spec(state_dim, critic_dim, &config)?;
        let c1 = Mlp::new(cspec.clone(), rng)?;
        let c2 = Mlp::new(cspec, rng)?;
        let targets = [c1.clone(), c2.clone()];
        Ok(SacAgent {
            log_alpha: math::ln(config.initial_alpha),
            config,
            state_dim,
            control_dim,
            critic_dim,
            actor,
            critics: [c1, c2],
            targets,
            alpha_adam: AdamState::new(1),
            target_entropy: -(control_dim as f64),
        })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        config: SacConfig,
        actor: Mlp,
        critics: [Mlp; 2],
        targets: [Mlp; 2],
        log_alpha: f64,
        alpha_adam: AdamState,
    ) -> Result<Self> {
        let state_dim = actor.input_dim();
        let control_dim = actor.output_dim() / 2;
        let critic_dim = critics[0]
            .input_dim()
            .checked_sub(state_dim)
            .ok_or_else(|| Error::Config("critic input narrower than the state".into()))?;
        for net in critics.iter().chain(targets.iter()) {
            if net.spec() != critics[0].spec() {
                return Err(Error::Config("critic and target networks differ in shape".into()));
            }
        }
        Ok(SacAgent {
            config,
            state_dim,
            control_dim,
            critic_dim,
            actor,
            critics,
            targets,
            log_alpha,
            alpha_adam,
            target_entropy: -(control_dim as f64),
        })
    }

    pub fn config(&self) -> &SacConfig {
        &self.config
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn control_dim(&self) -> usize {
        self.control_dim
    }

    pub fn critic_dim(&self) -> usize {
        self.critic_dim
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn actor_mut(&mut self) -> &mut Mlp {
        &mut self.actor
    }

    pub fn critics(&self) -> &[Mlp; 2] {
        &self.critics
    }

    pub fn critics_mut(&mut self) -> &mut [Mlp; 2] {
        &mut self.critics
    }

    pub fn targets(&self) -> &[Mlp; 2] {
        &self.targets
    }

    pub fn log_alpha(&self) -> f64 {
        self.log_alpha
    }

    pub fn alpha(&self) -> f64 {
        math::exp(self.log_alpha)
    }

    pub fn alpha_adam(&self) -> &AdamState {
        &self.alpha_adam
    }

    pub fn target_entropy(&self) -> f64 {
        self.target_entropy
    }

    /// `tanh(mean)` if deterministic, else `tanh` of a reparameterized sample.
    pub fn act(&self, s: &[f64], deterministic: bool, rng: &mut impl Rng) -> Result<Vec<f64>> {
        let head = self.actor.forward(s)?;
        let k = self.control_dim;
        let mut u = Vec::with_capacity(k);
        for i in 0..k {
            let mut x = head[i];
            if !deterministic {
                x += math::exp(clamp_log_std(head[k + i])) * rng::normal(rng);
            }
            u.push(squash(x));
        }
        Ok(u)
    }

    fn policy_pass(&self, states: &[f64], noise: &[f64], batch: usize) -> Result<PolicyPass> {
        let k = self.control_dim;
        if noise.len() != batch * k {
            return Err(Error::Config("policy noise has the wrong shape".into()));
        }
        let mut trace = Trace::new();
        self.actor.forward_batch(states, batch, &mut trace)?;
        let head = trace.output();
        let mut p = PolicyPass {
            mean: Vec::with_capacity(batch * k),
            log_std: Vec::with_capacity(batch * k),
            raw_log_std: Vec::with_capacity(batch * k),
            noise: noise.to_vec(),
            u: Vec::with_capacity(batch * k),
            log_prob: Vec::with_capacity(batch),
            trace: Trace::new(),
        };
        let mut pre = vec![0.0; k];
        for n in 0..batch {
            let row = &head[n * 2 * k..(n + 1) * 2 * k];
            let mean = &row[..k];
            let raw = &row[k..];
            let ls: Vec<f64> = raw.iter().map(|&r| clamp_log_std(r)).collect();
            for i in 0..k {
                pre[i] = mean[i] + math::exp(ls[i]) * noise[n * k + i];
                p.u.push(squash(pre[i]));
            }
            p.log_prob.push(squashed_log_prob(mean, &ls, &pre));
            p.mean.extend_from_slice(mean);
            p.raw_log_std.extend_from_slice(raw);
            p.log_std.extend(ls);
        }
        p.trace = trace;
        Ok(p)
    }

    fn min_q(nets: &[Mlp; 2], x: &[f64], batch: usize) -> Result<(Vec<f64>, Trace, Trace)> {
        let mut t1 = Trace::new();
        let mut t2 = Trace::new();
        nets[0].forward_batch(x, batch, &mut t1)?;
        nets[1].forward_batch(x, batch, &mut t2)?;
        let q = t1.output().iter().zip(t2.output()).map(|(a, b)| a.min(*b)).collect();
        Ok((q, t1, t2))
    }

    /// One TD step on both critics followed by the Polyak target update.
    ///
    /// `critic_input` is the map's view of the stored actions and `rewards`
    /// the current reward of each row; episodes are cut by the time limit
    /// only, so every row bootstraps.
    pub fn critic_update(
        &mut self,
        batch: &Batch,
        critic_input: &[f64],
        rewards: &[f64],
        map: &impl ActionMap,
        rng: &mut impl Rng,
    ) -> Result<CriticStats> {
        let b = batch.len;
        if b == 0 {
            return Err(Error::EmptyBuffer);
        }
        if rewards.len() != b || critic_input.len() != b * self.critic_dim {
            return Err(Error::Config("critic batch shapes do not match".into()));
        }
        let mut noise = vec![0.0; b * self.control_dim];
        rng::fill_normal(rng, &mut noise);
        let next = self.policy_pass(&batch.next_states, &noise, b)?;
        let next_map = map.forward(&batch.next_states, &next.u, b)?;
        let xn = concat_rows(&batch.next_states, self.state_dim, &next_map.critic_input, self.critic_dim, b);
        let (qn, _, _) = Self::min_q(&self.targets, &xn, b)?;
        let alpha = self.alpha();
        let gamma = self.config.gamma;
        let y: Vec<f64> = (0..b).map(|n| rewards[n] + gamma * (qn[n] - alpha * next.log_prob[n])).collect();

        let x = concat_rows(&batch.states, self.state_dim, critic_input, self.critic_dim, b);
        let mut losses = [0.0; 2];
        for (k, critic) in self.critics.iter_mut().enumerate() {
            let mut t = Trace::new();
            critic.forward_batch(&x, b, &mut t)?;
            let mut upstream = vec![0.0; b];
            let mut loss = 0.0;
            for n in 0..b {
                let d = t.output()[n] - y[n];
                loss += d * d;
                upstream[n] = 2.0 * d / b as f64;
            }
            losses[k] = loss / b as f64;
            if !losses[k].is_finite() {
                return Err(Error::NonFinite("critic loss".into()));
            }
            critic.backward_params(&t, &upstream)?;
        }
        let cfg = AdamConfig::with_lr(self.config.critic_lr);
        for critic in self.critics.iter_mut() {
            critic.params_mut().adam_step(&cfg)?;
        }
        self.update_targets(self.config.tau);
        Ok(CriticStats { q1_loss: losses[0], q2_loss: losses[1], mean_target: y.iter().sum::<f64>() / b as f64 })
    }

    pub fn update_targets(&mut self, tau: f64) {
        for (t, c) in self.targets.iter_mut().zip(&self.critics) {
            t.params_mut().polyak_from(c.params(), tau);
        }
    }

    /// `mean(alpha log pi(u|s) - min Q(s, c(u)))` with fixed reparameterization
    /// noise; accumulates actor gradients (and whatever the map trains).
    pub fn actor_loss_and_grad(
        &mut self,
        states: &[f64],
        noise: &[f64],
        batch: usize,
        map: &mut impl ActionMap,
    ) -> Result<ActorStats> {
        let k = self.control_dim;
        let p = self.policy_pass(states, noise, batch)?;
        let pass = map.forward(states, &p.u, batch)?;
        let x = concat_rows(states, self.state_dim, &pass.critic_input, self.critic_dim, batch);
        let (q, t1, t2) = Self::min_q(&self.critics, &x, batch)?;
        let alpha = self.alpha();
        let inv_b = 1.0 / batch as f64;
        let mut loss = 0.0;
        let mut up1 = vec![0.0; batch];
        let mut up2 = vec![0.0; batch];
        for n in 0..batch {
            loss += alpha * p.log_prob[n] - q[n];
            if t1.output()[n] <= t2.output()[n] {
                up1[n] = -inv_b;
            } else {
                up2[n] = -inv_b;
            }
        }
        loss *= inv_b;
        if !loss.is_finite() {
            return Err(Error::NonFinite("actor loss".into()));
        }
        let g1 = self.critics[0].input_gradient(&t1, &up1)?;
        let g2 = self.critics[1].input_gradient(&t2, &up2)?;
        let w = self.state_dim + self.critic_dim;
        let mut dc = vec![0.0; batch * self.critic_dim];
        for n in 0..batch {
            for j in 0..self.critic_dim {
                dc[n * self.critic_dim + j] = g1[n * w + self.state_dim + j] + g2[n * w + self.state_dim + j];
            }
        }
        let du = map.backward(&pass, &dc)?;
        let mut head = vec![0.0; batch * 2 * k];
        for n in 0..batch {
            for i in 0..k {
                let idx = n * k + i;
                let u = p.u[idx];
                let std = math::exp(p.log_std[idx]);
                // d/dpre of -log(1 - tanh^2(pre)) is 2 tanh(pre).
                let d_pre = alpha * inv_b * 2.0 * u + du[idx] * (1.0 - u * u);
                head[n * 2 * k + i] = d_pre;
                let d_ls = d_pre * std * p.noise[idx] - alpha * inv_b;
                head[n * 2 * k + k + i] = d_ls * clamp_log_std_grad(p.raw_log_std[idx]);
            }
        }
        self.actor.backward_params(&p.trace, &head)?;
        let entropy = -p.log_prob.iter().sum::<f64>() * inv_b;
        Ok(ActorStats { loss, entropy, alpha })
    }

    /// Actor step on fresh noise, then the temperature step.
    pub fn actor_update(
        &mut self,
        states: &[f64],
        batch: usize,
        map: &mut impl ActionMap,
        rng: &mut impl Rng,
    ) -> Result<ActorStats> {
        let mut noise = vec![0.0; batch * self.control_dim];
        rng::fill_normal(rng, &mut noise);
        let stats = self.actor_loss_and_grad(states, &noise, batch, map)?;
        self.actor.params_mut().adam_step(&AdamConfig::with_lr(self.config.actor_lr))?;
        if self.config.auto_alpha {
            let grad = self.alpha_gradient(stats.entropy);
            let mut p = [self.log_alpha];
            self.alpha_adam.update(&AdamConfig::with_lr(self.config.alpha_lr), &mut p, &[grad])?;
            self.log_alpha = p[0];
        }
        Ok(stats)
    }

    /// Derivative of `-log_alpha * (log pi + target)` in `log_alpha`, given the
    /// measured entropy `-E[log pi]`: positive (shrink alpha) once the policy
    /// is more random than the target.
    pub fn alpha_gradient(&self, entropy: f64) -> f64 {
        entropy - self.target_entropy
    }
}
