//! Discriminator over `(state, latent action)` or `(state, action)` pairs and
//! the reward it induces.
//!
//! Everything is computed from the raw logit `l`: `D = sigmoid(l)`, the
//! binary cross-entropy terms are `softplus(-l)` (expert) and `softplus(l)`
//! (agent), and the generator reward `-log(1 - D)` is exactly `softplus(l)`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::math;
use crate::nn::{Activation, AdamConfig, Mlp, MlpSpec, Trace};
use crate::{Error, Result};

/// Which action space the discriminator was trained against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    /// `(state, latent)` with the given latent dimension.
    Latent(usize),
    /// `(state, raw action)` with the given action dimension.
    Raw(usize),
}

impl InputKind {
    pub fn dim(self) -> usize {
        match self {
            InputKind::Latent(d) | InputKind::Raw(d) => d,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    net: Mlp,
    state_dim: usize,
    input: InputKind,
}

/// Loss of one discriminator minibatch plus the input gradients needed to
/// continue backpropagation into an encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscStep {
    pub loss: f64,
    /// Mean `sigmoid(l)` on expert samples.
    pub expert_d: f64,
    /// Mean `sigmoid(l)` on agent samples.
    pub agent_d: f64,
    /// d loss / d u for the expert rows (`n_expert x u_dim`).
    pub expert_input_grad: Vec<f64>,
    pub agent_input_grad: Vec<f64>,
}

impl Discriminator {
    pub fn spec(state_dim: usize, input: InputKind, hidden: &[usize]) -> Result<MlpSpec> {
        MlpSpec::new(state_dim + input.dim(), hidden, 1, Activation::Tanh, Activation::Identity)
    }

    pub fn new(state_dim: usize, input: InputKind, hidden: &[usize], rng: &mut impl Rng) -> Result<Self> {
        let net = Mlp::new(Self::spec(state_dim, input, hidden)?, rng)?;
        Ok(Discriminator { net, state_dim, input })
    }

    pub fn from_net(state_dim: usize, input: InputKind, net: Mlp) -> Result<Self> {
        if net.input_dim() != state_dim + input.dim() || net.output_dim() != 1 {
            return Err(Error::Config("discriminator network does not match its input composition".into()));
        }
        Ok(Discriminator { net, state_dim, input })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn input_kind(&self) -> InputKind {
        self.input
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn row(&self, s: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        if s.len() != self.state_dim || u.len() != self.input.dim() {
            return Err(Error::Config("discriminator input dimension mismatch".into()));
        }
        let mut x = s.to_vec();
        x.extend_from_slice(u);
        Ok(x)
    }

    pub fn logit(&self, s: &[f64], u: &[f64]) -> Result<f64> {
        Ok(self.net.forward(&self.row(s, u)?)?[0])
    }

    /// `-log(1 - D(s, u))`.
    pub fn reward(&self, s: &[f64], u: &[f64]) -> Result<f64> {
        Ok(reward_from_logit(self.logit(s, u)?))
    }

    /// Logits for a batch of already concatenated `(s, u)` rows.
    pub fn logits_batch(&self, x: &[f64], batch: usize) -> Result<Vec<f64>> {
        let mut t = Trace::new();
        self.net.forward_batch(x, batch, &mut t)?;
        Ok(t.output().to_vec())
    }

    /// Rewards for a batch of `(s, u)` pairs given as separate matrices.
    pub fn rewards_batch(&self, states: &[f64], u: &[f64], batch: usize) -> Result<Vec<f64>> {
        let x = crate::codec::concat_rows(states, self.state_dim, u, self.input.dim(), batch);
        Ok(self.logits_batch(&x, batch)?.into_iter().map(reward_from_logit).collect())
    }

    /// Negated minimax objective on one minibatch with expert rows labelled 1
    /// and agent rows labelled 0; accumulates parameter gradients.
    pub fn loss_and_grad(
        &mut self,
        expert_states: &[f64],
        expert_u: &[f64],
        agent_states: &[f64],
        agent_u: &[f64],
    ) -> Result<DiscStep> {
        let ne = expert_states.len() / self.state_dim;
        let na = agent_states.len() / self.state_dim;
        if ne == 0 || na == 0 {
            return Err(Error::Config("discriminator batches must be non-empty".into()));
        }
        let we = vec![1.0 / ne as f64; ne];
        let wa = vec![1.0 / na as f64; na];
        self.weighted_loss_and_grad(expert_states, expert_u, &we, agent_states, agent_u, &wa)
    }

    /// Like [`Discriminator::loss_and_grad`] with explicit per-row weights,
    /// i.e. the exact objective under two weighted empirical distributions.
    pub fn weighted_loss_and_grad(
        &mut self,
        expert_states: &[f64],
        expert_u: &[f64],
        expert_w: &[f64],
        agent_states: &[f64],
        agent_u: &[f64],
        agent_w: &[f64],
    ) -> Result<DiscStep> {
        let (sd, ud) = (self.state_dim, self.input.dim());
        let ne = expert_w.len();
        let na = agent_w.len();
        if expert_states.len() != ne * sd || expert_u.len() != ne * ud || agent_states.len() != na * sd || agent_u.len() != na * ud {
            return Err(Error::Config("discriminator batch shapes do not match".into()));
        }
        let n = ne + na;
        let mut x = crate::codec::concat_rows(expert_states, sd, expert_u, ud, ne);
        x.extend(crate::codec::concat_rows(agent_states, sd, agent_u, ud, na));
        let mut t = Trace::new();
        self.net.forward_batch(&x, n, &mut t)?;
        let logits = t.output().to_vec();
        let mut loss = 0.0;
        let mut upstream = vec![0.0; n];
        let (mut ed, mut ad) = (0.0, 0.0);
        for i in 0..n {
            let l = logits[i];
            if i < ne {
                let w = expert_w[i];
                loss += w * math::softplus(-l);
                upstream[i] = w * (math::sigmoid(l) - 1.0);
                ed += math::sigmoid(l);
            } else {
                let w = agent_w[i - ne];
                loss += w * math::softplus(l);
                upstream[i] = w * math::sigmoid(l);
                ad += math::sigmoid(l);
            }
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite("discriminator loss".into()));
        }
        let gx = self.net.backward(&t, &upstream)?;
        let width = sd + ud;
        let expert_input_grad = crate::codec::take_cols(&gx[..ne * width], width, sd, ud);
        let agent_input_grad = crate::codec::take_cols(&gx[ne * width..], width, sd, ud);
        Ok(DiscStep {
            loss,
            expert_d: ed / ne as f64,
            agent_d: ad / na as f64,
            expert_input_grad,
            agent_input_grad,
        })
    }

    pub fn adam_step(&mut self, cfg: &AdamConfig) -> Result<()> {
        self.net.params_mut().adam_step(cfg)
    }
}

/// `-log(1 - sigmoid(l))`, computed as `softplus(l)`.
pub fn reward_from_logit(l: f64) -> f64 {
    math::softplus(l)
}
