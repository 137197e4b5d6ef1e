//! The adversarial imitation loop, evaluation and latent-policy transfer.
//!
//! One iteration collects `steps_per_iteration` environment steps with the
//! stochastic policy, then runs the discriminator and generator updates,
//! spread evenly over each other. A latent policy acts in `(-1, 1)^L`; its
//! output is scaled, decoded and executed, and the raw action is what the
//! replay buffer keeps.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::adversary::{Discriminator, InputKind};
use crate::codec::{self, ActionCodec, CodecReport};
use crate::config::{Algo, CvaeConfig, RunConfig};
use crate::env::{DemoBuffer, Env};
use crate::gaussian;
use crate::math;
use crate::nn::{AdamConfig, Mlp, Trace};
use crate::replay::{Experience, ReplayBuffer};
use crate::rng::{self, Stream, StreamId};
use crate::sac::{squash, ActionMap, LatentMap, RawMap, SacAgent};
use crate::{Error, Result};

/// Mean and spread of evaluation returns.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub mean: f64,
    pub std: f64,
    pub returns: Vec<f64>,
}

impl EvalResult {
    fn from_returns(returns: Vec<f64>) -> Self {
        let n = returns.len().max(1) as f64;
        let mean = math::compensated_sum(returns.iter().copied()) / n;
        let var = math::compensated_sum(returns.iter().map(|r| (r - mean) * (r - mean))) / n;
        EvalResult { mean, std: math::sqrt(var), returns }
    }
}

/// Seed of the `i`-th evaluation episode.
pub fn eval_episode_seed(base: u64, i: usize) -> u64 {
    base.wrapping_add(i as u64)
}

/// Deterministic returns of `policy` on `n` episodes starting at `base_seed`.
pub fn evaluate(env: &Env, n: usize, base_seed: u64, mut policy: impl FnMut(&[f64]) -> Result<Vec<f64>>) -> Result<EvalResult> {
    let mut returns = Vec::with_capacity(n);
    for i in 0..n {
        let mut s = env.reset(eval_episode_seed(base_seed, i));
        let mut total = 0.0;
        for _ in 0..env.spec().horizon {
            let a = policy(&s)?;
            let r = env.step(&s, &a)?;
            total += r.eval_reward;
            s = r.next_state;
        }
        returns.push(total);
    }
    Ok(EvalResult::from_returns(returns))
}

/// Scripted-expert and uniform-random returns on the evaluation seeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct References {
    pub expert: f64,
    pub random: f64,
}

impl References {
    pub fn measure(env: &Env, n: usize, base_seed: u64) -> Result<Self> {
        let expert = evaluate(env, n, base_seed, |s| Ok(env.expert_action(s)))?.mean;
        let mut r = rng::stream(base_seed, StreamId::Eval);
        let random = evaluate(env, n, base_seed, |_| Ok(env.random_action(&mut r)))?.mean;
        Ok(References { expert, random })
    }

    /// `0` at the random policy, `1` at the scripted expert.
    pub fn normalize(&self, ret: f64) -> f64 {
        (ret - self.random) / (self.expert - self.random)
    }
}

/// A deployable policy: actor plus, for latent policies, a decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyBundle {
    pub actor: Mlp,
    pub codec: Option<ActionCodec>,
    pub latent_scale: f64,
    pub action_high: Vec<f64>,
}

impl PolicyBundle {
    pub fn control_dim(&self) -> usize {
        self.actor.output_dim() / 2
    }

    /// Deterministic action: decoded `tanh(mean)`.
    pub fn action(&self, s: &[f64]) -> Result<Vec<f64>> {
        deterministic_action(&self.actor, self.codec.as_ref(), self.latent_scale, &self.action_high, s)
    }

    pub fn evaluate(&self, env: &Env, n: usize, base_seed: u64) -> Result<EvalResult> {
        if env.spec().state_dim != self.actor.input_dim() || env.spec().action_dim != self.action_high.len() {
            return Err(Error::Config(format!("policy does not fit environment {}", env.id())));
        }
        evaluate(env, n, base_seed, |s| self.action(s))
    }
}

fn deterministic_action(actor: &Mlp, codec: Option<&ActionCodec>, scale: f64, high: &[f64], s: &[f64]) -> Result<Vec<f64>> {
    let head = actor.forward(s)?;
    let k = actor.output_dim() / 2;
    let u: Vec<f64> = head[..k].iter().map(|&x| squash(x)).collect();
    control_to_action(codec, scale, high, s, &u)
}

fn control_to_action(codec: Option<&ActionCodec>, scale: f64, high: &[f64], s: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    match codec {
        Some(c) => {
            let z: Vec<f64> = u.iter().map(|x| x * scale).collect();
            c.decode(s, &z)
        }
        None => Ok(u.iter().zip(high).map(|(x, h)| x * h).collect()),
    }
}

/// One evaluation point of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub env_steps: usize,
    pub mean_eval_return: f64,
    pub std_eval_return: f64,
    pub normalized_return: f64,
    /// Means over the updates since the previous row; NaN when none ran.
    pub disc_loss: f64,
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub alpha: f64,
    /// Reconstruction error of the current codec on the demonstrations.
    pub recon_mse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LearningCurve {
    pub rows: Vec<CurveRow>,
}

impl LearningCurve {
    /// First evaluation point whose normalized return reaches `level`.
    pub fn steps_to_reach(&self, level: f64) -> Option<usize> {
        self.rows.iter().find(|r| r.normalized_return >= level).map(|r| r.env_steps)
    }

    pub fn final_normalized(&self) -> Option<f64> {
        self.rows.last().map(|r| r.normalized_return)
    }
}

/// Where the generator reward comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardSource {
    /// `-log(1 - D)` from the discriminator.
    Adversarial,
    /// The environment's own reward, with no discriminator at all.
    GroundTruth,
}

/// Everything a finished (or aborted) run leaves behind.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub curve: LearningCurve,
    pub agent: SacAgent,
    pub disc: Option<Discriminator>,
    pub codec: Option<ActionCodec>,
    pub references: References,
    pub env_steps: usize,
    /// Set when the divergence detector stopped the run.
    pub abort: Option<String>,
}

impl RunOutput {
    pub fn policy(&self, latent_scale: f64, action_high: &[f64]) -> PolicyBundle {
        PolicyBundle {
            actor: self.agent.actor().clone(),
            codec: self.codec.clone(),
            latent_scale,
            action_high: action_high.to_vec(),
        }
    }
}

/// Adversarial training as configured by `config.algo`.
///
/// `codec` must be given exactly for the latent algorithms; it is frozen for
/// the task-agnostic one and trained alongside for the task-aware one.
pub fn run_training(config: &RunConfig, demos: &DemoBuffer, codec: Option<ActionCodec>, seed: u64) -> Result<RunOutput> {
    run_training_with(config, Some(demos), codec, RewardSource::Adversarial, seed, &mut |_| {})
}

/// SAC on the environment reward with raw actions (no demonstrations).
pub fn run_ground_truth(config: &RunConfig, seed: u64) -> Result<RunOutput> {
    let mut cfg = config.clone();
    cfg.algo = Algo::Gail;
    run_training_with(&cfg, None, None, RewardSource::GroundTruth, seed, &mut |_| {})
}

/// Step counts `(disc, gen)` to run at each of `max(d, g)`-ish slots,
/// spreading the smaller count evenly over the larger.
fn interleave(d: usize, g: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(g + 1);
    let mut done = 0;
    for gi in 0..g {
        let mut k = 0;
        while done * g < (gi + 1) * d {
            done += 1;
            k += 1;
        }
        out.push((k, 1));
    }
    if done < d {
        out.push((d - done, 0));
    }
    out
}

#[derive(Default)]
struct Running {
    disc: (f64, usize),
    critic: (f64, usize),
    actor: (f64, usize),
}

fn mean_of(acc: (f64, usize)) -> f64 {
    if acc.1 == 0 {
        f64::NAN
    } else {
        acc.0 / acc.1 as f64
    }
}

struct Run<'a> {
    config: &'a RunConfig,
    env: Env,
    demos: Option<&'a DemoBuffer>,
    source: RewardSource,
    agent: SacAgent,
    disc: Option<Discriminator>,
    codec: Option<ActionCodec>,
    buffer: ReplayBuffer,
    env_rng: Stream,
    policy_rng: Stream,
    replay_rng: Stream,
    disc_rng: Stream,
    running: Running,
}

impl Run<'_> {
    fn aware(&self) -> bool {
        self.config.algo == Algo::LapalAware
    }

    fn disc_step(&mut self) -> Result<f64> {
        let demos = self.demos.ok_or_else(|| Error::State("adversarial training needs demonstrations".into()))?;
        let half = (self.config.disc.batch_size / 2).max(1);
        let sd = self.env.spec().state_dim;
        let ad = self.env.spec().action_dim;
        let mut es = Vec::with_capacity(half * sd);
        let mut ea = Vec::with_capacity(half * ad);
        for _ in 0..half {
            let t = &demos.transitions[rng::index(&mut self.disc_rng, demos.len())];
            es.extend_from_slice(&t.state);
            ea.extend_from_slice(&t.action);
        }
        let agent = self.buffer.sample(half, &mut self.disc_rng)?;
        let disc = self.disc.as_mut().ok_or_else(|| Error::State("no discriminator".into()))?;
        let step = match self.codec.as_mut() {
            None => disc.loss_and_grad(&es, &ea, &agent.states, &agent.actions)?,
            Some(codec) => {
                let mut te = Trace::new();
                let eu = codec.encode_mean_batch(&es, &ea, half, &mut te)?;
                let mut ta = Trace::new();
                let au = if self.config.reuse_emitted_latent {
                    agent.emitted.iter().map(|x| x * self.config.latent_scale).collect()
                } else {
                    codec.encode_mean_batch(&agent.states, &agent.actions, half, &mut ta)?
                };
                let (eu, au) = if codec.config().sampled_encoding {
                    let mut eu = eu;
                    sample_posterior(&mut eu, &te, &mut self.disc_rng);
                    let mut au = au;
                    if !self.config.reuse_emitted_latent {
                        sample_posterior(&mut au, &ta, &mut self.disc_rng);
                    }
                    (eu, au)
                } else {
                    (eu, au)
                };
                let step = disc.loss_and_grad(&es, &eu, &agent.states, &au)?;
                if self.config.algo == Algo::LapalAware {
                    // The encoder joins the discriminator's side of the game.
                    codec.encoder_mean_backward(&te, &step.expert_input_grad, true)?;
                    if !self.config.reuse_emitted_latent {
                        codec.encoder_mean_backward(&ta, &step.agent_input_grad, true)?;
                    }
                    if self.config.aware_recon_weight > 0.0 {
                        let mut noise = vec![0.0; half * codec.latent_dim()];
                        rng::fill_normal(&mut self.disc_rng, &mut noise);
                        codec.loss_and_grad(&es, &ea, &noise, self.config.aware_recon_weight)?;
                    }
                    codec.encoder_mut()?.params_mut().adam_step(&AdamConfig::with_lr(self.config.encoder_lr))?;
                }
                step
            }
        };
        disc.adam_step(&AdamConfig::with_lr(self.config.disc.lr))?;
        Ok(step.loss)
    }

    fn gen_step(&mut self) -> Result<(f64, f64)> {
        let b = self.config.sac.batch_size;
        let batch = self.buffer.sample(b, &mut self.replay_rng)?;
        let aware = self.aware();
        let (c, rewards) = {
            let map_c;
            let c = match self.codec.as_mut() {
                None => RawMap::new(self.env.spec().action_high.as_slice()).stored_input(
                    &batch.states,
                    &batch.actions,
                    &batch.emitted,
                    b,
                )?,
                Some(codec) => {
                    map_c = LatentMap::new(codec, self.config.latent_scale, self.config.reuse_emitted_latent);
                    map_c.stored_input(&batch.states, &batch.actions, &batch.emitted, b)?
                }
            };
            let rewards = match self.source {
                RewardSource::GroundTruth => {
                    let ad = self.env.spec().action_dim;
                    let sd = self.env.spec().state_dim;
                    (0..b)
                        .map(|n| self.env.eval_reward(&batch.next_states[n * sd..(n + 1) * sd], &batch.actions[n * ad..(n + 1) * ad]))
                        .collect()
                }
                RewardSource::Adversarial => {
                    let disc = self.disc.as_ref().ok_or_else(|| Error::State("no discriminator".into()))?;
                    disc.rewards_batch(&batch.states, &c, b)?
                }
            };
            (c, rewards)
        };
        let (critic, actor) = match self.codec.as_mut() {
            None => {
                let mut map = RawMap::new(&self.env.spec().action_high);
                let cs = self.agent.critic_update(&batch, &c, &rewards, &map, &mut self.policy_rng)?;
                let a = self.agent.actor_update(&batch.states, b, &mut map, &mut self.policy_rng)?;
                (cs, a)
            }
            Some(codec) => {
                let mut map =
                    LatentMap::new(codec, self.config.latent_scale, self.config.reuse_emitted_latent).training_decoder(aware);
                let cs = self.agent.critic_update(&batch, &c, &rewards, &map, &mut self.policy_rng)?;
                let a = self.agent.actor_update(&batch.states, b, &mut map, &mut self.policy_rng)?;
                if aware {
                    codec.decoder_mut()?.params_mut().adam_step(&AdamConfig::with_lr(self.config.decoder_lr))?;
                }
                (cs, a)
            }
        };
        Ok((0.5 * (critic.q1_loss + critic.q2_loss), actor.loss))
    }

    fn collect(&mut self, steps: usize, state: &mut Vec<f64>, t: &mut usize) -> Result<()> {
        let horizon = self.env.spec().horizon;
        for _ in 0..steps {
            let u = self.agent.act(state, false, &mut self.policy_rng)?;
            let action =
                control_to_action(self.codec.as_ref(), self.config.latent_scale, &self.env.spec().action_high, state, &u)?;
            let (action, _) = self.env.clamp_action(&action);
            let r = self.env.step(state, &action)?;
            *t += 1;
            let done = *t == horizon;
            self.buffer.push(Experience {
                state: core::mem::take(state),
                action,
                emitted: u,
                next_state: r.next_state.clone(),
                done,
            });
            if done {
                *state = self.env.reset(self.env_rng.random());
                *t = 0;
            } else {
                *state = r.next_state;
            }
        }
        Ok(())
    }

    fn update(&mut self) -> Result<()> {
        let cfg = self.config;
        if self.buffer.len() < cfg.sac.batch_size.min(cfg.steps_per_iteration) {
            return Ok(());
        }
        let adversarial = self.source == RewardSource::Adversarial;
        let d = if adversarial { cfg.disc_updates_per_iteration } else { 0 };
        for (nd, ng) in interleave(d, cfg.gen_updates_per_iteration) {
            for _ in 0..nd {
                let l = self.disc_step()?;
                check_finite(l, "discriminator loss")?;
                self.running.disc.0 += l;
                self.running.disc.1 += 1;
            }
            for _ in 0..ng {
                let (c, a) = self.gen_step()?;
                check_finite(c, "critic loss")?;
                check_finite(a, "actor loss")?;
                self.running.critic.0 += c;
                self.running.critic.1 += 1;
                self.running.actor.0 += a;
                self.running.actor.1 += 1;
            }
        }
        Ok(())
    }

    fn evaluate(&self) -> Result<EvalResult> {
        let high = &self.env.spec().action_high;
        evaluate(&self.env, self.config.eval_episodes, self.config.eval_seed, |s| {
            deterministic_action(self.agent.actor(), self.codec.as_ref(), self.config.latent_scale, high, s)
        })
    }
}

/// Turns posterior means into posterior samples using the log-stds the
/// encoder pass left in `trace`.
fn sample_posterior(means: &mut [f64], trace: &Trace, rng: &mut Stream) {
    let l = means.len() / trace.batch();
    let head = trace.output();
    for (i, m) in means.iter_mut().enumerate() {
        let ls = gaussian::clamp_log_std(head[(i / l) * 2 * l + l + i % l]);
        *m += math::exp(ls) * rng::normal(rng);
    }
}

fn check_finite(x: f64, what: &str) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what.into()))
    }
}

fn validate(config: &RunConfig, demos: Option<&DemoBuffer>, codec: Option<&ActionCodec>, source: RewardSource, env: &Env) -> Result<()> {
    if config.steps_per_iteration == 0 {
        return Err(Error::Config("steps_per_iteration must be positive".into()));
    }
    if config.eval_every == 0 || config.eval_every % config.steps_per_iteration != 0 {
        return Err(Error::Config("eval_every must be a positive multiple of steps_per_iteration".into()));
    }
    if config.sac.batch_size == 0 || config.disc.batch_size < 2 {
        return Err(Error::Config("batch sizes must be positive".into()));
    }
    if !(config.latent_scale > 0.0) {
        return Err(Error::Config("latent_scale must be positive".into()));
    }
    match (config.algo.uses_codec(), codec) {
        (true, None) => return Err(Error::Config(format!("{} needs an action codec", config.algo.name()))),
        (false, Some(_)) => return Err(Error::Config("gail takes no action codec".into())),
        _ => {}
    }
    if let Some(c) = codec {
        if c.state_dim() != env.spec().state_dim || c.action_dim() != env.spec().action_dim {
            return Err(Error::Config(format!("codec does not fit environment {}", env.id())));
        }
        if c.config().sampled_encoding && config.algo == Algo::LapalAware {
            return Err(Error::Config("sampled encoding is only supported with a frozen codec".into()));
        }
    }
    if source == RewardSource::Adversarial {
        let d = demos.ok_or_else(|| Error::Config("adversarial training needs demonstrations".into()))?;
        if d.env != env.id() || d.is_empty() {
            return Err(Error::Config(format!("demonstrations were recorded on {}, not {}", d.env, env.id())));
        }
    }
    Ok(())
}

/// The full loop with an observer called on every new curve row.
pub fn run_training_with(
    config: &RunConfig,
    demos: Option<&DemoBuffer>,
    codec: Option<ActionCodec>,
    source: RewardSource,
    seed: u64,
    observer: &mut dyn FnMut(&CurveRow),
) -> Result<RunOutput> {
    let env = Env::new(config.env);
    validate(config, demos, codec.as_ref(), source, &env)?;
    let mut codec = codec;
    if let Some(c) = codec.as_mut() {
        if config.algo == Algo::LapalAware {
            if c.is_frozen() {
                return Err(Error::Config("task-aware training needs a trainable codec".into()));
            }
        } else {
            c.freeze();
        }
    }
    let spec = env.spec().clone();
    let mut init = rng::stream(seed, StreamId::Init);
    let (control_dim, input) = match codec.as_ref() {
        Some(c) => (c.latent_dim(), InputKind::Latent(c.latent_dim())),
        None => (spec.action_dim, InputKind::Raw(spec.action_dim)),
    };
    let agent = SacAgent::new(spec.state_dim, control_dim, input.dim(), config.sac.clone(), &mut init)?;
    let disc = match source {
        RewardSource::Adversarial => Some(Discriminator::new(spec.state_dim, input, &config.disc.hidden, &mut init)?),
        RewardSource::GroundTruth => None,
    };
    let references = References::measure(&env, config.eval_episodes, config.eval_seed)?;
    let mut run = Run {
        config,
        demos,
        source,
        agent,
        disc,
        codec,
        buffer: ReplayBuffer::new(config.sac.buffer_capacity)?,
        env_rng: rng::stream(seed, StreamId::Env),
        policy_rng: rng::stream(seed, StreamId::Policy),
        replay_rng: rng::stream(seed, StreamId::Replay),
        disc_rng: rng::stream(seed, StreamId::Disc),
        running: Running::default(),
        env,
    };
    let mut curve = LearningCurve::default();
    let mut abort = None;
    let mut state = run.env.reset(run.env_rng.random());
    let mut t = 0;
    let mut steps = 0;
    while steps < config.total_env_steps {
        let n = config.steps_per_iteration.min(config.total_env_steps - steps);
        run.collect(n, &mut state, &mut t)?;
        steps += n;
        match run.update() {
            Ok(()) => {}
            Err(Error::NonFinite(what)) => {
                abort = Some(format!("non-finite {what} at {steps} environment steps"));
                break;
            }
            Err(e) => return Err(e),
        }
        if steps % config.eval_every == 0 || steps == config.total_env_steps {
            let ev = run.evaluate()?;
            let recon_mse = match (run.codec.as_ref(), demos) {
                (Some(c), Some(d)) => {
                    let (s, a) = codec::flatten_pairs(d.transitions.iter());
                    Some(c.reconstruction_mse(&s, &a)?)
                }
                _ => None,
            };
            let row = CurveRow {
                env_steps: steps,
                mean_eval_return: ev.mean,
                std_eval_return: ev.std,
                normalized_return: references.normalize(ev.mean),
                disc_loss: mean_of(run.running.disc),
                critic_loss: mean_of(run.running.critic),
                actor_loss: mean_of(run.running.actor),
                alpha: run.agent.alpha(),
                recon_mse,
            };
            run.running = Running::default();
            observer(&row);
            let below_random = ev.mean < references.random;
            curve.rows.push(row);
            if config.divergence_check && 2 * steps >= config.total_env_steps && below_random {
                abort = Some(format!(
                    "evaluation return {:.3} below the random baseline {:.3} after {steps} of {} environment steps",
                    ev.mean, references.random, config.total_env_steps
                ));
                break;
            }
        }
    }
    Ok(RunOutput {
        curve,
        agent: run.agent,
        disc: run.disc,
        codec: run.codec,
        references,
        env_steps: steps,
        abort,
    })
}

/// Composes a latent policy with a decoder trained on target-domain demos.
pub fn transfer_policy(source: &PolicyBundle, target_demos: &DemoBuffer, config: &CvaeConfig, seed: u64) -> Result<(PolicyBundle, CodecReport)> {
    let source_codec = source
        .codec
        .as_ref()
        .ok_or_else(|| Error::Config("only latent policies can be transferred".into()))?;
    if source_codec.latent_dim() != config.latent_dim || source.control_dim() != config.latent_dim {
        return Err(Error::Config(format!(
            "latent dimension mismatch: policy emits {}, codec config has {}",
            source.control_dim(),
            config.latent_dim
        )));
    }
    let env = Env::new(target_demos.env);
    if env.spec().state_dim != source.actor.input_dim() {
        return Err(Error::Config(format!("policy state dimension does not fit {}", target_demos.env)));
    }
    let (codec, report) = codec::train_codec(target_demos, env.spec(), config, seed)?;
    let bundle = PolicyBundle {
        actor: source.actor.clone(),
        codec: Some(codec),
        latent_scale: source.latent_scale,
        action_high: env.spec().action_high.clone(),
    };
    Ok((bundle, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Preset;
    use crate::env::{collect_demos, EnvId};

    #[test]
    fn interleave_spreads_updates() {
        let s = interleave(500, 1000);
        assert_eq!(s.len(), 1000);
        assert_eq!(s.iter().map(|x| x.0).sum::<usize>(), 500);
        assert!(s.iter().all(|x| x.0 <= 1 && x.1 == 1));
        assert_eq!(interleave(3, 0), vec![(3, 0)]);
        assert_eq!(interleave(0, 2), vec![(0, 1), (0, 1)]);
        let s = interleave(4, 2);
        assert_eq!(s, vec![(2, 1), (2, 1)]);
    }

    #[test]
    fn references_order() {
        let env = Env::new(EnvId::PointMass);
        let r = References::measure(&env, 16, 1_000_000).unwrap();
        assert!(r.random < r.expert);
        assert_eq!(r.normalize(r.expert), 1.0);
        assert_eq!(r.normalize(r.random), 0.0);
        let again = evaluate(&env, 16, 1_000_000, |s| Ok(env.expert_action(s))).unwrap();
        assert_eq!(again.mean, r.expert);
    }

    #[test]
    fn zero_budget_returns_empty_curve() {
        let env = Env::new(EnvId::PointMass);
        let demos = collect_demos(&env, 2, 0).unwrap();
        let mut cfg = RunConfig::preset(Preset::Desk, Algo::Gail, EnvId::PointMass);
        cfg.total_env_steps = 0;
        let out = run_training(&cfg, &demos, None, 0).unwrap();
        assert!(out.curve.rows.is_empty());
        assert_eq!(out.env_steps, 0);
        assert!(out.abort.is_none());
    }

    #[test]
    fn codec_presence_is_checked() {
        let env = Env::new(EnvId::PointMass);
        let demos = collect_demos(&env, 2, 0).unwrap();
        let cfg = RunConfig::preset(Preset::Desk, Algo::LapalAgnostic, EnvId::PointMass);
        assert!(matches!(run_training(&cfg, &demos, None, 0), Err(Error::Config(_))));
        let other = collect_demos(&Env::new(EnvId::arm(2)), 2, 0).unwrap();
        let cfg = RunConfig::preset(Preset::Desk, Algo::Gail, EnvId::PointMass);
        assert!(matches!(run_training(&cfg, &other, None, 0), Err(Error::Config(_))));
    }
}
