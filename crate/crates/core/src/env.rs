//! Deterministic toy continuous-control environments.
//!
//! * `pointmass`: a damped planar double integrator. The state is the
//!   position relative to the goal plus the velocity, `(dx, dy, vx, vy)`.
//! * `armK`: a planar K-link arm driven by joint torques with decoupled joint
//!   inertia and viscous damping. The state is `(angles, velocities, goal)`.
//!   `armK-perturbed` scales link lengths by alternating `1.2 / 0.8` and
//!   doubles the joint damping.
//!
//! Every environment comes with a scripted expert. For the arms the expert is
//! an operational-space PD controller mapped through the Jacobian transpose,
//! so its torques always live in a two dimensional, state dependent subspace
//! no matter how many joints the arm has.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::math;
use crate::rng::{self, StreamId};
use crate::{Error, Result};

/// Weight of the squared control norm in the evaluation reward.
pub const CONTROL_COST: f64 = 1e-3;
/// An episode counts as successful when it ends this close to the goal.
pub const REACH_TOLERANCE: f64 = 0.05;
/// Maximum fraction of failed expert episodes accepted by the quality gate.
pub const MAX_EXPERT_FAILURE_RATE: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvId {
    PointMass,
    Arm { links: usize, perturbed: bool },
}

impl EnvId {
    pub fn arm(links: usize) -> Self {
        EnvId::Arm {
            links,
            perturbed: false,
        }
    }

    pub fn perturbed_arm(links: usize) -> Self {
        EnvId::Arm {
            links,
            perturbed: true,
        }
    }

    /// Same environment family without the perturbation.
    pub fn unperturbed(self) -> Self {
        match self {
            EnvId::Arm { links, .. } => EnvId::arm(links),
            other => other,
        }
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvId::PointMass => f.write_str("pointmass"),
            EnvId::Arm { links, perturbed: false } => write!(f, "arm{links}"),
            EnvId::Arm { links, perturbed: true } => write!(f, "arm{links}-perturbed"),
        }
    }
}

impl FromStr for EnvId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "pointmass" {
            return Ok(EnvId::PointMass);
        }
        let (body, perturbed) = match s.strip_suffix("-perturbed") {
            Some(b) => (b, true),
            None => (s, false),
        };
        let links = body
            .strip_prefix("arm")
            .and_then(|k| k.parse::<usize>().ok())
            .filter(|&k| (1..=32).contains(&k))
            .ok_or_else(|| Error::UnknownEnv(s.to_string()))?;
        Ok(EnvId::Arm { links, perturbed })
    }
}

/// Static description of an environment: spaces, timing and discount.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub id: EnvId,
    pub state_dim: usize,
    pub action_dim: usize,
    /// Symmetric bounds: the action box is `[-action_high, action_high]`.
    pub action_high: Vec<f64>,
    pub dt: f64,
    pub horizon: usize,
    pub gamma: f64,
}

impl EnvSpec {
    pub fn action_low(&self) -> Vec<f64> {
        self.action_high.iter().map(|h| -h).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointMassParams {
    pub mass: f64,
    pub damping: f64,
    pub v_max: f64,
    pub kp: f64,
    pub kd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmParams {
    pub lengths: Vec<f64>,
    pub inertia: f64,
    pub damping: f64,
    pub v_max: f64,
    /// Operational-space PD gains of the scripted expert.
    pub kp: f64,
    pub kd: f64,
    /// Joint-space damping injected by the expert.
    pub joint_damping: f64,
    /// Nominal relative joint angles at reset.
    pub home: Vec<f64>,
    pub home_noise: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Dynamics {
    PointMass(PointMassParams),
    Arm(ArmParams),
}

/// Radii and polar sector from which goals are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoalRegion {
    pub r_min: f64,
    pub r_max: f64,
    pub angle_min: f64,
    pub angle_max: f64,
}

impl GoalRegion {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let r = math::sqrt(p[0] * p[0] + p[1] * p[1]);
        let a = libm::atan2(p[1], p[0]);
        r >= self.r_min && r <= self.r_max && a >= self.angle_min && a <= self.angle_max
    }

    fn sample(&self, rng: &mut impl Rng) -> [f64; 2] {
        // uniform over the annulus sector's area
        let u = rng::uniform(rng, self.r_min * self.r_min, self.r_max * self.r_max);
        let r = math::sqrt(u).clamp(self.r_min, self.r_max);
        let a = rng::uniform(rng, self.angle_min, self.angle_max);
        [r * libm::cos(a), r * libm::sin(a)]
    }
}

/// Result of one simulation step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_state: Vec<f64>,
    pub eval_reward: f64,
    /// True if the action had to be clamped into the action box.
    pub clamped: bool,
}

/// One environment transition. `eval_reward` is ground truth for evaluation
/// only; learners never see it.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub next_state: Vec<f64>,
    pub done: bool,
    pub eval_reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Env {
    spec: EnvSpec,
    dynamics: Dynamics,
    goals: GoalRegion,
    demo_noise: f64,
}

impl Env {
    pub fn new(id: EnvId) -> Self {
        match id {
            EnvId::PointMass => Env {
                spec: EnvSpec {
                    id,
                    state_dim: 4,
                    action_dim: 2,
                    action_high: vec![1.0; 2],
                    dt: 0.1,
                    horizon: 50,
                    gamma: 0.99,
                },
                dynamics: Dynamics::PointMass(PointMassParams {
                    mass: 1.0,
                    damping: 0.5,
                    v_max: 2.0,
                    kp: 3.0,
                    kd: 2.5,
                }),
                goals: GoalRegion {
                    r_min: 0.3,
                    r_max: 1.0,
                    angle_min: -PI,
                    angle_max: PI,
                },
                demo_noise: 0.3,
            },
            EnvId::Arm { links, perturbed } => {
                let k = links as f64;
                let base = 1.0 / k;
                let lengths = (0..links)
                    .map(|i| match (perturbed, i % 2) {
                        (false, _) => base,
                        (true, 0) => base * 1.2,
                        (true, _) => base * 0.8,
                    })
                    .collect();
                let damping = if perturbed { 0.4 } else { 0.2 };
                let mut home = vec![0.0; links];
                if links > 1 {
                    let bend = (PI / 2.0) / (k - 1.0);
                    home.iter_mut().skip(1).for_each(|a| *a = bend);
                }
                Env {
                    spec: EnvSpec {
                        id,
                        state_dim: 2 * links + 2,
                        action_dim: links,
                        action_high: vec![1.0; links],
                        dt: 0.05,
                        horizon: 60,
                        gamma: 0.99,
                    },
                    dynamics: Dynamics::Arm(ArmParams {
                        lengths,
                        inertia: 0.05 * k,
                        damping,
                        v_max: 4.0,
                        kp: 6.0,
                        kd: 2.0,
                        joint_damping: 0.05 * k,
                        home,
                        home_noise: 0.1,
                    }),
                    goals: GoalRegion {
                        r_min: 0.35,
                        r_max: 0.85,
                        angle_min: -PI / 4.0,
                        angle_max: 3.0 * PI / 4.0,
                    },
                    demo_noise: 0.5,
                }
            }
        }
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn id(&self) -> EnvId {
        self.spec.id
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    pub fn goal_region(&self) -> GoalRegion {
        self.goals
    }

    /// Deterministic initial state for `seed`.
    pub fn reset(&self, seed: u64) -> Vec<f64> {
        let mut r = rng::stream(seed, StreamId::Env);
        let goal = self.goals.sample(&mut r);
        match &self.dynamics {
            // agent starts at the origin at rest
            Dynamics::PointMass(_) => vec![-goal[0], -goal[1], 0.0, 0.0],
            Dynamics::Arm(p) => {
                let k = p.lengths.len();
                let mut s = vec![0.0; 2 * k + 2];
                for i in 0..k {
                    s[i] = math::wrap_angle(p.home[i] + rng::uniform(&mut r, -p.home_noise, p.home_noise));
                }
                s[2 * k] = goal[0];
                s[2 * k + 1] = goal[1];
                s
            }
        }
    }

    /// Goal position in the workspace.
    pub fn goal(&self, state: &[f64]) -> [f64; 2] {
        match &self.dynamics {
            Dynamics::PointMass(_) => [0.0, 0.0],
            Dynamics::Arm(p) => {
                let k = p.lengths.len();
                [state[2 * k], state[2 * k + 1]]
            }
        }
    }

    /// End-effector (or point-mass) position in the goal's frame of reference.
    pub fn effector(&self, state: &[f64]) -> [f64; 2] {
        match &self.dynamics {
            Dynamics::PointMass(_) => [state[0], state[1]],
            Dynamics::Arm(p) => {
                let k = p.lengths.len();
                forward_kinematics(&p.lengths, &state[..k])
            }
        }
    }

    pub fn goal_distance(&self, state: &[f64]) -> f64 {
        let e = self.effector(state);
        let g = self.goal(state);
        let d = [e[0] - g[0], e[1] - g[1]];
        math::norm(&d)
    }

    fn check(&self, state: &[f64], action: &[f64]) -> Result<()> {
        if state.len() != self.spec.state_dim || action.len() != self.spec.action_dim {
            return Err(Error::EnvFault(format!(
                "{}: state/action lengths {}/{} do not match {}/{}",
                self.spec.id,
                state.len(),
                action.len(),
                self.spec.state_dim,
                self.spec.action_dim
            )));
        }
        if state.iter().chain(action).any(|v| !v.is_finite()) {
            return Err(Error::EnvFault(format!("{}: non-finite state or action", self.spec.id)));
        }
        Ok(())
    }

    /// Clamp an action into the action box; reports whether clamping occurred.
    pub fn clamp_action(&self, action: &[f64]) -> (Vec<f64>, bool) {
        let mut clamped = false;
        let a = action
            .iter()
            .zip(&self.spec.action_high)
            .map(|(&a, &h)| {
                let c = a.clamp(-h, h);
                clamped |= c != a;
                c
            })
            .collect();
        (a, clamped)
    }

    /// Semi-implicit Euler step. Pure function of `(state, action)`.
    pub fn step(&self, state: &[f64], action: &[f64]) -> Result<StepResult> {
        self.check(state, action)?;
        let (action, clamped) = self.clamp_action(action);
        let dt = self.spec.dt;
        let next_state = match &self.dynamics {
            Dynamics::PointMass(p) => {
                let mut s = state.to_vec();
                for ax in 0..2 {
                    let v = state[2 + ax];
                    let acc = (action[ax] - p.damping * v) / p.mass;
                    let v = (v + dt * acc).clamp(-p.v_max, p.v_max);
                    s[2 + ax] = v;
                    s[ax] = state[ax] + dt * v;
                }
                s
            }
            Dynamics::Arm(p) => {
                let k = p.lengths.len();
                let mut s = state.to_vec();
                for j in 0..k {
                    let w = state[k + j];
                    let acc = (action[j] - p.damping * w) / p.inertia;
                    let w = (w + dt * acc).clamp(-p.v_max, p.v_max);
                    s[k + j] = w;
                    s[j] = math::wrap_angle(state[j] + dt * w);
                }
                s
            }
        };
        let eval_reward = self.eval_reward(&next_state, &action);
        Ok(StepResult {
            next_state,
            eval_reward,
            clamped,
        })
    }

    /// Ground-truth reward for arriving in `next_state` under an in-bounds `action`.
    pub fn eval_reward(&self, next_state: &[f64], action: &[f64]) -> f64 {
        -self.goal_distance(next_state) - CONTROL_COST * math::dot(action, action)
    }

    /// Standard deviation of the task-space force noise used when recording
    /// demonstrations.
    pub fn demo_noise(&self) -> f64 {
        self.demo_noise
    }

    /// Scripted expert action for `state`, inside the action box.
    pub fn expert_action(&self, state: &[f64]) -> Vec<f64> {
        self.expert_action_with_force_noise(state, [0.0, 0.0])
    }

    /// Scripted expert with an extra task-space force `noise` added to the PD
    /// command before it is mapped to actions.
    pub fn expert_action_with_force_noise(&self, state: &[f64], noise: [f64; 2]) -> Vec<f64> {
        let raw = match &self.dynamics {
            Dynamics::PointMass(p) => {
                let f: Vec<f64> = (0..2).map(|ax| -p.kp * state[ax] - p.kd * state[2 + ax] + noise[ax]).collect();
                // saturate by scaling so the push keeps its direction
                let over = f.iter().zip(&self.spec.action_high).map(|(x, h)| x.abs() / h).fold(1.0, f64::max);
                f.iter().map(|x| x / over).collect::<Vec<_>>()
            }
            Dynamics::Arm(p) => {
                let k = p.lengths.len();
                let angles = &state[..k];
                let vel = &state[k..2 * k];
                let ee = forward_kinematics(&p.lengths, angles);
                let jac = jacobian(&p.lengths, angles);
                let ee_vel = [
                    math::dot(&jac[..k], vel),
                    math::dot(&jac[k..], vel),
                ];
                let goal = [state[2 * k], state[2 * k + 1]];
                let force = [
                    p.kp * (goal[0] - ee[0]) - p.kd * ee_vel[0] + noise[0],
                    p.kp * (goal[1] - ee[1]) - p.kd * ee_vel[1] + noise[1],
                ];
                (0..k)
                    .map(|j| jac[j] * force[0] + jac[k + j] * force[1] - p.joint_damping * vel[j])
                    .collect()
            }
        };
        self.clamp_action(&raw).0
    }

    /// A uniformly random action from the action box.
    pub fn random_action(&self, rng: &mut impl Rng) -> Vec<f64> {
        self.spec
            .action_high
            .iter()
            .map(|&h| rng::uniform(rng, -h, h))
            .collect()
    }
}

/// Planar chain end-effector position for relative joint angles.
pub fn forward_kinematics(lengths: &[f64], angles: &[f64]) -> [f64; 2] {
    assert!(!lengths.is_empty() && lengths.len() == angles.len());
    let mut cum = 0.0;
    let mut p = [0.0, 0.0];
    for (&l, &a) in lengths.iter().zip(angles) {
        cum += a;
        p[0] += l * libm::cos(cum);
        p[1] += l * libm::sin(cum);
    }
    p
}

/// End-effector Jacobian, row-major `2 x K`.
pub fn jacobian(lengths: &[f64], angles: &[f64]) -> Vec<f64> {
    let k = lengths.len();
    // running sums of link vectors from the tip backwards
    let mut cum = 0.0;
    let mut cs = vec![0.0; k];
    let mut sn = vec![0.0; k];
    for i in 0..k {
        cum += angles[i];
        cs[i] = lengths[i] * libm::cos(cum);
        sn[i] = lengths[i] * libm::sin(cum);
    }
    let mut jac = vec![0.0; 2 * k];
    let (mut sx, mut sy) = (0.0, 0.0);
    for j in (0..k).rev() {
        sx += cs[j];
        sy += sn[j];
        jac[j] = -sy;
        jac[k + j] = sx;
    }
    jac
}

/// Summed evaluation reward of an episode driven by `policy`.
pub fn rollout_return(env: &Env, seed: u64, mut policy: impl FnMut(&[f64]) -> Vec<f64>) -> Result<f64> {
    let mut s = env.reset(seed);
    let mut total = 0.0;
    for _ in 0..env.spec().horizon {
        let a = policy(&s);
        let r = env.step(&s, &a)?;
        total += r.eval_reward;
        s = r.next_state;
    }
    Ok(total)
}

/// Expert demonstrations: the corpus `B_E`.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoBuffer {
    pub env: EnvId,
    pub state_dim: usize,
    pub action_dim: usize,
    pub horizon: usize,
    pub transitions: Vec<Transition>,
    /// Index of the first transition of each episode.
    pub episode_starts: Vec<usize>,
}

/// Per-corpus statistics reported next to a demo file.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoReport {
    pub episode_returns: Vec<f64>,
    pub final_distances: Vec<f64>,
    pub failures: usize,
    pub passed: bool,
}

impl DemoBuffer {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn n_episodes(&self) -> usize {
        self.episode_starts.len()
    }

    /// Transitions of episode `i`.
    pub fn episode(&self, i: usize) -> &[Transition] {
        let start = self.episode_starts[i];
        let end = self
            .episode_starts
            .get(i + 1)
            .copied()
            .unwrap_or(self.transitions.len());
        &self.transitions[start..end]
    }

    pub fn report(&self, env: &Env) -> DemoReport {
        let mut episode_returns = Vec::with_capacity(self.n_episodes());
        let mut final_distances = Vec::with_capacity(self.n_episodes());
        for i in 0..self.n_episodes() {
            let ep = self.episode(i);
            episode_returns.push(ep.iter().map(|t| t.eval_reward).sum());
            final_distances.push(ep.last().map(|t| env.goal_distance(&t.next_state)).unwrap_or(f64::INFINITY));
        }
        let failures = final_distances.iter().filter(|&&d| d > REACH_TOLERANCE).count();
        let passed = !self.is_empty() && (failures as f64) <= MAX_EXPERT_FAILURE_RATE * self.n_episodes() as f64;
        DemoReport {
            episode_returns,
            final_distances,
            failures,
            passed,
        }
    }

    /// Short text identifying the generating environment and shape.
    pub fn env_digest(&self) -> String {
        format!("{}:s{}:a{}:h{}", self.env, self.state_dim, self.action_dim, self.horizon)
    }
}

/// Reset seed of demo episode `i` for corpus seed `seed`.
pub fn demo_episode_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64 + 1)
}

/// Roll out the scripted expert without applying the quality gate.
///
/// Demonstrations carry task-space exploration noise (see
/// [`Env::demo_noise`]); evaluation references use the noise-free expert.
pub fn rollout_expert(env: &Env, n_episodes: usize, seed: u64) -> Result<DemoBuffer> {
    rollout_noisy_expert(env, n_episodes, seed, env.demo_noise())
}

/// [`rollout_expert`] with an explicit noise level.
pub fn rollout_noisy_expert(env: &Env, n_episodes: usize, seed: u64, noise_std: f64) -> Result<DemoBuffer> {
    if n_episodes == 0 {
        return Err(Error::Config("need at least one demonstration episode".into()));
    }
    let spec = env.spec();
    let mut transitions = Vec::with_capacity(n_episodes * spec.horizon);
    let mut episode_starts = Vec::with_capacity(n_episodes);
    let mut noise_rng = rng::stream(seed, StreamId::Demo);
    for i in 0..n_episodes {
        episode_starts.push(transitions.len());
        let mut s = env.reset(demo_episode_seed(seed, i));
        for t in 0..spec.horizon {
            let xi = [rng::normal(&mut noise_rng), rng::normal(&mut noise_rng)];
            let a = env.expert_action_with_force_noise(&s, [noise_std * xi[0], noise_std * xi[1]]);
            let r = env.step(&s, &a)?;
            transitions.push(Transition {
                state: s,
                action: a,
                next_state: r.next_state.clone(),
                done: t + 1 == spec.horizon,
                eval_reward: r.eval_reward,
            });
            s = r.next_state;
        }
    }
    Ok(DemoBuffer {
        env: spec.id,
        state_dim: spec.state_dim,
        action_dim: spec.action_dim,
        horizon: spec.horizon,
        transitions,
        episode_starts,
    })
}

/// Roll out the scripted expert and apply the quality gate.
pub fn collect_demos(env: &Env, n_episodes: usize, seed: u64) -> Result<DemoBuffer> {
    let demos = rollout_expert(env, n_episodes, seed)?;
    let report = demos.report(env);
    if !report.passed {
        return Err(Error::QualityGate(format!(
            "{} of {} expert episodes ended farther than {} from the goal",
            report.failures,
            demos.n_episodes(),
            REACH_TOLERANCE
        )));
    }
    Ok(demos)
}
