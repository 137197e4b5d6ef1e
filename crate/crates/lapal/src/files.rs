//! On-disk artifacts: demonstration corpora and the codec, discriminator and
//! agent checkpoints. Every writer goes through [`write_atomic`].

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use lapal_core::adversary::{Discriminator, InputKind};
use lapal_core::codec::ActionCodec;
use lapal_core::config::{Algo, CvaeConfig, SacConfig};
use lapal_core::env::{DemoBuffer, Env, EnvId, Transition};
use lapal_core::nn::AdamState;
use lapal_core::sac::SacAgent;
use lapal_core::train::PolicyBundle;

use crate::binfmt::{read_mlp, read_mlp_expecting, Reader, Writer, VERSION};
use crate::error::{CliError, CliResult};

const DEMO_MAGIC: &[u8; 4] = b"LPDM";
const CODEC_MAGIC: &[u8; 4] = b"LPCD";
const DISC_MAGIC: &[u8; 4] = b"LPDS";
const AGENT_MAGIC: &[u8; 4] = b"LPAG";

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let name = path.file_name().ok_or_else(|| CliError::Usage(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(CliError::io(path, e));
    }
    Ok(())
}

pub fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

fn fmt_err(path: &Path) -> impl Fn(String) -> CliError + '_ {
    move |msg| CliError::format(path, msg)
}

fn env_from(r: &mut Reader) -> Result<EnvId, String> {
    r.str()?.parse::<EnvId>().map_err(|e| e.to_string())
}

pub fn encode_demos(d: &DemoBuffer) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(DEMO_MAGIC);
    w.u32(VERSION);
    w.str(&d.env.to_string());
    w.u64(d.state_dim as u64);
    w.u64(d.action_dim as u64);
    w.u64(d.horizon as u64);
    w.u64(d.transitions.len() as u64);
    w.u64(d.episode_starts.len() as u64);
    for &s in &d.episode_starts {
        w.u64(s as u64);
    }
    for t in &d.transitions {
        w.f64s(&t.state);
        w.f64s(&t.action);
        w.f64s(&t.next_state);
        w.f64(if t.done { 1.0 } else { 0.0 });
        w.f64(t.eval_reward);
    }
    w.into_bytes()
}

pub fn decode_demos(bytes: &[u8]) -> Result<DemoBuffer, String> {
    let mut r = Reader::new(bytes);
    r.expect(DEMO_MAGIC)?;
    r.version()?;
    let env = env_from(&mut r)?;
    let (state_dim, action_dim, horizon) = (r.usize()?, r.usize()?, r.usize()?);
    let spec = Env::new(env).spec().clone();
    if (state_dim, action_dim, horizon) != (spec.state_dim, spec.action_dim, spec.horizon) {
        return Err(format!("header dimensions do not match environment {env}"));
    }
    let n = r.usize()?;
    let n_eps = r.usize()?;
    let episode_starts = (0..n_eps).map(|_| r.usize()).collect::<Result<Vec<_>, _>>()?;
    if episode_starts.iter().any(|&s| s >= n.max(1)) || episode_starts.windows(2).any(|w| w[0] >= w[1]) {
        return Err("episode index is inconsistent".into());
    }
    let mut transitions = Vec::with_capacity(n);
    for _ in 0..n {
        let state = r.f64s(state_dim)?;
        let action = r.f64s(action_dim)?;
        let next_state = r.f64s(state_dim)?;
        let done = r.f64()? != 0.0;
        let eval_reward = r.f64()?;
        transitions.push(Transition { state, action, next_state, done, eval_reward });
    }
    if !r.is_done() {
        return Err("trailing bytes after the last transition".into());
    }
    Ok(DemoBuffer { env, state_dim, action_dim, horizon, transitions, episode_starts })
}

pub fn save_demos(path: &Path, d: &DemoBuffer) -> CliResult<()> {
    write_atomic(path, &encode_demos(d))
}

pub fn load_demos(path: &Path) -> CliResult<DemoBuffer> {
    decode_demos(&read_file(path)?).map_err(fmt_err(path))
}

fn to_toml<T: serde::Serialize>(x: &T) -> String {
    toml::to_string(x).expect("configuration types always serialize")
}

fn from_toml<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    toml::from_str(s).map_err(|e| e.to_string())
}

pub fn encode_codec(env: EnvId, c: &ActionCodec) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(CODEC_MAGIC);
    w.u32(VERSION);
    w.str(&env.to_string());
    w.str(&to_toml(c.config()));
    crate::binfmt::write_mlp(&mut w, c.encoder());
    crate::binfmt::write_mlp(&mut w, c.decoder());
    w.into_bytes()
}

pub fn decode_codec(bytes: &[u8]) -> Result<(EnvId, ActionCodec), String> {
    let mut r = Reader::new(bytes);
    r.expect(CODEC_MAGIC)?;
    r.version()?;
    let env_id = env_from(&mut r)?;
    let config: CvaeConfig = from_toml(&r.str()?)?;
    let env = Env::new(env_id);
    let enc_spec = ActionCodec::encoder_spec(env.spec(), &config).map_err(|e| e.to_string())?;
    let dec_spec = ActionCodec::decoder_spec(env.spec(), &config).map_err(|e| e.to_string())?;
    let encoder = read_mlp_expecting(&mut r, &enc_spec, "encoder")?;
    let decoder = read_mlp_expecting(&mut r, &dec_spec, "decoder")?;
    if !r.is_done() {
        return Err("trailing bytes after the decoder".into());
    }
    let codec = ActionCodec::from_parts(env.spec(), config, encoder, decoder).map_err(|e| e.to_string())?;
    Ok((env_id, codec))
}

pub fn save_codec(path: &Path, env: EnvId, c: &ActionCodec) -> CliResult<()> {
    write_atomic(path, &encode_codec(env, c))
}

pub fn load_codec(path: &Path) -> CliResult<(EnvId, ActionCodec)> {
    decode_codec(&read_file(path)?).map_err(fmt_err(path))
}

fn input_kind_text(k: InputKind) -> String {
    match k {
        InputKind::Latent(d) => format!("latent:{d}"),
        InputKind::Raw(d) => format!("raw:{d}"),
    }
}

fn parse_input_kind(s: &str) -> Result<InputKind, String> {
    let (kind, dim) = s.split_once(':').ok_or("malformed input descriptor")?;
    let dim: usize = dim.parse().map_err(|_| "malformed input dimension")?;
    match kind {
        "latent" => Ok(InputKind::Latent(dim)),
        "raw" => Ok(InputKind::Raw(dim)),
        _ => Err(format!("unknown discriminator input {kind}")),
    }
}

pub fn encode_disc(env: EnvId, d: &Discriminator) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(DISC_MAGIC);
    w.u32(VERSION);
    w.str(&env.to_string());
    w.str(&input_kind_text(d.input_kind()));
    crate::binfmt::write_mlp(&mut w, d.net());
    w.into_bytes()
}

/// Loads a discriminator and checks it was trained against `expected`.
pub fn decode_disc(bytes: &[u8], expected: Option<InputKind>) -> Result<(EnvId, Discriminator), String> {
    let mut r = Reader::new(bytes);
    r.expect(DISC_MAGIC)?;
    r.version()?;
    let env_id = env_from(&mut r)?;
    let kind = parse_input_kind(&r.str()?)?;
    if let Some(e) = expected {
        if e != kind {
            return Err(format!(
                "discriminator was trained on {}, not {}",
                input_kind_text(kind),
                input_kind_text(e)
            ));
        }
    }
    let net = read_mlp(&mut r)?;
    if !r.is_done() {
        return Err("trailing bytes after the network".into());
    }
    let state_dim = Env::new(env_id).spec().state_dim;
    let d = Discriminator::from_net(state_dim, kind, net).map_err(|e| e.to_string())?;
    Ok((env_id, d))
}

pub fn save_disc(path: &Path, env: EnvId, d: &Discriminator) -> CliResult<()> {
    write_atomic(path, &encode_disc(env, d))
}

pub fn load_disc(path: &Path, expected: Option<InputKind>) -> CliResult<(EnvId, Discriminator)> {
    decode_disc(&read_file(path)?, expected).map_err(fmt_err(path))
}

/// Agent checkpoint plus what is needed to deploy its actor.
#[derive(Debug, Clone)]
pub struct AgentFile {
    pub env: EnvId,
    pub algo: Algo,
    pub latent_scale: f64,
    pub agent: SacAgent,
    /// Replay size when the checkpoint was taken (contents are not stored).
    pub buffer_len: usize,
}

pub fn encode_agent(a: &AgentFile) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(AGENT_MAGIC);
    w.u32(VERSION);
    w.str(&a.env.to_string());
    w.str(a.algo.name());
    w.f64(a.latent_scale);
    w.str(&to_toml(a.agent.config()));
    crate::binfmt::write_mlp(&mut w, a.agent.actor());
    for net in a.agent.critics().iter().chain(a.agent.targets()) {
        crate::binfmt::write_mlp(&mut w, net);
    }
    w.f64(a.agent.log_alpha());
    let ad = a.agent.alpha_adam();
    w.f64s(&ad.m);
    w.f64s(&ad.v);
    w.u64(ad.step);
    w.u64(a.buffer_len as u64);
    w.into_bytes()
}

pub fn decode_agent(bytes: &[u8]) -> Result<AgentFile, String> {
    let mut r = Reader::new(bytes);
    r.expect(AGENT_MAGIC)?;
    r.version()?;
    let env = env_from(&mut r)?;
    let algo_name = r.str()?;
    let algo = Algo::from_name(&algo_name).ok_or_else(|| format!("unknown algorithm {algo_name}"))?;
    let latent_scale = r.f64()?;
    let config: SacConfig = from_toml(&r.str()?)?;
    let actor = read_mlp(&mut r)?;
    let mut nets = Vec::with_capacity(4);
    for _ in 0..4 {
        nets.push(read_mlp(&mut r)?);
    }
    let log_alpha = r.f64()?;
    let m = r.f64s(1)?;
    let v = r.f64s(1)?;
    let step = r.u64()?;
    let buffer_len = r.usize()?;
    if !r.is_done() {
        return Err("trailing bytes after the agent".into());
    }
    let spec = Env::new(env).spec().clone();
    if actor.input_dim() != spec.state_dim {
        return Err(format!("actor input does not match environment {env}"));
    }
    let t2 = nets.pop().unwrap();
    let t1 = nets.pop().unwrap();
    let c2 = nets.pop().unwrap();
    let c1 = nets.pop().unwrap();
    let agent = SacAgent::from_parts(config, actor, [c1, c2], [t1, t2], log_alpha, AdamState { m, v, step })
        .map_err(|e| e.to_string())?;
    Ok(AgentFile { env, algo, latent_scale, agent, buffer_len })
}

pub fn save_agent(path: &Path, a: &AgentFile) -> CliResult<()> {
    write_atomic(path, &encode_agent(a))
}

pub fn load_agent(path: &Path) -> CliResult<AgentFile> {
    decode_agent(&read_file(path)?).map_err(fmt_err(path))
}

/// Files of one training run.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunDir { root: root.into() }
    }

    pub fn agent(&self) -> PathBuf {
        self.root.join("agent.ckpt")
    }

    pub fn codec(&self) -> PathBuf {
        self.root.join("codec.ckpt")
    }

    pub fn disc(&self) -> PathBuf {
        self.root.join("disc.ckpt")
    }

    pub fn curve(&self) -> PathBuf {
        self.root.join("curve.csv")
    }

    pub fn diagnostics(&self) -> PathBuf {
        self.root.join("diagnostics.txt")
    }

    /// Actor plus, for latent algorithms, the run's codec.
    pub fn load_policy(&self) -> CliResult<(EnvId, PolicyBundle)> {
        let a = load_agent(&self.agent())?;
        let codec = if a.algo.uses_codec() {
            let path = self.codec();
            let (env, c) = load_codec(&path)?;
            if env != a.env {
                return Err(CliError::format(path, format!("codec belongs to {env}, agent to {}", a.env)));
            }
            if c.latent_dim() != a.agent.control_dim() {
                return Err(CliError::format(path, "codec latent dimension does not match the actor"));
            }
            Some(c)
        } else {
            None
        };
        let high = Env::new(a.env).spec().action_high.clone();
        let bundle = PolicyBundle { actor: a.agent.actor().clone(), codec, latent_scale: a.latent_scale, action_high: high };
        Ok((a.env, bundle))
    }

    /// Discriminator input kind that fits the run's algorithm.
    pub fn expected_disc_input(algo: Algo, latent_dim: usize, action_dim: usize) -> InputKind {
        if algo.uses_codec() {
            InputKind::Latent(latent_dim)
        } else {
            InputKind::Raw(action_dim)
        }
    }
}
