//! Command-line surface.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use lapal_core::codec::{flatten_pairs, heldout_split, train_codec};
use lapal_core::config::{Algo, Preset};
use lapal_core::env::{rollout_expert, Env, EnvId};
use lapal_core::train::{run_training_with, transfer_policy, CurveRow, References, RewardSource, RunOutput};
use rayon::prelude::*;

use crate::binfmt::sha256_hex;
use crate::error::{CliError, CliResult};
use crate::files::{self, AgentFile, RunDir};
use crate::plot::{self, Line};
use crate::report::{self, ArtifactDigest, Manifest, RunRecord};
use crate::settings::TrainConfig;

#[derive(Debug, Parser)]
#[command(name = "lapal", version, about = "Latent-action adversarial imitation learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Roll out the scripted expert and write a demonstration file.
    GenExperts(GenExpertsArgs),
    /// Train the action autoencoder on a demonstration file.
    TrainCvae(TrainCvaeArgs),
    /// Adversarial imitation, one run per seed.
    Train(TrainArgs),
    /// Evaluate a trained policy.
    Eval(EvalArgs),
    /// Re-train the decoder of a latent policy on another environment's demonstrations.
    Transfer(TransferArgs),
    /// Learning-curve charts from curve or aggregate CSVs.
    Plot(PlotArgs),
    /// Print the resolved configuration.
    Config(ConfigArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PresetArg {
    Desk,
    Paper,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Desk => Preset::Desk,
            PresetArg::Paper => Preset::Paper,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AlgoArg {
    Gail,
    LapalAgnostic,
    LapalAware,
}

impl From<AlgoArg> for Algo {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Gail => Algo::Gail,
            AlgoArg::LapalAgnostic => Algo::LapalAgnostic,
            AlgoArg::LapalAware => Algo::LapalAware,
        }
    }
}

#[derive(Debug, Args)]
pub struct ConfigSource {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Defaults used for everything the file does not set.
    #[arg(long, value_enum)]
    pub preset: Option<PresetArg>,
}

impl ConfigSource {
    pub fn resolve(&self) -> CliResult<TrainConfig> {
        let fallback = self.preset.map(Preset::from).unwrap_or(Preset::Desk);
        let mut c = match &self.config {
            Some(p) => TrainConfig::load(p, fallback)?,
            None => TrainConfig::preset(fallback),
        };
        if let Some(p) = self.preset {
            if c.preset != p.into() && self.config.is_some() {
                return Err(CliError::Usage(format!(
                    "--preset {} conflicts with preset {} in the config file",
                    preset_name(p.into()),
                    preset_name(c.preset)
                )));
            }
            c.preset = p.into();
        }
        Ok(c)
    }
}

fn preset_name(p: Preset) -> &'static str {
    match p {
        Preset::Desk => "desk",
        Preset::Paper => "paper",
    }
}

#[derive(Debug, Args)]
pub struct GenExpertsArgs {
    #[arg(long)]
    pub env: String,
    /// Number of episodes.
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainCvaeArgs {
    #[arg(long)]
    pub demos: PathBuf,
    #[command(flatten)]
    pub source: ConfigSource,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub latent_dim: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Checkpoint path; the curve and summary are written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub algo: AlgoArg,
    #[arg(long)]
    pub demos: PathBuf,
    /// Codec checkpoint; required by the latent algorithms.
    #[arg(long)]
    pub codec: Option<PathBuf>,
    #[command(flatten)]
    pub source: ConfigSource,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Environment-step budget per run.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Do not print evaluation rows while training.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Run directory holding agent.ckpt (and codec.ckpt for latent policies).
    #[arg(long)]
    pub run: PathBuf,
    /// Evaluate on another environment with the same spaces.
    #[arg(long)]
    pub env: Option<String>,
    #[arg(long, default_value_t = 16)]
    pub episodes: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub eval_seed: u64,
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    /// Run directory of the source latent policy.
    #[arg(long)]
    pub run: PathBuf,
    /// Demonstrations from the target environment.
    #[arg(long)]
    pub demos: PathBuf,
    /// TOML file whose `[cvae]` section configures the new decoder.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 16)]
    pub episodes: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub eval_seed: u64,
    /// Directory for the target codec checkpoint and the result table.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Curve files as `LABEL=PATH` or `PATH`.
    #[arg(required = true)]
    pub curves: Vec<String>,
    #[arg(long, default_value = "Learning curves")]
    pub title: String,
    /// Output SVG; the normalized variant is written alongside as `*.normalized.svg`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    #[command(flatten)]
    pub source: ConfigSource,
}

/// `path` with its extension replaced by `ext`.
pub fn sidecar(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

fn parse_env(s: &str) -> CliResult<EnvId> {
    s.parse::<EnvId>().map_err(|e| CliError::Usage(e.to_string()))
}

fn basename(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

fn digest_of(p: &Path, name: String) -> CliResult<ArtifactDigest> {
    Ok(ArtifactDigest { file: name, sha256: sha256_hex(&files::read_file(p)?) })
}

fn ensure_dir(p: &Path) -> CliResult<()> {
    std::fs::create_dir_all(p).map_err(|e| CliError::io(p, e))
}

fn ensure_parent(p: &Path) -> CliResult<()> {
    match p.parent() {
        Some(d) if !d.as_os_str().is_empty() => ensure_dir(d),
        _ => Ok(()),
    }
}

pub fn run(cli: Cli, out: &mut dyn std::io::Write) -> CliResult<()> {
    match cli.command {
        Command::GenExperts(a) => gen_experts(a, out),
        Command::TrainCvae(a) => train_cvae(a, out),
        Command::Train(a) => train(a, out),
        Command::Eval(a) => eval(a, out),
        Command::Transfer(a) => transfer(a, out),
        Command::Plot(a) => plot_cmd(a, out),
        Command::Config(a) => {
            let c = a.source.resolve()?;
            write!(out, "{}", c.to_toml()).map_err(|e| CliError::io("<stdout>", e))
        }
    }
}

fn say(out: &mut dyn std::io::Write, text: &str) -> CliResult<()> {
    writeln!(out, "{text}").map_err(|e| CliError::io("<stdout>", e))
}

fn gen_experts(a: GenExpertsArgs, out: &mut dyn std::io::Write) -> CliResult<()> {
    let id = parse_env(&a.env)?;
    if a.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let env = Env::new(id);
    let demos = rollout_expert(&env, a.n, a.seed)?;
    let rep = demos.report(&env);
    ensure_parent(&a.out)?;
    let summary_path = sidecar(&a.out, "summary.txt");
    files::write_atomic(&summary_path, report::demo_summary(&env, &demos, &rep, a.seed).as_bytes())?;
    if !rep.passed {
        return Err(lapal_core::Error::QualityGate(format!(
            "{} of {} expert episodes missed the goal; see {}",
            rep.failures,
            a.n,
            summary_path.display()
        ))
        .into());
    }
    files::save_demos(&a.out, &demos)?;
    say(out, &format!("wrote {} episodes ({} transitions) of {id} to {}", a.n, demos.len(), a.out.display()))
}

fn train_cvae(a: TrainCvaeArgs, out: &mut dyn std::io::Write) -> CliResult<()> {
    let mut cfg = a.source.resolve()?;
    if let Some(v) = a.latent_dim {
        cfg.cvae.latent_dim = v;
    }
    if let Some(v) = a.epochs {
        cfg.cvae.epochs = v;
    }
    if let Some(v) = a.beta {
        cfg.cvae.beta = v;
    }
    let seed = a.seed.unwrap_or(cfg.codec_seed);
    let demos = files::load_demos(&a.demos)?;
    let env = Env::new(demos.env);
    let (codec, rep) = train_codec(&demos, env.spec(), &cfg.cvae, seed)?;
    ensure_parent(&a.out)?;
    files::save_codec(&a.out, demos.env, &codec)?;
    files::write_atomic(&sidecar(&a.out, "curve.csv"), report::codec_curve_csv(&rep).as_bytes())?;
    let env_name = demos.env.to_string();
    files::write_atomic(
        &sidecar(&a.out, "summary.txt"),
        report::codec_summary(&rep, &env_name, seed, codec.is_vacuous()).as_bytes(),
    )?;
    if codec.is_vacuous() {
        eprintln!("warning: latent dimension {} is not smaller than the action dimension", codec.latent_dim());
    }
    say(out, &format!("held-out reconstruction MSE {} (mean-action baseline {})", rep.heldout_recon, rep.baseline_mse))
}

/// Held-out reconstruction MSE of a codec, recomputed from its checkpoint.
pub fn recompute_heldout_mse(codec_path: &Path, demos_path: &Path, seed: u64) -> CliResult<f64> {
    let (_, codec) = files::load_codec(codec_path)?;
    let demos = files::load_demos(demos_path)?;
    let (_, held) = heldout_split(&demos, seed);
    let (s, a) = flatten_pairs(held.iter().flat_map(|&e| demos.episode(e).iter()));
    Ok(codec.reconstruction_mse(&s, &a)?)
}

fn diagnostics(out: &RunOutput, msg: &str) -> String {
    let mut d = format!("run aborted: {msg}\nenv_steps {}\n", out.env_steps);
    d.push_str(&format!("expert_return {}\nrandom_return {}\n", out.references.expert, out.references.random));
    d.push_str("last evaluations:\n");
    let rows = &out.curve.rows;
    let tail = &rows[rows.len().saturating_sub(5)..];
    d.push_str(&report::curve_csv(&lapal_core::train::LearningCurve { rows: tail.to_vec() }));
    d
}

fn train(a: TrainArgs, out: &mut dyn std::io::Write) -> CliResult<()> {
    let mut cfg = a.source.resolve()?;
    let algo = Algo::from(a.algo);
    cfg.run.algo = algo;
    if let Some(s) = a.seeds {
        cfg.seeds = s;
    }
    if let Some(s) = a.steps {
        cfg.run.total_env_steps = s;
    }
    if let Some(e) = a.eval_every {
        cfg.run.eval_every = e;
    }
    if let Some(o) = a.out {
        cfg.out_dir = o.to_string_lossy().into_owned();
    }
    if cfg.seeds.is_empty() {
        return Err(CliError::Usage("at least one seed is required".into()));
    }
    let codec = match (algo.uses_codec(), &a.codec) {
        (true, None) => return Err(CliError::Usage(format!("{} needs a codec checkpoint (--codec)", algo.name()))),
        (false, Some(_)) => return Err(CliError::Usage("gail does not use a codec; drop --codec".into())),
        (true, Some(p)) => Some(files::load_codec(p)?),
        (false, None) => None,
    };
    let demos = files::load_demos(&a.demos)?;
    cfg.run.env = demos.env;
    if let Some((env, c)) = &codec {
        if *env != demos.env {
            return Err(CliError::Usage(format!("codec was trained on {env}, demonstrations are from {}", demos.env)));
        }
        cfg.cvae = c.config().clone();
    }
    let root = PathBuf::from(&cfg.out_dir);
    ensure_dir(&root)?;

    let quiet = a.quiet;
    let results: Vec<CliResult<RunOutput>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let mut log = |r: &CurveRow| {
                if !quiet {
                    eprintln!(
                        "[{} seed {seed}] step {:>7} return {:>9.3} normalized {:>6.3}",
                        algo.name(),
                        r.env_steps,
                        r.mean_eval_return,
                        r.normalized_return
                    );
                }
            };
            let c = codec.as_ref().map(|(_, c)| c.clone());
            Ok(run_training_with(&cfg.run, Some(&demos), c, RewardSource::Adversarial, seed, &mut log)?)
        })
        .collect();

    let mut curves = Vec::new();
    let mut records = Vec::new();
    let mut aborted = Vec::new();
    for (&seed, res) in cfg.seeds.iter().zip(results) {
        let run = res?;
        let dir = RunDir::new(root.join(format!("seed-{seed}")));
        ensure_dir(&dir.root)?;
        files::write_atomic(&dir.curve(), report::curve_csv(&run.curve).as_bytes())?;
        let agent = AgentFile {
            env: demos.env,
            algo,
            latent_scale: cfg.run.latent_scale,
            agent: run.agent.clone(),
            buffer_len: run.env_steps,
        };
        files::save_agent(&dir.agent(), &agent)?;
        if let Some(d) = &run.disc {
            files::save_disc(&dir.disc(), demos.env, d)?;
        }
        if let Some(c) = &run.codec {
            files::save_codec(&dir.codec(), demos.env, c)?;
        }
        if let Some(msg) = &run.abort {
            files::write_atomic(&dir.diagnostics(), diagnostics(&run, msg).as_bytes())?;
            aborted.push(format!("seed {seed}: {msg}"));
        }
        let last = run.curve.rows.last();
        records.push(RunRecord {
            seed,
            env_steps: run.env_steps,
            final_return: last.map(|r| r.mean_eval_return),
            final_normalized: last.map(|r| r.normalized_return),
            expert_return: run.references.expert,
            random_return: run.references.random,
            aborted: run.abort.clone(),
        });
        curves.push(run.curve);
    }
    let agg = report::aggregate(&curves);
    let agg_path = root.join("aggregate.csv");
    files::write_atomic(&agg_path, report::aggregate_csv(&agg).as_bytes())?;

    let mut inputs = vec![digest_of(&a.demos, basename(&a.demos))?];
    if let Some(p) = &a.codec {
        inputs.push(digest_of(p, basename(p))?);
    }
    let mut outputs = vec![digest_of(&agg_path, "aggregate.csv".into())?];
    for &seed in &cfg.seeds {
        let dir = RunDir::new(root.join(format!("seed-{seed}")));
        for p in [dir.curve(), dir.agent(), dir.disc(), dir.codec(), dir.diagnostics()] {
            if p.exists() {
                outputs.push(digest_of(&p, format!("seed-{seed}/{}", basename(&p)))?);
            }
        }
    }
    let command = format!("train --algo {}", algo.name());
    let recorded = TrainConfig { out_dir: ".".into(), ..cfg.clone() };
    let manifest = Manifest {
        tool: "lapal",
        version: env!("CARGO_PKG_VERSION"),
        command: &command,
        config: &recorded,
        inputs,
        outputs,
        runs: records,
    };
    files::write_atomic(&root.join("manifest.json"), manifest.to_json().as_bytes())?;

    if let Some(r) = agg.last() {
        say(
            out,
            &format!(
                "{} on {}: final return {:.3} ± {:.3}, normalized {:.3} ± {:.3} over {} seeds",
                algo.name(),
                demos.env,
                r.mean_return,
                r.std_return,
                r.mean_normalized,
                r.std_normalized,
                r.n_seeds
            ),
        )?;
    }
    if !aborted.is_empty() {
        return Err(CliError::Aborted(format!("{} run(s) aborted ({})", aborted.len(), aborted.join("; "))));
    }
    Ok(())
}

fn eval(a: EvalArgs, out: &mut dyn std::io::Write) -> CliResult<()> {
    let dir = RunDir::new(&a.run);
    let (trained_on, policy) = dir.load_policy()?;
    let id = match &a.env {
        Some(e) => parse_env(e)?,
        None => trained_on,
    };
    let env = Env::new(id);
    let res = policy.evaluate(&env, a.episodes, a.eval_seed)?;
    let refs = References::measure(&env, a.episodes, a.eval_seed)?;
    say(
        out,
        &format!(
            "{id}: return {:.3} ± {:.3} over {} episodes, normalized {:.3} (expert {:.3}, random {:.3})",
            res.mean,
            res.std,
            a.episodes,
            refs.normalize(res.mean),
            refs.expert,
            refs.random
        ),
    )
}

fn transfer(a: TransferArgs, out: &mut dyn std::io::Write) -> CliResult<()> {
    let (source_env, source) = RunDir::new(&a.run).load_policy()?;
    let Some(source_codec) = &source.codec else {
        return Err(CliError::Usage("only latent policies can be transferred; the run has no codec".into()));
    };
    let mut cvae = source_codec.config().clone();
    if let Some(p) = &a.config {
        let c = TrainConfig::load(p, Preset::Desk)?;
        cvae = lapal_core::config::CvaeConfig { latent_dim: cvae.latent_dim, ..c.cvae };
    }
    let demos = files::load_demos(&a.demos)?;
    let target = Env::new(demos.env);
    if target.spec().state_dim != Env::new(source_env).spec().state_dim {
        return Err(CliError::Usage(format!("{source_env} and {} have different state spaces", demos.env)));
    }
    let (moved, rep) = transfer_policy(&source, &demos, &cvae, a.seed)?;
    let direct = source.evaluate(&target, a.episodes, a.eval_seed)?;
    let transferred = moved.evaluate(&target, a.episodes, a.eval_seed)?;
    let refs = References::measure(&target, a.episodes, a.eval_seed)?;

    let mut table = String::from("| | Source policy | Transferred policy | Expert policy |\n|---|---|---|---|\n");
    table.push_str(&format!(
        "| return | {:.3} ± {:.3} | {:.3} ± {:.3} | {:.3} |\n",
        direct.mean, direct.std, transferred.mean, transferred.std, refs.expert
    ));
    table.push_str(&format!(
        "| normalized | {:.3} | {:.3} | 1.000 |\n",
        refs.normalize(direct.mean),
        refs.normalize(transferred.mean)
    ));
    if let Some(dir) = &a.out {
        ensure_dir(dir)?;
        files::save_codec(&dir.join("codec.ckpt"), demos.env, moved.codec.as_ref().expect("transferred policy is latent"))?;
        files::write_atomic(&dir.join("transfer.md"), table.as_bytes())?;
        files::write_atomic(
            &dir.join("codec.summary.txt"),
            report::codec_summary(&rep, &demos.env.to_string(), a.seed, false).as_bytes(),
        )?;
    }
    write!(out, "{source_env} -> {} over {} episodes\n{table}", demos.env, a.episodes).map_err(|e| CliError::io("<stdout>", e))
}

fn plot_cmd(a: PlotArgs, out: &mut dyn std::io::Write) -> CliResult<()> {
    let mut raw = Vec::new();
    let mut norm = Vec::new();
    for spec in &a.curves {
        let (label, path) = match spec.split_once('=') {
            Some((l, p)) => (l.to_string(), PathBuf::from(p)),
            None => {
                let p = PathBuf::from(spec);
                let label = p
                    .parent()
                    .and_then(|d| d.file_name())
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| basename(&p));
                (label, p)
            }
        };
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let s = report::parse_series(&text).map_err(|m| CliError::format(&path, m))?;
        if s.raw.is_empty() {
            return Err(CliError::format(&path, "no data rows"));
        }
        raw.push(Line { label: label.clone(), points: s.raw });
        norm.push(Line { label, points: s.normalized });
    }
    let fail = |m: String| CliError::format(&a.out, m);
    let raw_svg = plot::render(&a.title, "evaluation return", &raw).map_err(fail)?;
    let norm_svg = plot::render(&a.title, "normalized return", &norm).map_err(fail)?;
    ensure_parent(&a.out)?;
    let norm_path = sidecar(&a.out, "normalized.svg");
    files::write_atomic(&a.out, raw_svg.as_bytes())?;
    files::write_atomic(&norm_path, norm_svg.as_bytes())?;
    say(out, &format!("wrote {} and {}", a.out.display(), norm_path.display()))
}
