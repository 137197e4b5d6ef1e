//! Text artifacts: learning-curve CSVs, cross-seed aggregates, summaries and
//! the run manifest.

use std::fmt::Write as _;

use lapal_core::codec::CodecReport;
use lapal_core::env::{DemoBuffer, DemoReport, Env, MAX_EXPERT_FAILURE_RATE, REACH_TOLERANCE};
use lapal_core::train::{CurveRow, LearningCurve};
use serde::Serialize;

pub const CURVE_HEADER: &str =
    "env_steps,mean_eval_return,std_eval_return,normalized_return,disc_loss,critic_loss,actor_loss,alpha,recon_mse";
pub const AGGREGATE_HEADER: &str = "env_steps,n_seeds,mean_return,std_return,mean_normalized,std_normalized";

/// Shortest representation that parses back to the same value.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x}")
    }
}

pub fn curve_csv(curve: &LearningCurve) -> String {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for r in &curve.rows {
        let recon = r.recon_mse.map(num).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.env_steps,
            num(r.mean_eval_return),
            num(r.std_eval_return),
            num(r.normalized_return),
            num(r.disc_loss),
            num(r.critic_loss),
            num(r.actor_loss),
            num(r.alpha),
            recon
        );
    }
    out
}

fn field(s: &str) -> Result<f64, String> {
    if s == "nan" {
        return Ok(f64::NAN);
    }
    s.parse().map_err(|_| format!("{s:?} is not a number"))
}

pub fn parse_curve_csv(text: &str) -> Result<LearningCurve, String> {
    let mut lines = text.lines();
    if lines.next() != Some(CURVE_HEADER) {
        return Err("not a learning-curve CSV (unexpected header)".into());
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(format!("row {} has {} columns, expected 9", i + 1, f.len()));
        }
        rows.push(CurveRow {
            env_steps: f[0].parse().map_err(|_| format!("row {}: bad step count", i + 1))?,
            mean_eval_return: field(f[1])?,
            std_eval_return: field(f[2])?,
            normalized_return: field(f[3])?,
            disc_loss: field(f[4])?,
            critic_loss: field(f[5])?,
            actor_loss: field(f[6])?,
            alpha: field(f[7])?,
            recon_mse: if f[8].is_empty() { None } else { Some(field(f[8])?) },
        });
    }
    Ok(LearningCurve { rows })
}

/// One aggregate point across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub env_steps: usize,
    pub n_seeds: usize,
    pub mean_return: f64,
    pub std_return: f64,
    pub mean_normalized: f64,
    pub std_normalized: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, v.sqrt())
}

/// Mean and population std of the per-seed curves at every step any seed reached.
pub fn aggregate(curves: &[LearningCurve]) -> Vec<AggregateRow> {
    let mut steps: Vec<usize> = curves.iter().flat_map(|c| c.rows.iter().map(|r| r.env_steps)).collect();
    steps.sort_unstable();
    steps.dedup();
    steps
        .into_iter()
        .map(|s| {
            let at: Vec<&CurveRow> = curves.iter().filter_map(|c| c.rows.iter().find(|r| r.env_steps == s)).collect();
            let (mean_return, std_return) = mean_std(&at.iter().map(|r| r.mean_eval_return).collect::<Vec<_>>());
            let (mean_normalized, std_normalized) = mean_std(&at.iter().map(|r| r.normalized_return).collect::<Vec<_>>());
            AggregateRow { env_steps: s, n_seeds: at.len(), mean_return, std_return, mean_normalized, std_normalized }
        })
        .collect()
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from(AGGREGATE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.env_steps,
            r.n_seeds,
            num(r.mean_return),
            num(r.std_return),
            num(r.mean_normalized),
            num(r.std_normalized)
        );
    }
    out
}

/// Series for plotting: `(step, mean, std)` in raw and normalized units.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Series {
    pub raw: Vec<(f64, f64, f64)>,
    pub normalized: Vec<(f64, f64, f64)>,
}

/// Reads either a per-seed curve or an aggregate CSV.
pub fn parse_series(text: &str) -> Result<Series, String> {
    let header = text.lines().next().unwrap_or_default();
    if header == CURVE_HEADER {
        let c = parse_curve_csv(text)?;
        return Ok(Series {
            raw: c.rows.iter().map(|r| (r.env_steps as f64, r.mean_eval_return, r.std_eval_return)).collect(),
            normalized: c.rows.iter().map(|r| (r.env_steps as f64, r.normalized_return, 0.0)).collect(),
        });
    }
    if header == AGGREGATE_HEADER {
        let mut s = Series::default();
        for (i, line) in text.lines().skip(1).enumerate() {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(format!("row {} has {} columns, expected 6", i + 1, f.len()));
            }
            let x = field(f[0])?;
            s.raw.push((x, field(f[2])?, field(f[3])?));
            s.normalized.push((x, field(f[4])?, field(f[5])?));
        }
        return Ok(s);
    }
    Err("not a curve or aggregate CSV (unexpected header)".into())
}

pub fn demo_summary(env: &Env, demos: &DemoBuffer, report: &DemoReport, seed: u64) -> String {
    let mut out = String::new();
    let n = report.episode_returns.len();
    let mean = report.episode_returns.iter().sum::<f64>() / n.max(1) as f64;
    let allowed = (MAX_EXPERT_FAILURE_RATE * n as f64).floor() as usize;
    let _ = writeln!(out, "env {}", demos.env);
    let _ = writeln!(out, "episodes {n}");
    let _ = writeln!(out, "transitions {}", demos.len());
    let _ = writeln!(out, "seed {seed}");
    let _ = writeln!(out, "exploration_noise {}", num(env.demo_noise()));
    let _ = writeln!(out, "mean_return {}", num(mean));
    let _ = writeln!(
        out,
        "failures {} (episodes ending farther than {} from the goal; at most {allowed} allowed)",
        report.failures,
        num(REACH_TOLERANCE)
    );
    let _ = writeln!(out, "quality_gate {}", if report.passed { "passed" } else { "FAILED" });
    let _ = writeln!(out, "episode,return,final_distance");
    for (i, (r, d)) in report.episode_returns.iter().zip(&report.final_distances).enumerate() {
        let _ = writeln!(out, "{i},{},{}", num(*r), num(*d));
    }
    out
}

pub fn codec_curve_csv(report: &CodecReport) -> String {
    let mut out = String::from("epoch,loss,recon,kl,heldout_recon,heldout_kl\n");
    for e in &report.curve {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            e.epoch,
            num(e.loss),
            num(e.recon),
            num(e.kl),
            num(e.heldout_recon),
            num(e.heldout_kl)
        );
    }
    out
}

pub fn codec_summary(report: &CodecReport, env: &str, seed: u64, vacuous: bool) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "env {env}");
    let _ = writeln!(out, "seed {seed}");
    let _ = writeln!(out, "train_episodes {}", report.train_episodes.len());
    let _ = writeln!(out, "heldout_episodes {}", report.heldout_episodes.len());
    let _ = writeln!(out, "heldout_recon_mse {}", num(report.heldout_recon));
    let _ = writeln!(out, "heldout_kl {}", num(report.heldout_kl));
    let _ = writeln!(out, "baseline_mse {}", num(report.baseline_mse));
    let _ = writeln!(out, "heldout_action_power {}", num(report.heldout_action_power));
    if vacuous {
        let _ = writeln!(out, "warning latent dimension is not smaller than the action dimension");
    }
    out
}

/// Reads `key value` lines back from a summary.
pub fn summary_value(text: &str, key: &str) -> Option<String> {
    text.lines().find_map(|l| l.strip_prefix(key)?.strip_prefix(' ').map(|v| v.trim().to_string()))
}

#[derive(Debug, Serialize)]
pub struct ArtifactDigest {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub seed: u64,
    pub env_steps: usize,
    pub final_return: Option<f64>,
    pub final_normalized: Option<f64>,
    pub expert_return: f64,
    pub random_return: f64,
    pub aborted: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config: &'a crate::settings::TrainConfig,
    pub inputs: Vec<ArtifactDigest>,
    pub outputs: Vec<ArtifactDigest>,
    pub runs: Vec<RunRecord>,
}

impl Manifest<'_> {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest always serializes");
        s.push('\n');
        s
    }
}
