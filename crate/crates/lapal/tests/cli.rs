use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lapal::files::{self, RunDir};
use lapal::report;
use lapal_core::env::Env;

const SMALL: &str = r#"
[run]
total_env_steps = 400
steps_per_iteration = 100
disc_updates_per_iteration = 10
gen_updates_per_iteration = 20
eval_every = 200
eval_episodes = 4
divergence_check = false

[run.sac]
actor_hidden = [16, 16]
critic_hidden = [16, 16]
batch_size = 32

[run.disc]
hidden = [16]
batch_size = 32

[cvae]
latent_dim = 2
hidden = [16, 16]
epochs = 60
batch_size = 64
"#;

fn lapal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lapal")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = lapal(args);
    assert!(out.status.success(), "lapal {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn bytes(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    config: PathBuf,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let config = root.join("small.toml");
    std::fs::write(&config, SMALL).unwrap();
    Fixture { _dir: dir, root, config }
}

#[test]
fn gen_experts_defaults_and_determinism() {
    let f = fixture();
    let a = f.root.join("a/demos.bin");
    let b = f.root.join("b/demos.bin");
    ok(&["gen-experts", "--env", "arm6", "--seed", "3", "--out", p(&a)]);
    ok(&["gen-experts", "--env", "arm6", "--seed", "3", "--out", p(&b)]);
    assert_eq!(bytes(&a), bytes(&b));
    let demos = files::load_demos(&a).unwrap();
    assert_eq!(demos.n_episodes(), 64);
    let summary = String::from_utf8(bytes(&f.root.join("a/demos.summary.txt"))).unwrap();
    assert_eq!(report::summary_value(&summary, "episodes").as_deref(), Some("64"));
    assert_eq!(report::summary_value(&summary, "quality_gate").as_deref(), Some("passed"));

    let one = f.root.join("one.bin");
    ok(&["gen-experts", "--env", "pointmass", "--n", "1", "--out", p(&one)]);
    assert_eq!(files::load_demos(&one).unwrap().n_episodes(), 1);
}

#[test]
fn usage_errors_exit_with_2() {
    let f = fixture();
    let demos = f.root.join("demos.bin");
    ok(&["gen-experts", "--env", "pointmass", "--n", "4", "--out", p(&demos)]);
    let out = lapal(&["train", "--algo", "lapal-agnostic", "--demos", p(&demos), "--out", p(&f.root.join("r"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--codec"));
    assert!(!f.root.join("r/manifest.json").exists());

    assert_eq!(lapal(&["gen-experts", "--env", "arm99", "--out", p(&demos)]).status.code(), Some(2));
    assert_eq!(lapal(&["train", "--bogus"]).status.code(), Some(2));
    assert_eq!(lapal(&["eval", "--run", p(&f.root.join("missing"))]).status.code(), Some(4));
}

#[test]
fn codec_summary_matches_checkpoint() {
    let f = fixture();
    let demos = f.root.join("demos.bin");
    let codec = f.root.join("codec.ckpt");
    ok(&["gen-experts", "--env", "arm2", "--n", "20", "--out", p(&demos)]);
    ok(&["train-cvae", "--demos", p(&demos), "--config", p(&f.config), "--seed", "5", "--out", p(&codec)]);
    let summary = String::from_utf8(bytes(&f.root.join("codec.summary.txt"))).unwrap();
    let reported: f64 = report::summary_value(&summary, "heldout_recon_mse").unwrap().parse().unwrap();
    let recomputed = lapal::cli::recompute_heldout_mse(&codec, &demos, 5).unwrap();
    assert_eq!(reported, recomputed);
    let curve = String::from_utf8(bytes(&f.root.join("codec.curve.csv"))).unwrap();
    assert_eq!(curve.lines().count(), 61);

    let (_, c) = files::load_codec(&codec).unwrap();
    assert_eq!(c.latent_dim(), 2);

    let zero = f.root.join("zero.ckpt");
    ok(&["train-cvae", "--demos", p(&demos), "--config", p(&f.config), "--epochs", "0", "--out", p(&zero)]);
    let init = f.root.join("zero2.ckpt");
    ok(&["train-cvae", "--demos", p(&demos), "--config", p(&f.config), "--epochs", "0", "--out", p(&init)]);
    assert_eq!(bytes(&zero), bytes(&init));
}

#[test]
fn train_is_reproducible_and_checkpoints_reload() {
    let f = fixture();
    let demos = f.root.join("demos.bin");
    let codec = f.root.join("codec.ckpt");
    ok(&["gen-experts", "--env", "pointmass", "--n", "8", "--out", p(&demos)]);
    ok(&["train-cvae", "--demos", p(&demos), "--config", p(&f.config), "--out", p(&codec)]);
    let run = |out: &Path| {
        ok(&[
            "train", "--algo", "lapal-agnostic", "--demos", p(&demos), "--codec", p(&codec), "--config",
            p(&f.config), "--seeds", "0,1,2", "--quiet", "--out", p(out),
        ])
    };
    let a = f.root.join("run-a");
    run(&a);
    for seed in 0..3 {
        let dir = RunDir::new(a.join(format!("seed-{seed}")));
        for path in [dir.curve(), dir.agent(), dir.disc(), dir.codec()] {
            assert!(path.exists(), "{} missing", path.display());
        }
    }
    let agg = String::from_utf8(bytes(&a.join("aggregate.csv"))).unwrap();
    assert_eq!(agg.lines().count(), 3);
    assert!(agg.lines().skip(1).all(|l| l.split(',').nth(1) == Some("3")));

    let first = bytes(&a.join("aggregate.csv"));
    let manifest = bytes(&a.join("manifest.json"));
    let curve = bytes(&a.join("seed-1/curve.csv"));
    let agent = bytes(&a.join("seed-1/agent.ckpt"));
    run(&a);
    assert_eq!(bytes(&a.join("aggregate.csv")), first);
    assert_eq!(bytes(&a.join("manifest.json")), manifest);
    assert_eq!(bytes(&a.join("seed-1/curve.csv")), curve);
    assert_eq!(bytes(&a.join("seed-1/agent.ckpt")), agent);

    let m: serde_json::Value = serde_json::from_slice(&manifest).unwrap();
    assert_eq!(m["config"]["run"]["algo"], "lapal_agnostic");
    assert_eq!(m["config"]["run"]["total_env_steps"], 400);
    assert_eq!(m["runs"].as_array().unwrap().len(), 3);
    assert!(!String::from_utf8_lossy(&manifest).contains(p(&f.root)));

    // The last curve row was measured on the same evaluation seeds.
    let dir = RunDir::new(a.join("seed-2"));
    let (id, policy) = dir.load_policy().unwrap();
    let res = policy.evaluate(&Env::new(id), 4, 1_000_000).unwrap();
    let c = report::parse_curve_csv(&String::from_utf8(bytes(&dir.curve())).unwrap()).unwrap();
    assert_eq!(c.rows.last().unwrap().mean_eval_return, res.mean);

    let e1 = ok(&["eval", "--run", p(&dir.root)]);
    let e2 = ok(&["eval", "--run", p(&dir.root)]);
    assert_eq!(e1, e2);
    assert!(e1.contains("16 episodes"));
}

#[test]
fn gail_run_has_no_codec() {
    let f = fixture();
    let demos = f.root.join("demos.bin");
    ok(&["gen-experts", "--env", "pointmass", "--n", "4", "--out", p(&demos)]);
    let out = f.root.join("gail");
    ok(&["train", "--algo", "gail", "--demos", p(&demos), "--config", p(&f.config), "--seeds", "4", "--quiet", "--out", p(&out)]);
    let dir = RunDir::new(out.join("seed-4"));
    assert!(dir.disc().exists());
    assert!(!dir.codec().exists());
    ok(&["eval", "--run", p(&dir.root)]);
}

#[test]
fn transfer_prints_three_columns() {
    let f = fixture();
    let src = f.root.join("src.bin");
    let dst = f.root.join("dst.bin");
    let codec = f.root.join("codec.ckpt");
    ok(&["gen-experts", "--env", "arm2", "--n", "8", "--out", p(&src)]);
    ok(&["gen-experts", "--env", "arm2-perturbed", "--n", "8", "--out", p(&dst)]);
    ok(&["train-cvae", "--demos", p(&src), "--config", p(&f.config), "--out", p(&codec)]);
    let run = f.root.join("run");
    ok(&[
        "train", "--algo", "lapal-agnostic", "--demos", p(&src), "--codec", p(&codec), "--config", p(&f.config),
        "--seeds", "0", "--quiet", "--out", p(&run),
    ]);
    let out = f.root.join("moved");
    let text = ok(&["transfer", "--run", p(&run.join("seed-0")), "--demos", p(&dst), "--config", p(&f.config), "--out", p(&out)]);
    assert!(text.contains("| Source policy | Transferred policy | Expert policy |"), "{text}");
    let (env, _) = files::load_codec(&out.join("codec.ckpt")).unwrap();
    assert_eq!(env.to_string(), "arm2-perturbed");
    let again = ok(&["transfer", "--run", p(&run.join("seed-0")), "--demos", p(&dst), "--config", p(&f.config)]);
    assert_eq!(text, again);

    let gail = f.root.join("gail");
    ok(&["train", "--algo", "gail", "--demos", p(&src), "--config", p(&f.config), "--seeds", "0", "--quiet", "--out", p(&gail)]);
    let refused = lapal(&["transfer", "--run", p(&gail.join("seed-0")), "--demos", p(&dst)]);
    assert_eq!(refused.status.code(), Some(2));
}

#[test]
fn plot_is_deterministic_and_rejects_empty_input() {
    let f = fixture();
    let empty = f.root.join("empty.csv");
    std::fs::write(&empty, format!("{}\n", report::CURVE_HEADER)).unwrap();
    let svg = f.root.join("fig.svg");
    let out = lapal(&["plot", "--out", p(&svg), p(&empty)]);
    assert_eq!(out.status.code(), Some(4));
    assert!(!svg.exists());
    assert!(!f.root.join("fig.normalized.svg").exists());

    let csv = f.root.join("curve.csv");
    std::fs::write(
        &csv,
        format!("{}\n1000,-20,2,0.5,1.2,0.3,-4,0.5,\n2000,-10,1,0.9,1.3,0.2,-5,0.4,\n", report::CURVE_HEADER),
    )
    .unwrap();
    ok(&["plot", "--out", p(&svg), &format!("gail={}", p(&csv))]);
    let first = bytes(&svg);
    let norm = bytes(&f.root.join("fig.normalized.svg"));
    ok(&["plot", "--out", p(&svg), &format!("gail={}", p(&csv))]);
    assert_eq!(bytes(&svg), first);
    assert_eq!(bytes(&f.root.join("fig.normalized.svg")), norm);
    assert!(String::from_utf8(first).unwrap().contains(">gail<"));
}

#[test]
fn config_round_trips_through_the_cli() {
    let f = fixture();
    let text = ok(&["config", "--config", p(&f.config)]);
    let again = f.root.join("again.toml");
    std::fs::write(&again, &text).unwrap();
    assert_eq!(ok(&["config", "--config", p(&again)]), text);
    let paper = ok(&["config", "--preset", "paper"]);
    assert!(paper.contains("preset = \"paper\""));
}
