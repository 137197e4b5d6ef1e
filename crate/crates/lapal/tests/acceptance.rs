//! End-to-end acceptance suite. Prints one line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use lapal_core::adversary::{Discriminator, InputKind};
use lapal_core::codec::{train_codec, ActionCodec};
use lapal_core::config::{Algo, CvaeConfig, Preset, RunConfig, SacConfig};
use lapal_core::env::{collect_demos, DemoBuffer, Env, EnvId};
use lapal_core::gradcheck::{central_difference, relative_error};
use lapal_core::math;
use lapal_core::nn::{AdamConfig, Trace};
use lapal_core::oracle::{js, kl, optimal_gan_objective, pushforward, DiscreteDist};
use lapal_core::rng::{self, stream, StreamId};
use lapal_core::sac::{LatentMap, RawMap, SacAgent};
use lapal_core::train::{run_ground_truth, run_training, transfer_policy, LearningCurve, References, RunOutput};

const SEEDS: [u64; 3] = [0, 1, 2];
const EVAL_SEED: u64 = 1_000_000;
const EVAL_EPISODES: usize = 16;

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok { Ok(detail) } else { Err(detail) }
}

fn fmt_opt(x: Option<usize>) -> String {
    x.map_or("never".into(), |s| s.to_string())
}

fn codec_config(env: &Env) -> CvaeConfig {
    let mut c = CvaeConfig::preset(Preset::Desk);
    c.latent_dim = c.latent_dim.min(env.spec().action_dim);
    c
}

/// Demonstrations and a trained codec per environment, built once.
#[derive(Default)]
struct Cache {
    demos: BTreeMap<String, DemoBuffer>,
    codecs: BTreeMap<String, ActionCodec>,
    runs: BTreeMap<(String, &'static str, u64), RunOutput>,
}

impl Cache {
    fn demos(&mut self, id: EnvId) -> DemoBuffer {
        self.demos
            .entry(id.to_string())
            .or_insert_with(|| collect_demos(&Env::new(id), 64, 0).expect("expert demonstrations"))
            .clone()
    }

    fn codec(&mut self, id: EnvId) -> ActionCodec {
        let demos = self.demos(id);
        self.codecs
            .entry(id.to_string())
            .or_insert_with(|| {
                let env = Env::new(id);
                train_codec(&demos, env.spec(), &codec_config(&env), 0).expect("codec").0
            })
            .clone()
    }

    fn run(&mut self, id: EnvId, algo: Algo, seed: u64, steps: usize) -> &RunOutput {
        let key = (id.to_string(), algo.name(), seed);
        if !self.runs.contains_key(&key) {
            let demos = self.demos(id);
            let codec = algo.uses_codec().then(|| self.codec(id));
            let mut cfg = RunConfig::preset(Preset::Desk, algo, id);
            cfg.total_env_steps = steps;
            let t = Instant::now();
            let out = run_training(&cfg, &demos, codec, seed).expect("training run");
            eprintln!(
                "  [{id} {} seed {seed}: {steps} steps, final {:.3}, {:.0}s]",
                algo.name(),
                out.curve.final_normalized().unwrap_or(f64::NAN),
                t.elapsed().as_secs_f64()
            );
            self.runs.insert(key.clone(), out);
        }
        &self.runs[&key]
    }
}

fn gradient_fidelity() -> Verdict {
    let mut r = stream(100, StreamId::Test);
    let mut worst: [f64; 3] = [0.0; 3];
    let mut probes = [0usize; 3];

    // reconstruction + KL objective, both networks
    let env = Env::new(EnvId::arm(6));
    let (sd, ad) = (env.spec().state_dim, env.spec().action_dim);
    let cfg = CvaeConfig { latent_dim: 4, hidden: vec![16, 16], beta: 0.1, ..CvaeConfig::preset(Preset::Desk) };
    let mut codec = ActionCodec::new(env.spec(), cfg, &mut stream(101, StreamId::Init)).unwrap();
    let batch = 4;
    let mut s = vec![0.0; batch * sd];
    let mut a = vec![0.0; batch * ad];
    let mut eps = vec![0.0; batch * 4];
    for v in [&mut s, &mut a, &mut eps] {
        rng::fill_normal(&mut r, v);
    }
    codec.loss_and_grad(&s, &a, &eps, 1.0).unwrap();
    for net in 0..2 {
        let (mut values, grads) = if net == 0 {
            (codec.encoder().params().values().to_vec(), codec.encoder().params().grads().to_vec())
        } else {
            (codec.decoder().params().values().to_vec(), codec.decoder().params().grads().to_vec())
        };
        for _ in 0..60 {
            let i = rng::index(&mut r, values.len());
            let num = central_difference(&mut values, i, 1e-4, |v| {
                let mut c = codec.clone();
                let m = if net == 0 { c.encoder_mut() } else { c.decoder_mut() };
                m.unwrap().params_mut().set_values(v).unwrap();
                c.loss(&s, &a, &eps).unwrap().loss
            });
            worst[0] = worst[0].max(relative_error(grads[i], num));
            probes[0] += 1;
        }
    }

    // discriminator on encoded latents, through to the encoder
    let mut disc = Discriminator::new(sd, InputKind::Latent(4), &[16, 16], &mut stream(102, StreamId::Disc)).unwrap();
    let mut sa = vec![0.0; batch * sd];
    let mut aa = vec![0.0; batch * ad];
    rng::fill_normal(&mut r, &mut sa);
    rng::fill_normal(&mut r, &mut aa);
    let disc_loss = |d: &Discriminator, c: &ActionCodec| {
        let eu = c.encode_mean_batch(&s, &a, batch, &mut Trace::new()).unwrap();
        let au = c.encode_mean_batch(&sa, &aa, batch, &mut Trace::new()).unwrap();
        d.clone().loss_and_grad(&s, &eu, &sa, &au).unwrap().loss
    };
    let mut enc = codec.clone();
    enc.encoder_mut().unwrap().params_mut().zero_grad();
    let (mut te, mut ta) = (Trace::new(), Trace::new());
    let eu = enc.encode_mean_batch(&s, &a, batch, &mut te).unwrap();
    let au = enc.encode_mean_batch(&sa, &aa, batch, &mut ta).unwrap();
    let step = disc.loss_and_grad(&s, &eu, &sa, &au).unwrap();
    enc.encoder_mean_backward(&te, &step.expert_input_grad, true).unwrap();
    enc.encoder_mean_backward(&ta, &step.agent_input_grad, true).unwrap();
    let dg = disc.net().params().grads().to_vec();
    let mut dv = disc.net().params().values().to_vec();
    for _ in 0..60 {
        let i = rng::index(&mut r, dv.len());
        let num = central_difference(&mut dv, i, 1e-5, |v| {
            let mut d = disc.clone();
            d.net_mut().params_mut().set_values(v).unwrap();
            disc_loss(&d, &enc)
        });
        worst[1] = worst[1].max(relative_error(dg[i], num));
        probes[1] += 1;
    }
    let eg = enc.encoder().params().grads().to_vec();
    let mut ev = enc.encoder().params().values().to_vec();
    for _ in 0..60 {
        let i = rng::index(&mut r, ev.len());
        let num = central_difference(&mut ev, i, 1e-5, |v| {
            let mut c = enc.clone();
            c.encoder_mut().unwrap().params_mut().set_values(v).unwrap();
            disc_loss(&disc, &c)
        });
        worst[1] = worst[1].max(relative_error(eg[i], num));
        probes[1] += 1;
    }

    // actor objective, raw actions and decoded latents
    let sac = SacConfig { actor_hidden: vec![16, 16], critic_hidden: vec![16, 16], ..SacConfig::preset(Preset::Desk) };
    let high = env.spec().action_high.clone();
    let mut raw = SacAgent::new(sd, ad, ad, sac.clone(), &mut stream(103, StreamId::Init)).unwrap();
    let mut noise = vec![0.0; batch * ad];
    rng::fill_normal(&mut r, &mut noise);
    raw.actor_loss_and_grad(&s, &noise, batch, &mut RawMap::new(&high)).unwrap();
    let g = raw.actor().params().grads().to_vec();
    let mut v = raw.actor().params().values().to_vec();
    for _ in 0..60 {
        let i = rng::index(&mut r, v.len());
        let num = central_difference(&mut v, i, 1e-5, |x| {
            let mut p = raw.clone();
            p.actor_mut().params_mut().set_values(x).unwrap();
            p.actor_loss_and_grad(&s, &noise, batch, &mut RawMap::new(&high)).unwrap().loss
        });
        worst[2] = worst[2].max(relative_error(g[i], num));
        probes[2] += 1;
    }
    let mut lat = SacAgent::new(sd, 4, 4, sac, &mut stream(104, StreamId::Init)).unwrap();
    let mut dec = codec.clone();
    dec.decoder_mut().unwrap().params_mut().zero_grad();
    let mut zn = vec![0.0; batch * 4];
    rng::fill_normal(&mut r, &mut zn);
    lat.actor_loss_and_grad(&s, &zn, batch, &mut LatentMap::new(&mut dec, 3.0, false).training_decoder(true)).unwrap();
    let loss_at = |ag: &SacAgent, c: &ActionCodec| {
        let mut c = c.clone();
        ag.clone().actor_loss_and_grad(&s, &zn, batch, &mut LatentMap::new(&mut c, 3.0, false)).unwrap().loss
    };
    let g = lat.actor().params().grads().to_vec();
    let mut v = lat.actor().params().values().to_vec();
    for _ in 0..30 {
        let i = rng::index(&mut r, v.len());
        let num = central_difference(&mut v, i, 1e-5, |x| {
            let mut p = lat.clone();
            p.actor_mut().params_mut().set_values(x).unwrap();
            loss_at(&p, &dec)
        });
        worst[2] = worst[2].max(relative_error(g[i], num));
        probes[2] += 1;
    }
    let g = dec.decoder().params().grads().to_vec();
    let mut v = dec.decoder().params().values().to_vec();
    for _ in 0..30 {
        let i = rng::index(&mut r, v.len());
        let num = central_difference(&mut v, i, 1e-5, |x| {
            let mut c = dec.clone();
            c.decoder_mut().unwrap().params_mut().set_values(x).unwrap();
            loss_at(&lat, &c)
        });
        worst[2] = worst[2].max(relative_error(g[i], num));
        probes[2] += 1;
    }

    check(
        worst.iter().all(|w| *w < 1e-4) && probes.iter().all(|p| *p >= 100),
        format!(
            "max relative error cvae {:.1e} ({} probes), disc {:.1e} ({}), actor {:.1e} ({})",
            worst[0], probes[0], worst[1], probes[1], worst[2], probes[2]
        ),
    )
}

fn random_dist(r: &mut rng::Stream, n: usize) -> DiscreteDist {
    let w: Vec<f64> = (0..n).map(|_| if rng::uniform(r, 0.0, 1.0) < 0.1 { 0.0 } else { rng::uniform(r, 0.0, 1.0) }).collect();
    DiscreteDist::from_weights(&w).unwrap_or_else(|_| DiscreteDist::uniform(n).unwrap())
}

fn divergence_oracle() -> Verdict {
    let mut r = stream(200, StreamId::Test);
    let mut identity: f64 = 0.0;
    for _ in 0..1000 {
        let n = 2 + rng::index(&mut r, 15);
        let (p, q) = (random_dist(&mut r, n), random_dist(&mut r, n));
        let opt = optimal_gan_objective(&p, &q).unwrap();
        identity = identity.max((opt.j_star - (2.0 * js(&p, &q).unwrap() - 4f64.ln())).abs());
    }
    let mut violation: f64 = 0.0;
    for _ in 0..10_000 {
        let n = 2 + rng::index(&mut r, 15);
        let m = 1 + rng::index(&mut r, n);
        let (p, q) = (random_dist(&mut r, n), random_dist(&mut r, n));
        let map: Vec<usize> = (0..n).map(|_| rng::index(&mut r, m)).collect();
        let (pp, qq) = (pushforward(&p, &map, m).unwrap(), pushforward(&q, &map, m).unwrap());
        violation = violation.max(js(&pp, &qq).unwrap() - js(&p, &q).unwrap());
        if let (Ok(after), Ok(before)) = (kl(&pp, &qq), kl(&p, &q)) {
            if before.is_finite() {
                violation = violation.max(after - before);
            }
        }
    }
    check(
        identity < 1e-10 && violation <= 1e-12,
        format!("identity error {identity:.1e}, worst processing gain {violation:.1e}"),
    )
}

fn discriminator_optimum() -> Verdict {
    let pe = DiscreteDist::from_weights(&[0.05, 0.1, 0.2, 0.05, 0.15, 0.25, 0.1, 0.1]).unwrap();
    let pa = DiscreteDist::from_weights(&[0.2, 0.1, 0.05, 0.15, 0.05, 0.1, 0.25, 0.1]).unwrap();
    let opt = optimal_gan_objective(&pe, &pa).unwrap();
    let mut states = vec![0.0; 64];
    for i in 0..8 {
        states[i * 8 + i] = 1.0;
    }
    let u = vec![0.0; 8];
    let mut d = Discriminator::new(8, InputKind::Raw(1), &[32], &mut stream(300, StreamId::Disc)).unwrap();
    let cfg = AdamConfig::with_lr(1e-2);
    for _ in 0..3000 {
        d.weighted_loss_and_grad(&states, &u, pe.probs(), &states, &u, pa.probs()).unwrap();
        d.adam_step(&cfg).unwrap();
    }
    let worst = (0..8)
        .map(|i| (math::sigmoid(d.logit(&states[i * 8..i * 8 + 8], &[0.0]).unwrap()) - opt.d_star[i]).abs())
        .fold(0.0, f64::max);
    check(worst < 0.02, format!("max |D - D*| {worst:.4} over 8 support points"))
}

fn sac_sanity() -> Verdict {
    let mut hits = Vec::new();
    for seed in SEEDS {
        let mut cfg = RunConfig::preset(Preset::Desk, Algo::Gail, EnvId::PointMass);
        cfg.total_env_steps = SAC_STEPS;
        cfg.divergence_check = false;
        hits.push(ground_truth_reach(&cfg, seed, 0.95));
    }
    check(hits.iter().all(Option::is_some), format!("steps to 95% of expert per seed: {}", list(&hits)))
}

/// First evaluation step at or above `level` under the environment reward.
fn ground_truth_reach(cfg: &RunConfig, seed: u64, level: f64) -> Option<usize> {
    let t = Instant::now();
    let out = run_ground_truth(cfg, seed).expect("ground-truth run");
    let hit = out.curve.steps_to_reach(level);
    eprintln!("  [pointmass sac seed {seed}: reached at {}, {:.0}s]", fmt_opt(hit), t.elapsed().as_secs_f64());
    hit
}

fn list(v: &[Option<usize>]) -> String {
    v.iter().map(|x| fmt_opt(*x)).collect::<Vec<_>>().join(", ")
}

const SAC_STEPS: usize = 20_000;
const LOW_DIM_STEPS: usize = 30_000;
const ARM6_STEPS: usize = 20_000;
const ARM10_STEPS: usize = 25_000;

fn low_dim_imitation(cache: &mut Cache) -> Verdict {
    let mut parts = Vec::new();
    let mut ok = true;
    for id in [EnvId::PointMass, EnvId::arm(2)] {
        for algo in [Algo::Gail, Algo::LapalAgnostic] {
            let hits: Vec<Option<usize>> =
                SEEDS.iter().map(|&s| cache.run(id, algo, s, LOW_DIM_STEPS).curve.steps_to_reach(0.9)).collect();
            let n = hits.iter().filter(|h| h.is_some()).count();
            ok &= n >= 2;
            parts.push(format!("{id} {} {n}/3", algo.name()));
        }
    }
    check(ok, format!("seeds reaching 90% within {LOW_DIM_STEPS} steps: {}", parts.join(", ")))
}

fn high_dim_advantage(cache: &mut Cache) -> Verdict {
    let id = EnvId::arm(10);
    let mut wins = 0;
    let mut pairs = Vec::new();
    for seed in SEEDS {
        let lapal = cache.run(id, Algo::LapalAgnostic, seed, ARM10_STEPS).curve.steps_to_reach(0.8);
        // GAIL only has to be followed up to the step where the latent run got there.
        let gail = lapal.and_then(|l| cache.run(id, Algo::Gail, seed, l).curve.steps_to_reach(0.8));
        let win = match (lapal, gail) {
            (Some(l), Some(g)) => l < g,
            (Some(_), None) => true,
            _ => false,
        };
        wins += win as usize;
        pairs.push(format!("{}/{}", fmt_opt(lapal), if lapal.is_some() { fmt_opt(gail) } else { "-".into() }));
    }
    let finals = |cache: &mut Cache, algo| {
        SEEDS.iter().map(|&s| cache.run(id, algo, s, ARM10_STEPS).curve.final_normalized().unwrap_or(f64::NAN)).sum::<f64>()
            / SEEDS.len() as f64
    };
    let agnostic = finals(cache, Algo::LapalAgnostic);
    let aware = finals(cache, Algo::LapalAware);
    check(
        wins >= 2 && aware >= agnostic - 0.05,
        format!(
            "steps to 80% lapal/gail per seed: {} ({wins}/3 faster); final aware {aware:.3} vs agnostic {agnostic:.3}",
            pairs.join(", ")
        ),
    )
}

/// Largest drop below the running maximum after the first quarter of training.
fn worst_drop(curve: &LearningCurve, total: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let mut worst: f64 = 0.0;
    for row in &curve.rows {
        best = best.max(row.normalized_return);
        if 4 * row.env_steps > total {
            worst = worst.max(best - row.normalized_return);
        }
    }
    worst
}

fn stability(cache: &mut Cache) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for (id, steps) in [(EnvId::arm(6), ARM6_STEPS), (EnvId::arm(10), ARM10_STEPS)] {
        for algo in [Algo::LapalAgnostic, Algo::LapalAware] {
            let drops: Vec<f64> = SEEDS.iter().map(|&s| worst_drop(&cache.run(id, algo, s, steps).curve, steps)).collect();
            let n = drops.iter().filter(|d| **d <= 0.2).count();
            ok &= n >= 2;
            let shown: Vec<String> = drops.iter().map(|d| format!("{d:.2}")).collect();
            parts.push(format!("{id} {} [{}]", algo.name(), shown.join(" ")));
        }
    }
    check(ok, format!("worst drop below running max: {}", parts.join(", ")))
}

fn transfer(cache: &mut Cache) -> Verdict {
    let source = EnvId::arm(6);
    let target_env = Env::new(EnvId::perturbed_arm(6));
    let target_demos = collect_demos(&target_env, 64, 1).expect("target demonstrations");
    let refs = References::measure(&target_env, EVAL_EPISODES, EVAL_SEED).unwrap();
    let high = Env::new(source).spec().action_high.clone();
    let cfg = RunConfig::preset(Preset::Desk, Algo::LapalAgnostic, source);
    let mut direct = Vec::new();
    let mut moved = Vec::new();
    for seed in SEEDS {
        let out = cache.run(source, Algo::LapalAgnostic, seed, ARM6_STEPS);
        let policy = out.policy(cfg.latent_scale, &high);
        let d = policy.evaluate(&target_env, EVAL_EPISODES, EVAL_SEED).unwrap().mean;
        let ccfg = policy.codec.as_ref().unwrap().config().clone();
        let (t, _) = transfer_policy(&policy, &target_demos, &ccfg, seed).expect("transfer");
        let m = t.evaluate(&target_env, EVAL_EPISODES, EVAL_SEED).unwrap().mean;
        direct.push(refs.normalize(d));
        moved.push(refs.normalize(m));
    }
    let show = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    check(
        direct.iter().all(|d| *d < 0.3) && moved.iter().all(|m| *m >= 0.7),
        format!("normalized on target: direct [{}], transferred [{}]", show(&direct), show(&moved)),
    )
}

fn mode_boundary() -> Verdict {
    let id = EnvId::arm(6);
    let env = Env::new(id);
    let demos = collect_demos(&env, 8, 0).unwrap();
    let ccfg = CvaeConfig { hidden: vec![16, 16], epochs: 60, ..codec_config(&env) };
    let (codec, _) = train_codec(&demos, env.spec(), &ccfg, 0).unwrap();
    let base = |algo| {
        let mut c = RunConfig::preset(Preset::Desk, algo, id);
        c.steps_per_iteration = 200;
        c.eval_every = 200;
        c.eval_episodes = 2;
        c.disc_updates_per_iteration = 20;
        c.gen_updates_per_iteration = 40;
        c.sac.actor_hidden = vec![16, 16];
        c.sac.critic_hidden = vec![16, 16];
        c.sac.batch_size = 32;
        c.disc.hidden = vec![16];
        c.disc.batch_size = 32;
        c.encoder_lr = 0.0;
        c.decoder_lr = 0.0;
        c
    };
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    let snapshot = |o: &RunOutput| {
        let mut v = bits(o.agent.actor().params().values());
        for c in o.agent.critics().iter().chain(o.agent.targets()) {
            v.extend(bits(c.params().values()));
        }
        v.push(o.agent.log_alpha().to_bits());
        v.extend(bits(o.disc.as_ref().unwrap().net().params().values()));
        let c = o.codec.as_ref().unwrap();
        v.extend(bits(c.encoder().params().values()));
        v.extend(bits(c.decoder().params().values()));
        for r in &o.curve.rows {
            v.extend(bits(&[r.mean_eval_return, r.disc_loss, r.critic_loss, r.actor_loss, r.alpha]));
        }
        v
    };
    let mut same = 0;
    for iters in 1..=3 {
        let mut a = base(Algo::LapalAgnostic);
        let mut w = base(Algo::LapalAware);
        a.total_env_steps = iters * 200;
        w.total_env_steps = iters * 200;
        let oa = run_training(&a, &demos, Some(codec.clone()), 7).unwrap();
        let ow = run_training(&w, &demos, Some(codec.clone()), 7).unwrap();
        same += (snapshot(&oa) == snapshot(&ow)) as usize;
    }
    check(same == 3, format!("{same}/3 iteration prefixes bit-identical"))
}

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

fn snapshot_dir(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let work = root.join("work");
    std::fs::create_dir_all(&work).unwrap();
    std::fs::write(root.join("small.toml"), SMALL).unwrap();
    let cmds: Vec<Vec<&str>> = vec![
        vec!["gen-experts", "--env", "arm2", "--n", "8", "--out", "work/src.bin"],
        vec!["gen-experts", "--env", "arm2-perturbed", "--n", "8", "--out", "work/dst.bin"],
        vec!["train-cvae", "--demos", "work/src.bin", "--config", "small.toml", "--out", "work/codec.ckpt"],
        vec![
            "train", "--algo", "lapal-agnostic", "--demos", "work/src.bin", "--codec", "work/codec.ckpt", "--config",
            "small.toml", "--seeds", "0,1", "--quiet", "--out", "work/lapal",
        ],
        vec![
            "train", "--algo", "lapal-aware", "--demos", "work/src.bin", "--codec", "work/codec.ckpt", "--config",
            "small.toml", "--seeds", "0", "--quiet", "--out", "work/aware",
        ],
        vec!["train", "--algo", "gail", "--demos", "work/src.bin", "--config", "small.toml", "--seeds", "0", "--quiet", "--out", "work/gail"],
        vec!["eval", "--run", "work/lapal/seed-0"],
        vec!["transfer", "--run", "work/lapal/seed-0", "--demos", "work/dst.bin", "--config", "small.toml", "--out", "work/moved"],
        vec!["plot", "--out", "work/fig.svg", "gail=work/gail/aggregate.csv", "lapal=work/lapal/aggregate.csv"],
        vec!["config", "--preset", "paper"],
    ];
    let run_all = || {
        let mut stdout = Vec::new();
        for c in &cmds {
            let out = Command::new(env!("CARGO_BIN_EXE_lapal")).args(c).current_dir(root).output().unwrap();
            assert!(out.status.success(), "lapal {c:?}: {}", String::from_utf8_lossy(&out.stderr));
            stdout.push(out.stdout);
        }
        (stdout, snapshot_dir(&work))
    };
    let (out1, files1) = run_all();
    let (out2, files2) = run_all();
    let differing: Vec<&String> = files1.keys().filter(|k| files1.get(*k) != files2.get(*k)).collect();
    check(
        out1 == out2 && files1.len() == files2.len() && differing.is_empty(),
        format!("{} commands, {} output files, {} differ, stdout identical: {}", cmds.len(), files1.len(), differing.len(), out1 == out2),
    )
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |n: usize| filter.is_empty() || filter.iter().any(|f| f == &n.to_string());
    let mut cache = Cache::default();
    type Criterion = (usize, &'static str, Box<dyn Fn(&mut Cache) -> Verdict>);
    let criteria: Vec<Criterion> = vec![
        (1, "gradient fidelity", Box::new(|_| gradient_fidelity())),
        (2, "divergence oracle", Box::new(|_| divergence_oracle())),
        (3, "discriminator optimum", Box::new(|_| discriminator_optimum())),
        (4, "SAC sanity", Box::new(|_| sac_sanity())),
        (5, "low-dim imitation", Box::new(low_dim_imitation)),
        (6, "high-dim advantage", Box::new(high_dim_advantage)),
        (7, "stability", Box::new(stability)),
        (8, "transfer", Box::new(transfer)),
        (9, "mode boundary", Box::new(|_| mode_boundary())),
        (10, "determinism", Box::new(|_| determinism())),
    ];
    let mut failed = 0;
    for (n, name, f) in &criteria {
        if !wanted(*n) {
            continue;
        }
        let t = Instant::now();
        let verdict = f(&mut cache);
        let secs = t.elapsed().as_secs_f64();
        match verdict {
            Ok(d) => println!("criterion {n:2} {name}: PASS ({d}) [{secs:.0}s]"),
            Err(d) => {
                failed += 1;
                println!("criterion {n:2} {name}: FAIL ({d}) [{secs:.0}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
