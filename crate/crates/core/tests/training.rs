use lapal_core::codec::{train_codec, ActionCodec};
use lapal_core::config::{Algo, CvaeConfig, Preset, RunConfig};
use lapal_core::env::{collect_demos, DemoBuffer, Env, EnvId};
use lapal_core::rng::{stream, StreamId};
use lapal_core::train::{run_ground_truth, run_training, transfer_policy, RunOutput};
use lapal_core::Error;

fn tiny(algo: Algo, env: EnvId) -> RunConfig {
    let mut c = RunConfig::preset(Preset::Desk, algo, env);
    c.total_env_steps = 400;
    c.steps_per_iteration = 200;
    c.eval_every = 200;
    c.eval_episodes = 2;
    c.disc_updates_per_iteration = 20;
    c.gen_updates_per_iteration = 40;
    c.divergence_check = false;
    c.sac.actor_hidden = vec![16, 16];
    c.sac.critic_hidden = vec![16, 16];
    c.sac.batch_size = 32;
    c.disc.hidden = vec![16];
    c.disc.batch_size = 32;
    c
}

fn setup(id: EnvId, latent: usize) -> (DemoBuffer, ActionCodec) {
    let env = Env::new(id);
    let demos = collect_demos(&env, 8, 0).unwrap();
    let cfg = CvaeConfig { latent_dim: latent, hidden: vec![16, 16], epochs: 40, ..CvaeConfig::default() };
    let (codec, _) = train_codec(&demos, env.spec(), &cfg, 0).unwrap();
    (demos, codec)
}

fn params(o: &RunOutput) -> Vec<f64> {
    let mut v = o.agent.actor().params().values().to_vec();
    v.extend_from_slice(o.disc.as_ref().unwrap().net().params().values());
    v
}

#[test]
fn runs_are_reproducible_per_seed() {
    let (demos, codec) = setup(EnvId::arm(3), 2);
    let cfg = tiny(Algo::LapalAgnostic, EnvId::arm(3));
    let a = run_training(&cfg, &demos, Some(codec.clone()), 4).unwrap();
    let b = run_training(&cfg, &demos, Some(codec.clone()), 4).unwrap();
    let c = run_training(&cfg, &demos, Some(codec), 5).unwrap();
    assert_eq!(a.curve, b.curve);
    assert_eq!(params(&a), params(&b));
    assert_ne!(params(&a), params(&c));
    assert_eq!(a.curve.rows.len(), 2);
    assert_eq!(a.env_steps, 400);
}

#[test]
fn agnostic_training_leaves_codec_and_demos_untouched() {
    let (demos, codec) = setup(EnvId::arm(3), 2);
    let before = demos.clone();
    let out = run_training(&tiny(Algo::LapalAgnostic, EnvId::arm(3)), &demos, Some(codec.clone()), 0).unwrap();
    let after = out.codec.unwrap();
    assert!(after.is_frozen());
    assert_eq!(after.encoder().params().values(), codec.encoder().params().values());
    assert_eq!(after.decoder().params().values(), codec.decoder().params().values());
    assert_eq!(demos, before);
}

#[test]
fn aware_training_moves_the_codec() {
    let (demos, codec) = setup(EnvId::arm(3), 2);
    let out = run_training(&tiny(Algo::LapalAware, EnvId::arm(3)), &demos, Some(codec.clone()), 0).unwrap();
    let after = out.codec.unwrap();
    assert_ne!(after.encoder().params().values(), codec.encoder().params().values());
    assert_ne!(after.decoder().params().values(), codec.decoder().params().values());
    assert!(out.curve.rows.iter().all(|r| r.recon_mse.is_some_and(f64::is_finite)));
}

#[test]
fn sampled_encoding_changes_the_discriminator_inputs() {
    let (demos, codec) = setup(EnvId::arm(3), 2);
    let cfg = tiny(Algo::LapalAgnostic, EnvId::arm(3));
    let mean = run_training(&cfg, &demos, Some(codec.clone()), 0).unwrap();
    let env = Env::new(EnvId::arm(3));
    let sampled_cfg = CvaeConfig { sampled_encoding: true, ..codec.config().clone() };
    let sampled_codec = ActionCodec::from_parts(env.spec(), sampled_cfg, codec.encoder().clone(), codec.decoder().clone()).unwrap();
    let sampled = run_training(&cfg, &demos, Some(sampled_codec.clone()), 0).unwrap();
    assert_ne!(params(&mean), params(&sampled));
    let aware = tiny(Algo::LapalAware, EnvId::arm(3));
    assert!(matches!(run_training(&aware, &demos, Some(sampled_codec), 0), Err(Error::Config(_))));
}

#[test]
fn ground_truth_runs_have_no_discriminator() {
    let out = run_ground_truth(&tiny(Algo::LapalAgnostic, EnvId::PointMass), 0).unwrap();
    assert!(out.disc.is_none());
    assert!(out.codec.is_none());
    assert_eq!(out.agent.control_dim(), 2);
}

#[test]
fn transfer_keeps_the_actor_and_swaps_the_decoder() {
    let (demos, codec) = setup(EnvId::arm(3), 2);
    let out = run_training(&tiny(Algo::LapalAgnostic, EnvId::arm(3)), &demos, Some(codec.clone()), 0).unwrap();
    let source = out.policy(3.0, &Env::new(EnvId::arm(3)).spec().action_high);
    let target = collect_demos(&Env::new(EnvId::perturbed_arm(3)), 8, 1).unwrap();
    let (moved, report) = transfer_policy(&source, &target, codec.config(), 0).unwrap();
    assert_eq!(moved.actor, source.actor);
    assert!(report.heldout_recon.is_finite());
    assert_ne!(moved.codec.as_ref().unwrap().decoder().params().values(), codec.decoder().params().values());

    let wrong = CvaeConfig { latent_dim: 3, ..codec.config().clone() };
    assert!(transfer_policy(&source, &target, &wrong, 0).is_err());
    let gail = run_training(&tiny(Algo::Gail, EnvId::arm(3)), &demos, None, 0).unwrap();
    assert!(transfer_policy(&gail.policy(1.0, &[1.0; 3]), &target, codec.config(), 0).is_err());
}

#[test]
fn untrained_codec_is_accepted_for_warm_start_free_runs() {
    let env = Env::new(EnvId::arm(3));
    let demos = collect_demos(&env, 4, 0).unwrap();
    let cfg = CvaeConfig { latent_dim: 2, hidden: vec![16], ..CvaeConfig::default() };
    let codec = ActionCodec::new(env.spec(), cfg, &mut stream(0, StreamId::Init)).unwrap();
    let out = run_training(&tiny(Algo::LapalAware, EnvId::arm(3)), &demos, Some(codec), 0).unwrap();
    assert!(out.abort.is_none());
}
