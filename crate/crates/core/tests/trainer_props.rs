mod common;

use common::random_tensor;
use dremarl::env::{Scenario, World, EPISODE_LENGTH, NUM_ACTIONS};
use dremarl::nn::{entropy, AdamConfig, GatSpec, Graph, ParamStore, Tensor};
use dremarl::trainer::{
    clipped_surrogate, collect_episode, read_metrics, train, write_metrics, ActionRule, Actor, Checkpoint,
    Critic, ReplayBuffer, Trainer, Transition,
};
use dremarl::uncertainty::{RewardSetting, RewardSettingKind};
use dremarl::{EstimatorKind, RewardScope, RunConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small(estimator: EstimatorKind) -> RunConfig {
    RunConfig {
        estimator,
        episodes: 16,
        batch_size: 32,
        hidden_units: 16,
        eval_interval: 8,
        eval_episodes: 2,
        ..Default::default()
    }
}

fn actor(seed: u64) -> Actor {
    Actor::new(6, NUM_ACTIONS, vec![16, 16], 0.01, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn objective(a: &Actor, obs: &Tensor, actions: Vec<usize>, adv: Vec<f64>, eta: f64) -> f64 {
    let batch = a.batch(obs.clone(), actions, adv).unwrap();
    let mut g = Graph::new();
    let v = a.objective(&mut g, &batch, 0.2, eta).unwrap();
    g.value(v).item()
}

fn mean_entropy(a: &Actor, obs: &Tensor) -> f64 {
    let p = a.policy_batch(obs.clone()).unwrap();
    p.iter().map(|row| entropy(row)).sum::<f64>() / p.len() as f64
}

fn transition(tag: f64) -> Transition {
    Transition {
        obs: vec![vec![tag]],
        policies: vec![vec![1.0]],
        actions: vec![0],
        rewards: vec![tag],
        next_obs: vec![vec![tag]],
    }
}

fn same_params(a: &ParamStore, b: &ParamStore) -> bool {
    a.iter().zip(b.iter()).all(|(x, y)| x == y)
}

#[test]
fn clip_worked_example() {
    assert_eq!(clipped_surrogate(1.5, 1.0, 0.2), 1.2);
    assert_eq!(clipped_surrogate(0.5, 1.0, 0.2), 0.5);
    assert_eq!(clipped_surrogate(0.5, -1.0, 0.2), -0.8);
}

#[test]
fn unit_ratio_objective_is_mean_advantage_plus_entropy() {
    let a = actor(1);
    let obs = random_tensor(&mut ChaCha8Rng::seed_from_u64(2), 5, 6);
    let adv = vec![1.0, -0.5, 2.0, 0.0, -3.0];
    let got = objective(&a, &obs, vec![0, 1, 2, 3, 4], adv.clone(), 0.3);
    let want = adv.iter().sum::<f64>() / 5.0 + 0.3 * mean_entropy(&a, &obs);
    assert!((got - want).abs() < 1e-12);
}

#[test]
fn zero_advantage_leaves_only_entropy() {
    let mut a = actor(3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    // Make the target differ so the ratio is not 1.
    let shifted: Vec<(String, Tensor)> = a
        .params()
        .iter()
        .map(|(n, t)| (n.to_string(), Tensor::new(t.shape().to_vec(), t.values().iter().map(|v| v * 1.1).collect()).unwrap()))
        .collect();
    for (n, t) in shifted {
        a.target_mut().set(&n, t).unwrap();
    }
    let obs = random_tensor(&mut rng, 7, 6);
    let got = objective(&a, &obs, vec![0, 1, 2, 3, 4, 0, 1], vec![0.0; 7], 0.3);
    assert!((got - 0.3 * mean_entropy(&a, &obs)).abs() < 1e-12);
}

#[test]
fn uniform_policy_has_entropy_ln_k() {
    let mut a = actor(5);
    for (n, t) in a.params().clone().iter() {
        a.params_mut().set(n, Tensor::zeros(t.shape())).unwrap();
    }
    let obs = random_tensor(&mut ChaCha8Rng::seed_from_u64(6), 3, 6);
    for p in a.policy_batch(obs).unwrap() {
        assert!((entropy(&p) - (NUM_ACTIONS as f64).ln()).abs() < 1e-12);
    }
}

#[test]
fn zero_learning_rate_updates_are_no_ops() {
    let zero = AdamConfig::with_lr(0.0);
    let mut a = actor(7);
    let obs = random_tensor(&mut ChaCha8Rng::seed_from_u64(8), 4, 6);
    let before = a.params().clone();
    let batch = a.batch(obs, vec![0, 1, 2, 3], vec![1.0, -1.0, 0.5, 2.0]).unwrap();
    a.update(&batch, 0.2, 0.3, &zero).unwrap();
    assert!(same_params(&before, a.params()));

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut c = Critic::new(GatSpec { hidden: vec![16], ..GatSpec::new(6) }, &mut rng).unwrap();
    let before = c.params().clone();
    c.update(random_tensor(&mut rng, 6, 6), 3, &[1.0; 6], &zero).unwrap();
    assert!(same_params(&before, c.params()));
}

#[test]
fn critic_regresses_to_a_constant() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut c = Critic::new(GatSpec { hidden: vec![32, 32], ..GatSpec::new(6) }, &mut rng).unwrap();
    let nodes = random_tensor(&mut rng, 16 * 3, 6);
    // gamma = 0: the target is the mixed reward alone.
    let targets = vec![-2.5; 48];
    let adam = AdamConfig::default();
    for _ in 0..1500 {
        c.update(nodes.clone(), 3, &targets, &adam).unwrap();
    }
    for v in c.values(nodes, 3).unwrap() {
        assert!((v + 2.5).abs() < 0.05, "{v}");
    }
}

#[test]
fn soft_update_endpoints() {
    let mut a = actor(11);
    let snapshot = a.target().clone();
    let mut b = a.clone();
    b.soft_update(0.0).unwrap();
    assert!(same_params(&snapshot, b.target()));

    for (n, t) in a.params().clone().iter() {
        a.params_mut().set(n, Tensor::full(t.shape(), 1.0)).unwrap();
        a.target_mut().set(n, Tensor::zeros(t.shape())).unwrap();
    }
    let mut c = a.clone();
    c.soft_update(0.01).unwrap();
    assert!(c.target().iter().all(|(_, t)| t.values().iter().all(|&v| (v - 0.01).abs() < 1e-15)));
    a.soft_update(1.0).unwrap();
    assert!(same_params(a.params(), a.target()));
}

#[test]
fn refresh_keeps_the_newest_sixty_percent() {
    let mut buf = ReplayBuffer::new(1000).unwrap();
    buf.extend((0..250).map(|i| transition(i as f64)));
    assert_eq!(buf.refresh(0.4).unwrap(), 100);
    let tags: Vec<f64> = buf.iter().map(|t| t.rewards[0]).collect();
    assert_eq!(tags, (100..250).map(f64::from).collect::<Vec<_>>());
    assert!(buf.refresh(1.5).is_err());
}

#[test]
fn buffer_evicts_oldest_at_capacity() {
    let mut buf = ReplayBuffer::new(10).unwrap();
    buf.extend((0..25).map(|i| transition(i as f64)));
    assert_eq!(buf.len(), 10);
    assert_eq!(buf.iter().next().unwrap().rewards[0], 15.0);
    let s = buf.sample(&mut ChaCha8Rng::seed_from_u64(0), 64).unwrap();
    assert_eq!(s.len(), 64);
    assert!(ReplayBuffer::new(0).is_err());
}

#[test]
fn certain_policy_without_exploration_takes_argmax() {
    let width = Scenario::Cn.obs_width(3);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let actors: Vec<Actor> = (0..3)
        .map(|i| {
            let mut a = Actor::new(width, NUM_ACTIONS, vec![8], 0.01, &mut rng).unwrap();
            a.params_mut().set("l1.w", Tensor::zeros(&[8, 5])).unwrap();
            let mut bias = vec![0.0; 5];
            bias[(i + 2) % 5] = 40.0;
            a.params_mut().set("l1.b", Tensor::row(bias)).unwrap();
            a
        })
        .collect();
    let (world, _) = World::reset(Scenario::Cn, 3, 5).unwrap();
    let mut setting = RewardSetting::new(RewardSettingKind::Dete, 5, 0);
    let ep = collect_episode(world, &actors, &mut setting, RewardScope::Team, ActionRule::Explore(1.0), &mut rng).unwrap();
    assert_eq!(ep.transitions.len(), EPISODE_LENGTH);
    for t in &ep.transitions {
        assert_eq!(t.actions, vec![2, 3, 4]);
    }
}

#[test]
fn team_and_individual_scopes() {
    let width = Scenario::Cn.obs_width(3);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let actors: Vec<Actor> = (0..3)
        .map(|_| Actor::new(width, NUM_ACTIONS, vec![8], 0.01, &mut rng).unwrap())
        .collect();
    for scope in [RewardScope::Team, RewardScope::Individual] {
        let (world, _) = World::reset(Scenario::Cn, 3, 5).unwrap();
        let mut replay = world.clone();
        let mut setting = RewardSetting::new(RewardSettingKind::AcDist, 5, 1);
        let mut act_rng = ChaCha8Rng::seed_from_u64(14);
        let ep = collect_episode(world, &actors, &mut setting, scope, ActionRule::Explore(0.5), &mut act_rng).unwrap();
        let mut oracle = RewardSetting::new(RewardSettingKind::AcDist, 5, 1);
        let mut total = 0.0;
        for t in &ep.transitions {
            let step = replay.step(&t.actions).unwrap();
            let perturbed: Vec<f64> = step
                .rewards
                .iter()
                .zip(&t.actions)
                .map(|(&r, &a)| oracle.perturb(r, a).unwrap())
                .collect();
            let team: f64 = perturbed.iter().sum();
            total += team;
            match scope {
                RewardScope::Team => assert_eq!(t.rewards, vec![team; 3]),
                RewardScope::Individual => assert_eq!(t.rewards, perturbed),
            }
            assert_eq!(t.next_obs, step.observations);
        }
        assert!((ep.team_return - total).abs() < 1e-9);
    }
}

#[test]
fn smoke_run_fifty_episodes() {
    let cfg = RunConfig {
        episodes: 50,
        eval_interval: 25,
        batch_size: 128,
        ..Default::default()
    };
    let out = train(&cfg, |_, _| Ok(())).unwrap();
    let episodes: Vec<usize> = out.records.iter().map(|r| r.episode).collect();
    assert_eq!(episodes, vec![25, 50]);
    for r in &out.records {
        assert!(r.eval_mean_reward.is_finite() && r.eval_stderr.is_finite());
        assert!(r.critic_loss.unwrap().is_finite());
        assert!(r.actor_objective.unwrap().is_finite());
        assert!(r.estimator_loss.unwrap().is_finite());
    }
    assert!(out.checkpoint.params.values().all(|t| t.is_finite()));
}

#[test]
fn estimator_off_uses_raw_rewards() {
    let mut t = Trainer::new(small(EstimatorKind::None)).unwrap();
    t.collect(ActionRule::Explore(0.0)).unwrap();
    let batch: Vec<Transition> = t.buffer().iter().take(10).cloned().collect();
    let refs: Vec<&Transition> = batch.iter().collect();
    let shaped = t.shaped_rewards(&refs).unwrap();
    let raw: Vec<Vec<f64>> = batch.iter().map(|b| b.rewards.clone()).collect();
    assert_eq!(shaped.mixed, raw);
    assert_eq!(shaped.lumped, raw);
    let boot = t.bootstrap(&refs).unwrap();
    let targets = t.critic_targets(&refs).unwrap();
    let want: Vec<f64> = raw.concat().iter().zip(&boot).map(|(r, b)| r + b).collect();
    assert_eq!(targets, want);
    assert!(t.update_estimators(&refs).unwrap().is_none());
}

#[test]
fn estimator_off_ignores_the_aggregation_scheme() {
    let a = train(&small(EstimatorKind::None), |_, _| Ok(())).unwrap().records;
    let cfg = RunConfig {
        aggregation: dremarl::aggregation::AggregationScheme::MoMo,
        ..small(EstimatorKind::None)
    };
    let b = train(&cfg, |_, _| Ok(())).unwrap().records;
    assert_eq!(a, b);
}

#[test]
fn every_estimator_trains() {
    for kind in EstimatorKind::ALL {
        let recs = train(&small(kind), |_, _| Ok(())).unwrap().records;
        assert_eq!(recs.len(), 2, "{kind}");
        assert_eq!(recs[0].estimator_loss.is_some(), kind != EstimatorKind::None);
    }
}

#[test]
fn exploration_ramps_over_the_first_half() {
    let cfg = RunConfig::default();
    assert_eq!(cfg.exploration(0), 0.7);
    assert!((cfg.exploration(500) - 0.8).abs() < 1e-12);
    assert_eq!(cfg.exploration(1000), 0.9);
    assert_eq!(cfg.exploration(1999), 0.9);
}

#[test]
fn metrics_and_checkpoint_round_trip() {
    let out = train(&small(EstimatorKind::Dre), |_, _| Ok(())).unwrap();
    let mut buf = Vec::new();
    write_metrics(&mut buf, &out.records).unwrap();
    assert_eq!(read_metrics(buf.as_slice()).unwrap(), out.records);
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), out.records.len());

    let mut buf = Vec::new();
    out.checkpoint.write(&mut buf).unwrap();
    let back = Checkpoint::read(buf.as_slice()).unwrap();
    assert_eq!(back.params, out.checkpoint.params);
    assert!(back.params.keys().any(|k| k.starts_with("estimator2.")));
    assert!(back.params.keys().any(|k| k.starts_with("critic_target.")));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn clipping_is_pessimistic(u in 0.0f64..5.0, adv in -10.0f64..10.0, eps in 0.01f64..0.5) {
        let s = clipped_surrogate(u, adv, eps);
        prop_assert!(s <= u * adv + 1e-12);
        if adv > 0.0 && u > 1.0 + eps {
            prop_assert!((s - (1.0 + eps) * adv).abs() < 1e-12);
        }
    }

    #[test]
    fn entropy_is_non_negative(raw in prop::collection::vec(0.0f64..1.0, 1..8)) {
        let s: f64 = raw.iter().sum();
        prop_assume!(s > 0.0);
        let p: Vec<f64> = raw.iter().map(|v| v / s).collect();
        let h = entropy(&p);
        prop_assert!(h >= 0.0);
        prop_assert!(h <= (p.len() as f64).ln() + 1e-12);
    }
}
