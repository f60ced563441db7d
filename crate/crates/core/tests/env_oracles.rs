use dremarl::env::{Scenario, World, EPISODE_LENGTH, NUM_ACTIONS};
use dremarl::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Hand-written navigation reward: summed nearest-agent distance to each
/// landmark, plus one per other agent closer than two radii.
fn navigation_oracle(agents: &[[f64; 2]], landmarks: &[[f64; 2]]) -> Vec<f64> {
    let cover: f64 = landmarks
        .iter()
        .map(|&l| agents.iter().map(|&a| dist(a, l)).fold(f64::MAX, f64::min))
        .sum();
    (0..agents.len())
        .map(|i| {
            let hits = (0..agents.len()).filter(|&j| j != i && dist(agents[i], agents[j]) < 0.2).count();
            -cover - hits as f64
        })
        .collect()
}

#[test]
fn navigation_reward_by_hand() {
    let agents = vec![[0.0, 0.0], [0.1, 0.0], [1.0, 1.0]];
    let landmarks = vec![[0.0, 0.5], [1.0, 0.0], [-1.0, -1.0]];
    let mut w = World::from_layout(Scenario::Cn, 3, agents, landmarks).unwrap();
    let r = w.step(&[0, 0, 0]).unwrap();
    // Nearest distances 0.5, 0.9 and sqrt(2); agents 0 and 1 collide.
    let cover = 0.5 + 0.9 + 2f64.sqrt();
    let want = [-cover - 1.0, -cover - 1.0, -cover];
    for (a, b) in r.rewards.iter().zip(want) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
    assert!((r.team_reward - want.iter().sum::<f64>()).abs() < 1e-12);
}

#[test]
fn navigation_observation_layout() {
    let mut w = World::from_layout(
        Scenario::Cn,
        3,
        vec![[0.2, 0.3], [-0.5, 0.0], [0.0, 0.9]],
        vec![[1.0, 1.0], [0.0, 0.0], [-1.0, 0.5]],
    )
    .unwrap();
    w.step(&[1, 0, 0]).unwrap();
    // One step of +x acceleration: v = 0.1, x advances by 0.01.
    let o = &w.observations()[0];
    let want = [
        0.1, 0.0, 0.21, 0.3, 0.79, 0.7, -0.21, -0.3, -1.21, 0.2, -0.71, -0.3, -0.21, 0.6,
    ];
    assert_eq!(o.len(), Scenario::Cn.obs_width(3));
    for (a, b) in o.iter().zip(want) {
        assert!((a - b).abs() < 1e-12, "{o:?}");
    }
}

#[test]
fn reference_reward_tracks_partner_goal() {
    let mut w = World::from_layout(
        Scenario::Ref,
        2,
        vec![[0.0, 0.0], [0.5, 0.5]],
        vec![[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]],
    )
    .unwrap();
    w.set_goals(vec![2, 1]).unwrap();
    let r = w.step(&[0, 0]).unwrap();
    assert!((r.rewards[0] - -dist([0.5, 0.5], [0.0, 1.0])).abs() < 1e-12);
    assert!((r.rewards[1] - -dist([0.0, 0.0], [-1.0, -1.0])).abs() < 1e-12);
    // The own goal is one-hot at the end of the observation.
    let o = &w.observations()[0];
    assert_eq!(&o[o.len() - 3..], &[0.0, 0.0, 1.0]);
}

#[test]
fn treasure_pickup_then_delivery() {
    let agents = vec![
        [0.0, 0.0],
        [0.9, 0.9],
        [-0.9, 0.9],
        [0.05, 0.0],
        [0.5, -0.9],
        [-0.5, -0.9],
    ];
    let landmarks = vec![[0.0, 0.0], [0.9, -0.2], [-0.9, -0.2]];
    let mut w = World::from_layout(Scenario::Trea, 3, agents, landmarks).unwrap();
    let r1 = w.step(&[0; 6]).unwrap();
    assert_eq!(w.holding()[0], Some(0));
    assert!(r1.rewards.iter().all(|&r| r < 1.0), "no bonus before delivery");
    let r2 = w.step(&[0; 6]).unwrap();
    assert_eq!(w.holding()[0], None);
    assert!((r2.rewards[3] - (5.0 - 0.05)).abs() < 1e-12);
    assert!(r2.rewards[0] > 3.0);
    assert!(r2.rewards[1] < 1.0 && r2.rewards[4] < 1.0);
}

#[test]
fn episode_has_fixed_length() {
    let (mut w, _) = World::reset(Scenario::Cn, 3, 0).unwrap();
    for _ in 0..EPISODE_LENGTH {
        assert!(!w.is_done());
        w.step(&[0, 1, 2]).unwrap();
    }
    assert!(w.is_done());
    assert!(matches!(w.step(&[0, 0, 0]), Err(Error::EpisodeFinished(_))));
}

#[test]
fn rejects_bad_actions_and_counts() {
    let (mut w, _) = World::reset(Scenario::Cn, 3, 0).unwrap();
    assert!(matches!(w.step(&[0, 5, 0]), Err(Error::ActionOutOfRange { .. })));
    assert!(w.step(&[0, 0]).is_err());
    assert!(World::reset(Scenario::Ref, 3, 0).is_err());
    assert!(World::reset(Scenario::Cn, 4, 0).is_err());
}

/// Re-simulates a recorded random episode with hand-written damped
/// point-mass physics and compares every step.
#[test]
fn replay_matches_independent_physics() {
    for seed in 0..5u64 {
        let (mut w, _) = World::reset(Scenario::Cn, 3, seed).unwrap();
        let landmarks = w.landmarks().to_vec();
        let mut pos: Vec<[f64; 2]> = w.agents().iter().map(|a| a.pos).collect();
        let mut vel = vec![[0.0f64; 2]; 3];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        while !w.is_done() {
            let actions: Vec<usize> = (0..3).map(|_| rng.random_range(0..NUM_ACTIONS)).collect();
            let result = w.step(&actions).unwrap();
            for (i, &k) in actions.iter().enumerate() {
                let acc = [[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]][k];
                for d in 0..2 {
                    vel[i][d] = 0.75 * vel[i][d] + 0.1 * acc[d];
                    pos[i][d] += 0.1 * vel[i][d];
                }
            }
            let snap = w.snapshot(&actions, &result);
            for i in 0..3 {
                for d in 0..2 {
                    assert!((snap.positions[i][d] - pos[i][d]).abs() < 1e-12);
                    assert!((snap.velocities[i][d] - vel[i][d]).abs() < 1e-12);
                }
            }
            for (a, b) in result.rewards.iter().zip(navigation_oracle(&pos, &landmarks)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn team_reward_is_sum(seed in any::<u64>(), scenario in prop::sample::select(Scenario::ALL.to_vec())) {
        let q = scenario.supported_counts()[0];
        let (mut w, _) = World::reset(scenario, q, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        while !w.is_done() {
            let a: Vec<usize> = (0..w.num_agents()).map(|_| rng.random_range(0..NUM_ACTIONS)).collect();
            let r = w.step(&a).unwrap();
            prop_assert!((r.team_reward - r.rewards.iter().sum::<f64>()).abs() < 1e-12);
            prop_assert!(r.observations.iter().all(|o| o.len() == scenario.obs_width(q)));
        }
    }

    #[test]
    fn rewards_are_translation_invariant(
        seed in any::<u64>(),
        dx in -5.0f64..5.0,
        dy in -5.0f64..5.0,
        scenario in prop::sample::select(vec![Scenario::Cn, Scenario::Ref]),
    ) {
        let q = scenario.supported_counts()[0];
        let (w, _) = World::reset(scenario, q, seed).unwrap();
        let mut moved = w.clone();
        moved.translate([dx, dy]);
        let (a, b) = (w.scenario_reward(), moved.scenario_reward());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        // Everything after the absolute position is relative.
        for (o, p) in w.observations().iter().zip(moved.observations()) {
            for (x, y) in o[4..].iter().zip(&p[4..]) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn reset_is_deterministic(seed in any::<u64>()) {
        let (_, a) = World::reset(Scenario::Trea, 3, seed).unwrap();
        let (_, b) = World::reset(Scenario::Trea, 3, seed).unwrap();
        prop_assert_eq!(a, b);
    }
}
