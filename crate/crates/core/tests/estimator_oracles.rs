mod common;

use std::f64::consts::PI;

use common::{mlp_forward, random_tensor};
use dremarl::estimator::{
    nll_loss, regularizer, sample_or_mean, DreEstimator, EstimatorBatch, GreEstimator, JointBatch,
    P2pEstimator, P2pInput, RegularizerCoeffs, RewardBeliefs, SampleMode, SIGMA_FLOOR,
};
use dremarl::nn::{AdamConfig, Graph, ParamStore, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn gauss_nll(mu: f64, sigma: f64, r: f64) -> f64 {
    -(-(r - mu).powi(2) / (2.0 * sigma * sigma)).exp().ln() + (sigma * (2.0 * PI).sqrt()).ln()
}

fn softplus(x: f64) -> f64 {
    (1.0 + x.exp()).ln()
}

fn params_equal(a: &ParamStore, b: &ParamStore) -> bool {
    a.iter().zip(b.iter()).all(|((na, ta), (nb, tb))| na == nb && ta == tb)
}

#[test]
fn nll_closed_form_at_unit_sigma() {
    let b = RewardBeliefs::new(vec![0.3, -2.0], vec![1.0, 1.0]).unwrap();
    let v = nll_loss(&b, 0, 0.3).unwrap();
    assert!((v - 0.5 * (2.0 * PI).ln()).abs() <= 1e-12);
    assert!(nll_loss(&b, 2, 0.0).is_err());
}

#[test]
fn beliefs_validate() {
    assert!(RewardBeliefs::new(vec![0.0], vec![0.0]).is_err());
    assert!(RewardBeliefs::new(vec![0.0, 1.0], vec![1.0]).is_err());
    assert!(RewardBeliefs::new(vec![f64::NAN], vec![1.0]).is_err());
}

#[test]
fn dre_heads_match_plain_forward() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let dre = DreEstimator::new(6, 5, vec![16, 16], 0.01, &mut rng).unwrap();
    let obs = random_tensor(&mut rng, 4, 6);
    let got = dre.estimate_batch(obs.clone()).unwrap();
    for (r, b) in got.iter().enumerate() {
        let raw = mlp_forward(dre.params(), "", 3, 0.01, obs.row_slice(r));
        for k in 0..5 {
            assert!((b.mean[k] - raw[k]).abs() < 1e-12);
            assert!((b.std[k] - softplus(raw[5 + k]).max(1e-4)).abs() < 1e-12);
        }
    }
}

#[test]
fn sigma_is_floored() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut dre = DreEstimator::new(3, 2, vec![4], 0.01, &mut rng).unwrap();
    dre.params_mut().set("l1.w", Tensor::zeros(&[4, 4])).unwrap();
    dre.params_mut().set("l1.b", Tensor::row(vec![0.0, 0.0, -50.0, -50.0])).unwrap();
    let b = dre.estimate(&[0.1, 0.2, 0.3]).unwrap();
    assert_eq!(b.std, vec![SIGMA_FLOOR; 2]);
}

#[test]
fn dre_batch_loss_matches_hand_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let dre = DreEstimator::new(4, 3, vec![8], 0.01, &mut rng).unwrap();
    let obs = random_tensor(&mut rng, 5, 4);
    let actions = vec![0, 2, 1, 1, 0];
    let rewards = vec![0.5, -1.0, 2.0, 0.0, 1.5];
    let coeffs = RegularizerCoeffs { alpha: 0.1, beta: 10.0 };
    let batch = EstimatorBatch::new(obs.clone(), actions.clone(), rewards.clone()).unwrap();
    let mut g = Graph::new();
    let l = dre.batch_loss(&mut g, &batch, coeffs).unwrap();
    let mut want = 0.0;
    for r in 0..5 {
        let out = mlp_forward(dre.params(), "", 2, 0.01, obs.row_slice(r));
        let (mu, raw) = out.split_at(3);
        let sigma: Vec<f64> = raw.iter().map(|&x| softplus(x).max(1e-4)).collect();
        let m = mu.iter().sum::<f64>() / 3.0;
        let var = mu.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 3.0;
        let k = actions[r];
        want += gauss_nll(mu[k], sigma[k], rewards[r]) + 0.1 * sigma.iter().sum::<f64>() + 10.0 * var;
    }
    want /= 5.0;
    assert!((g.value(l).item() - want).abs() < 1e-10);
}

#[test]
fn sample_mode_statistics() {
    let b = RewardBeliefs::new(vec![1.0, -3.0], vec![0.5, 2.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    assert_eq!(sample_or_mean(&b, SampleMode::Mean, &mut rng), vec![1.0, -3.0]);
    let n = 1_000_000;
    let (mut s, mut s2) = ([0.0; 2], [0.0; 2]);
    for _ in 0..n {
        let x = sample_or_mean(&b, SampleMode::Sample, &mut rng);
        for k in 0..2 {
            s[k] += x[k];
            s2[k] += x[k] * x[k];
        }
    }
    let nf = n as f64;
    for k in 0..2 {
        let mean = s[k] / nf;
        let sd = (s2[k] / nf - mean * mean).sqrt();
        let se_mean = b.std[k] / nf.sqrt();
        let se_sd = b.std[k] / (2.0 * nf).sqrt();
        assert!((mean - b.mean[k]).abs() < 5.0 * se_mean, "branch {k}: mean {mean}");
        assert!((sd - b.std[k]).abs() < 5.0 * se_sd, "branch {k}: sd {sd}");
    }
}

#[test]
fn zero_learning_rate_is_a_no_op() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let zero = AdamConfig::with_lr(0.0);
    let batch = EstimatorBatch::new(random_tensor(&mut rng, 6, 4), vec![0, 1, 2, 0, 1, 2], vec![1.0; 6]).unwrap();

    let mut dre = DreEstimator::new(4, 3, vec![8], 0.01, &mut rng).unwrap();
    let before = dre.params().clone();
    dre.update(&batch, RegularizerCoeffs::default(), &zero).unwrap();
    assert!(params_equal(&before, dre.params()));

    let mut p2p = P2pEstimator::new(4, 3, P2pInput::ObsAction, vec![8], 0.01, &mut rng).unwrap();
    let before = p2p.params().clone();
    p2p.update(&batch, &zero).unwrap();
    assert!(params_equal(&before, p2p.params()));

    let mut gre = GreEstimator::new(2, 2, 3, vec![8], 0.01, &mut rng).unwrap();
    let joint = JointBatch {
        joint_obs: random_tensor(&mut rng, 3, 4),
        actions: vec![vec![0, 1], vec![2, 2], vec![1, 0]],
        rewards: vec![vec![0.0, 1.0], vec![1.0, 1.0], vec![2.0, 0.0]],
    };
    let before = gre.params().clone();
    gre.update(&joint, RegularizerCoeffs::default(), &zero).unwrap();
    assert!(params_equal(&before, gre.params()));
}

#[test]
fn dre_learns_a_noisy_constant() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut dre = DreEstimator::new(3, 4, vec![32, 32], 0.01, &mut rng).unwrap();
    let noise = Normal::new(2.0, 0.5).unwrap();
    let adam = AdamConfig::default();
    for _ in 0..2500 {
        let obs = random_tensor(&mut rng, 128, 3);
        let actions: Vec<usize> = (0..128).map(|_| rng.random_range(0..4)).collect();
        let rewards: Vec<f64> = (0..128).map(|_| noise.sample(&mut rng)).collect();
        let batch = EstimatorBatch::new(obs, actions, rewards).unwrap();
        dre.update(&batch, RegularizerCoeffs::NONE, &adam).unwrap();
    }
    let b = dre.estimate(&[0.1, -0.4, 0.6]).unwrap();
    for k in 0..4 {
        assert!((b.mean[k] - 2.0).abs() < 0.1, "{:?}", b.mean);
        assert!((b.std[k] - 0.5).abs() < 0.1, "{:?}", b.std);
    }
}

#[test]
fn p2p_learns_a_constant_target() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut p2p = P2pEstimator::new(3, 5, P2pInput::Obs, vec![32, 32], 0.01, &mut rng).unwrap();
    let adam = AdamConfig::default();
    for _ in 0..1500 {
        let obs = random_tensor(&mut rng, 64, 3);
        let actions: Vec<usize> = (0..64).map(|_| rng.random_range(0..5)).collect();
        let batch = EstimatorBatch::new(obs, actions, vec![-1.25; 64]).unwrap();
        p2p.update(&batch, &adam).unwrap();
    }
    let probe = random_tensor(&mut rng, 16, 3);
    for row in p2p.branch_estimates(&probe).unwrap() {
        assert!(row.iter().all(|&v| (v + 1.25).abs() < 0.05), "{row:?}");
    }
}

#[test]
fn p2p_with_action_input_encodes_the_branch() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let p2p = P2pEstimator::new(2, 3, P2pInput::ObsAction, vec![8], 0.01, &mut rng).unwrap();
    let obs = [0.3, -0.7];
    for k in 0..3 {
        let mut x = obs.to_vec();
        x.extend((0..3).map(|j| if j == k { 1.0 } else { 0.0 }));
        let want = mlp_forward(p2p.params(), "", 2, 0.01, &x)[0];
        assert!((p2p.predict(&obs, k).unwrap() - want).abs() < 1e-12);
    }
}

#[test]
fn gre_learns_agent_specific_rewards() {
    // Agent i receives N(a_i + 2 i, 0.1) for its own action a_i.
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut gre = GreEstimator::new(2, 2, 3, vec![32, 32], 0.01, &mut rng).unwrap();
    let noise = Normal::new(0.0, 0.1).unwrap();
    let coeffs = RegularizerCoeffs { alpha: 0.1, beta: 0.0 };
    let adam = AdamConfig::default();
    let draw = |rng: &mut ChaCha8Rng, rows: usize| {
        let actions: Vec<Vec<usize>> = (0..rows).map(|_| vec![rng.random_range(0..3), rng.random_range(0..3)]).collect();
        let rewards = actions
            .iter()
            .map(|a| vec![a[0] as f64 + noise.sample(rng), a[1] as f64 + 2.0 + noise.sample(rng)])
            .collect();
        JointBatch {
            joint_obs: random_tensor(rng, rows, 4),
            actions,
            rewards,
        }
    };
    for _ in 0..2000 {
        let b = draw(&mut rng, 128);
        gre.update(&b, coeffs, &adam).unwrap();
    }
    let probe = draw(&mut rng, 32);
    let beliefs = gre.estimate_batch(&probe.joint_obs, &probe.actions).unwrap();
    for (row, acts) in beliefs.iter().zip(&probe.actions) {
        for i in 0..2 {
            let want = acts[i] as f64 + 2.0 * i as f64;
            assert!((row[i].mean[acts[i]] - want).abs() < 0.1, "agent {i}: {:?}", row[i].mean);
        }
    }
}

proptest! {
    #[test]
    fn nll_matches_log_density(mu in -5.0f64..5.0, sigma in 0.3f64..5.0, r in -5.0f64..5.0) {
        let b = RewardBeliefs::new(vec![mu], vec![sigma]).unwrap();
        let v = nll_loss(&b, 0, r).unwrap();
        prop_assert!((v - gauss_nll(mu, sigma, r)).abs() < 1e-9);
    }

    #[test]
    fn nll_is_minimized_at_the_reward(r in -5.0f64..5.0, sigma in 0.05f64..5.0, d in 1e-3f64..10.0, neg in any::<bool>()) {
        let d = if neg { -d } else { d };
        let at = nll_loss(&RewardBeliefs::new(vec![r], vec![sigma]).unwrap(), 0, r).unwrap();
        let off = nll_loss(&RewardBeliefs::new(vec![r + d], vec![sigma]).unwrap(), 0, r).unwrap();
        prop_assert!(at < off);
    }

    #[test]
    fn regularizer_matches_formula_and_ignores_order(
        pairs in prop::collection::vec((-10.0f64..10.0, 0.01f64..3.0), 1..8),
        alpha in 0.0f64..1.0,
        beta in 0.0f64..20.0,
        rot in 0usize..8,
    ) {
        let coeffs = RegularizerCoeffs { alpha, beta };
        let (mu, sd): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
        let k = mu.len() as f64;
        let m = mu.iter().sum::<f64>() / k;
        let want = alpha * sd.iter().sum::<f64>() + beta * mu.iter().map(|v| (v - m).powi(2)).sum::<f64>() / k;
        let got = regularizer(&RewardBeliefs::new(mu.clone(), sd.clone()).unwrap(), coeffs).unwrap();
        prop_assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0));

        let mut rotated = pairs.clone();
        rotated.rotate_left(rot % pairs.len());
        let (mu2, sd2): (Vec<f64>, Vec<f64>) = rotated.into_iter().unzip();
        let got2 = regularizer(&RewardBeliefs::new(mu2, sd2).unwrap(), coeffs).unwrap();
        prop_assert!((got - got2).abs() <= 1e-9 * got.abs().max(1.0));
    }
}
