//! Self-checks behind `dremarl check`: closed forms, finite differences,
//! Monte-Carlo statistics and short end-to-end runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aggregation::{build_up, lumped_reward, mixed_reward, LumpFn, MixFn, PolicyWeights};
use crate::config::{EstimatorKind, RunConfig};
use crate::error::Result;
use crate::estimator::{
    nll_loss, regularizer, synthetic_branch_batch, DreEstimator, P2pEstimator, P2pInput,
    RegularizerCoeffs, RewardBeliefs,
};
use crate::exp::{normalize_scores, OMEGA};
use crate::nn::{AdamConfig, GatSpec, Graph, ParamStore, Tensor, Var};
use crate::trainer::{train, Actor, Critic};
use crate::uncertainty::{RewardSetting, RewardSettingKind};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, r: Result<(bool, String)>) -> CheckResult {
    match r {
        Ok((passed, detail)) => CheckResult { name, passed, detail },
        Err(e) => CheckResult {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

/// Largest relative error between the tape gradient of `loss` and central
/// differences with step `h`, over every parameter element of `store`.
pub fn max_gradient_error<F>(store: &ParamStore, h: f64, loss: F) -> Result<f64>
where
    F: Fn(&mut Graph, &ParamStore) -> Result<Var>,
{
    let mut g = Graph::new();
    let l = loss(&mut g, store)?;
    let grads = g.backward(l)?;
    let eval = |s: &ParamStore| -> Result<f64> {
        let mut g = Graph::new();
        let l = loss(&mut g, s)?;
        Ok(g.value(l).item())
    };
    let mut probe = store.clone();
    let mut worst = 0.0f64;
    let names: Vec<String> = store.names().map(String::from).collect();
    for name in names {
        let base = store.get(&name).expect("listed").clone();
        let analytic = grads.get(&name).cloned().unwrap_or_else(|| Tensor::zeros(base.shape()));
        for j in 0..base.len() {
            let mut t = base.clone();
            t.values_mut()[j] += h;
            probe.set(&name, t.clone())?;
            let up = eval(&probe)?;
            t.values_mut()[j] -= 2.0 * h;
            probe.set(&name, t)?;
            let down = eval(&probe)?;
            probe.set(&name, base.clone())?;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic.values()[j];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let v = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::matrix(rows, cols, v).expect("sized")
}

fn check_aggregation() -> Result<(bool, String)> {
    let ok = build_up(&[1.0, 2.0, 3.0], 1, 9.0)? == vec![1.0, 9.0, 3.0]
        && mixed_reward(
            MixFn::Mo,
            &[vec![1.0, 3.0], vec![3.0, 5.0]],
            0,
            &PolicyWeights::new(vec![0.25, 0.75])?,
        )? == 3.5
        && lumped_reward(LumpFn::Smo, &[vec![2.0, 4.0, 6.0]], 0, 0.0)? == 4.0
        && lumped_reward(LumpFn::Mo, &[vec![0.0, 2.0], vec![4.0, 6.0]], 0, 0.0)? == 3.0
        && mixed_reward(MixFn::Ss, &[vec![1.0, 7.0, 3.0]], 0, &PolicyWeights::one_hot(3, 1)?)? == 7.0;
    Ok((ok, "worked examples".into()))
}

fn check_losses() -> Result<(bool, String)> {
    let b = RewardBeliefs::new(vec![0.3], vec![1.0])?;
    let nll = nll_loss(&b, 0, 0.3)?;
    let want = 0.5 * (2.0 * std::f64::consts::PI).ln();
    let reg = regularizer(&RewardBeliefs::new(vec![1.0; 5], vec![1.0; 5])?, RegularizerCoeffs::default())?;
    Ok((
        (nll - want).abs() <= 1e-12 && (reg - 0.5).abs() <= 1e-12,
        format!("nll {nll:.12}, regularizer {reg}"),
    ))
}

fn check_normalize() -> Result<(bool, String)> {
    let n = normalize_scores(&[-100.0, -50.0, 0.0], OMEGA)?;
    Ok((n.scores == vec![0.0, 5.0, 10.0], format!("{:?}", n.scores)))
}

fn check_uncertainty(draws: usize) -> Result<(bool, String)> {
    let mut dist = RewardSetting::new(RewardSettingKind::Dist, 5, 1);
    let mut ac = RewardSetting::new(RewardSettingKind::AcDist, 5, 2);
    let r = -2.0;
    let (mut s1, mut s2, mut a1) = (0.0, 0.0, 0.0);
    for _ in 0..draws {
        let x = dist.perturb(r, 0)?;
        s1 += x;
        s2 += x * x;
        a1 += ac.perturb(r, 3)?;
    }
    let n = draws as f64;
    let mean = s1 / n;
    let sd = (s2 / n - mean * mean).sqrt();
    let ac_mean = a1 / n;
    let se = 0.05 / n.sqrt();
    let ok = (mean - 1.05 * r).abs() < 5.0 * se
        && (sd - 0.05).abs() < 5.0 * 0.05 / (2.0 * n).sqrt()
        && (ac_mean - (r + 3.0)).abs() < 5.0 * 0.001 / n.sqrt();
    Ok((ok, format!("dist mean {mean:.5} sd {sd:.5}, ac-dist mean {ac_mean:.6}")))
}

fn check_gradients() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let actor = Actor::new(6, 5, vec![16, 16], 0.01, &mut rng)?;
    let obs = random_tensor(&mut rng, 4, 6);
    let mut other = actor.clone();
    for (name, t) in actor.params().iter() {
        let mut t = t.clone();
        t.values_mut().iter_mut().for_each(|v| *v += rng.random_range(-0.05..0.05));
        other.target_mut().set(name, t)?;
    }
    let batch = other.batch(obs.clone(), vec![0, 2, 4, 1], vec![0.7, -1.2, 0.4, 2.0])?;
    let actor_err = max_gradient_error(actor.params(), 1e-5, |g, s| {
        let mut a = actor.clone();
        *a.params_mut() = s.clone();
        a.objective(g, &batch, 0.2, 0.3)
    })?;

    let critic = Critic::new(
        GatSpec {
            hidden: vec![16, 16],
            ..GatSpec::new(6)
        },
        &mut rng,
    )?;
    let nodes = random_tensor(&mut rng, 6, 6);
    let targets: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
    let critic_err = max_gradient_error(critic.params(), 1e-5, |g, s| {
        let mut c = critic.clone();
        *c.params_mut() = s.clone();
        c.loss(g, nodes.clone(), 3, &targets)
    })?;

    let dre = DreEstimator::new(6, 5, vec![16, 16], 0.01, &mut rng)?;
    let eb = synthetic_branch_batch(&mut rng, 8, 6, 5, 0.5);
    let dre_err = max_gradient_error(dre.params(), 1e-5, |g, s| {
        let mut d = dre.clone();
        *d.params_mut() = s.clone();
        d.batch_loss(g, &eb, RegularizerCoeffs::default())
    })?;
    let worst = actor_err.max(critic_err).max(dre_err);
    Ok((
        worst < 1e-4,
        format!("actor {actor_err:.1e}, critic {critic_err:.1e}, dre {dre_err:.1e}"),
    ))
}

fn check_separation() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let adam = AdamConfig::default();
    let coeffs = RegularizerCoeffs {
        alpha: 0.1,
        beta: 0.0,
    };
    let mut dre = DreEstimator::new(4, 5, vec![64, 64], 0.01, &mut rng)?;
    let mut p2p = P2pEstimator::new(4, 5, P2pInput::Obs, vec![64, 64], 0.01, &mut rng)?;
    for _ in 0..3000 {
        let b = synthetic_branch_batch(&mut rng, 256, 4, 5, 0.1);
        dre.update(&b, coeffs, &adam)?;
        p2p.update(&b, &adam)?;
    }
    let probe = random_tensor(&mut rng, 64, 4);
    let beliefs = dre.estimate_batch(probe.clone())?;
    let dre_err = beliefs
        .iter()
        .flat_map(|b| b.mean.iter().enumerate().map(|(k, m)| (m - k as f64).abs()))
        .fold(0.0f64, f64::max);
    let p2p_res = p2p
        .branch_estimates(&probe)?
        .iter()
        .map(|row| row.iter().enumerate().map(|(k, v)| (v - k as f64).abs()).fold(0.0f64, f64::max))
        .fold(f64::INFINITY, f64::min);
    Ok((
        dre_err < 0.1 && p2p_res >= 0.5,
        format!("dre max |mu_k - k| {dre_err:.3}, p2p min worst-branch residual {p2p_res:.3}"),
    ))
}

fn check_determinism() -> Result<(bool, String)> {
    let cfg = RunConfig {
        episodes: 12,
        batch_size: 64,
        hidden_units: 16,
        eval_interval: 4,
        eval_episodes: 2,
        estimator: EstimatorKind::Dre,
        ..Default::default()
    };
    let a = train(&cfg, |_, _| Ok(()))?.records;
    let b = train(&cfg, |_, _| Ok(()))?.records;
    Ok((a == b, format!("{} records", a.len())))
}

/// Runs every check; `quick` skips the slower ones.
pub fn run_all(quick: bool) -> Vec<CheckResult> {
    let mut out = vec![
        outcome("aggregation algebra", check_aggregation()),
        outcome("estimator loss closed forms", check_losses()),
        outcome("normalized performance", check_normalize()),
        outcome(
            "uncertainty statistics",
            check_uncertainty(if quick { 100_000 } else { 1_000_000 }),
        ),
        outcome("gradients vs finite differences", check_gradients()),
        outcome("seeded determinism", check_determinism()),
    ];
    if !quick {
        out.push(outcome("one-to-many separation", check_separation()));
    }
    out
}
