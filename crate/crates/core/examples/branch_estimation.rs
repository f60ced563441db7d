// Branch `k` pays `N(k, 0.1)`. The distributional estimator keeps one
// Gaussian per branch; the squared-error regressor sees only the
// observation and settles on the average.
//
// ```bash
// cargo run --release --example branch_estimation
// ```

use dremarl::estimator::{
    synthetic_branch_batch, DreEstimator, P2pEstimator, P2pInput, RegularizerCoeffs,
};
use dremarl::nn::{AdamConfig, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run_example(updates: usize) -> dremarl::Result<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let adam = AdamConfig::default();
    let coeffs = RegularizerCoeffs { alpha: 0.1, beta: 0.0 };
    let mut dre = DreEstimator::new(4, 5, vec![64, 64], 0.01, &mut rng)?;
    let mut p2p = P2pEstimator::new(4, 5, P2pInput::Obs, vec![64, 64], 0.01, &mut rng)?;
    for step in 0..updates {
        let batch = synthetic_branch_batch(&mut rng, 256, 4, 5, 0.1);
        let l = dre.update(&batch, coeffs, &adam)?;
        let m = p2p.update(&batch, &adam)?;
        if step % 500 == 0 {
            println!("step {step:>5}: dre loss {l:+.4}  p2p mse {m:.4}");
        }
    }
    let probe = Tensor::row(vec![0.3, -0.2, 0.7, 0.0]);
    let beliefs = dre.estimate(probe.values())?;
    let flat = p2p.branch_estimates(&probe)?.remove(0);
    for k in 0..5 {
        println!(
            "branch {k}: dre mu {:+.3} sigma {:.3} | p2p {:+.3}",
            beliefs.mean[k], beliefs.std[k], flat[k]
        );
    }
    Ok((beliefs.mean, flat))
}

fn main() -> dremarl::Result<()> {
    run_example(3000).map(|_| ())
}
