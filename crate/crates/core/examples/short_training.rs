// A short cooperative-navigation run with the distributional estimator,
// printing each evaluation record.
//
// ```bash
// cargo run --release --example short_training -- 400
// ```

use dremarl::trainer::{train, MetricRecord};
use dremarl::uncertainty::RewardSettingKind;
use dremarl::{EstimatorKind, RunConfig};

pub fn run_example(cfg: &RunConfig) -> dremarl::Result<Vec<MetricRecord>> {
    let outcome = train(cfg, |rec, elapsed| {
        println!(
            "episode {:>5}  eval {:>9.2} +/- {:<7.2} critic {:>8.4}  ({:.1}s)",
            rec.episode,
            rec.eval_mean_reward,
            rec.eval_stderr,
            rec.critic_loss.unwrap_or(f64::NAN),
            elapsed.as_secs_f64()
        );
        Ok(())
    })?;
    println!("{} parameter tensors in the checkpoint", outcome.checkpoint.params.len());
    Ok(outcome.records)
}

fn main() -> dremarl::Result<()> {
    let episodes = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(400);
    let cfg = RunConfig {
        estimator: EstimatorKind::Dre,
        reward_setting: RewardSettingKind::AcDist,
        episodes,
        ..Default::default()
    };
    run_example(&cfg).map(|_| ())
}
