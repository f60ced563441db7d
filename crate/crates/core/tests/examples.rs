//! Every example doubles as a test, run through its `run_example` entry.

use dremarl::RunConfig;

macro_rules! example {
    ($name:ident, $file:literal) => {
        #[allow(dead_code)]
        mod $name {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }
    };
}

example!(autodiff_gradcheck, "autodiff_gradcheck.rs");
example!(particle_rollout, "particle_rollout.rs");
example!(reward_uncertainty, "reward_uncertainty.rs");
example!(branch_estimation, "branch_estimation.rs");
example!(reward_aggregation, "reward_aggregation.rs");
example!(short_training, "short_training.rs");
example!(sweep_and_normalize, "sweep_and_normalize.rs");

fn tiny() -> RunConfig {
    RunConfig {
        episodes: 24,
        batch_size: 32,
        hidden_units: 16,
        eval_interval: 12,
        eval_episodes: 2,
        ..Default::default()
    }
}

#[test]
fn autodiff_gradcheck_runs() {
    let worst = autodiff_gradcheck::run_example().expect("gradient check");
    assert!(worst < 1e-4, "{worst}");
}

#[test]
fn particle_rollout_runs() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traj.jsonl");
    particle_rollout::run_example(&path).expect("rollout");
    let file = std::fs::File::open(&path).unwrap();
    let steps = dremarl::env::read_trajectory(std::io::BufReader::new(file)).unwrap();
    assert_eq!(steps.len(), dremarl::env::EPISODE_LENGTH);
}

#[test]
fn reward_uncertainty_runs() {
    let rows = reward_uncertainty::run_example(20_000).expect("uncertainty");
    assert_eq!(rows.len(), 6);
}

#[test]
fn branch_estimation_runs() {
    let (mu, flat) = branch_estimation::run_example(300).expect("estimation");
    assert_eq!(mu.len(), 5);
    assert_eq!(flat.len(), 5);
}

#[test]
fn reward_aggregation_runs() {
    let rows = reward_aggregation::run_example().expect("aggregation");
    assert_eq!(rows.len(), 5);
}

#[test]
fn short_training_runs() {
    let recs = short_training::run_example(&tiny()).expect("training");
    assert_eq!(recs.last().unwrap().episode, 24);
}

#[test]
fn sweep_and_normalize_runs() {
    let dir = tempfile::tempdir().unwrap();
    let rows = sweep_and_normalize::run_example(&tiny(), dir.path()).expect("sweep");
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.seeds == 2 && r.normalized.is_some()));
}
