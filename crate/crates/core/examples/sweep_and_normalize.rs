// A small estimator sweep over two seeds, the summary table it writes,
// and normalized scores.
//
// ```bash
// cargo run --release --example sweep_and_normalize -- /tmp/sweep
// ```

use std::path::{Path, PathBuf};

use dremarl::exp::{self, GridAxis, OMEGA};
use dremarl::RunConfig;

pub fn run_example(base: &RunConfig, out: &Path) -> dremarl::Result<Vec<exp::SummaryRow>> {
    let axis: GridAxis = "estimator=dre,p2p,none".parse()?;
    let configs = exp::expand_grid(base, &[axis])?;
    let outcome = exp::sweep(&configs, &[0, 1], out, exp::run_to_dir)?;
    for row in &outcome.summary {
        println!(
            "{:<36} mean {:>9.2} stderr {:>6.2} normalized {}",
            row.label,
            row.mean,
            row.stderr.unwrap_or(f64::NAN),
            row.normalized.map_or("-".into(), |v| format!("{v:.2}"))
        );
    }
    let means: Vec<f64> = outcome.summary.iter().map(|r| r.mean).collect();
    let scores = exp::normalize_scores(&means, OMEGA)?;
    println!("scores {:?} (degenerate: {})", scores.scores, scores.degenerate);
    Ok(outcome.summary)
}

fn main() -> dremarl::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("dremarl_sweep"), PathBuf::from);
    let base = RunConfig {
        episodes: 200,
        ..Default::default()
    };
    run_example(&base, &out).map(|_| ())
}
