//! Experiment driver: run directories, seeded sweeps, summaries and
//! normalized scores.

mod normalize;
mod runs;
mod summary;
mod sweep;

pub use normalize::{normalize_scores, NormalizedScores, OMEGA};
pub use runs::{
    config_label, find_runs, load_run, run_to_dir, RunRecord, CHECKPOINT_FILE, CONFIG_FILE,
    ERROR_FILE, METRICS_FILE, TIMING_FILE,
};
pub use summary::{read_summary_csv, summarize, write_curves_csv, write_summary_csv, SummaryRow};
pub use sweep::{expand_grid, sweep, GridAxis, SweepOutcome, SweepRun, SUMMARY_FILE};
