use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::trainer::{read_metrics, write_metrics, MetricRecord, Trainer};

pub const CONFIG_FILE: &str = "config.toml";
pub const METRICS_FILE: &str = "metrics.jsonl";
pub const TIMING_FILE: &str = "timing.jsonl";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const ERROR_FILE: &str = "error.txt";

/// A finished (or reloaded) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: RunConfig,
    pub metrics: Vec<MetricRecord>,
    pub final_mean: f64,
    pub final_stderr: f64,
}

impl RunRecord {
    pub fn from_metrics(config: RunConfig, metrics: Vec<MetricRecord>) -> Result<Self> {
        let last = metrics
            .last()
            .ok_or_else(|| Error::InvalidArgument("run has no metric records".into()))?;
        Ok(Self {
            final_mean: last.eval_mean_reward,
            final_stderr: last.eval_stderr,
            config,
            metrics,
        })
    }
}

/// Short human-readable name of everything but the seed.
pub fn config_label(cfg: &RunConfig) -> String {
    format!(
        "{}-{}_{}_{}_{}_{}",
        cfg.scenario, cfg.agents, cfg.reward_setting, cfg.estimator, cfg.aggregation, cfg.reward_mode
    )
}

#[derive(Serialize)]
struct TimingLine {
    episode: usize,
    wall_time: f64,
}

/// Trains `cfg`, streaming metrics, timing and the final checkpoint into `dir`.
pub fn run_to_dir(cfg: &RunConfig, dir: &Path) -> Result<RunRecord> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let config_path = dir.join(CONFIG_FILE);
    fs::write(&config_path, cfg.to_toml()?).map_err(|e| Error::io(&config_path, e))?;

    let metrics_path = dir.join(METRICS_FILE);
    let timing_path = dir.join(TIMING_FILE);
    let mut metrics = File::create(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?;
    let mut timing = File::create(&timing_path).map_err(|e| Error::io(&timing_path, e))?;

    let mut trainer = Trainer::new(cfg.clone())?;
    let outcome = trainer.run(|rec, elapsed| {
        write_metrics(&mut metrics, std::slice::from_ref(rec))?;
        let line = serde_json::to_string(&TimingLine {
            episode: rec.episode,
            wall_time: elapsed.as_secs_f64(),
        })
        .map_err(|e| Error::Parse {
            context: "timing".into(),
            message: e.to_string(),
        })?;
        writeln!(timing, "{line}").map_err(|e| Error::io(&timing_path, e))
    })?;

    let ckpt_path = dir.join(CHECKPOINT_FILE);
    let ckpt = File::create(&ckpt_path).map_err(|e| Error::io(&ckpt_path, e))?;
    outcome.checkpoint.write(BufWriter::new(ckpt))?;
    RunRecord::from_metrics(cfg.clone(), outcome.records)
}

/// Reads a run directory written by [`run_to_dir`].
pub fn load_run(dir: &Path) -> Result<RunRecord> {
    let config_path = dir.join(CONFIG_FILE);
    let text = fs::read_to_string(&config_path).map_err(|e| Error::io(&config_path, e))?;
    let config = RunConfig::from_toml_str(&text)?;
    let metrics_path = dir.join(METRICS_FILE);
    let file = File::open(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?;
    RunRecord::from_metrics(config, read_metrics(BufReader::new(file))?)
}

/// Run directories under each path: a run directory itself, a metric file,
/// or any tree containing them. Sorted, without duplicates.
pub fn find_runs(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_file() {
            out.push(p.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf));
            continue;
        }
        for entry in walkdir::WalkDir::new(p).sort_by_file_name() {
            let entry = entry.map_err(|e| Error::Parse {
                context: p.display().to_string(),
                message: e.to_string(),
            })?;
            if entry.file_type().is_file() && entry.file_name() == METRICS_FILE {
                if let Some(parent) = entry.path().parent() {
                    out.push(parent.to_path_buf());
                }
            }
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}
