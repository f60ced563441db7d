use std::fs::{self, File};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::runs::{config_label, RunRecord, ERROR_FILE};
use super::summary::{summarize, write_summary_csv, SummaryRow};
use crate::config::{ConfigOverrides, RunConfig};
use crate::error::{Error, Result};

pub const SUMMARY_FILE: &str = "summary.csv";

/// One axis of a grid: `key=v1,v2,...`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    pub key: String,
    pub values: Vec<ConfigOverrides>,
}

impl FromStr for GridAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (key, list) = s
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("grid axis `{s}` is not key=v1,v2")))?;
        let key = key.trim().replace('-', "_");
        let values = list
            .split(',')
            .map(|v| override_for(&key, v.trim()))
            .collect::<Result<Vec<_>>>()?;
        if values.is_empty() {
            return Err(Error::InvalidArgument(format!("grid axis `{s}` has no values")));
        }
        Ok(Self { key, values })
    }
}

fn override_for(key: &str, v: &str) -> Result<ConfigOverrides> {
    let mut o = ConfigOverrides::default();
    let bad = |e: String| Error::config(key, e);
    match key {
        "scenario" => o.scenario = Some(v.parse()?),
        "agents" => o.agents = Some(v.parse().map_err(|e| bad(format!("{v}: {e}")))?),
        "reward_setting" => o.reward_setting = Some(v.parse()?),
        "estimator" => o.estimator = Some(v.parse()?),
        "aggregation" => o.aggregation = Some(v.parse()?),
        "reward_mode" => o.reward_mode = Some(v.parse()?),
        "reward_scope" => o.reward_scope = Some(v.parse()?),
        "episodes" => o.episodes = Some(v.parse().map_err(|e| bad(format!("{v}: {e}")))?),
        other => return Err(Error::config(other, "not a sweepable key")),
    }
    Ok(o)
}

/// Cartesian product of `axes` applied on top of `base`, each validated.
pub fn expand_grid(base: &RunConfig, axes: &[GridAxis]) -> Result<Vec<RunConfig>> {
    let mut out = vec![base.clone()];
    for axis in axes {
        out = out
            .iter()
            .flat_map(|cfg| {
                axis.values.iter().map(move |o| {
                    let mut c = cfg.clone();
                    o.apply(&mut c);
                    c
                })
            })
            .collect();
    }
    for c in &out {
        c.validate()?;
    }
    Ok(out)
}

/// Outcome of one `(config, seed)` pair.
#[derive(Debug, Clone)]
pub struct SweepRun {
    pub dir: PathBuf,
    pub seed: u64,
    pub result: std::result::Result<RunRecord, String>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub runs: Vec<SweepRun>,
    pub summary: Vec<SummaryRow>,
}

impl SweepOutcome {
    pub fn failures(&self) -> impl Iterator<Item = &SweepRun> {
        self.runs.iter().filter(|r| r.result.is_err())
    }
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "panic".into())
}

/// Runs every config under every seed with `runner`, one directory each,
/// then writes `summary.csv` over the successful runs. A failing or
/// panicking run is recorded in its directory and does not stop the sweep.
pub fn sweep<F>(configs: &[RunConfig], seeds: &[u64], out: &Path, runner: F) -> Result<SweepOutcome>
where
    F: Fn(&RunConfig, &Path) -> Result<RunRecord>,
{
    if configs.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one config and one seed".into()));
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut runs = Vec::new();
    for (i, base) in configs.iter().enumerate() {
        for &seed in seeds {
            let cfg = RunConfig { seed, ..base.clone() };
            let dir = out.join(format!("{i:03}_{}_seed{seed}", config_label(&cfg)));
            let result = match catch_unwind(AssertUnwindSafe(|| runner(&cfg, &dir))) {
                Ok(Ok(rec)) => Ok(rec),
                Ok(Err(e)) => Err(e.to_string()),
                Err(p) => Err(format!("panicked: {}", panic_message(p))),
            };
            if let Err(msg) = &result {
                fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                let path = dir.join(ERROR_FILE);
                fs::write(&path, msg).map_err(|e| Error::io(&path, e))?;
            }
            runs.push(SweepRun { dir, seed, result });
        }
    }
    let ok: Vec<RunRecord> = runs.iter().filter_map(|r| r.result.as_ref().ok().cloned()).collect();
    let summary = summarize(&ok)?;
    let path = out.join(SUMMARY_FILE);
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_summary_csv(file, &summary)?;
    Ok(SweepOutcome { runs, summary })
}
