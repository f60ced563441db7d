use std::io::Write;

use serde::{Deserialize, Serialize};

use super::normalize::{normalize_scores, OMEGA};
use super::runs::{config_label, RunRecord};
use crate::config::RunConfig;
use crate::error::{Error, Result};

/// One configuration aggregated over its seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub scenario: String,
    pub agents: usize,
    pub reward_setting: String,
    pub estimator: String,
    pub aggregation: String,
    pub reward_mode: String,
    pub seeds: usize,
    /// Mean over seeds of the final evaluation mean.
    pub mean: f64,
    /// Standard error across seeds; empty with a single seed.
    pub stderr: Option<f64>,
    /// Normalized against the other rows of the same scenario, agent count
    /// and reward setting; empty when that group has one row.
    pub normalized: Option<f64>,
}

fn without_seed(cfg: &RunConfig) -> RunConfig {
    RunConfig {
        seed: 0,
        ..cfg.clone()
    }
}

/// Groups runs by configuration (seed ignored), in order of first appearance.
pub fn summarize(runs: &[RunRecord]) -> Result<Vec<SummaryRow>> {
    let mut groups: Vec<(RunConfig, Vec<f64>)> = Vec::new();
    for r in runs {
        let key = without_seed(&r.config);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, finals)) => finals.push(r.final_mean),
            None => groups.push((key, vec![r.final_mean])),
        }
    }
    let mut rows: Vec<SummaryRow> = groups
        .iter()
        .map(|(cfg, finals)| {
            let n = finals.len() as f64;
            let mean = finals.iter().sum::<f64>() / n;
            let stderr = (finals.len() >= 2).then(|| {
                let var = finals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
                (var / n).sqrt()
            });
            SummaryRow {
                label: config_label(cfg),
                scenario: cfg.scenario.to_string(),
                agents: cfg.agents,
                reward_setting: cfg.reward_setting.to_string(),
                estimator: cfg.estimator.to_string(),
                aggregation: cfg.aggregation.to_string(),
                reward_mode: cfg.reward_mode.to_string(),
                seeds: finals.len(),
                mean,
                stderr,
                normalized: None,
            }
        })
        .collect();

    let keys: Vec<(String, usize, String)> = rows
        .iter()
        .map(|r| (r.scenario.clone(), r.agents, r.reward_setting.clone()))
        .collect();
    for key in &keys {
        let members: Vec<usize> = (0..rows.len()).filter(|&i| &keys[i] == key).collect();
        if members.len() < 2 || rows[members[0]].normalized.is_some() {
            continue;
        }
        let values: Vec<f64> = members.iter().map(|&i| rows[i].mean).collect();
        let scores = normalize_scores(&values, OMEGA)?;
        for (&i, s) in members.iter().zip(scores.scores) {
            rows[i].normalized = Some(s);
        }
    }
    Ok(rows)
}

fn csv_error(e: csv::Error) -> Error {
    Error::Parse {
        context: "csv".into(),
        message: e.to_string(),
    }
}

/// Header row plus one row per configuration.
pub fn write_summary_csv<W: Write>(out: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    if rows.is_empty() {
        w.write_record([
            "label",
            "scenario",
            "agents",
            "reward_setting",
            "estimator",
            "aggregation",
            "reward_mode",
            "seeds",
            "mean",
            "stderr",
            "normalized",
        ])
        .map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::io("summary", e))
}

pub fn read_summary_csv<R: std::io::Read>(input: R) -> Result<Vec<SummaryRow>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(csv_error))
        .collect()
}

#[derive(Serialize)]
struct CurvePoint<'a> {
    label: &'a str,
    seed: u64,
    episode: usize,
    eval_mean_reward: f64,
    eval_stderr: f64,
}

/// Learning curves in long form, for plotting.
pub fn write_curves_csv<W: Write>(out: W, runs: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in runs {
        let label = config_label(&r.config);
        for m in &r.metrics {
            w.serialize(CurvePoint {
                label: &label,
                seed: r.config.seed,
                episode: m.episode,
                eval_mean_reward: m.eval_mean_reward,
                eval_stderr: m.eval_stderr,
            })
            .map_err(csv_error)?;
        }
    }
    w.flush().map_err(|e| Error::io("curves", e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::EstimatorKind;
    use crate::trainer::MetricRecord;

    fn run(estimator: EstimatorKind, seed: u64, fin: f64) -> RunRecord {
        let config = RunConfig {
            estimator,
            seed,
            ..Default::default()
        };
        let rec = MetricRecord {
            episode: 100,
            eval_mean_reward: fin,
            eval_stderr: 1.0,
            critic_loss: None,
            actor_objective: None,
            estimator_loss: None,
        };
        RunRecord::from_metrics(config, vec![rec]).unwrap()
    }

    #[test]
    fn groups_by_config_and_normalizes() {
        let runs = vec![
            run(EstimatorKind::Dre, 0, -10.0),
            run(EstimatorKind::Dre, 1, -20.0),
            run(EstimatorKind::None, 0, -40.0),
        ];
        let rows = summarize(&runs).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].seeds, 2);
        assert_eq!(rows[0].mean, -15.0);
        assert!((rows[0].stderr.unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(rows[1].stderr, None);
        assert_eq!(rows[0].normalized, Some(10.0));
        assert_eq!(rows[1].normalized, Some(0.0));
    }

    #[test]
    fn csv_round_trip() {
        let rows = summarize(&[run(EstimatorKind::Dre, 0, -3.5)]).unwrap();
        let mut buf = Vec::new();
        write_summary_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("label,scenario,agents"));
        assert_eq!(read_summary_csv(buf.as_slice()).unwrap(), rows);
    }
}
