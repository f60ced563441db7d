use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One line of a trajectory dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub step: usize,
    pub positions: Vec<[f64; 2]>,
    pub velocities: Vec<[f64; 2]>,
    pub landmarks: Vec<[f64; 2]>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub team_reward: f64,
}

/// Writes one JSON object per line.
pub fn write_trajectory<W: Write>(mut out: W, steps: &[TrajectoryStep]) -> Result<()> {
    for s in steps {
        let line = serde_json::to_string(s).map_err(|e| Error::Parse {
            context: "trajectory".into(),
            message: e.to_string(),
        })?;
        writeln!(out, "{line}").map_err(|e| Error::io("trajectory", e))?;
    }
    Ok(())
}

pub fn read_trajectory<R: BufRead>(input: R) -> Result<Vec<TrajectoryStep>> {
    let mut steps = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("trajectory", e))?;
        if line.trim().is_empty() {
            continue;
        }
        steps.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            context: format!("trajectory line {}", i + 1),
            message: e.to_string(),
        })?);
    }
    Ok(steps)
}
