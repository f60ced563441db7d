use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper end of the normalized scale.
pub const OMEGA: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedScores {
    pub scores: Vec<f64>,
    /// All inputs were equal; every score is `omega / 2`.
    pub degenerate: bool,
}

/// `omega * (m - min) / (max - min)` for every value.
pub fn normalize_scores(values: &[f64], omega: f64) -> Result<NormalizedScores> {
    if values.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "normalization needs at least two values, got {}",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) || !omega.is_finite() || omega <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "cannot normalize {values:?} onto [0, {omega}]"
        )));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return Ok(NormalizedScores {
            scores: vec![omega / 2.0; values.len()],
            degenerate: true,
        });
    }
    Ok(NormalizedScores {
        scores: values.iter().map(|v| (v - lo) / (hi - lo) * omega).collect(),
        degenerate: false,
    })
}
