//! Regulation performance-index scoring.
//!
//! The settlement index is linear in the relative response error:
//! `1 - delta * ||Cr - b||_1 / ||Cr||_1`. The composite used by PJM-style
//! markets averages precision, correlation and delay scores; for a battery
//! that responds instantaneously the delay score is always full, and setting
//! `delta = 2/3` in the linear model reproduces the composite's shape.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PerformanceError {
    #[error("series length mismatch: instruction {instruction}, response {response}")]
    LengthMismatch { instruction: usize, response: usize },
    #[error("invalid performance config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexMode {
    Linear,
    PjmApprox,
}

/// Settlement-index configuration. The PJM-approximation mode pins the
/// performance weight at 2/3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformanceConfig {
    pub delta: f64,
    pub mode: IndexMode,
    pub rho_min: f64,
}

impl PerformanceConfig {
    pub fn new(mode: IndexMode, delta: f64, rho_min: f64) -> Result<Self, PerformanceError> {
        let delta = match mode {
            IndexMode::Linear => delta,
            IndexMode::PjmApprox => 2.0 / 3.0,
        };
        let cfg = Self {
            delta,
            mode,
            rho_min,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PerformanceError> {
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(PerformanceError::InvalidConfig(format!(
                "delta must be in [0, 1], got {}",
                self.delta
            )));
        }
        if !(self.rho_min > 1.0 - self.delta && self.rho_min < 1.0) {
            return Err(PerformanceError::InvalidConfig(format!(
                "rho_min must be in (1-delta, 1) = ({}, 1), got {}",
                1.0 - self.delta,
                self.rho_min
            )));
        }
        Ok(())
    }
}

/// A scored index plus the flags that mark degenerate inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexValue {
    pub value: f64,
    /// Set when the instructed energy was zero; the index is 1 by convention.
    pub zero_instruction: bool,
}

/// Linear performance index `1 - delta*||Cr-b||_1/||Cr||_1`, clipped to
/// [0, 1]. A period with zero instructed energy scores 1 with a flag: no
/// mismatch is possible.
pub fn performance_index(
    instruction_mw: &[f64],
    response_mw: &[f64],
    delta: f64,
) -> Result<IndexValue, PerformanceError> {
    if instruction_mw.len() != response_mw.len() {
        return Err(PerformanceError::LengthMismatch {
            instruction: instruction_mw.len(),
            response: response_mw.len(),
        });
    }
    let instructed: f64 = instruction_mw.iter().map(|x| x.abs()).sum();
    if instructed == 0.0 {
        return Ok(IndexValue {
            value: 1.0,
            zero_instruction: true,
        });
    }
    let mismatch: f64 = instruction_mw
        .iter()
        .zip(response_mw.iter())
        .map(|(cr, b)| (cr - b).abs())
        .sum();
    Ok(IndexValue {
        value: (1.0 - delta * mismatch / instructed).clamp(0.0, 1.0),
        zero_instruction: false,
    })
}

/// Three-score composite index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PjmIndex {
    pub value: f64,
    pub precision: f64,
    pub correlation: f64,
    /// Always 1 for an instantaneous responder.
    pub delay: f64,
    /// Set when the correlation was undefined (a constant series) and the
    /// precision score was substituted for it.
    pub degenerate_correlation: bool,
    pub zero_instruction: bool,
}

/// Ex-post composite score: mean of precision, correlation and delay.
/// Precision is `1 - ||Cr-b||_1/||Cr||_1` clipped to [0, 1]; correlation is
/// the Pearson coefficient of the two series clipped to [0, 1], replaced by
/// the precision score (and flagged) when either series is constant; delay is
/// 1.
pub fn pjm_index_expost(
    instruction_mw: &[f64],
    response_mw: &[f64],
) -> Result<PjmIndex, PerformanceError> {
    if instruction_mw.len() != response_mw.len() {
        return Err(PerformanceError::LengthMismatch {
            instruction: instruction_mw.len(),
            response: response_mw.len(),
        });
    }
    let instructed: f64 = instruction_mw.iter().map(|x| x.abs()).sum();
    if instructed == 0.0 {
        return Ok(PjmIndex {
            value: 1.0,
            precision: 1.0,
            correlation: 1.0,
            delay: 1.0,
            degenerate_correlation: false,
            zero_instruction: true,
        });
    }
    let mismatch: f64 = instruction_mw
        .iter()
        .zip(response_mw.iter())
        .map(|(cr, b)| (cr - b).abs())
        .sum();
    let precision = (1.0 - mismatch / instructed).clamp(0.0, 1.0);

    let (correlation, degenerate) = match pearson(instruction_mw, response_mw) {
        Some(rho) => (rho.clamp(0.0, 1.0), false),
        None => (precision, true),
    };
    let delay = 1.0;
    Ok(PjmIndex {
        value: (precision + correlation + delay) / 3.0,
        precision,
        correlation,
        delay,
        degenerate_correlation: degenerate,
        zero_instruction: false,
    })
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys.iter()) {
        let dx = x - mx;
        let dy = y - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}
