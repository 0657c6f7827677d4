//! Regulation-signal ingestion, synthesis, normalization and statistics.
//!
//! Signals are normalized instruction series `r_t` in [-1, 1] sampled on a
//! fixed interval (2 seconds by default, the cadence of fast regulation
//! products). CSV ingestion splits a long series into settlement-period
//! chunks; synthesis provides seeded generators for experiments that need a
//! reproducible corpus.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Out-of-range slack tolerated silently; anything beyond is clipped with a
/// warning count.
const RANGE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: parse error: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: timestamp gap: expected {expected}, got {got}")]
    Gap {
        path: String,
        line: usize,
        expected: i64,
        got: i64,
    },
    #[error("bad generator parameters: {0}")]
    BadParams(String),
    #[error("degenerate signal: all samples equal")]
    Degenerate,
    #[error("signal is empty")]
    Empty,
}

/// One settlement period of normalized regulation instructions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegulationSignal {
    pub samples: Vec<f64>,
    /// Dispatch interval M in hours.
    pub interval_hours: f64,
    pub period_id: u64,
}

impl RegulationSignal {
    /// Total absolute instruction `sum |r_t|`.
    pub fn norm_l1(&self) -> f64 {
        self.samples.iter().map(|r| r.abs()).sum()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Seeded signal generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SignalKind {
    /// Gaussian random walk reflected into [-1, 1].
    RandomWalk { step_sigma: f64 },
    /// Mean-reverting process reflected into [-1, 1]; `reversion_per_hour`
    /// is the pull-back rate, `sigma_per_sqrt_hour` the diffusion scale.
    OuProcess {
        reversion_per_hour: f64,
        sigma_per_sqrt_hour: f64,
    },
    /// Cyclic replay of a base series scaled by a factor, clipped to [-1, 1].
    ScaledReplay { base: Vec<f64>, scale: f64 },
}

fn reflect_into_unit(mut x: f64) -> f64 {
    // Fold back across the boundary; repeated until inside for large
    // excursions.
    while !(-1.0..=1.0).contains(&x) {
        if x > 1.0 {
            x = 2.0 - x;
        } else {
            x = -2.0 - x;
        }
    }
    x
}

/// Generates one deterministic signal period for a given seed.
pub fn synthesize(
    kind: &SignalKind,
    seed: u64,
    length: usize,
    interval_hours: f64,
    period_id: u64,
) -> Result<RegulationSignal, SignalError> {
    if length == 0 {
        return Err(SignalError::BadParams("length must be positive".into()));
    }
    if !(interval_hours > 0.0) {
        return Err(SignalError::BadParams(format!(
            "interval_hours must be > 0, got {interval_hours}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = match kind {
        SignalKind::RandomWalk { step_sigma } => {
            if !(*step_sigma > 0.0) {
                return Err(SignalError::BadParams(format!(
                    "step_sigma must be > 0, got {step_sigma}"
                )));
            }
            let normal = Normal::new(0.0, *step_sigma)
                .map_err(|e| SignalError::BadParams(e.to_string()))?;
            let mut x = 0.0;
            (0..length)
                .map(|_| {
                    x = reflect_into_unit(x + normal.sample(&mut rng));
                    x
                })
                .collect()
        }
        SignalKind::OuProcess {
            reversion_per_hour,
            sigma_per_sqrt_hour,
        } => {
            if !(*reversion_per_hour >= 0.0) || !(*sigma_per_sqrt_hour > 0.0) {
                return Err(SignalError::BadParams(format!(
                    "need reversion >= 0 and sigma > 0, got {reversion_per_hour}, \
                     {sigma_per_sqrt_hour}"
                )));
            }
            let pull = (reversion_per_hour * interval_hours).min(1.0);
            let noise = sigma_per_sqrt_hour * interval_hours.sqrt();
            let normal =
                Normal::new(0.0, noise).map_err(|e| SignalError::BadParams(e.to_string()))?;
            let mut x = 0.0;
            (0..length)
                .map(|_| {
                    x = reflect_into_unit(x - pull * x + normal.sample(&mut rng));
                    x
                })
                .collect()
        }
        SignalKind::ScaledReplay { base, scale } => {
            if base.is_empty() {
                return Err(SignalError::BadParams("replay base is empty".into()));
            }
            (0..length)
                .map(|i| (base[i % base.len()] * scale).clamp(-1.0, 1.0))
                .collect()
        }
    };
    Ok(RegulationSignal {
        samples,
        interval_hours,
        period_id,
    })
}

/// Generates a corpus of consecutive periods from one seeded stream.
pub fn synthesize_corpus(
    kind: &SignalKind,
    seed: u64,
    periods: usize,
    samples_per_period: usize,
    interval_hours: f64,
) -> Result<Vec<RegulationSignal>, SignalError> {
    (0..periods as u64)
        .map(|p| {
            synthesize(
                kind,
                seed.wrapping_add(p.wrapping_mul(0x9E37_79B9_7F4A_7C15)),
                samples_per_period,
                interval_hours,
                p,
            )
        })
        .collect()
}

/// Result of a CSV load: the period chunks plus a count of samples that had
/// to be clipped back into [-1, 1].
#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub signals: Vec<RegulationSignal>,
    pub clipped_samples: usize,
}

/// Loads a `timestamp,r` CSV (integer seconds, float instruction) and splits
/// it into settlement-period chunks aligned to period boundaries. Incomplete
/// periods at either end are dropped. Sample spacing must match the interval;
/// a missing row raises a gap error with its line number.
pub fn load_csv(
    path: &Path,
    interval_hours: f64,
    settlement_hours: f64,
) -> Result<LoadedCorpus, SignalError> {
    let path_str = path.display().to_string();
    let io_err = |source| SignalError::Io {
        path: path_str.clone(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    let reader = BufReader::new(file);

    let step_s = (interval_hours * 3600.0).round() as i64;
    let period_s = (settlement_hours * 3600.0).round() as i64;
    if step_s <= 0 || period_s <= 0 || period_s % step_s != 0 {
        return Err(SignalError::BadParams(format!(
            "settlement period {period_s}s is not a multiple of the sample interval {step_s}s"
        )));
    }
    let samples_per_period = (period_s / step_s) as usize;

    let mut clipped = 0usize;
    let mut rows: Vec<(i64, f64)> = Vec::new();
    let mut prev_ts: Option<i64> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| SignalError::Io {
            path: path_str.clone(),
            source,
        })?;
        let lineno = idx + 1;
        if idx == 0 {
            if line.trim() != "timestamp,r" {
                return Err(SignalError::Parse {
                    path: path_str,
                    line: lineno,
                    message: format!("expected header 'timestamp,r', got '{}'", line.trim()),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.splitn(2, ',');
        let ts_text = fields.next().unwrap_or("");
        let r_text = fields.next().ok_or_else(|| SignalError::Parse {
            path: path_str.clone(),
            line: lineno,
            message: "missing r column".into(),
        })?;
        let ts: i64 = ts_text.trim().parse().map_err(|e| SignalError::Parse {
            path: path_str.clone(),
            line: lineno,
            message: format!("bad timestamp '{}': {e}", ts_text.trim()),
        })?;
        let mut r: f64 = r_text.trim().parse().map_err(|e| SignalError::Parse {
            path: path_str.clone(),
            line: lineno,
            message: format!("bad r '{}': {e}", r_text.trim()),
        })?;
        if r.abs() > 1.0 + RANGE_TOL {
            clipped += 1;
            r = r.clamp(-1.0, 1.0);
        } else if r.abs() > 1.0 {
            r = r.clamp(-1.0, 1.0);
        }
        if let Some(prev) = prev_ts {
            if ts - prev != step_s {
                return Err(SignalError::Gap {
                    path: path_str,
                    line: lineno,
                    expected: prev + step_s,
                    got: ts,
                });
            }
        }
        prev_ts = Some(ts);
        rows.push((ts, r));
    }

    let mut signals: Vec<RegulationSignal> = Vec::new();
    let mut current: Vec<f64> = Vec::with_capacity(samples_per_period);
    let mut current_period: Option<i64> = None;
    for (ts, r) in rows {
        let pid = ts.div_euclid(period_s);
        if current_period != Some(pid) {
            current.clear();
            current_period = Some(pid);
        }
        current.push(r);
        if current.len() == samples_per_period {
            signals.push(RegulationSignal {
                samples: std::mem::take(&mut current),
                interval_hours,
                period_id: pid as u64,
            });
            current_period = None;
        }
    }
    Ok(LoadedCorpus {
        signals,
        clipped_samples: clipped,
    })
}

/// Writes a corpus back to `timestamp,r` CSV. Timestamps are reconstructed
/// from each signal's period id, so a `load_csv` of the output reproduces the
/// samples bit-exactly.
pub fn save_csv(
    path: &Path,
    signals: &[RegulationSignal],
    settlement_hours: f64,
) -> Result<(), SignalError> {
    let path_str = path.display().to_string();
    let io_err = |source| SignalError::Io {
        path: path_str.clone(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    let period_s = (settlement_hours * 3600.0).round() as i64;
    (|| -> std::io::Result<()> {
        writeln!(w, "timestamp,r")?;
        for sig in signals {
            let step_s = (sig.interval_hours * 3600.0).round() as i64;
            let base = sig.period_id as i64 * period_s;
            for (i, r) in sig.samples.iter().enumerate() {
                writeln!(w, "{},{}", base + i as i64 * step_s, r)?;
            }
        }
        w.flush()
    })()
    .map_err(|source| SignalError::Io {
        path: path_str.clone(),
        source,
    })
}

/// Shifts a signal by the constant that balances efficiency-weighted charge
/// and discharge energy: `eta*sum[r-c]+ = sum[-(r-c)]+/eta`. At unit
/// efficiency this reduces to mean subtraction.
pub fn debias_energy(signal: &RegulationSignal, eta: f64) -> Result<RegulationSignal, SignalError> {
    if signal.samples.is_empty() {
        return Err(SignalError::Empty);
    }
    let lo = signal.samples.iter().cloned().fold(f64::MAX, f64::min);
    let hi = signal.samples.iter().cloned().fold(f64::MIN, f64::max);
    if hi - lo <= f64::EPSILON {
        return Err(SignalError::Degenerate);
    }
    // h(c) is continuous and strictly decreasing from >=0 to <=0 on [lo, hi].
    let balance = |c: f64| -> f64 {
        let mut pos = 0.0;
        let mut neg = 0.0;
        for &r in &signal.samples {
            let x = r - c;
            if x > 0.0 {
                pos += x;
            } else {
                neg -= x;
            }
        }
        eta * pos - neg / eta
    };
    let mut a = lo;
    let mut b = hi;
    while b - a > 1e-12 {
        let mid = 0.5 * (a + b);
        if balance(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let c = 0.5 * (a + b);
    Ok(RegulationSignal {
        samples: signal
            .samples
            .iter()
            .map(|r| (r - c).clamp(-1.0, 1.0))
            .collect(),
        interval_hours: signal.interval_hours,
        period_id: signal.period_id,
    })
}

/// Mean per-period total absolute instruction `E[||r||_1]`.
pub fn mu_r(signals: &[RegulationSignal]) -> f64 {
    if signals.is_empty() {
        return 0.0;
    }
    signals.iter().map(|s| s.norm_l1()).sum::<f64>() / signals.len() as f64
}
