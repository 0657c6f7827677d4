//! Performance-confidence calibration, optimal regulation capacity and
//! bid-curve construction.
//!
//! The chance constraint on the performance index reduces to a condition on
//! the normalized regulation energy capacity `gamma = min{window, u_hat*E}/C`
//! in hours: a battery with a larger gamma tracks the signal longer before
//! its SoC bounds bite. `GammaCurve` holds the empirical lower-confidence
//! performance as a function of gamma, calibrated by simulating a corpus of
//! signal periods; its inverse turns a required index into a required gamma,
//! which caps the capacity that may be offered.

use std::io::Write;

use thiserror::Error;

use crate::battery::BatterySpec;
use crate::control::{optimal_cycle_depth, ControlError, PenaltyModel};
use crate::performance::{performance_index, PerformanceError};
use crate::signal::RegulationSignal;

#[derive(Debug, Error)]
pub enum BiddingError {
    #[error("regulation capacity must be positive")]
    ZeroCapacity,
    #[error("not enough calibration data: {0}")]
    InsufficientData(String),
    #[error("target index {rho} outside calibrated range ({lo}, {hi}]")]
    OutOfRange { rho: f64, lo: f64, hi: f64 },
    #[error("first bid segment {segment_mw} MW already exceeds the capacity cap {cap_mw} MW")]
    CapExceeded { segment_mw: f64, cap_mw: f64 },
    #[error("cumulative capacity {capacity_mw} MW is outside the range of the optimal-capacity curve")]
    NonInvertible { capacity_mw: f64 },
    #[error("invalid bid segments: {0}")]
    BadSegments(String),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Performance(#[from] PerformanceError),
}

/// Market-side inputs the bidding policy needs besides the battery itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BidConfig {
    pub delta: f64,
    pub mu_r: f64,
    pub interval_hours: f64,
    pub rho_min: f64,
}

/// Empirical performance-vs-gamma curve at one confidence level.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaCurve {
    pub xi: f64,
    pub delta: f64,
    /// `(gamma_hours, perf_quantile)` with strictly increasing gammas and
    /// nondecreasing quantiles.
    pub points: Vec<(f64, f64)>,
    /// Identifier of the signal corpus the curve was calibrated on.
    pub provenance: String,
    /// Number of signal periods behind each quantile.
    pub periods: usize,
}

impl GammaCurve {
    /// Periods recommended for resolving the lower ξ-quantile.
    pub fn recommended_min_periods(&self) -> usize {
        (20.0 / (1.0 - self.xi).max(1e-9)).ceil() as usize
    }

    pub fn max_quantile(&self) -> f64 {
        self.points.last().map(|p| p.1).unwrap_or(0.0)
    }

    /// Writes `gamma_hours,perf_quantile` rows with a comment header carrying
    /// the calibration context.
    pub fn write_csv<W: Write>(&self, mut w: W, meta: &str) -> std::io::Result<()> {
        writeln!(
            w,
            "# xi={} delta={} corpus={} periods={}{}{}",
            self.xi,
            self.delta,
            self.provenance,
            self.periods,
            if meta.is_empty() { "" } else { " " },
            meta
        )?;
        writeln!(w, "gamma_hours,perf_quantile")?;
        for (g, p) in &self.points {
            writeln!(w, "{g},{p}")?;
        }
        Ok(())
    }
}

/// Marginal-priced capacity offer curve.
#[derive(Debug, Clone, PartialEq)]
pub struct BidCurve {
    pub segments: Vec<BidSegment>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BidSegment {
    pub price_per_mw: f64,
    pub capacity_mw: f64,
}

impl BidCurve {
    /// Capacity cleared at a given price: the largest prefix whose segment
    /// prices are at or below it.
    pub fn cleared_at(&self, price: f64) -> f64 {
        self.segments
            .iter()
            .take_while(|s| s.price_per_mw <= price)
            .map(|s| s.capacity_mw)
            .sum()
    }

    pub fn total_capacity_mw(&self) -> f64 {
        self.segments.iter().map(|s| s.capacity_mw).sum()
    }

    /// Writes `segment,price_per_mw,capacity_mw` rows.
    pub fn write_csv<W: Write>(&self, mut w: W, meta: &str) -> std::io::Result<()> {
        if !meta.is_empty() {
            writeln!(w, "# {meta}")?;
        }
        writeln!(w, "segment,price_per_mw,capacity_mw")?;
        for (i, s) in self.segments.iter().enumerate() {
            writeln!(w, "{},{},{}", i + 1, s.price_per_mw, s.capacity_mw)?;
        }
        Ok(())
    }
}

/// Normalized regulation energy capacity in hours:
/// `min{e_max - e_min, u_hat*E} / C`.
pub fn gamma_of(
    penalty: &PenaltyModel,
    capacity_mw: f64,
    spec: &BatterySpec,
) -> Result<f64, BiddingError> {
    if !(capacity_mw > 0.0) {
        return Err(BiddingError::ZeroCapacity);
    }
    let u_hat = optimal_cycle_depth(penalty, spec)?;
    Ok(spec.usable_window_mwh().min(u_hat * spec.energy_mwh) / capacity_mw)
}

/// Response of a unit-capacity battery whose usable energy is `gamma` MWh,
/// run by the threshold policy's floating window (running min/max marks with
/// a span cap). The response is scale free: it depends on the signal, the
/// efficiency and gamma only, which is what lets one curve serve any capacity.
fn simulate_normalized_response(signal: &RegulationSignal, gamma: f64, eta: f64) -> Vec<f64> {
    let m = signal.interval_hours;
    let mut e = 0.0_f64;
    let mut mark_lo = 0.0_f64;
    let mut mark_hi = 0.0_f64;
    let mut out = Vec::with_capacity(signal.samples.len());
    for &r in &signal.samples {
        mark_lo = mark_lo.min(e);
        mark_hi = mark_hi.max(e);
        let hi = mark_lo + gamma;
        let lo = mark_hi - gamma;
        let b = if r >= 0.0 {
            r.min((hi - e) / (m * eta)).max(0.0)
        } else {
            r.max(eta * (lo - e) / m).min(0.0)
        };
        e += if b >= 0.0 { m * eta * b } else { m * b / eta };
        out.push(b);
    }
    out
}

/// Pool-adjacent-violators pass making the values nondecreasing in place.
pub fn pav_nondecreasing(values: &mut [f64]) {
    // (mean, count) blocks; merge while the tail decreases.
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values.iter() {
        let mut mean = v;
        let mut count = 1usize;
        while let Some(&(prev_mean, prev_count)) = blocks.last() {
            if prev_mean > mean {
                blocks.pop();
                let total = prev_count + count;
                mean = (prev_mean * prev_count as f64 + mean * count as f64) / total as f64;
                count = total;
            } else {
                break;
            }
        }
        blocks.push((mean, count));
    }
    let mut i = 0;
    for (mean, count) in blocks {
        for _ in 0..count {
            values[i] = mean;
            i += 1;
        }
    }
}

/// Lower empirical ξ-quantile: the largest value that at least a ξ fraction
/// of the sample reaches (descending order statistic ⌈ξ·n⌉).
pub fn lower_confidence_quantile(values: &mut [f64], xi: f64) -> f64 {
    debug_assert!(!values.is_empty());
    values.sort_by(|a, b| b.partial_cmp(a).expect("no NaN indices"));
    let n = values.len();
    let k = ((xi * n as f64).ceil() as usize).clamp(1, n);
    values[k - 1]
}

/// Calibrates the performance-vs-gamma curve on a signal corpus.
///
/// Every grid gamma is simulated over every period with the scale-free
/// normalized policy; the per-period indices collapse to their lower
/// ξ-quantile, and a pool-adjacent-violators pass restores the monotonicity
/// that holds in population but can wobble in finite samples.
pub fn calibrate_gamma_curve(
    signals: &[RegulationSignal],
    xi: f64,
    delta: f64,
    gamma_grid: &[f64],
    eta: f64,
    provenance: &str,
) -> Result<GammaCurve, BiddingError> {
    if signals.is_empty() {
        return Err(BiddingError::InsufficientData(
            "no signal periods supplied".into(),
        ));
    }
    if gamma_grid.is_empty() {
        return Err(BiddingError::InsufficientData("empty gamma grid".into()));
    }
    if !(0.0 < xi && xi < 1.0) {
        return Err(BiddingError::InsufficientData(format!(
            "confidence must be in (0, 1), got {xi}"
        )));
    }
    let mut sorted_grid: Vec<f64> = gamma_grid.to_vec();
    sorted_grid.sort_by(|a, b| a.partial_cmp(b).expect("no NaN gammas"));
    sorted_grid.dedup();

    let mut quantiles = Vec::with_capacity(sorted_grid.len());
    for &gamma in &sorted_grid {
        let mut indices = Vec::with_capacity(signals.len());
        for sig in signals {
            let response = simulate_normalized_response(sig, gamma, eta);
            let idx = performance_index(&sig.samples, &response, delta)?;
            indices.push(idx.value);
        }
        quantiles.push(lower_confidence_quantile(&mut indices, xi));
    }
    pav_nondecreasing(&mut quantiles);
    for q in quantiles.iter_mut() {
        *q = q.clamp(1.0 - delta, 1.0);
    }
    Ok(GammaCurve {
        xi,
        delta,
        points: sorted_grid.into_iter().zip(quantiles).collect(),
        provenance: provenance.to_string(),
        periods: signals.len(),
    })
}

/// Smallest gamma whose calibrated quantile reaches `rho`, by monotone
/// piecewise-linear interpolation. Exact at grid points.
pub fn inverse_gamma(curve: &GammaCurve, rho: f64) -> Result<f64, BiddingError> {
    let floor = 1.0 - curve.delta;
    let ceil = curve.max_quantile();
    if !(rho > floor) || rho > ceil {
        return Err(BiddingError::OutOfRange {
            rho,
            lo: floor,
            hi: ceil,
        });
    }
    let pts = &curve.points;
    if rho <= pts[0].1 {
        return Ok(pts[0].0);
    }
    for w in pts.windows(2) {
        let (g0, q0) = w[0];
        let (g1, q1) = w[1];
        if rho <= q1 {
            if q1 <= q0 {
                return Ok(g1);
            }
            return Ok(g0 + (rho - q0) / (q1 - q0) * (g1 - g0));
        }
    }
    Ok(pts.last().expect("nonempty curve").0)
}

/// Optimal regulation capacity
/// `C*(mu_lambda) = min{B, min{window, u_hat*E} / gamma_req}` where
/// `gamma_req` is the calibrated gamma needed for `rho_min` at the curve's
/// confidence.
pub fn optimal_capacity(
    mu_lambda: f64,
    spec: &BatterySpec,
    cfg: &BidConfig,
    curve: &GammaCurve,
) -> Result<f64, BiddingError> {
    let gamma_req = inverse_gamma(curve, cfg.rho_min)?;
    if mu_lambda <= 0.0 {
        return Ok(0.0);
    }
    let penalty = PenaltyModel::new(cfg.delta, mu_lambda, cfg.mu_r, cfg.interval_hours)?;
    let u_hat = optimal_cycle_depth(&penalty, spec)?;
    let energy = spec.usable_window_mwh().min(u_hat * spec.energy_mwh);
    if gamma_req <= 0.0 {
        return Ok(spec.power_mw);
    }
    Ok(spec.power_mw.min(energy / gamma_req))
}

/// Maximum capacity that can satisfy the performance requirement at all:
/// `min{B, window / gamma_req}`.
pub fn max_capacity(
    spec: &BatterySpec,
    cfg: &BidConfig,
    curve: &GammaCurve,
) -> Result<f64, BiddingError> {
    let gamma_req = inverse_gamma(curve, cfg.rho_min)?;
    if gamma_req <= 0.0 {
        return Ok(spec.power_mw);
    }
    Ok(spec.power_mw.min(spec.usable_window_mwh() / gamma_req))
}

/// Numeric inverse of [`optimal_capacity`] over the expected price.
fn invert_optimal_capacity(
    target_mw: f64,
    spec: &BatterySpec,
    cfg: &BidConfig,
    curve: &GammaCurve,
) -> Result<f64, BiddingError> {
    let eval = |mu: f64| optimal_capacity(mu, spec, cfg, curve);
    let mut hi = 1.0;
    let mut grow = 0;
    while eval(hi)? < target_mw {
        hi *= 2.0;
        grow += 1;
        if grow > 60 {
            return Err(BiddingError::NonInvertible {
                capacity_mw: target_mw,
            });
        }
    }
    let mut lo = 0.0;
    // Bisect well below the $0.01/MW the offer needs.
    for _ in 0..200 {
        if hi - lo <= 1e-9 * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if eval(mid)? < target_mw {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Builds the marginal-priced bid curve for the given capacity segments.
///
/// For each prefix the total expected payment is `lambda_total * C_total`
/// where `lambda_total` inverts the optimal-capacity curve at the prefix
/// capacity; the segment price is the increment of that total over the
/// segment's capacity. Construction stops before the cumulative capacity
/// would exceed the cap.
pub fn build_bid_curve(
    capacity_segments: &[f64],
    spec: &BatterySpec,
    cfg: &BidConfig,
    curve: &GammaCurve,
) -> Result<BidCurve, BiddingError> {
    if capacity_segments.is_empty() {
        return Err(BiddingError::BadSegments("no segments supplied".into()));
    }
    if let Some(bad) = capacity_segments.iter().find(|c| !(**c > 0.0)) {
        return Err(BiddingError::BadSegments(format!(
            "segment capacities must be positive, got {bad}"
        )));
    }
    let cap = max_capacity(spec, cfg, curve)?;
    if capacity_segments[0] > cap * (1.0 + 1e-12) {
        return Err(BiddingError::CapExceeded {
            segment_mw: capacity_segments[0],
            cap_mw: cap,
        });
    }

    let mut segments = Vec::with_capacity(capacity_segments.len());
    let mut c_total = 0.0;
    let mut paid = 0.0;
    for &seg in capacity_segments {
        if c_total + seg > cap * (1.0 + 1e-12) {
            break;
        }
        c_total += seg;
        let lambda_total = invert_optimal_capacity(c_total, spec, cfg, curve)?;
        let price = (lambda_total * c_total - paid) / seg;
        paid += price * seg;
        segments.push(BidSegment {
            price_per_mw: price,
            capacity_mw: seg,
        });
    }
    Ok(BidCurve { segments })
}
