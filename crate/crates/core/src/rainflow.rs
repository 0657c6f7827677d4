//! Rainflow cycle identification on SoC series and cycle-aging cost.
//!
//! The counter is the classic four-point stack algorithm: the series is first
//! reduced to its local extrema, matched inner ranges are extracted as full
//! cycles, and the leftover residue is counted as half cycles. A half cycle
//! carries half the aging stress of a full cycle of the same depth.
//!
//! Depths are normalized state-of-charge fractions (energy divided by the
//! rated capacity), so the stress function and the aging cost below expect
//! inputs in [0, 1].

use std::io::Write;

use thiserror::Error;

use crate::battery::BatterySpec;

/// Two consecutive samples closer than this are treated as equal when
/// reducing the series to extrema.
pub const EXTREMA_EQ_TOL: f64 = 1e-12;

/// Slack allowed above a depth of exactly 1 before it counts as out of range.
pub const DEPTH_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RainflowError {
    #[error("empty SoC series")]
    EmptySeries,
    #[error("cycle depth {0} outside [0, 1]")]
    OutOfRangeDepth(f64),
    #[error("stress exponent {0} must exceed 1 for a monotone stress derivative")]
    NonMonotoneStress(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CycleKind {
    Full,
    Half,
}

impl CycleKind {
    pub fn weight(self) -> f64 {
        match self {
            CycleKind::Full => 1.0,
            CycleKind::Half => 0.5,
        }
    }
}

/// One identified cycle: a depth in SoC fraction and a full/half weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cycle {
    pub depth: f64,
    pub kind: CycleKind,
}

/// Ordered rainflow decomposition of one SoC series.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleSet {
    pub cycles: Vec<Cycle>,
    pub source_length: usize,
}

impl CycleSet {
    /// Sum of depth times weight; equals half the total variation of the
    /// source series.
    pub fn weighted_depth_sum(&self) -> f64 {
        self.cycles
            .iter()
            .map(|c| c.depth * c.kind.weight())
            .sum()
    }

    /// Fractional cycle-life loss of the whole set under the battery's
    /// stress curve.
    pub fn life_loss(&self, spec: &BatterySpec) -> Result<f64, RainflowError> {
        let mut total = 0.0;
        for c in &self.cycles {
            total += c.kind.weight() * stress(c.depth, spec)?;
        }
        Ok(total)
    }

    /// Writes the set as `depth,weight` CSV rows.
    pub fn write_csv<W: Write>(&self, mut w: W, meta: &str) -> std::io::Result<()> {
        if !meta.is_empty() {
            writeln!(w, "# {meta}")?;
        }
        writeln!(w, "depth,weight")?;
        for c in &self.cycles {
            writeln!(w, "{},{}", c.depth, c.kind.weight())?;
        }
        Ok(())
    }
}

/// Reduces a series to its sequence of local extrema. Consecutive samples
/// equal within `EXTREMA_EQ_TOL` collapse, and interior points that continue a
/// monotone run are dropped.
fn extrema(series: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(series.len().min(64));
    for &x in series {
        if let Some(&last) = out.last() {
            if (x - last).abs() <= EXTREMA_EQ_TOL {
                continue;
            }
        }
        while out.len() >= 2 {
            let a = out[out.len() - 2];
            let b = out[out.len() - 1];
            if (b - a) * (x - b) > 0.0 {
                out.pop();
            } else {
                break;
            }
        }
        out.push(x);
    }
    out
}

/// Four-point rainflow decomposition of a normalized SoC series.
///
/// Matched inner ranges leave the stack as full cycles. While the stack holds
/// only the series start and two later extrema, a range touching the start
/// that is met or exceeded by the following range can never be closed into a
/// full cycle, so it leaves as a half cycle immediately; this keeps tie cases
/// consistent with the standard counting procedure. Whatever remains at the
/// end is the residue, counted as half cycles.
pub fn rainflow(soc: &[f64]) -> Result<CycleSet, RainflowError> {
    if soc.is_empty() {
        return Err(RainflowError::EmptySeries);
    }
    let turning = extrema(soc);
    let mut stack: Vec<f64> = Vec::with_capacity(turning.len());
    let mut cycles: Vec<Cycle> = Vec::new();

    for &x in &turning {
        stack.push(x);
        loop {
            let n = stack.len();
            if n >= 4 {
                let outer_left = (stack[n - 3] - stack[n - 4]).abs();
                let inner = (stack[n - 2] - stack[n - 3]).abs();
                let outer_right = (stack[n - 1] - stack[n - 2]).abs();
                if inner <= outer_left && inner <= outer_right {
                    cycles.push(Cycle {
                        depth: inner,
                        kind: CycleKind::Full,
                    });
                    stack.remove(n - 3);
                    stack.remove(n - 3);
                    continue;
                }
            } else if n == 3 {
                let front = (stack[1] - stack[0]).abs();
                let recent = (stack[2] - stack[1]).abs();
                if recent >= front {
                    cycles.push(Cycle {
                        depth: front,
                        kind: CycleKind::Half,
                    });
                    stack.remove(0);
                    continue;
                }
            }
            break;
        }
    }
    for pair in stack.windows(2) {
        cycles.push(Cycle {
            depth: (pair[1] - pair[0]).abs(),
            kind: CycleKind::Half,
        });
    }
    Ok(CycleSet {
        cycles,
        source_length: soc.len(),
    })
}

/// Life fraction consumed by one full cycle of the given depth:
/// `stress_k * depth^stress_alpha`.
pub fn stress(depth: f64, spec: &BatterySpec) -> Result<f64, RainflowError> {
    if !(0.0..=1.0 + DEPTH_TOL).contains(&depth) {
        return Err(RainflowError::OutOfRangeDepth(depth));
    }
    let u = depth.min(1.0);
    Ok(spec.stress_k * u.powf(spec.stress_alpha))
}

/// Aging cost in $ of a normalized SoC series: capacity times replacement
/// cost times the weighted stress of every identified cycle.
pub fn aging_cost(soc: &[f64], spec: &BatterySpec) -> Result<f64, RainflowError> {
    let set = rainflow(soc)?;
    Ok(spec.energy_mwh * spec.replacement_cost_per_mwh * set.life_loss(spec)?)
}

/// Derivative of the stress function, `k*alpha*u^(alpha-1)`.
pub fn phi_derivative(depth: f64, spec: &BatterySpec) -> Result<f64, RainflowError> {
    if spec.stress_alpha <= 1.0 {
        return Err(RainflowError::NonMonotoneStress(spec.stress_alpha));
    }
    Ok(spec.stress_k * spec.stress_alpha * depth.max(0.0).powf(spec.stress_alpha - 1.0))
}

/// Inverse of [`phi_derivative`], clipped into [0, 1]. For the power-law
/// stress curve the inverse is closed-form; a non-power-law extension would
/// swap in a bisection here without changing callers.
pub fn phi_derivative_inverse(y: f64, spec: &BatterySpec) -> Result<f64, RainflowError> {
    if spec.stress_alpha <= 1.0 {
        return Err(RainflowError::NonMonotoneStress(spec.stress_alpha));
    }
    if y <= 0.0 {
        return Ok(0.0);
    }
    let raw = (y / (spec.stress_k * spec.stress_alpha)).powf(1.0 / (spec.stress_alpha - 1.0));
    Ok(raw.min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> BatterySpec {
        BatterySpec::new(10.0, 3.0, 0.3, 2.85, 0.95, 300_000.0, 1.57e-3, 2.03).unwrap()
    }

    fn spec_with_eta(eta: f64) -> BatterySpec {
        BatterySpec::new(10.0, 3.0, 0.3, 2.85, eta, 300_000.0, 1.57e-3, 2.03).unwrap()
    }

    #[test]
    fn single_point_has_no_cycles() {
        let set = rainflow(&[0.5]).unwrap();
        assert!(set.cycles.is_empty());
        assert_eq!(set.source_length, 1);
    }

    #[test]
    fn empty_series_is_an_error() {
        assert!(matches!(rainflow(&[]), Err(RainflowError::EmptySeries)));
    }

    #[test]
    fn triangle_counts_as_two_half_cycles() {
        let set = rainflow(&[0.2, 0.8, 0.2]).unwrap();
        assert_eq!(set.cycles.len(), 2);
        for c in &set.cycles {
            assert_eq!(c.kind, CycleKind::Half);
            assert!((c.depth - 0.6).abs() < 1e-15);
        }
        assert!((set.weighted_depth_sum() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn monotone_segment_is_one_half_cycle() {
        let set = rainflow(&[0.1, 0.2, 0.35, 0.5, 0.9]).unwrap();
        assert_eq!(set.cycles.len(), 1);
        assert_eq!(set.cycles[0].kind, CycleKind::Half);
        assert!((set.cycles[0].depth - 0.8).abs() < 1e-15);
    }

    #[test]
    fn inner_range_is_extracted_as_full_cycle() {
        let set = rainflow(&[0.0, 0.6, 0.25, 0.45, 0.05]).unwrap();
        let fulls: Vec<&Cycle> = set
            .cycles
            .iter()
            .filter(|c| c.kind == CycleKind::Full)
            .collect();
        assert_eq!(fulls.len(), 1);
        assert!((fulls[0].depth - 0.2).abs() < 1e-15);
        let halves: Vec<f64> = set
            .cycles
            .iter()
            .filter(|c| c.kind == CycleKind::Half)
            .map(|c| c.depth)
            .collect();
        assert_eq!(halves.len(), 2);
        assert!((halves[0] - 0.6).abs() < 1e-15);
        assert!((halves[1] - 0.55).abs() < 1e-15);
    }

    #[test]
    fn weighted_depth_sum_equals_half_total_variation() {
        let series = [0.5_f64, 0.62, 0.4, 0.45, 0.2, 0.8, 0.55, 0.7, 0.3];
        let tv: f64 = series.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        let set = rainflow(&series).unwrap();
        assert!((set.weighted_depth_sum() - 0.5 * tv).abs() < 1e-9);
    }

    #[test]
    fn repeated_samples_do_not_change_the_count() {
        let series = [0.5, 0.62, 0.4, 0.45, 0.2, 0.8, 0.55];
        let stretched: Vec<f64> = series.iter().flat_map(|&x| [x, x, x]).collect();
        let a = rainflow(&series).unwrap();
        let b = rainflow(&stretched).unwrap();
        assert_eq!(a.cycles, b.cycles);
    }

    #[test]
    fn stress_matches_cycle_life_parameters() {
        let s = spec();
        assert_eq!(stress(0.0, &s).unwrap(), 0.0);
        // 1000 cycles at 80% depth: one 0.8 cycle costs about 1/1000 of life.
        let phi08 = stress(0.8, &s).unwrap();
        assert!((phi08 - 1e-3).abs() / 1e-3 < 0.01, "phi(0.8)={phi08}");
        let phi01 = stress(0.1, &s).unwrap();
        assert!((phi01 - 1.465e-5).abs() < 1e-8);
        assert!(matches!(
            stress(-0.1, &s),
            Err(RainflowError::OutOfRangeDepth(_))
        ));
        assert!(matches!(
            stress(1.1, &s),
            Err(RainflowError::OutOfRangeDepth(_))
        ));
    }

    #[test]
    fn aging_cost_of_constant_series_is_zero() {
        let s = spec();
        assert_eq!(aging_cost(&[0.4; 10], &s).unwrap(), 0.0);
        // Any actual movement costs something.
        assert!(aging_cost(&[0.4, 0.41, 0.4], &s).unwrap() > 0.0);
    }

    #[test]
    fn splitting_a_cycle_never_increases_cost() {
        let s = spec();
        let mut state = 0xFA712u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..2000 {
            let u = next().max(1e-6);
            let split = next() * u;
            let whole = stress(u, &s).unwrap();
            let parts = stress(split, &s).unwrap() + stress(u - split, &s).unwrap();
            assert!(
                parts <= whole + 1e-15,
                "splitting {u} into {split} + {} increased stress",
                u - split
            );
        }
    }

    #[test]
    fn aging_cost_of_single_cycles_matches_direct_evaluation() {
        let s = BatterySpec::new(10.0, 1.0, 0.0, 1.0, 0.95, 300_000.0, 1.57e-3, 2.03).unwrap();
        // One full 0.1-depth cycle (two matched halves close it): E*R*phi(0.1).
        let cost = aging_cost(&[0.5, 0.6, 0.5], &s).unwrap();
        let want = 300_000.0 * stress(0.1, &s).unwrap();
        assert!((cost - want).abs() < 1e-9);
        assert!((cost - 4.3956).abs() < 1e-3, "cost={cost}");
        let cost = aging_cost(&[0.1, 0.9, 0.1], &s).unwrap();
        let want = 300_000.0 * stress(0.8, &s).unwrap();
        assert!((cost - want).abs() < 1e-9);
        assert!((cost - 299.43).abs() < 0.01, "cost={cost}");
    }

    #[test]
    fn phi_inverse_round_trips_and_clips() {
        let s = spec();
        for y in [1e-5, 1e-4, 1e-3] {
            let u = phi_derivative_inverse(y, &s).unwrap();
            let back = phi_derivative(u, &s).unwrap();
            assert!((back - y).abs() / y < 1e-12);
        }
        let at_one = phi_derivative(1.0, &s).unwrap();
        assert_eq!(phi_derivative_inverse(at_one * 2.0, &s).unwrap(), 1.0);
        assert_eq!(phi_derivative_inverse(0.0, &s).unwrap(), 0.0);
    }

    #[test]
    fn phi_inverse_reproduces_optimal_depth_case() {
        // 2*50/300000 is the threshold argument for a $50/MWh penalty at
        // unit efficiency; the resulting depth is 11.1%.
        let s = spec_with_eta(1.0);
        let u = phi_derivative_inverse(2.0 * 50.0 / 300_000.0, &s).unwrap();
        assert!((u - 0.111).abs() < 2e-3, "u={u}");
    }

    #[test]
    fn non_convex_stress_is_rejected() {
        let mut s = spec();
        s.stress_alpha = 0.9;
        assert!(matches!(
            phi_derivative(0.5, &s),
            Err(RainflowError::NonMonotoneStress(_))
        ));
        assert!(matches!(
            phi_derivative_inverse(0.5, &s),
            Err(RainflowError::NonMonotoneStress(_))
        ));
    }

    #[test]
    fn csv_export_lists_depth_and_weight() {
        let set = rainflow(&[0.25, 0.75, 0.25]).unwrap();
        let mut buf = Vec::new();
        set.write_csv(&mut buf, "test").unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# test\ndepth,weight\n"));
        assert_eq!(text.matches("0.5,0.5").count(), 2);
    }
}
