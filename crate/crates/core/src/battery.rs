//! Battery energy-storage data model and SoC dynamics under dispatch.
//!
//! Sign convention: positive dispatch charges the battery (raises the energy
//! level). Energy updates follow
//! `e' = e + M*eta*[b]+ - M*[-b]+/eta`,
//! so a charge of `b` MW over `M` hours stores `M*eta*b` MWh while a
//! discharge of `b` MW drains `M*b/eta` MWh.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::BOUNDS_TOL;

#[derive(Debug, Error)]
pub enum BatteryError {
    #[error("invalid battery spec: {0}")]
    InvalidSpec(String),
    #[error("dispatch {dispatch_mw} MW exceeds power rating {rating_mw} MW")]
    InvalidDispatch { dispatch_mw: f64, rating_mw: f64 },
    #[error("energy {energy_mwh} MWh outside bounds [{lo_mwh}, {hi_mwh}] MWh")]
    BoundsViolation {
        energy_mwh: f64,
        lo_mwh: f64,
        hi_mwh: f64,
    },
}

/// Static battery parameters: ratings, usable energy window, efficiency and
/// the cycle-depth stress curve of the cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatterySpec {
    /// Charge/discharge power rating in MW.
    pub power_mw: f64,
    /// Rated energy capacity in MWh; cycle depths are normalized by this.
    pub energy_mwh: f64,
    /// Upper usable energy limit in MWh.
    pub e_max_mwh: f64,
    /// Lower usable energy limit in MWh.
    pub e_min_mwh: f64,
    /// Single-trip charge or discharge efficiency, in (0, 1].
    pub efficiency: f64,
    /// Cell replacement cost in $/MWh.
    pub replacement_cost_per_mwh: f64,
    /// Stress-function coefficient: life loss of one full cycle of depth u is
    /// `stress_k * u^stress_alpha`.
    pub stress_k: f64,
    /// Stress-function exponent; must exceed 1 so the curve is strictly convex.
    pub stress_alpha: f64,
}

impl BatterySpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        power_mw: f64,
        energy_mwh: f64,
        e_min_mwh: f64,
        e_max_mwh: f64,
        efficiency: f64,
        replacement_cost_per_mwh: f64,
        stress_k: f64,
        stress_alpha: f64,
    ) -> Result<Self, BatteryError> {
        let spec = Self {
            power_mw,
            energy_mwh,
            e_max_mwh,
            e_min_mwh,
            efficiency,
            replacement_cost_per_mwh,
            stress_k,
            stress_alpha,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), BatteryError> {
        let fail = |msg: String| Err(BatteryError::InvalidSpec(msg));
        if !(self.power_mw > 0.0) {
            return fail(format!("power_mw must be > 0, got {}", self.power_mw));
        }
        if !(self.energy_mwh > 0.0) {
            return fail(format!("energy_mwh must be > 0, got {}", self.energy_mwh));
        }
        if !(0.0 <= self.e_min_mwh && self.e_min_mwh < self.e_max_mwh) {
            return fail(format!(
                "need 0 <= e_min < e_max, got e_min={} e_max={}",
                self.e_min_mwh, self.e_max_mwh
            ));
        }
        if self.e_max_mwh > self.energy_mwh * (1.0 + BOUNDS_TOL) {
            return fail(format!(
                "e_max {} exceeds energy capacity {}",
                self.e_max_mwh, self.energy_mwh
            ));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return fail(format!(
                "efficiency must be in (0, 1], got {}",
                self.efficiency
            ));
        }
        if !(self.replacement_cost_per_mwh > 0.0) {
            return fail(format!(
                "replacement_cost_per_mwh must be > 0, got {}",
                self.replacement_cost_per_mwh
            ));
        }
        if !(self.stress_k > 0.0) {
            return fail(format!("stress_k must be > 0, got {}", self.stress_k));
        }
        if !(self.stress_alpha > 1.0) {
            return fail(format!(
                "stress_alpha must be > 1 for a strictly convex stress curve, got {}",
                self.stress_alpha
            ));
        }
        Ok(())
    }

    /// Width of the usable energy window in MWh.
    pub fn usable_window_mwh(&self) -> f64 {
        self.e_max_mwh - self.e_min_mwh
    }

    /// Midpoint of the usable window; the default starting energy level.
    pub fn midpoint_mwh(&self) -> f64 {
        0.5 * (self.e_min_mwh + self.e_max_mwh)
    }
}

/// Battery operating state at one dispatch interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatteryState {
    pub energy_mwh: f64,
    pub interval: usize,
}

impl BatteryState {
    pub fn new(energy_mwh: f64) -> Self {
        Self {
            energy_mwh,
            interval: 0,
        }
    }
}

/// Advances the state of charge by one dispatch interval.
///
/// Fails with `InvalidDispatch` when the request exceeds the power rating and
/// with `BoundsViolation` when the update leaves the usable window; callers
/// are expected to run [`clamp_dispatch`] first.
pub fn step(
    state: &BatteryState,
    dispatch_mw: f64,
    interval_hours: f64,
    spec: &BatterySpec,
) -> Result<BatteryState, BatteryError> {
    if dispatch_mw.abs() > spec.power_mw * (1.0 + BOUNDS_TOL) {
        return Err(BatteryError::InvalidDispatch {
            dispatch_mw,
            rating_mw: spec.power_mw,
        });
    }
    let next = state.energy_mwh + energy_delta_mwh(dispatch_mw, interval_hours, spec.efficiency);
    if next < spec.e_min_mwh - BOUNDS_TOL || next > spec.e_max_mwh + BOUNDS_TOL {
        return Err(BatteryError::BoundsViolation {
            energy_mwh: next,
            lo_mwh: spec.e_min_mwh,
            hi_mwh: spec.e_max_mwh,
        });
    }
    Ok(BatteryState {
        energy_mwh: next,
        interval: state.interval + 1,
    })
}

/// Energy change in MWh caused by dispatching `b` MW for `M` hours.
pub fn energy_delta_mwh(dispatch_mw: f64, interval_hours: f64, efficiency: f64) -> f64 {
    if dispatch_mw >= 0.0 {
        interval_hours * efficiency * dispatch_mw
    } else {
        interval_hours * dispatch_mw / efficiency
    }
}

/// Largest sign-preserving dispatch that keeps the energy level inside
/// `[lo_mwh, hi_mwh]` after one interval, capped by the request and the power
/// rating. Total on valid bounds; charging is capped by the headroom to
/// `hi_mwh`, discharging by the room above `lo_mwh`.
pub fn clamp_dispatch(
    state: &BatteryState,
    requested_mw: f64,
    lo_mwh: f64,
    hi_mwh: f64,
    interval_hours: f64,
    spec: &BatterySpec,
) -> f64 {
    debug_assert!(lo_mwh <= hi_mwh + BOUNDS_TOL);
    let requested = requested_mw.clamp(-spec.power_mw, spec.power_mw);
    if requested >= 0.0 {
        let headroom_mw = (hi_mwh - state.energy_mwh) / (interval_hours * spec.efficiency);
        requested.min(headroom_mw).max(0.0)
    } else {
        let floor_mw = spec.efficiency * (lo_mwh - state.energy_mwh) / interval_hours;
        requested.max(floor_mw).min(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> BatterySpec {
        BatterySpec::new(10.0, 3.0, 0.3, 2.85, 0.95, 300_000.0, 1.57e-3, 2.03).unwrap()
    }

    #[test]
    fn zero_dispatch_is_identity() {
        let s = spec();
        let st = BatteryState::new(1.5);
        let next = step(&st, 0.0, 1.0 / 1800.0, &s).unwrap();
        assert_eq!(next.energy_mwh, 1.5);
        assert_eq!(next.interval, 1);
    }

    #[test]
    fn charge_follows_efficiency_weighted_update() {
        let s = spec();
        let st = BatteryState::new(1.0);
        let m = 1.0 / 1800.0;
        let next = step(&st, 2.0, m, &s).unwrap();
        assert!((next.energy_mwh - (1.0 + 2.0 * 0.95 / 1800.0)).abs() < 1e-15);
    }

    #[test]
    fn discharge_divides_by_efficiency() {
        let s = spec();
        let st = BatteryState::new(1.0);
        let m = 1.0 / 1800.0;
        let next = step(&st, -2.0, m, &s).unwrap();
        assert!((next.energy_mwh - (1.0 - 2.0 / (0.95 * 1800.0))).abs() < 1e-15);
    }

    #[test]
    fn step_rejects_over_rating_dispatch() {
        let s = spec();
        let st = BatteryState::new(1.0);
        assert!(matches!(
            step(&st, 11.0, 1.0, &s),
            Err(BatteryError::InvalidDispatch { .. })
        ));
    }

    #[test]
    fn step_rejects_bounds_violation() {
        let s = spec();
        let st = BatteryState::new(2.8);
        // One full hour of 10 MW charging overshoots e_max by a wide margin.
        assert!(matches!(
            step(&st, 10.0, 1.0, &s),
            Err(BatteryError::BoundsViolation { .. })
        ));
    }

    #[test]
    fn clamp_zero_request_is_zero() {
        let s = spec();
        let st = BatteryState::new(1.0);
        assert_eq!(clamp_dispatch(&st, 0.0, 0.3, 2.85, 1.0 / 1800.0, &s), 0.0);
    }

    #[test]
    fn clamp_saturated_upper_bound_returns_zero() {
        let s = spec();
        let st = BatteryState::new(2.85);
        assert_eq!(clamp_dispatch(&st, 5.0, 0.3, 2.85, 1.0 / 1800.0, &s), 0.0);
    }

    #[test]
    fn clamp_matches_headroom_formula() {
        let s = spec();
        let st = BatteryState::new(1.0);
        let got = clamp_dispatch(&st, 5.0, 0.3, 1.001, 1.0 / 1800.0, &s);
        let want = 0.001 * 1800.0 / 0.95;
        assert!((got - want).abs() < 1e-12, "got {got}, want {want}");
        // Stepping with the clamp result lands exactly on the bound.
        let next = step(&st, got, 1.0 / 1800.0, &s).unwrap();
        assert!((next.energy_mwh - 1.001).abs() < 1e-12);
    }

    #[test]
    fn round_trip_loses_eta_squared() {
        let s = spec();
        let m = 0.01;
        for x in [0.5_f64, 1.0, 2.0, 4.0] {
            // Charge at x MW for one interval, then discharge back to the
            // starting level; the discharged energy is eta^2 of the charged.
            let st = BatteryState::new(1.0);
            let charged = step(&st, x, m, &s).unwrap();
            let stored = charged.energy_mwh - 1.0;
            let discharge_mw = -stored * s.efficiency / m;
            let back = step(&charged, discharge_mw, m, &s).unwrap();
            assert!((back.energy_mwh - 1.0).abs() < 1e-12);
            let out_energy = -discharge_mw * m;
            let in_energy = x * m;
            assert!((out_energy / in_energy - s.efficiency * s.efficiency).abs() < 1e-12);
        }
    }

    #[test]
    fn step_is_linear_per_sign_branch() {
        let s = spec();
        let m = 0.01;
        for (b, scale) in [(3.0, 2.5), (-3.0, 2.5), (1.2, 0.5), (-1.2, 0.5)] {
            let base = step(&BatteryState::new(1.5), b, m, &s).unwrap().energy_mwh - 1.5;
            let scaled = step(&BatteryState::new(1.5), scale * b, m, &s)
                .unwrap()
                .energy_mwh
                - 1.5;
            assert!((scaled - scale * base).abs() < 1e-12);
        }
    }

    #[test]
    fn spec_rejects_inverted_window() {
        assert!(BatterySpec::new(10.0, 3.0, 2.9, 2.85, 0.95, 300_000.0, 1.57e-3, 2.03).is_err());
        assert!(BatterySpec::new(10.0, 3.0, 0.3, 3.2, 0.95, 300_000.0, 1.57e-3, 2.03).is_err());
        assert!(BatterySpec::new(10.0, 3.0, 0.3, 2.85, 0.95, 300_000.0, 1.57e-3, 1.0).is_err());
    }
}
