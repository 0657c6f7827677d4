//! Online regulation-response policies, the offline brute-force comparator,
//! and the analytic regret bound.
//!
//! The proposed policy tracks the running minimum and maximum energy level
//! and stops following the regulation instruction once their distance reaches
//! the optimal cycle depth `u_hat`, which balances the marginal mismatch
//! penalty against the marginal cycle-aging cost. The simple benchmark policy
//! is the same loop with `u_hat` fixed at 1, i.e. it uses the whole usable
//! window and ignores aging.

use std::io::Write;

use thiserror::Error;

use crate::battery::{self, BatterySpec, BatteryState};
use crate::rainflow::{self, RainflowError};
use crate::signal::RegulationSignal;
use crate::BOUNDS_TOL;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("empty regulation signal")]
    SignalEmpty,
    #[error("regulation capacity {capacity_mw} MW outside [0, {rating_mw}] MW")]
    InvalidCapacity { capacity_mw: f64, rating_mw: f64 },
    #[error("invalid penalty model: {0}")]
    InvalidPenalty(String),
    #[error(
        "oracle instance too large: {paths} paths exceed budget {budget} \
         (T={steps}, q={levels})"
    )]
    InstanceTooLarge {
        paths: u128,
        budget: u128,
        steps: usize,
        levels: usize,
    },
    #[error(transparent)]
    Stress(#[from] RainflowError),
    #[error(transparent)]
    Battery(#[from] battery::BatteryError),
}

/// Mismatch-penalty model: the expected clearing price, expected per-period
/// mileage and performance weight combine into the penalty price
/// `pi = delta * mu_lambda / (mu_r * M)` in $/MWh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyModel {
    pub delta: f64,
    pub mu_lambda: f64,
    pub mu_r: f64,
    pub interval_hours: f64,
}

impl PenaltyModel {
    pub fn new(
        delta: f64,
        mu_lambda: f64,
        mu_r: f64,
        interval_hours: f64,
    ) -> Result<Self, ControlError> {
        if !(0.0..=1.0).contains(&delta) {
            return Err(ControlError::InvalidPenalty(format!(
                "delta must be in [0, 1], got {delta}"
            )));
        }
        if !(mu_lambda >= 0.0) {
            return Err(ControlError::InvalidPenalty(format!(
                "mu_lambda must be >= 0, got {mu_lambda}"
            )));
        }
        if !(mu_r > 0.0) {
            return Err(ControlError::InvalidPenalty(format!(
                "mu_r must be > 0, got {mu_r}"
            )));
        }
        if !(interval_hours > 0.0) {
            return Err(ControlError::InvalidPenalty(format!(
                "interval_hours must be > 0, got {interval_hours}"
            )));
        }
        Ok(Self {
            delta,
            mu_lambda,
            mu_r,
            interval_hours,
        })
    }

    /// Constructs the model directly from a penalty price in $/MWh, leaving
    /// the expectations at placeholder values consistent with it.
    pub fn from_pi(pi: f64, interval_hours: f64) -> Result<Self, ControlError> {
        // pi = delta * mu_lambda / (mu_r * M) with delta = 1, mu_r = 1.
        Self::new(1.0, pi * interval_hours, 1.0, interval_hours)
    }

    /// Penalty price in $/MWh, derived from the expectations on demand so it
    /// can never go stale.
    pub fn pi(&self) -> f64 {
        self.delta * self.mu_lambda / (self.mu_r * self.interval_hours)
    }
}

/// Which response policy to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    /// Threshold policy with the optimal cycle depth.
    Proposed,
    /// Benchmark: full usable window, no aging awareness (`u_hat` = 1).
    Simple,
}

/// Optimal cycle depth `u_hat = phi^-1((eta^2+1)/(eta*R) * pi)`, clipped to
/// [0, 1].
pub fn optimal_cycle_depth(penalty: &PenaltyModel, spec: &BatterySpec) -> Result<f64, ControlError> {
    let eta = spec.efficiency;
    let arg = (eta * eta + 1.0) * penalty.pi() / (eta * spec.replacement_cost_per_mwh);
    Ok(rainflow::phi_derivative_inverse(arg, spec)?)
}

/// Running min/max energy marks and the SoC bounds they induce.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlState {
    pub e_running_max: f64,
    pub e_running_min: f64,
    pub e_hi_g: f64,
    pub e_lo_g: f64,
    pub u_hat: f64,
}

impl ControlState {
    pub fn new(e0_mwh: f64, u_hat: f64, spec: &BatterySpec) -> Self {
        let mut state = Self {
            e_running_max: e0_mwh,
            e_running_min: e0_mwh,
            e_hi_g: 0.0,
            e_lo_g: 0.0,
            u_hat,
        };
        state.refresh_bounds(spec);
        state
    }

    /// Folds the current energy level into the running marks and recomputes
    /// the dynamic bounds.
    pub fn observe(&mut self, energy_mwh: f64, spec: &BatterySpec) {
        self.e_running_max = self.e_running_max.max(energy_mwh);
        self.e_running_min = self.e_running_min.min(energy_mwh);
        self.refresh_bounds(spec);
    }

    fn refresh_bounds(&mut self, spec: &BatterySpec) {
        let span = self.u_hat * spec.energy_mwh;
        self.e_hi_g = spec.e_max_mwh.min(self.e_running_min + span);
        self.e_lo_g = spec.e_min_mwh.max(self.e_running_max - span);
    }
}

/// One step of the threshold policy: update the marks with the current energy
/// level, refresh the bounds, and clamp the instruction into them. Returns
/// the dispatch and advances the battery state.
pub fn policy_step(
    ctrl: &mut ControlState,
    state: &mut BatteryState,
    instruction_mw: f64,
    spec: &BatterySpec,
    interval_hours: f64,
) -> Result<f64, ControlError> {
    ctrl.observe(state.energy_mwh, spec);
    let dispatch = battery::clamp_dispatch(
        state,
        instruction_mw,
        ctrl.e_lo_g,
        ctrl.e_hi_g,
        interval_hours,
        spec,
    );
    *state = battery::step(state, dispatch, interval_hours, spec)?;
    Ok(dispatch)
}

/// Full per-period record of one policy run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Scaled instruction series `C*r_t` in MW.
    pub instruction_mw: Vec<f64>,
    /// Dispatched power in MW, same length as the instructions.
    pub dispatch_mw: Vec<f64>,
    /// Energy level in MWh, one longer than the dispatch series (includes the
    /// starting level).
    pub energy_mwh: Vec<f64>,
    /// Dynamic bounds `(E_lo_g, E_hi_g)` active at each step.
    pub bounds_mwh: Vec<(f64, f64)>,
    /// Total absolute mismatch `sum |C*r_t - b_t|` in MW.
    pub mismatch_mw: f64,
    /// Mismatch penalty `pi * M * mismatch` in $.
    pub penalty_cost: f64,
    /// Rainflow aging cost of the period's SoC trace in $.
    pub aging_cost: f64,
    /// Threshold depth the run used.
    pub u_hat: f64,
    pub capacity_mw: f64,
    pub interval_hours: f64,
}

impl Trajectory {
    /// Policy objective value: mismatch penalty plus aging cost.
    pub fn policy_cost(&self) -> f64 {
        self.penalty_cost + self.aging_cost
    }

    /// Final energy level in MWh.
    pub fn final_energy_mwh(&self) -> f64 {
        *self.energy_mwh.last().expect("trajectory has a start level")
    }

    /// Normalized SoC trace (energy over rated capacity).
    pub fn soc(&self, spec: &BatterySpec) -> Vec<f64> {
        self.energy_mwh
            .iter()
            .map(|e| e / spec.energy_mwh)
            .collect()
    }

    /// Writes `t,r,instruction_mw,dispatch_mw,soc,e_hi_g,e_lo_g` rows.
    pub fn write_csv<W: Write>(
        &self,
        mut w: W,
        spec: &BatterySpec,
        meta: &str,
    ) -> std::io::Result<()> {
        if !meta.is_empty() {
            writeln!(w, "# {meta}")?;
        }
        writeln!(w, "t,r,instruction_mw,dispatch_mw,soc,E_hi_g,E_lo_g")?;
        for t in 0..self.dispatch_mw.len() {
            let r = if self.capacity_mw > 0.0 {
                self.instruction_mw[t] / self.capacity_mw
            } else {
                0.0
            };
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                t,
                r,
                self.instruction_mw[t],
                self.dispatch_mw[t],
                self.energy_mwh[t + 1] / spec.energy_mwh,
                self.bounds_mwh[t].1,
                self.bounds_mwh[t].0,
            )?;
        }
        Ok(())
    }
}

/// Runs one policy over a regulation signal at the given cleared capacity.
pub fn run_policy(
    signal: &RegulationSignal,
    capacity_mw: f64,
    spec: &BatterySpec,
    penalty: &PenaltyModel,
    e0_mwh: f64,
    kind: PolicyKind,
) -> Result<Trajectory, ControlError> {
    if signal.samples.is_empty() {
        return Err(ControlError::SignalEmpty);
    }
    if !(0.0..=spec.power_mw * (1.0 + BOUNDS_TOL)).contains(&capacity_mw) {
        return Err(ControlError::InvalidCapacity {
            capacity_mw,
            rating_mw: spec.power_mw,
        });
    }
    let u_hat = match kind {
        PolicyKind::Proposed => optimal_cycle_depth(penalty, spec)?,
        PolicyKind::Simple => 1.0,
    };
    let m = signal.interval_hours;
    let n = signal.samples.len();

    let mut ctrl = ControlState::new(e0_mwh, u_hat, spec);
    let mut state = BatteryState::new(e0_mwh);
    let mut instruction = Vec::with_capacity(n);
    let mut dispatch = Vec::with_capacity(n);
    let mut energy = Vec::with_capacity(n + 1);
    let mut bounds = Vec::with_capacity(n);
    let mut mismatch = 0.0;
    energy.push(e0_mwh);

    for &r in &signal.samples {
        let cr = capacity_mw * r;
        let b = policy_step(&mut ctrl, &mut state, cr, spec, m)?;
        mismatch += (cr - b).abs();
        instruction.push(cr);
        dispatch.push(b);
        bounds.push((ctrl.e_lo_g, ctrl.e_hi_g));
        energy.push(state.energy_mwh);
    }

    let soc: Vec<f64> = energy.iter().map(|e| e / spec.energy_mwh).collect();
    let aging = rainflow::aging_cost(&soc, spec)?;
    Ok(Trajectory {
        instruction_mw: instruction,
        dispatch_mw: dispatch,
        energy_mwh: energy,
        bounds_mwh: bounds,
        mismatch_mw: mismatch,
        penalty_cost: penalty.pi() * m * mismatch,
        aging_cost: aging,
        u_hat,
        capacity_mw,
        interval_hours: m,
    })
}

/// Result of the exhaustive offline search.
#[derive(Debug, Clone)]
pub struct OracleResult {
    /// Minimum objective value `pi*M*||Cr-b||_1 + A(b)` over the candidate
    /// set.
    pub cost: f64,
    /// Dispatch sequence achieving it.
    pub dispatch_mw: Vec<f64>,
    /// Number of complete paths evaluated.
    pub paths_evaluated: u64,
}

/// Default cap on `q^T` enumeration paths.
pub const DEFAULT_ORACLE_BUDGET: u128 = 1_000_000;
/// Default cap on the instance length.
pub const DEFAULT_ORACLE_MAX_T: usize = 8;

/// Exhaustive quantized offline comparator.
///
/// Each step's candidate dispatches are `q` evenly spaced levels between zero
/// and the instruction (sign-preserving, so the response never exceeds the
/// instruction), plus the online policy's own dispatch at that step. The
/// latter makes the candidate set a superset of the policy path, so the
/// returned cost is never above the policy's cost. Every complete path is
/// costed with a full rainflow pass, which is what makes the search exact up
/// to quantization: aging is path-dependent, so no per-step state shortcut
/// applies.
#[allow(clippy::too_many_arguments)]
pub fn offline_oracle(
    signal: &RegulationSignal,
    capacity_mw: f64,
    spec: &BatterySpec,
    penalty: &PenaltyModel,
    e0_mwh: f64,
    levels_q: usize,
    max_t: usize,
    budget_paths: u128,
) -> Result<OracleResult, ControlError> {
    if signal.samples.is_empty() {
        return Err(ControlError::SignalEmpty);
    }
    let steps = signal.samples.len();
    let q = levels_q.max(2);
    let paths = (q as u128)
        .checked_pow(steps as u32)
        .unwrap_or(u128::MAX);
    if steps > max_t || paths > budget_paths {
        return Err(ControlError::InstanceTooLarge {
            paths,
            budget: budget_paths,
            steps,
            levels: q,
        });
    }

    let reference = run_policy(signal, capacity_mw, spec, penalty, e0_mwh, PolicyKind::Proposed)?;
    let m = signal.interval_hours;
    let pi = penalty.pi();

    // Candidate levels per step: the quantization grid plus the policy's own
    // dispatch (deduplicated).
    let mut levels: Vec<Vec<f64>> = Vec::with_capacity(steps);
    for (t, &r) in signal.samples.iter().enumerate() {
        let cr = capacity_mw * r;
        let mut step_levels: Vec<f64> = (0..q)
            .map(|i| cr * (i as f64) / ((q - 1) as f64))
            .collect();
        let b_policy = reference.dispatch_mw[t];
        if step_levels
            .iter()
            .all(|&x| (x - b_policy).abs() > 1e-12 * capacity_mw.max(1.0))
        {
            step_levels.push(b_policy);
        }
        levels.push(step_levels);
    }

    struct Search<'a> {
        levels: &'a [Vec<f64>],
        spec: &'a BatterySpec,
        instruction: Vec<f64>,
        m: f64,
        pi: f64,
        energy: Vec<f64>,
        dispatch: Vec<f64>,
        soc_scratch: Vec<f64>,
        best_cost: f64,
        best_dispatch: Vec<f64>,
        paths: u64,
    }

    impl Search<'_> {
        fn descend(&mut self, depth: usize, mismatch_sum: f64) -> Result<(), ControlError> {
            if depth == self.levels.len() {
                self.paths += 1;
                self.soc_scratch.clear();
                self.soc_scratch
                    .extend(self.energy.iter().map(|e| e / self.spec.energy_mwh));
                let aging = rainflow::aging_cost(&self.soc_scratch, self.spec)?;
                let cost = self.pi * self.m * mismatch_sum + aging;
                if cost < self.best_cost {
                    self.best_cost = cost;
                    self.best_dispatch = self.dispatch.clone();
                }
                return Ok(());
            }
            let e = *self.energy.last().expect("energy stack is seeded");
            for i in 0..self.levels[depth].len() {
                let b = self.levels[depth][i];
                let next = e + battery::energy_delta_mwh(b, self.m, self.spec.efficiency);
                if next < self.spec.e_min_mwh - BOUNDS_TOL
                    || next > self.spec.e_max_mwh + BOUNDS_TOL
                {
                    continue;
                }
                self.energy.push(next);
                self.dispatch.push(b);
                let extra = (self.instruction[depth] - b).abs();
                self.descend(depth + 1, mismatch_sum + extra)?;
                self.energy.pop();
                self.dispatch.pop();
            }
            Ok(())
        }
    }

    let mut search = Search {
        levels: &levels,
        spec,
        instruction: signal.samples.iter().map(|r| capacity_mw * r).collect(),
        m,
        pi,
        energy: vec![e0_mwh],
        dispatch: Vec::with_capacity(steps),
        soc_scratch: Vec::with_capacity(steps + 1),
        best_cost: f64::INFINITY,
        best_dispatch: Vec::new(),
        paths: 0,
    };
    search.descend(0, 0.0)?;

    debug_assert!(search.best_cost <= reference.policy_cost() + 1e-9);
    Ok(OracleResult {
        cost: search.best_cost,
        dispatch_mw: search.best_dispatch,
        paths_evaluated: search.paths,
    })
}

/// Analytic worst-case regret of the threshold policy.
///
/// The bound prices the residue profile the rainflow pass can leave behind:
/// up to two charge half-cycles and one discharge half-cycle that the offline
/// comparator could instead have sized at their own optimal depths. With
/// `J_w(w) = eta*pi*E*w - E*R*Phi(w)/2` (charge half-cycle profit),
/// `J_v(v) = pi*E*v/eta - E*R*Phi(v)/2` (discharge half-cycle profit),
/// `w_hat = phi^-1(2*eta*pi/R)` and `v_hat = phi^-1(2*pi/(eta*R))` their
/// maximizers, the gap is
/// `2*(J_w(w_hat) - J_w(u_hat)) + (J_v(v_hat) - J_v(u_hat))`.
/// At unit efficiency `w_hat = v_hat = u_hat` and the bound collapses to
/// exactly zero.
pub fn regret_bound(penalty: &PenaltyModel, spec: &BatterySpec) -> Result<f64, ControlError> {
    let eta = spec.efficiency;
    let pi = penalty.pi();
    let e = spec.energy_mwh;
    let r = spec.replacement_cost_per_mwh;

    let u_hat = rainflow::phi_derivative_inverse((eta * eta + 1.0) * pi / (eta * r), spec)?;
    let v_hat = rainflow::phi_derivative_inverse(2.0 * pi / (eta * r), spec)?;
    let w_hat = rainflow::phi_derivative_inverse(2.0 * eta * pi / r, spec)?;

    let half_stress = |x: f64| -> Result<f64, ControlError> {
        Ok(0.5 * e * r * rainflow::stress(x, spec)?)
    };
    let j_v = |x: f64| -> Result<f64, ControlError> { Ok(pi * e * x / eta - half_stress(x)?) };
    let j_w = |x: f64| -> Result<f64, ControlError> { Ok(eta * pi * e * x - half_stress(x)?) };

    let eps = 2.0 * (j_w(w_hat)? - j_w(u_hat)?) + (j_v(v_hat)? - j_v(u_hat)?);
    Ok(eps.max(0.0))
}
