//! Battery energy storage participation in pay-for-performance frequency
//! regulation markets.
//!
//! The crate covers the full loop a regulation-market participant runs:
//!
//! - [`battery`]: storage data model and state-of-charge dynamics under dispatch.
//! - [`rainflow`]: cycle identification on SoC traces and the cycle-depth
//!   aging cost model.
//! - [`control`]: the online threshold response policy, a brute-force offline
//!   comparator, and the analytic regret bound.
//! - [`performance`]: regulation performance-index scoring (linear model and a
//!   three-score composite used by PJM-style markets).
//! - [`bidding`]: performance-confidence calibration, optimal regulation
//!   capacity, and marginal-priced bid-curve construction.
//! - [`market`]: per-period settlement and multi-period backtests.
//! - [`signal`]: regulation-signal ingestion, synthesis and statistics.
//! - [`config`]: the TOML run configuration shared with the CLI.

// Validations are written as negated comparisons on purpose: a NaN parameter
// must fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod battery;
pub mod bidding;
pub mod config;
pub mod control;
pub mod market;
pub mod performance;
pub mod rainflow;
pub mod signal;

pub use battery::{BatterySpec, BatteryState};
pub use bidding::{BidCurve, GammaCurve};
pub use control::{PenaltyModel, PolicyKind, Trajectory};
pub use market::{MarketPeriod, Report, SettlementResult};
pub use performance::PerformanceConfig;
pub use rainflow::{Cycle, CycleKind, CycleSet};
pub use signal::RegulationSignal;

/// Absolute tolerance used when checking energy-bound feasibility. Clamped
/// dispatch lands exactly on a bound in real arithmetic; this absorbs the
/// floating-point rounding of the update.
pub const BOUNDS_TOL: f64 = 1e-9;
