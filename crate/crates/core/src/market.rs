//! Settlement simulator: per-period payment, aging, profit accounting and
//! multi-period backtests.
//!
//! Payment follows the pay-for-performance rule: the performance index scales
//! the capacity payment, and a period below the minimum index pays nothing at
//! all (while still incurring the aging its cycling caused). The mismatch
//! penalty is therefore embedded in the payment; `penalty_equiv` reports the
//! equivalent dollar amount separately for analysis.

use std::io::Write;

use thiserror::Error;

use crate::battery::BatterySpec;
use crate::bidding::BidCurve;
use crate::control::{run_policy, ControlError, PenaltyModel, PolicyKind, Trajectory};
use crate::performance::{performance_index, PerformanceConfig, PerformanceError};
use crate::signal::RegulationSignal;

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("trajectory length {trajectory} does not match signal length {signal}")]
    LengthMismatch { trajectory: usize, signal: usize },
    #[error("backtest needs at least one market period")]
    NoPeriods,
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Performance(#[from] PerformanceError),
}

/// One settlement period: its clearing price, signal realization, and the
/// capacity the participant cleared.
#[derive(Debug, Clone)]
pub struct MarketPeriod {
    pub period_id: u64,
    pub clearing_price: f64,
    pub signal: RegulationSignal,
    pub cleared_capacity_mw: f64,
}

/// Settled economics of one period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettlementResult {
    pub payment: f64,
    pub aging_cost: f64,
    /// Dollar value of the mismatch embedded in the payment:
    /// `delta*lambda*C*||Cr-b||_1/(C*||r||_1)`.
    pub penalty_equiv: f64,
    pub profit: f64,
    pub perf_index: f64,
    pub eligible: bool,
}

/// Settles one period from its trajectory. `relax_performance` drops the
/// eligibility cutoff (the capacity sweep uses it); the index itself is
/// always computed.
pub fn settle_period(
    period: &MarketPeriod,
    trajectory: &Trajectory,
    perf: &PerformanceConfig,
    relax_performance: bool,
) -> Result<SettlementResult, MarketError> {
    if trajectory.dispatch_mw.len() != period.signal.len() {
        return Err(MarketError::LengthMismatch {
            trajectory: trajectory.dispatch_mw.len(),
            signal: period.signal.len(),
        });
    }
    let idx = performance_index(
        &trajectory.instruction_mw,
        &trajectory.dispatch_mw,
        perf.delta,
    )?;
    let lambda = period.clearing_price;
    let capacity = period.cleared_capacity_mw;
    let eligible = idx.value >= perf.rho_min;
    let payment = if eligible || relax_performance {
        idx.value * lambda * capacity
    } else {
        0.0
    };
    let instructed: f64 = trajectory.instruction_mw.iter().map(|x| x.abs()).sum();
    let penalty_equiv = if instructed > 0.0 {
        perf.delta * lambda * capacity * trajectory.mismatch_mw / instructed
    } else {
        0.0
    };
    let aging = trajectory.aging_cost;
    Ok(SettlementResult {
        payment,
        aging_cost: aging,
        penalty_equiv,
        profit: payment - aging,
        perf_index: idx.value,
        eligible,
    })
}

/// How the expected clearing price feeding the threshold depth is formed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuLambdaSource {
    /// A fixed forecast.
    Fixed(f64),
    /// Trailing mean of realized clearing prices over up to `window` past
    /// periods; the first period falls back to its own realized price.
    TrailingMean { window: usize },
}

impl MuLambdaSource {
    fn estimate(&self, history: &[f64], current: f64) -> f64 {
        match self {
            MuLambdaSource::Fixed(v) => *v,
            MuLambdaSource::TrailingMean { window } => {
                if history.is_empty() {
                    current
                } else {
                    let tail = &history[history.len().saturating_sub(*window)..];
                    tail.iter().sum::<f64>() / tail.len() as f64
                }
            }
        }
    }
}

/// Capacity-offer strategy for a backtest.
#[derive(Debug, Clone)]
pub enum BiddingStrategy {
    /// Always offer the same capacity, price-taker style.
    FixedCapacity(f64),
    /// Clear the largest bid-curve prefix priced at or below each period's
    /// clearing price.
    Curve(BidCurve),
}

#[derive(Debug, Clone)]
pub struct BacktestConfig {
    pub policy: PolicyKind,
    pub bidding: BiddingStrategy,
    pub perf: PerformanceConfig,
    pub mu_lambda: MuLambdaSource,
    /// Expected per-period mileage feeding the penalty price.
    pub mu_r: f64,
    pub relax_performance: bool,
    pub shelf_life_months: f64,
    /// Starting energy level; defaults to the window midpoint.
    pub initial_energy_mwh: Option<f64>,
    pub settlement_hours: f64,
}

/// Per-period backtest record, one CSV row.
#[derive(Debug, Clone, Copy)]
pub struct PeriodRecord {
    pub period_id: u64,
    pub lambda: f64,
    pub cleared_mw: f64,
    pub perf_index: f64,
    pub eligible: bool,
    pub payment: f64,
    pub aging: f64,
    pub profit: f64,
}

/// Aggregate rows of a backtest, mirroring the usual case-study summary
/// table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub periods: usize,
    pub market_income: f64,
    pub aging_cost: f64,
    pub operating_profit: f64,
    /// Mean index over periods with cleared capacity.
    pub avg_performance: f64,
    /// Cleared periods that missed the minimum index, in hours.
    pub hours_underperformance: f64,
    /// Sum of cleared capacity times settlement hours, in MW·h.
    pub total_capacity_mwh: f64,
    pub cumulative_life_loss: f64,
    pub life_expectancy_months: f64,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub records: Vec<PeriodRecord>,
    pub summary: Summary,
}

impl Report {
    /// Writes `period_id,lambda,cleared_mw,perf_index,eligible,payment,aging,profit`.
    pub fn write_csv<W: Write>(&self, mut w: W, meta: &str) -> std::io::Result<()> {
        if !meta.is_empty() {
            writeln!(w, "# {meta}")?;
        }
        writeln!(
            w,
            "period_id,lambda,cleared_mw,perf_index,eligible,payment,aging,profit"
        )?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.period_id,
                r.lambda,
                r.cleared_mw,
                r.perf_index,
                r.eligible,
                r.payment,
                r.aging,
                r.profit
            )?;
        }
        Ok(())
    }

    /// Writes the summary as a small JSON object.
    pub fn write_summary_json<W: Write>(&self, mut w: W, meta: &str) -> std::io::Result<()> {
        let s = &self.summary;
        writeln!(w, "{{")?;
        if !meta.is_empty() {
            writeln!(w, "  \"meta\": \"{meta}\",")?;
        }
        writeln!(w, "  \"periods\": {},", s.periods)?;
        writeln!(w, "  \"market_income\": {},", s.market_income)?;
        writeln!(w, "  \"aging_cost\": {},", s.aging_cost)?;
        writeln!(w, "  \"operating_profit\": {},", s.operating_profit)?;
        writeln!(w, "  \"avg_performance\": {},", s.avg_performance)?;
        writeln!(
            w,
            "  \"hours_underperformance\": {},",
            s.hours_underperformance
        )?;
        writeln!(w, "  \"total_capacity_mwh\": {},", s.total_capacity_mwh)?;
        writeln!(w, "  \"cumulative_life_loss\": {},", s.cumulative_life_loss)?;
        writeln!(
            w,
            "  \"life_expectancy_months\": {}",
            s.life_expectancy_months
        )?;
        writeln!(w, "}}")
    }
}

const HOURS_PER_MONTH: f64 = 8760.0 / 12.0;

/// Shelf-life-capped projection of battery life from the cycle-life loss
/// accumulated so far.
pub fn life_expectancy(
    cumulative_life_loss: f64,
    elapsed_months: f64,
    shelf_life_months: f64,
) -> f64 {
    if cumulative_life_loss <= 0.0 {
        return shelf_life_months;
    }
    shelf_life_months.min(elapsed_months / cumulative_life_loss)
}

/// Runs a sequential backtest over time-ordered periods. The SoC carries
/// over from period to period; the threshold depth is recomputed at each
/// period boundary from the price expectation, and the running min/max marks
/// reset with it.
pub fn backtest(
    periods: &[MarketPeriod],
    spec: &BatterySpec,
    cfg: &BacktestConfig,
) -> Result<Report, MarketError> {
    if periods.is_empty() {
        return Err(MarketError::NoPeriods);
    }
    let mut energy = cfg.initial_energy_mwh.unwrap_or_else(|| spec.midpoint_mwh());
    let mut price_history: Vec<f64> = Vec::with_capacity(periods.len());
    let mut records = Vec::with_capacity(periods.len());

    let mut income = 0.0;
    let mut aging_total = 0.0;
    let mut life_loss = 0.0;
    let mut perf_sum = 0.0;
    let mut cleared_periods = 0usize;
    let mut under_hours = 0.0;
    let mut capacity_mwh = 0.0;

    for period in periods {
        let lambda = period.clearing_price;
        let mu_lambda = cfg.mu_lambda.estimate(&price_history, lambda);
        let cleared = match &cfg.bidding {
            BiddingStrategy::FixedCapacity(c) => *c,
            BiddingStrategy::Curve(curve) => curve.cleared_at(lambda),
        };
        price_history.push(lambda);

        if cleared <= 0.0 {
            records.push(PeriodRecord {
                period_id: period.period_id,
                lambda,
                cleared_mw: 0.0,
                perf_index: 1.0,
                eligible: true,
                payment: 0.0,
                aging: 0.0,
                profit: 0.0,
            });
            continue;
        }

        let penalty = PenaltyModel::new(
            cfg.perf.delta,
            mu_lambda,
            cfg.mu_r,
            period.signal.interval_hours,
        )?;
        let traj = run_policy(&period.signal, cleared, spec, &penalty, energy, cfg.policy)?;
        let settled_period = MarketPeriod {
            cleared_capacity_mw: cleared,
            signal: period.signal.clone(),
            ..*period
        };
        let settled = settle_period(&settled_period, &traj, &cfg.perf, cfg.relax_performance)?;
        energy = traj.final_energy_mwh();

        income += settled.payment;
        aging_total += settled.aging_cost;
        life_loss +=
            settled.aging_cost / (spec.energy_mwh * spec.replacement_cost_per_mwh);
        perf_sum += settled.perf_index;
        cleared_periods += 1;
        if !settled.eligible {
            under_hours += cfg.settlement_hours;
        }
        capacity_mwh += cleared * cfg.settlement_hours;

        records.push(PeriodRecord {
            period_id: period.period_id,
            lambda,
            cleared_mw: cleared,
            perf_index: settled.perf_index,
            eligible: settled.eligible,
            payment: settled.payment,
            aging: settled.aging_cost,
            profit: settled.profit,
        });
    }

    let elapsed_months = periods.len() as f64 * cfg.settlement_hours / HOURS_PER_MONTH;
    let summary = Summary {
        periods: periods.len(),
        market_income: income,
        aging_cost: aging_total,
        operating_profit: income - aging_total,
        avg_performance: if cleared_periods > 0 {
            perf_sum / cleared_periods as f64
        } else {
            0.0
        },
        hours_underperformance: under_hours,
        total_capacity_mwh: capacity_mwh,
        cumulative_life_loss: life_loss,
        life_expectancy_months: life_expectancy(life_loss, elapsed_months, cfg.shelf_life_months),
    };
    Ok(Report { records, summary })
}

/// One row of a capacity sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepRow {
    pub capacity_mw: f64,
    pub policy: PolicyKind,
    pub market_income: f64,
    pub penalty_equiv: f64,
    pub aging_cost: f64,
    pub operating_profit: f64,
}

/// Profit-vs-capacity table for both policies with the performance
/// constraint relaxed.
pub fn capacity_sweep(
    periods: &[MarketPeriod],
    capacities_mw: &[f64],
    spec: &BatterySpec,
    cfg: &BacktestConfig,
) -> Result<Vec<SweepRow>, MarketError> {
    let mut rows = Vec::with_capacity(capacities_mw.len() * 2);
    for &c in capacities_mw {
        for policy in [PolicyKind::Proposed, PolicyKind::Simple] {
            if c == 0.0 {
                rows.push(SweepRow {
                    capacity_mw: 0.0,
                    policy,
                    market_income: 0.0,
                    penalty_equiv: 0.0,
                    aging_cost: 0.0,
                    operating_profit: 0.0,
                });
                continue;
            }
            let run_cfg = BacktestConfig {
                policy,
                bidding: BiddingStrategy::FixedCapacity(c),
                relax_performance: true,
                ..cfg.clone()
            };
            let report = backtest(periods, spec, &run_cfg)?;
            // Recover the penalty-equivalent total from the records.
            let penalty_equiv: f64 = report
                .records
                .iter()
                .map(|r| r.lambda * r.cleared_mw - r.payment)
                .sum();
            rows.push(SweepRow {
                capacity_mw: c,
                policy,
                market_income: report.summary.market_income,
                penalty_equiv,
                aging_cost: report.summary.aging_cost,
                operating_profit: report.summary.operating_profit,
            });
        }
    }
    Ok(rows)
}

/// Writes sweep rows as `capacity_mw,policy,income,penalty_equiv,aging,profit`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W, meta: &str) -> std::io::Result<()> {
    if !meta.is_empty() {
        writeln!(w, "# {meta}")?;
    }
    writeln!(w, "capacity_mw,policy,income,penalty_equiv,aging,profit")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.capacity_mw,
            match r.policy {
                PolicyKind::Proposed => "proposed",
                PolicyKind::Simple => "simple",
            },
            r.market_income,
            r.penalty_equiv,
            r.aging_cost,
            r.operating_profit
        )?;
    }
    Ok(())
}
