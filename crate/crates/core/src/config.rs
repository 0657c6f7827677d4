//! Run configuration: a single TOML file with battery, market, corpus and
//! experiment sections. Every field has a default, so commands run with no
//! config at all; the defaults describe a 10 MW / 3 MWh pack on a
//! two-second regulation product with hourly settlement.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::battery::{BatterySpec, BatteryError};
use crate::market::MuLambdaSource;
use crate::performance::{IndexMode, PerformanceConfig, PerformanceError};
use crate::signal::{self, RegulationSignal, SignalError, SignalKind};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config field error: {0}")]
    Field(String),
    #[error(transparent)]
    Battery(#[from] BatteryError),
    #[error(transparent)]
    Performance(#[from] PerformanceError),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct BatterySection {
    pub power_mw: f64,
    pub energy_mwh: f64,
    /// Usable state-of-charge limits as fractions of the rated capacity.
    pub soc_max: f64,
    pub soc_min: f64,
    pub efficiency: f64,
    pub replacement_cost_per_mwh: f64,
    pub stress_k: f64,
    pub stress_alpha: f64,
}

impl Default for BatterySection {
    fn default() -> Self {
        Self {
            power_mw: 10.0,
            energy_mwh: 3.0,
            soc_max: 0.95,
            soc_min: 0.10,
            efficiency: 0.95,
            replacement_cost_per_mwh: 300_000.0,
            stress_k: 1.57e-3,
            stress_alpha: 2.03,
        }
    }
}

impl BatterySection {
    pub fn to_spec(&self) -> Result<BatterySpec, ConfigError> {
        Ok(BatterySpec::new(
            self.power_mw,
            self.energy_mwh,
            self.soc_min * self.energy_mwh,
            self.soc_max * self.energy_mwh,
            self.efficiency,
            self.replacement_cost_per_mwh,
            self.stress_k,
            self.stress_alpha,
        )?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct MarketSection {
    /// Performance weight delta of the linear index.
    pub delta: f64,
    /// Index mode: "linear" or "pjm_approx" (which pins delta at 2/3).
    pub mode: IndexMode,
    pub rho_min: f64,
    /// Confidence level for the performance chance constraint.
    pub xi: f64,
    pub sample_interval_seconds: f64,
    pub settlement_hours: f64,
    /// Expected clearing price in $/MW when the source is "fixed".
    pub mu_lambda: f64,
    /// "fixed" or "trailing".
    pub mu_lambda_source: String,
    pub trailing_window: usize,
    /// Expected per-period mileage; 0 means "estimate from the corpus".
    pub mu_r: f64,
    pub relax_performance: bool,
    pub shelf_life_months: f64,
}

impl Default for MarketSection {
    fn default() -> Self {
        Self {
            delta: 2.0 / 3.0,
            mode: IndexMode::Linear,
            rho_min: 0.7,
            xi: 0.95,
            sample_interval_seconds: 2.0,
            settlement_hours: 1.0,
            mu_lambda: 25.0,
            mu_lambda_source: "fixed".into(),
            trailing_window: 168,
            mu_r: 0.0,
            relax_performance: false,
            shelf_life_months: 120.0,
        }
    }
}

impl MarketSection {
    pub fn interval_hours(&self) -> f64 {
        self.sample_interval_seconds / 3600.0
    }

    pub fn samples_per_period(&self) -> usize {
        (self.settlement_hours / self.interval_hours()).round() as usize
    }

    pub fn performance(&self) -> Result<PerformanceConfig, ConfigError> {
        Ok(PerformanceConfig::new(self.mode, self.delta, self.rho_min)?)
    }

    pub fn mu_lambda_source(&self) -> Result<MuLambdaSource, ConfigError> {
        match self.mu_lambda_source.as_str() {
            "fixed" => Ok(MuLambdaSource::Fixed(self.mu_lambda)),
            "trailing" => Ok(MuLambdaSource::TrailingMean {
                window: self.trailing_window,
            }),
            other => Err(ConfigError::Field(format!(
                "market.mu_lambda_source must be 'fixed' or 'trailing', got '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    /// "ou-process", "random-walk" or "csv".
    pub kind: String,
    pub seed: u64,
    pub periods: usize,
    /// Generator parameters.
    pub reversion_per_hour: f64,
    pub sigma_per_sqrt_hour: f64,
    pub step_sigma: f64,
    /// CSV paths when kind = "csv".
    pub paths: Vec<String>,
    /// Apply the efficiency-weighted zero-mean shift per period.
    pub debias: bool,
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self {
            kind: "ou-process".into(),
            seed: 42,
            periods: 200,
            reversion_per_hour: 12.0,
            sigma_per_sqrt_hour: 2.2,
            step_sigma: 0.05,
            paths: Vec::new(),
            debias: false,
        }
    }
}

impl CorpusSection {
    pub fn synthetic_kind(&self) -> Result<Option<SignalKind>, ConfigError> {
        match self.kind.as_str() {
            "ou-process" => Ok(Some(SignalKind::OuProcess {
                reversion_per_hour: self.reversion_per_hour,
                sigma_per_sqrt_hour: self.sigma_per_sqrt_hour,
            })),
            "random-walk" => Ok(Some(SignalKind::RandomWalk {
                step_sigma: self.step_sigma,
            })),
            "csv" => Ok(None),
            other => Err(ConfigError::Field(format!(
                "corpus.kind must be 'ou-process', 'random-walk' or 'csv', got '{other}'"
            ))),
        }
    }

    /// Builds the corpus: synthesized from the seed, or loaded from the CSV
    /// paths. Returns the signals plus a clipped-sample count for CSV loads.
    /// `eta` feeds the optional energy debias shift.
    pub fn build(
        &self,
        market: &MarketSection,
        eta: f64,
    ) -> Result<(Vec<RegulationSignal>, usize), ConfigError> {
        let m = market.interval_hours();
        let (mut signals, clipped) = match self.synthetic_kind()? {
            Some(kind) => (
                signal::synthesize_corpus(
                    &kind,
                    self.seed,
                    self.periods,
                    market.samples_per_period(),
                    m,
                )?,
                0,
            ),
            None => {
                if self.paths.is_empty() {
                    return Err(ConfigError::Field(
                        "corpus.kind = 'csv' needs at least one entry in corpus.paths".into(),
                    ));
                }
                let mut all = Vec::new();
                let mut clipped = 0;
                for path in &self.paths {
                    let loaded = signal::load_csv(path.as_ref(), m, market.settlement_hours)?;
                    clipped += loaded.clipped_samples;
                    all.extend(loaded.signals);
                }
                (all, clipped)
            }
        };
        if self.debias {
            for sig in signals.iter_mut() {
                *sig = signal::debias_energy(sig, eta)?;
            }
        }
        Ok((signals, clipped))
    }
}

/// One penalty/efficiency case for the threshold-depth table.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DepthCase {
    pub pi: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    /// Cases printed by the `uhat` command.
    pub uhat_cases: Vec<DepthCase>,
    /// Capacity for `simulate` and fixed-capacity backtests.
    pub capacity_mw: f64,
    /// Gamma grid for `calibrate`.
    pub gamma_min_hours: f64,
    pub gamma_max_hours: f64,
    pub gamma_steps: usize,
    /// Capacity segments offered by `bid`.
    pub bid_segments_mw: Vec<f64>,
    /// Backtest strategy: "proposed" or "simple".
    pub policy: String,
    /// Backtest bidding: "fixed" or "curve".
    pub bidding: String,
    /// Capacity grid for `sweep`.
    pub sweep_capacities_mw: Vec<f64>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            uhat_cases: vec![
                DepthCase { pi: 50.0, eta: 1.0 },
                DepthCase { pi: 100.0, eta: 1.0 },
                DepthCase { pi: 200.0, eta: 1.0 },
                DepthCase { pi: 50.0, eta: 0.92 },
                DepthCase { pi: 50.0, eta: 0.92 },
            ],
            capacity_mw: 10.0,
            gamma_min_hours: 0.0,
            gamma_max_hours: 0.4,
            gamma_steps: 21,
            bid_segments_mw: vec![1.0; 10],
            policy: "proposed".into(),
            bidding: "fixed".into(),
            sweep_capacities_mw: (1..=10).map(|c| c as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub battery: BatterySection,
    pub market: MarketSection,
    pub corpus: CorpusSection,
    pub experiment: ExperimentSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.battery.to_spec()?;
        self.market.performance()?;
        self.market.mu_lambda_source()?;
        if !(0.0 < self.market.xi && self.market.xi < 1.0) {
            return Err(ConfigError::Field(format!(
                "market.xi must be in (0, 1), got {}",
                self.market.xi
            )));
        }
        if !(self.market.sample_interval_seconds > 0.0) {
            return Err(ConfigError::Field(format!(
                "market.sample_interval_seconds must be > 0, got {}",
                self.market.sample_interval_seconds
            )));
        }
        if !(self.market.settlement_hours > 0.0) {
            return Err(ConfigError::Field(format!(
                "market.settlement_hours must be > 0, got {}",
                self.market.settlement_hours
            )));
        }
        let step = self.market.sample_interval_seconds;
        let period = self.market.settlement_hours * 3600.0;
        if (period / step - (period / step).round()).abs() > 1e-9 {
            return Err(ConfigError::Field(format!(
                "market.settlement_hours ({}) must be a whole number of samples of \
                 market.sample_interval_seconds ({})",
                self.market.settlement_hours, step
            )));
        }
        self.corpus.synthetic_kind()?;
        if self.experiment.gamma_steps < 2 {
            return Err(ConfigError::Field(format!(
                "experiment.gamma_steps must be at least 2, got {}",
                self.experiment.gamma_steps
            )));
        }
        if !(self.experiment.gamma_max_hours > self.experiment.gamma_min_hours) {
            return Err(ConfigError::Field(format!(
                "experiment.gamma_max_hours ({}) must exceed gamma_min_hours ({})",
                self.experiment.gamma_max_hours, self.experiment.gamma_min_hours
            )));
        }
        match self.experiment.policy.as_str() {
            "proposed" | "simple" => {}
            other => {
                return Err(ConfigError::Field(format!(
                    "experiment.policy must be 'proposed' or 'simple', got '{other}'"
                )))
            }
        }
        match self.experiment.bidding.as_str() {
            "fixed" | "curve" => {}
            other => {
                return Err(ConfigError::Field(format!(
                    "experiment.bidding must be 'fixed' or 'curve', got '{other}'"
                )))
            }
        }
        Ok(())
    }

    pub fn gamma_grid(&self) -> Vec<f64> {
        let n = self.experiment.gamma_steps;
        let lo = self.experiment.gamma_min_hours;
        let hi = self.experiment.gamma_max_hours;
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.market.samples_per_period(), 1800);
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let cfg = RunConfig::from_toml("[battery]\npower_mw = 5.0\n").unwrap();
        assert_eq!(cfg.battery.power_mw, 5.0);
        assert_eq!(cfg.battery.energy_mwh, 3.0);
    }

    #[test]
    fn bad_fields_are_reported_with_their_path() {
        let err = RunConfig::from_toml("[market]\nrho_min = 2.0\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("rho_min"), "message was: {msg}");
        let err = RunConfig::from_toml("[battery]\npower_mw = \"ten\"\n").unwrap_err();
        assert!(err.to_string().contains("power_mw"), "got: {err}");
        let err = RunConfig::from_toml("[market]\nnot_a_field = 1\n").unwrap_err();
        assert!(err.to_string().contains("not_a_field"), "got: {err}");
    }

    #[test]
    fn corpus_builds_synthetic_periods() {
        let mut cfg = RunConfig::default();
        cfg.corpus.periods = 3;
        let (signals, clipped) = cfg.corpus.build(&cfg.market, 0.95).unwrap();
        assert_eq!(signals.len(), 3);
        assert_eq!(clipped, 0);
        assert_eq!(signals[0].len(), 1800);
    }
}
