//! Error classification for process exit codes: 2 for configuration
//! problems, 3 for data problems, 4 for infeasible experiments, 1 otherwise.

use std::fmt;

use bessreg::bidding::BiddingError;
use bessreg::config::ConfigError;
use bessreg::control::ControlError;
use bessreg::market::MarketError;
use bessreg::performance::PerformanceError;
use bessreg::signal::SignalError;

#[derive(Debug)]
pub enum CliError {
    /// Exit code 2.
    Config(String),
    /// Exit code 3.
    Data(String),
    /// Exit code 4.
    Infeasible(String),
    /// Exit code 1.
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Infeasible(_) => 4,
            CliError::Other(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Infeasible(m) => write!(f, "infeasible experiment: {m}"),
            CliError::Other(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Signal(inner) => inner.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<SignalError> for CliError {
    fn from(e: SignalError) -> Self {
        match e {
            SignalError::BadParams(_) => CliError::Config(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<ControlError> for CliError {
    fn from(e: ControlError) -> Self {
        match e {
            ControlError::InstanceTooLarge { .. } => CliError::Infeasible(e.to_string()),
            ControlError::InvalidCapacity { .. } | ControlError::InvalidPenalty(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<BiddingError> for CliError {
    fn from(e: BiddingError) -> Self {
        match e {
            BiddingError::Control(inner) => inner.into(),
            BiddingError::ZeroCapacity | BiddingError::BadSegments(_) => {
                CliError::Config(e.to_string())
            }
            BiddingError::InsufficientData(_)
            | BiddingError::OutOfRange { .. }
            | BiddingError::CapExceeded { .. }
            | BiddingError::NonInvertible { .. } => CliError::Infeasible(e.to_string()),
            BiddingError::Performance(inner) => CliError::Config(inner.to_string()),
        }
    }
}

impl From<MarketError> for CliError {
    fn from(e: MarketError) -> Self {
        match e {
            MarketError::Control(inner) => inner.into(),
            MarketError::Performance(inner) => CliError::Config(inner.to_string()),
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<PerformanceError> for CliError {
    fn from(e: PerformanceError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}
