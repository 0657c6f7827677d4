//! Library surface of the CLI: command implementations and the exit-code
//! mapping, kept out of `main` so tests can drive them directly.

pub mod commands;
pub mod error;

use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Short content hash of the effective configuration, recorded in every
/// output header so results stay traceable to their inputs.
pub fn config_hash(config_toml: &str) -> String {
    let digest = Sha256::digest(config_toml.as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    hex[..12].to_string()
}

/// Header line stamped on every output file.
pub fn output_meta(config_toml: &str, seed: u64) -> String {
    format!(
        "bessreg {} config_sha256={} seed={}",
        VERSION,
        config_hash(config_toml),
        seed
    )
}
