//! Key-rate report emission with a reproducible input fingerprint.

use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use nsaqkd_core::bb84_keyrate::Bb84KeyRateReport;
use nsaqkd_core::mdi_keyrate::MdiKeyRateReport;

use crate::config::Protocol;
use crate::REPORT_FORMAT;

/// Protocol-specific intermediates carried verbatim inside the report.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Intermediates {
    Mdi(MdiKeyRateReport),
    Bb84(Bb84KeyRateReport),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportFile {
    pub format: String,
    pub scenario: String,
    pub protocol: Protocol,
    /// SHA-256 over the raw config and data bytes; identical inputs always
    /// reproduce the identical report apart from `timestamp`.
    pub fingerprint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
    pub key_rate_per_pulse: f64,
    pub key_rate_per_second: f64,
    pub repetition_rate_hz: f64,
    pub intermediates: Intermediates,
    pub warnings: Vec<String>,
}

/// Hash the exact input bytes (config first, then each data file in order).
pub fn fingerprint(parts: &[&[u8]]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out += &format!("{byte:02x}");
    }
    out
}

impl ReportFile {
    pub fn new(
        scenario: &str,
        protocol: Protocol,
        fingerprint: String,
        repetition_rate_hz: f64,
        intermediates: Intermediates,
    ) -> Self {
        let (rate, warnings) = match &intermediates {
            Intermediates::Mdi(r) => (r.key_rate, r.warnings.clone()),
            Intermediates::Bb84(r) => (r.key_rate, r.warnings.clone()),
        };
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs());
        ReportFile {
            format: REPORT_FORMAT.into(),
            scenario: scenario.into(),
            protocol,
            fingerprint,
            timestamp,
            key_rate_per_pulse: rate,
            key_rate_per_second: rate * repetition_rate_hz,
            repetition_rate_hz,
            intermediates,
            warnings,
        }
    }

    /// Serialization used both for files and for byte-stability checks; the
    /// timestamp is the only field allowed to differ between reruns.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// The report with the timestamp stripped, for byte-for-byte comparison.
    pub fn stable_json(&self) -> Result<String> {
        let mut copy = self.clone();
        copy.timestamp = None;
        copy.to_json()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)
            .with_context(|| format!("writing {}", path.display()))
    }
}
