//! Observed-statistics interchange format (JSON).
//!
//! The same schema serves as keyrate input and simulate output, so a
//! simulated session feeds straight back into the estimation pipeline.
//! Bundled measurement tables carry only (gain, qber) per cell; per-cell
//! counts are then reconstructed from the scenario's emission probabilities.
//! Simulator output carries its counts explicitly.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use nsaqkd_core::bb84_keyrate::{Bb84CellObservation, Bb84Observations, Bb84Scenario};
use nsaqkd_core::mdi_keyrate::{MdiCellObservation, MdiObservations, MdiScenario};
use nsaqkd_core::montecarlo::{ObservedStatisticsBb84, ObservedStatisticsMdi};
use nsaqkd_core::types::{Basis, Intensity};

use crate::config::Protocol;
use crate::STATS_FORMAT;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsCell {
    pub basis: String,
    /// BB84 intensity class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensity: Option<String>,
    /// MDI intensity classes of the two transmitters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensity_a: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensity_b: Option<String>,
    pub gain: f64,
    pub qber: f64,
    /// Pulse pairs behind an MDI cell; reconstructed from the scenario when
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_pairs: Option<f64>,
    /// Pulses sent into a BB84 cell; reconstructed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_sent: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsFile {
    pub format: String,
    pub protocol: Protocol,
    /// BB84 rate denominator (pulses sent). Reconstructed from the scenario
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_denominator: Option<f64>,
    pub cells: Vec<StatsCell>,
}

fn parse_basis(s: &str) -> Result<Basis> {
    match s {
        "x" | "X" => Ok(Basis::X),
        "y" | "Y" => Ok(Basis::Y),
        other => bail!("unknown basis {other:?}"),
    }
}

fn parse_intensity(s: &str) -> Result<Intensity> {
    match s {
        "mu" => Ok(Intensity::Mu),
        "nu" => Ok(Intensity::Nu),
        "omega" => Ok(Intensity::Omega),
        other => bail!("unknown intensity {other:?}"),
    }
}

impl StatsFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: StatsFile =
            serde_json::from_str(text).context("stats file does not match the schema")?;
        if file.format != STATS_FORMAT {
            bail!("unsupported stats format {:?}, expected {STATS_FORMAT:?}", file.format);
        }
        if file.cells.is_empty() {
            bail!("stats file has no cells");
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let resolved = crate::resolve_path(path);
        let text = std::fs::read_to_string(&resolved)
            .with_context(|| format!("reading {}", resolved.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", resolved.display()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }

    /// Build the MDI estimation table, filling per-cell pair counts from the
    /// scenario when the file does not carry them.
    pub fn to_mdi_observations(&self, scenario: &MdiScenario) -> Result<MdiObservations> {
        if self.protocol != Protocol::Mdi {
            bail!("stats file is {}, expected mdi", self.protocol);
        }
        let mut obs = MdiObservations::new();
        for cell in &self.cells {
            let basis = parse_basis(&cell.basis)?;
            let a = parse_intensity(cell.intensity_a.as_deref().context("cell missing intensity_a")?)?;
            let b = parse_intensity(cell.intensity_b.as_deref().context("cell missing intensity_b")?)?;
            if !(cell.gain >= 0.0 && (0.0..=1.0).contains(&cell.qber)) {
                bail!("cell ({}, {}, {}) has invalid gain/qber", cell.basis, a.label(), b.label());
            }
            let n_pairs = cell.n_pairs.unwrap_or_else(|| scenario.cell_pairs(basis, a, b));
            obs.set(
                basis,
                a,
                b,
                MdiCellObservation { gain: cell.gain, qber: cell.qber, n_pairs },
            );
        }
        Ok(obs)
    }

    /// Build the BB84 count table; cells without explicit counts are
    /// reconstructed as `n_total * P(basis, intensity)` sent pulses and the
    /// rate denominator as `n_total / sum_b S_b^2`.
    pub fn to_bb84_observations(&self, scenario: &Bb84Scenario) -> Result<Bb84Observations> {
        if self.protocol != Protocol::Bb84 {
            bail!("stats file is {}, expected bb84", self.protocol);
        }
        let denominator = self.n_denominator.unwrap_or_else(|| {
            let s_sq: f64 = Basis::ALL
                .iter()
                .map(|&b| {
                    let s = scenario.source.basis_weight(b);
                    s * s
                })
                .sum();
            scenario.n_total / s_sq
        });
        let mut obs = Bb84Observations::new(denominator);
        for cell in &self.cells {
            let basis = parse_basis(&cell.basis)?;
            let i = parse_intensity(cell.intensity.as_deref().context("cell missing intensity")?)?;
            if !(cell.gain >= 0.0 && (0.0..=1.0).contains(&cell.qber)) {
                bail!("cell ({}, {}) has invalid gain/qber", cell.basis, i.label());
            }
            let n_sent = cell
                .n_sent
                .unwrap_or_else(|| scenario.n_total * scenario.source.prob(basis, i));
            let n_detected = n_sent * cell.gain;
            obs.set(
                basis,
                i,
                Bb84CellObservation { n_detected, n_error: n_detected * cell.qber },
            );
        }
        Ok(obs)
    }

    /// Snapshot a simulated MDI session, counts included.
    pub fn from_mdi_simulation(stats: &ObservedStatisticsMdi) -> Self {
        let mut cells = Vec::new();
        for &basis in &Basis::ALL {
            for &a in &Intensity::ALL {
                for &b in &Intensity::ALL {
                    let cell = stats.cell(basis, a, b);
                    if cell.n_pairs == 0 {
                        continue;
                    }
                    cells.push(StatsCell {
                        basis: basis.label().to_ascii_lowercase(),
                        intensity: None,
                        intensity_a: Some(a.label().into()),
                        intensity_b: Some(b.label().into()),
                        gain: stats.gain(basis, a, b).unwrap_or(0.0),
                        qber: stats.qber(basis, a, b).unwrap_or(0.0),
                        n_pairs: Some(cell.n_pairs as f64),
                        n_sent: None,
                    });
                }
            }
        }
        StatsFile {
            format: STATS_FORMAT.into(),
            protocol: Protocol::Mdi,
            n_denominator: None,
            cells,
        }
    }

    /// Snapshot a simulated BB84 session. The rate denominator is the raw
    /// pulse count, not the sifted reconstruction.
    pub fn from_bb84_simulation(stats: &ObservedStatisticsBb84, n_pulses: u64) -> Self {
        let mut cells = Vec::new();
        for &basis in &Basis::ALL {
            for &i in &Intensity::ALL {
                let cell = stats.cell(basis, i);
                if cell.n_sent == 0 {
                    continue;
                }
                cells.push(StatsCell {
                    basis: basis.label().to_ascii_lowercase(),
                    intensity: Some(i.label().into()),
                    intensity_a: None,
                    intensity_b: None,
                    gain: stats.gain(basis, i).unwrap_or(0.0),
                    qber: stats.qber(basis, i).unwrap_or(0.0),
                    n_pairs: None,
                    n_sent: Some(cell.n_sent as f64),
                });
            }
        }
        StatsFile {
            format: STATS_FORMAT.into(),
            protocol: Protocol::Bb84,
            n_denominator: Some(n_pulses as f64),
            cells,
        }
    }
}
