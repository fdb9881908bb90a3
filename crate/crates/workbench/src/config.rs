//! Human-editable scenario configuration (TOML, strict schema).

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use nsaqkd_core::bb84_keyrate::{Bb84Scenario, Bb84SecurityParams};
use nsaqkd_core::db_to_transmittance;
use nsaqkd_core::mdi_keyrate::{MdiScenario, MdiSecurityParams};
use nsaqkd_core::optimizer::PsoConfig;
use nsaqkd_core::types::{DetectorModel, OpticalLinkModel, SourceSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Mdi,
    Bb84,
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Protocol::Mdi => "mdi",
            Protocol::Bb84 => "bb84",
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub mu: f64,
    pub nu: f64,
    pub omega: f64,
    /// Joint emission probabilities (basis, intensity); the six entries of
    /// `prob_x` and `prob_y` sum to 1.
    pub prob_x: [f64; 3],
    pub prob_y: [f64; 3],
}

impl SourceConfig {
    pub fn to_core(&self) -> SourceSettings {
        SourceSettings {
            mu: self.mu,
            nu: self.nu,
            omega: self.omega,
            prob: [self.prob_x, self.prob_y],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub y0: f64,
    #[serde(default)]
    pub p_ap: f64,
    pub eta_d: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    /// Fibre length of the (first) arm, km.
    pub length_km_a: f64,
    /// Second arm; defaults to the first (symmetric setup).
    pub length_km_b: Option<f64>,
    #[serde(default = "default_loss_per_km")]
    pub loss_db_per_km: f64,
    /// Receiver-internal loss applied to each arm, dB.
    #[serde(default)]
    pub internal_db: f64,
    pub e_d: f64,
    #[serde(default)]
    pub theta_c: f64,
    pub detector: DetectorConfig,
}

fn default_loss_per_km() -> f64 {
    0.196
}

impl LinkConfig {
    pub fn to_core(&self) -> OpticalLinkModel {
        let arm = |km: f64| db_to_transmittance(km * self.loss_db_per_km + self.internal_db);
        OpticalLinkModel {
            eta_a: arm(self.length_km_a),
            eta_b: arm(self.length_km_b.unwrap_or(self.length_km_a)),
            e_d: self.e_d,
            detector: DetectorModel {
                y0: self.detector.y0,
                p_ap: self.detector.p_ap,
                eta_d: self.detector.eta_d,
            },
            theta_c: self.theta_c,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecurityConfig {
    /// Per-bound failure probability (MDI analysis).
    pub epsilon: Option<f64>,
    /// Secrecy / correctness failure probabilities (BB84 analysis).
    pub epsilon_sec: Option<f64>,
    pub epsilon_cor: Option<f64>,
    #[serde(default = "default_f_e")]
    pub f_e: f64,
    #[serde(default = "default_one")]
    pub f_scale: f64,
    #[serde(default = "default_true")]
    pub finite: bool,
}

fn default_f_e() -> f64 {
    1.16
}
fn default_one() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsoSection {
    pub swarm_size: Option<usize>,
    pub iterations: Option<usize>,
    pub inertia: Option<f64>,
    pub cognitive: Option<f64>,
    pub social: Option<f64>,
    pub seed: Option<u64>,
}

impl PsoSection {
    pub fn to_core(&self) -> PsoConfig {
        let d = PsoConfig::default();
        PsoConfig {
            swarm_size: self.swarm_size.unwrap_or(d.swarm_size),
            iterations: self.iterations.unwrap_or(d.iterations),
            inertia: self.inertia.unwrap_or(d.inertia),
            cognitive: self.cognitive.unwrap_or(d.cognitive),
            social: self.social.unwrap_or(d.social),
            seed: self.seed.unwrap_or(d.seed),
        }
    }
}

/// One self-contained scenario. Unknown keys are rejected so typos fail
/// fast instead of silently falling back to defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkbenchConfig {
    pub scenario: String,
    pub protocol: Protocol,
    /// MDI: sifted pulse pairs. BB84: pulses sent.
    pub n_total: f64,
    #[serde(default = "default_rep_rate")]
    pub repetition_rate_hz: f64,
    /// BB84 transmitter.
    pub source: Option<SourceConfig>,
    /// MDI transmitters.
    pub source_a: Option<SourceConfig>,
    pub source_b: Option<SourceConfig>,
    pub link: LinkConfig,
    pub security: SecurityConfig,
    pub pso: Option<PsoSection>,
    /// Optional topology file tied to the scenario.
    pub topology: Option<String>,
}

fn default_rep_rate() -> f64 {
    40.0e6
}

impl WorkbenchConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: WorkbenchConfig = toml::from_str(text).context("config does not match the schema")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let resolved = crate::resolve_path(path);
        let text = std::fs::read_to_string(&resolved)
            .with_context(|| format!("reading {}", resolved.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", resolved.display()))
    }

    pub fn validate(&self) -> Result<()> {
        match self.protocol {
            Protocol::Mdi => {
                if self.source_a.is_none() || self.source_b.is_none() {
                    bail!("mdi scenarios need [source_a] and [source_b]");
                }
                if self.security.epsilon.is_none() {
                    bail!("mdi scenarios need security.epsilon");
                }
            }
            Protocol::Bb84 => {
                if self.source.is_none() {
                    bail!("bb84 scenarios need [source]");
                }
                if self.security.epsilon_sec.is_none() || self.security.epsilon_cor.is_none() {
                    bail!("bb84 scenarios need security.epsilon_sec and security.epsilon_cor");
                }
            }
        }
        if !(self.repetition_rate_hz > 0.0) {
            bail!("repetition_rate_hz must be positive");
        }
        Ok(())
    }

    pub fn mdi_scenario(&self) -> Result<MdiScenario> {
        let (Some(a), Some(b)) = (&self.source_a, &self.source_b) else {
            bail!("not an mdi scenario");
        };
        let scenario = MdiScenario {
            source_a: a.to_core(),
            source_b: b.to_core(),
            link: self.link.to_core(),
            n_total: self.n_total,
        };
        scenario.validate().map_err(anyhow::Error::msg)?;
        Ok(scenario)
    }

    pub fn bb84_scenario(&self) -> Result<Bb84Scenario> {
        let Some(source) = &self.source else {
            bail!("not a bb84 scenario");
        };
        let scenario = Bb84Scenario {
            source: source.to_core(),
            link: self.link.to_core(),
            n_total: self.n_total,
        };
        scenario.validate().map_err(anyhow::Error::msg)?;
        Ok(scenario)
    }

    pub fn mdi_params(&self) -> Result<MdiSecurityParams> {
        Ok(MdiSecurityParams {
            epsilon: self.security.epsilon.context("security.epsilon missing")?,
            f_e: self.security.f_e,
            f_scale: self.security.f_scale,
            finite: self.security.finite,
        })
    }

    pub fn bb84_params(&self) -> Result<Bb84SecurityParams> {
        Ok(Bb84SecurityParams {
            epsilon_sec: self.security.epsilon_sec.context("security.epsilon_sec missing")?,
            epsilon_cor: self.security.epsilon_cor.context("security.epsilon_cor missing")?,
            f_e: self.security.f_e,
            finite: self.security.finite,
        })
    }

    pub fn pso_config(&self) -> PsoConfig {
        self.pso.as_ref().map(|p| p.to_core()).unwrap_or_default()
    }
}
