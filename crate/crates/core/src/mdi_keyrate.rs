//! Finite-size MDI key-rate engine: three-intensity decoy estimation of the
//! single-photon-pair yield and phase-flip error rate, with Chernoff-style
//! statistical fluctuation on every observable cell.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::montecarlo::ObservedStatisticsMdi;
use crate::optics::mdi_gain_qber;
use crate::stats::{binary_entropy, chernoff_bounds};
use crate::types::{Basis, Intensity, OpticalLinkModel, SourceSettings};
use crate::Error;

/// One observable cell: gain and QBER in the code-table-sum normalization,
/// plus the number of sifted pulse pairs assigned to the cell.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MdiCellObservation {
    pub gain: f64,
    pub qber: f64,
    pub n_pairs: f64,
}

/// The 18-cell observation table (2 bases × 3×3 intensity pairs). Cells may
/// be absent; the engine substitutes zero for absent vacuum-decoy cells and
/// rejects any other gap.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MdiObservations {
    cells: [[[Option<MdiCellObservation>; 3]; 3]; 2],
}

impl MdiObservations {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, basis: Basis, a: Intensity, b: Intensity, obs: MdiCellObservation) {
        self.cells[basis.index()][a.index()][b.index()] = Some(obs);
    }

    pub fn get(&self, basis: Basis, a: Intensity, b: Intensity) -> Option<&MdiCellObservation> {
        self.cells[basis.index()][a.index()][b.index()].as_ref()
    }

    /// Analytic observations of a scenario: gains and QBERs from the channel
    /// model, cell counts from the sifted allocation of `n_total` pairs.
    pub fn from_analytic(scenario: &MdiScenario) -> Result<Self, Error> {
        scenario.validate()?;
        let mut out = Self::new();
        for basis in Basis::ALL {
            for a in Intensity::ALL {
                for b in Intensity::ALL {
                    let point = mdi_gain_qber(
                        basis,
                        scenario.source_a.intensity(a),
                        scenario.source_b.intensity(b),
                        &scenario.link,
                    )?;
                    out.set(
                        basis,
                        a,
                        b,
                        MdiCellObservation {
                            gain: point.gain,
                            qber: point.qber,
                            n_pairs: scenario.cell_pairs(basis, a, b),
                        },
                    );
                }
            }
        }
        Ok(out)
    }

    /// Observations from a simulated session. Cells with no pairs stay absent.
    pub fn from_simulation(stats: &ObservedStatisticsMdi) -> Self {
        let mut out = Self::new();
        for basis in Basis::ALL {
            for a in Intensity::ALL {
                for b in Intensity::ALL {
                    let cell = stats.cell(basis, a, b);
                    if cell.n_pairs == 0 {
                        continue;
                    }
                    out.set(
                        basis,
                        a,
                        b,
                        MdiCellObservation {
                            gain: stats.gain(basis, a, b).unwrap_or(0.0),
                            qber: stats.qber(basis, a, b).unwrap_or(0.0),
                            n_pairs: cell.n_pairs as f64,
                        },
                    );
                }
            }
        }
        out
    }
}

/// A fully specified MDI session for analytic evaluation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MdiScenario {
    pub source_a: SourceSettings,
    pub source_b: SourceSettings,
    pub link: OpticalLinkModel,
    /// Sifted pulse pairs distributed over the cells.
    pub n_total: f64,
}

impl MdiScenario {
    pub fn validate(&self) -> Result<(), Error> {
        self.source_a.validate()?;
        self.source_b.validate()?;
        self.link.validate()?;
        if !(self.n_total >= 1.0) {
            return Err(Error::Domain(format!("n_total {} below 1", self.n_total)));
        }
        Ok(())
    }

    /// Probability that a random sifted pair lands in a given cell, before
    /// normalization: the product of the parties' joint emission
    /// probabilities.
    pub fn sift_normalizer(&self) -> f64 {
        Basis::ALL
            .iter()
            .map(|&b| self.source_a.basis_weight(b) * self.source_b.basis_weight(b))
            .sum()
    }

    /// Sifted pairs allocated to one cell.
    pub fn cell_pairs(&self, basis: Basis, a: Intensity, b: Intensity) -> f64 {
        self.n_total * self.source_a.prob(basis, a) * self.source_b.prob(basis, b)
            / self.sift_normalizer()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MdiSecurityParams {
    /// Failure probability of each statistical-fluctuation bound.
    pub epsilon: f64,
    /// Error-correction efficiency factor.
    pub f_e: f64,
    /// Multiplier on the fluctuation width, for sensitivity studies. 1.0 is
    /// the nominal analysis.
    pub f_scale: f64,
    /// When false, all bounds collapse to the central values (asymptotic
    /// limit).
    pub finite: bool,
}

impl MdiSecurityParams {
    pub const REFERENCE: MdiSecurityParams = MdiSecurityParams {
        epsilon: 1e-10,
        f_e: 1.16,
        f_scale: 1.0,
        finite: true,
    };
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MdiKeyRateReport {
    /// Secret bits per sifted pulse pair, clamped at zero.
    pub key_rate: f64,
    /// The unclamped value of the rate expression.
    pub key_rate_raw: f64,
    pub y11_x_lower: f64,
    pub y11_y_lower: f64,
    pub e11_y_upper: f64,
    /// Observed signal-signal gain and QBER in the key basis.
    pub gain_mu: f64,
    pub qber_mu: f64,
    pub warnings: Vec<String>,
}

struct CellBounds {
    q_upper: f64,
    q_lower: f64,
    eq_upper: f64,
    eq_lower: f64,
}

struct BoundTable<'a> {
    obs: &'a MdiObservations,
    src_a: &'a SourceSettings,
    src_b: &'a SourceSettings,
    params: &'a MdiSecurityParams,
}

impl BoundTable<'_> {
    fn cell(
        &self,
        basis: Basis,
        a: Intensity,
        b: Intensity,
        warnings: &mut Vec<String>,
    ) -> Result<CellBounds, Error> {
        let Some(obs) = self.obs.get(basis, a, b) else {
            // A vacuum decoy emits nothing, so a missing cell carries no
            // signal; anything else is a data defect.
            let vacuum = (a == Intensity::Omega && self.src_a.omega == 0.0)
                || (b == Intensity::Omega && self.src_b.omega == 0.0);
            if vacuum {
                warnings.push(format!(
                    "cell {}/{}-{} absent; treated as zero gain",
                    basis.label(),
                    a.label(),
                    b.label()
                ));
                return Ok(CellBounds { q_upper: 0.0, q_lower: 0.0, eq_upper: 0.0, eq_lower: 0.0 });
            }
            return Err(Error::MissingCell(format!(
                "{}/{}-{}",
                basis.label(),
                a.label(),
                b.label()
            )));
        };
        if !self.params.finite {
            let eq = obs.qber * obs.gain;
            return Ok(CellBounds {
                q_upper: obs.gain,
                q_lower: obs.gain,
                eq_upper: eq,
                eq_lower: eq,
            });
        }
        let (q_upper, q_lower) =
            chernoff_bounds(obs.gain, obs.n_pairs, self.params.epsilon, self.params.f_scale)?;
        let (eq_upper, eq_lower) = chernoff_bounds(
            obs.qber * obs.gain,
            obs.n_pairs,
            self.params.epsilon,
            self.params.f_scale,
        )?;
        Ok(CellBounds { q_upper, q_lower, eq_upper, eq_lower })
    }
}

fn y11_lower(
    table: &BoundTable<'_>,
    basis: Basis,
    warnings: &mut Vec<String>,
) -> Result<f64, Error> {
    use Intensity::{Mu, Nu, Omega};
    let (mu_a, nu_a, om_a) = (table.src_a.mu, table.src_a.nu, table.src_a.omega);
    let (mu_b, nu_b, om_b) = (table.src_b.mu, table.src_b.nu, table.src_b.omega);
    let lift = |i: f64, j: f64| libm::exp(i + j);

    let mut qt = |a: Intensity, b: Intensity, upper: bool| -> Result<f64, Error> {
        let bounds = table.cell(basis, a, b, warnings)?;
        let q = if upper { bounds.q_upper } else { bounds.q_lower };
        Ok(q * lift(table.src_a.intensity(a), table.src_b.intensity(b)))
    };

    let d_nu = qt(Nu, Nu, false)? + qt(Omega, Omega, false)?
        - qt(Nu, Omega, true)?
        - qt(Omega, Nu, true)?;
    let d_mu = qt(Mu, Mu, true)? + qt(Omega, Omega, true)?
        - qt(Mu, Omega, false)?
        - qt(Omega, Mu, false)?;
    let numerator = (mu_a * mu_a - om_a * om_a) * (mu_b - om_b) * d_nu
        - (nu_a * nu_a - om_a * om_a) * (nu_b - om_b) * d_mu;
    let denominator = (mu_a - om_a) * (nu_a - om_a) * (mu_b - om_b) * (nu_b - om_b) * (mu_a - nu_a);
    if denominator <= 0.0 {
        return Err(Error::Domain(format!(
            "degenerate decoy intensities leave the {}-basis yield bound undefined",
            basis.label()
        )));
    }
    let y11 = numerator / denominator;
    if y11 < 0.0 {
        warnings.push(format!(
            "{}-basis single-photon yield bound fell below zero; clamped",
            basis.label()
        ));
    }
    Ok(y11.max(0.0))
}

fn e11_upper(table: &BoundTable<'_>, y11_y: f64, warnings: &mut Vec<String>) -> Result<f64, Error> {
    use Intensity::{Nu, Omega};
    if y11_y <= 0.0 {
        return Err(Error::Undefined(
            "phase-flip error bound needs a positive single-photon yield".into(),
        ));
    }
    let (nu_a, om_a) = (table.src_a.nu, table.src_a.omega);
    let (nu_b, om_b) = (table.src_b.nu, table.src_b.omega);
    let mut eq = |a: Intensity, b: Intensity, upper: bool| -> Result<f64, Error> {
        let bounds = table.cell(Basis::Y, a, b, warnings)?;
        let v = if upper { bounds.eq_upper } else { bounds.eq_lower };
        Ok(v * libm::exp(table.src_a.intensity(a) + table.src_b.intensity(b)))
    };
    let numerator = eq(Nu, Nu, true)? + eq(Omega, Omega, true)?
        - eq(Nu, Omega, false)?
        - eq(Omega, Nu, false)?;
    let e11 = numerator / ((nu_a - om_a) * (nu_b - om_b) * y11_y);
    Ok(e11.max(0.0))
}

/// Evaluate the key-rate expression on an observation table.
///
/// The returned rate is per sifted pulse pair, in the same normalization as
/// the cell allocation of [`MdiScenario::cell_pairs`].
pub fn mdi_key_rate(
    obs: &MdiObservations,
    source_a: &SourceSettings,
    source_b: &SourceSettings,
    params: &MdiSecurityParams,
) -> Result<MdiKeyRateReport, Error> {
    source_a.validate()?;
    source_b.validate()?;
    if !(params.epsilon > 0.0 && params.epsilon < 1.0) {
        return Err(Error::Domain(format!("epsilon {} outside (0, 1)", params.epsilon)));
    }
    if params.f_e < 1.0 {
        return Err(Error::Domain(format!(
            "error-correction efficiency {} below the Shannon limit",
            params.f_e
        )));
    }
    let mut warnings = Vec::new();
    let table = BoundTable { obs, src_a: source_a, src_b: source_b, params };

    let y11_x = y11_lower(&table, Basis::X, &mut warnings)?;
    let y11_y = y11_lower(&table, Basis::Y, &mut warnings)?;
    let e11_y = if y11_y > 0.0 {
        e11_upper(&table, y11_y, &mut warnings)?
    } else {
        warnings.push("Y-basis yield bound vanished; phase-flip error pinned to 0.5".into());
        0.5
    };

    let signal = obs.get(Basis::X, Intensity::Mu, Intensity::Mu).ok_or_else(|| {
        Error::MissingCell("X/mu-mu (key-generating cell)".into())
    })?;

    let privacy = if e11_y >= 0.5 {
        warnings.push("phase-flip error bound reached 0.5; no private bits".into());
        0.0
    } else {
        1.0 - binary_entropy(e11_y)
    };

    let p_mu = source_a.prob(Basis::X, Intensity::Mu) * source_b.prob(Basis::X, Intensity::Mu);
    let single_term =
        source_a.mu * source_b.mu * libm::exp(-(source_a.mu + source_b.mu)) * y11_x * privacy;
    let ec_term = signal.gain * params.f_e * binary_entropy(signal.qber);
    let raw = p_mu * (single_term - ec_term);

    Ok(MdiKeyRateReport {
        key_rate: raw.max(0.0),
        key_rate_raw: raw,
        y11_x_lower: y11_x,
        y11_y_lower: y11_y,
        e11_y_upper: e11_y.min(1.0),
        gain_mu: signal.gain,
        qber_mu: signal.qber,
        warnings,
    })
}

/// Convenience wrapper: analytic channel model straight to a key rate.
pub fn mdi_key_rate_analytic(
    scenario: &MdiScenario,
    params: &MdiSecurityParams,
) -> Result<MdiKeyRateReport, Error> {
    let obs = MdiObservations::from_analytic(scenario)?;
    mdi_key_rate(&obs, &scenario.source_a, &scenario.source_b, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::DetectorModel;

    fn reference_sources() -> SourceSettings {
        SourceSettings {
            mu: 0.284,
            nu: 0.057,
            omega: 0.0,
            prob: [[0.252, 0.171, 0.065], [0.252, 0.195, 0.065]],
        }
    }

    fn scenario(n_total: f64) -> MdiScenario {
        MdiScenario {
            source_a: reference_sources(),
            source_b: reference_sources(),
            link: OpticalLinkModel {
                eta_a: crate::db_to_transmittance(8.0),
                eta_b: crate::db_to_transmittance(8.0),
                e_d: 0.01,
                detector: DetectorModel { y0: 7.5e-6, p_ap: 0.0, eta_d: 0.25 },
                theta_c: 0.0,
            },
            n_total,
        }
    }

    fn poisson(n: u32, lambda: f64) -> f64 {
        let mut p = libm::exp(-lambda);
        for k in 1..=n {
            p *= lambda / k as f64;
        }
        p
    }

    /// Synthetic photon-number model: build gains from a known yield table,
    /// then check the decoy estimator brackets the true single-photon-pair
    /// values.
    #[test]
    fn decoy_bounds_bracket_known_yields() {
        let src = reference_sources();
        let yield_nm = |n: u32, m: u32| -> f64 {
            1.0 - 0.999 * libm::pow(0.92, n as f64) * libm::pow(0.90, m as f64)
        };
        let error_nm = |n: u32, m: u32| -> f64 {
            if n == 0 || m == 0 {
                0.5
            } else {
                0.03
            }
        };
        let mut obs = MdiObservations::new();
        for basis in Basis::ALL {
            for a in Intensity::ALL {
                for b in Intensity::ALL {
                    let (ia, ib) = (src.intensity(a), src.intensity(b));
                    let mut gain = 0.0;
                    let mut eq = 0.0;
                    for n in 0..40 {
                        for m in 0..40 {
                            let w = poisson(n, ia) * poisson(m, ib) * yield_nm(n, m);
                            gain += w;
                            eq += w * error_nm(n, m);
                        }
                    }
                    obs.set(
                        basis,
                        a,
                        b,
                        MdiCellObservation { gain, qber: eq / gain, n_pairs: 1e12 },
                    );
                }
            }
        }
        let params = MdiSecurityParams { finite: false, ..MdiSecurityParams::REFERENCE };
        let report = mdi_key_rate(&obs, &src, &src, &params).unwrap();
        let true_y11 = yield_nm(1, 1);
        let true_e11 = error_nm(1, 1);
        assert!(
            report.y11_x_lower <= true_y11 + 1e-9,
            "estimate {} exceeds true yield {true_y11}",
            report.y11_x_lower
        );
        assert!(
            report.y11_x_lower > 0.6 * true_y11,
            "estimate {} implausibly loose vs {true_y11}",
            report.y11_x_lower
        );
        assert!(
            report.e11_y_upper >= true_e11 - 1e-9,
            "error bound {} below true {true_e11}",
            report.e11_y_upper
        );
    }

    #[test]
    fn finite_rate_below_asymptotic_and_grows_with_data() {
        let asym = mdi_key_rate_analytic(
            &scenario(1e12),
            &MdiSecurityParams { finite: false, ..MdiSecurityParams::REFERENCE },
        )
        .unwrap();
        let small = mdi_key_rate_analytic(&scenario(1e11), &MdiSecurityParams::REFERENCE).unwrap();
        let large = mdi_key_rate_analytic(&scenario(1e13), &MdiSecurityParams::REFERENCE).unwrap();
        assert!(asym.key_rate > 0.0);
        assert!(small.key_rate < large.key_rate);
        assert!(large.key_rate < asym.key_rate);
    }

    #[test]
    fn wider_fluctuation_lowers_the_rate() {
        let nominal = mdi_key_rate_analytic(&scenario(1e12), &MdiSecurityParams::REFERENCE).unwrap();
        let widened = mdi_key_rate_analytic(
            &scenario(1e12),
            &MdiSecurityParams { f_scale: 2.0, ..MdiSecurityParams::REFERENCE },
        )
        .unwrap();
        assert!(nominal.key_rate > 0.0);
        assert!(widened.key_rate < nominal.key_rate);
    }

    #[test]
    fn missing_signal_cell_is_an_error() {
        let obs = MdiObservations::new();
        let src = reference_sources();
        let err = mdi_key_rate(&obs, &src, &src, &MdiSecurityParams::REFERENCE).unwrap_err();
        assert!(matches!(err, Error::MissingCell(_)));
    }

    #[test]
    fn absent_vacuum_cells_warn_instead_of_failing() {
        let scenario = scenario(1e12);
        let full = MdiObservations::from_analytic(&scenario).unwrap();
        let mut gappy = MdiObservations::new();
        for basis in Basis::ALL {
            for a in Intensity::ALL {
                for b in Intensity::ALL {
                    if a == Intensity::Omega || b == Intensity::Omega {
                        continue;
                    }
                    gappy.set(basis, a, b, *full.get(basis, a, b).unwrap());
                }
            }
        }
        let report = mdi_key_rate(
            &gappy,
            &scenario.source_a,
            &scenario.source_b,
            &MdiSecurityParams::REFERENCE,
        )
        .unwrap();
        assert!(!report.warnings.is_empty());
        assert!(report.key_rate >= 0.0);
    }
}
