//! Finite-size decoy-state BB84 key-rate engine: vacuum/single-photon event
//! counts from the three-intensity analytic estimators, Hoeffding
//! fluctuation on the observed counts, and the concise phase-error
//! correction term.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::montecarlo::ObservedStatisticsBb84;
use crate::optics::bb84_gain_qber;
use crate::stats::{binary_entropy, hoeffding_delta};
use crate::types::{Basis, Intensity, OpticalLinkModel, SourceSettings};
use crate::Error;

/// Detection and error counts of one (basis, intensity) cell.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Bb84CellObservation {
    pub n_detected: f64,
    pub n_error: f64,
}

/// Count table of a BB84 session plus the pulse count normalizing the rate.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Bb84Observations {
    cells: [[Option<Bb84CellObservation>; 3]; 2],
    /// Pulses in the denominator of the per-pulse rate.
    pub n_denominator: f64,
}

impl Bb84Observations {
    pub fn new(n_denominator: f64) -> Self {
        Bb84Observations { cells: Default::default(), n_denominator }
    }

    pub fn set(&mut self, basis: Basis, i: Intensity, obs: Bb84CellObservation) {
        self.cells[basis.index()][i.index()] = Some(obs);
    }

    pub fn get(&self, basis: Basis, i: Intensity) -> Option<&Bb84CellObservation> {
        self.cells[basis.index()][i.index()].as_ref()
    }

    /// Analytic observations: expected counts from the channel model.
    pub fn from_analytic(scenario: &Bb84Scenario) -> Result<Self, Error> {
        scenario.validate()?;
        let sift: f64 = Basis::ALL
            .iter()
            .map(|&b| {
                let w = scenario.source.basis_weight(b);
                w * w
            })
            .sum();
        let mut out = Self::new(scenario.n_total / sift);
        for basis in Basis::ALL {
            for i in Intensity::ALL {
                let point =
                    bb84_gain_qber(basis, scenario.source.intensity(i), &scenario.link)?;
                let n = scenario.n_total * scenario.source.prob(basis, i) * point.gain;
                out.set(
                    basis,
                    i,
                    Bb84CellObservation { n_detected: n, n_error: n * point.qber },
                );
            }
        }
        Ok(out)
    }

    /// Observations from a simulated session; the rate is normalized per
    /// simulated pulse.
    pub fn from_simulation(stats: &ObservedStatisticsBb84) -> Self {
        let mut out = Self::new(stats.n_pulses as f64);
        for basis in Basis::ALL {
            for i in Intensity::ALL {
                let cell = stats.cell(basis, i);
                if cell.n_sent == 0 {
                    continue;
                }
                out.set(
                    basis,
                    i,
                    Bb84CellObservation {
                        n_detected: cell.n_detected as f64,
                        n_error: cell.n_error as f64,
                    },
                );
            }
        }
        out
    }

    fn basis_totals(&self, basis: Basis) -> (f64, f64) {
        let mut n = 0.0;
        let mut m = 0.0;
        for i in Intensity::ALL {
            if let Some(c) = self.get(basis, i) {
                n += c.n_detected;
                m += c.n_error;
            }
        }
        (n, m)
    }
}

/// A fully specified BB84 session for analytic evaluation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Bb84Scenario {
    pub source: SourceSettings,
    pub link: OpticalLinkModel,
    /// Total pulses sent.
    pub n_total: f64,
}

impl Bb84Scenario {
    pub fn validate(&self) -> Result<(), Error> {
        self.source.validate()?;
        self.link.validate()?;
        if !(self.n_total >= 1.0) {
            return Err(Error::Domain(format!("n_total {} below 1", self.n_total)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Bb84SecurityParams {
    pub epsilon_sec: f64,
    pub epsilon_cor: f64,
    pub f_e: f64,
    /// When false, fluctuation terms and finite-size constants vanish.
    pub finite: bool,
}

impl Bb84SecurityParams {
    pub const REFERENCE: Bb84SecurityParams = Bb84SecurityParams {
        epsilon_sec: 1e-9,
        epsilon_cor: 1e-15,
        f_e: 1.16,
        finite: true,
    };
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Bb84KeyRateReport {
    /// Secret bits per sent pulse, clamped at zero.
    pub key_rate: f64,
    pub key_rate_raw: f64,
    /// Vacuum-event and single-photon-event counts in the key basis.
    pub s0_key: f64,
    pub s1_key: f64,
    /// Phase-error-rate bound applied to the key basis.
    pub e1_phase: f64,
    pub lambda_ec: f64,
    /// Observed QBER of the key basis.
    pub qber_key: f64,
    pub warnings: Vec<String>,
}

/// Statistical correction of the phase-error transfer between bases.
fn gamma(a: f64, b: f64, c: f64, d: f64) -> f64 {
    if b <= 0.0 || b >= 1.0 || c <= 0.0 || d <= 0.0 {
        return 0.0;
    }
    let ln2 = core::f64::consts::LN_2;
    let first = libm::sqrt((c + d) * (1.0 - b) * b * ln2 / (c * d));
    let arg = (c + d) / (c * d * (1.0 - b) * b) * (441.0 / (a * a));
    if arg <= 1.0 {
        return 0.0;
    }
    first * libm::sqrt(libm::log(arg) / ln2)
}

struct BasisEstimates {
    s0: f64,
    s1: f64,
    v1: f64,
}

fn estimate_basis(
    obs: &Bb84Observations,
    source: &SourceSettings,
    params: &Bb84SecurityParams,
    basis: Basis,
    warnings: &mut Vec<String>,
) -> Result<BasisEstimates, Error> {
    use Intensity::{Mu, Nu, Omega};
    let (mu, nu1, nu2) = (source.mu, source.nu, source.omega);
    let p = |i: Intensity| source.prob_given_basis(basis, i);
    for i in Intensity::ALL {
        if p(i) <= 0.0 {
            return Err(Error::Domain(format!(
                "intensity {} has zero probability in basis {}",
                i.label(),
                basis.label()
            )));
        }
    }
    let cell = |i: Intensity| -> Result<Bb84CellObservation, Error> {
        obs.get(basis, i).copied().ok_or_else(|| {
            Error::MissingCell(format!("{}/{}", basis.label(), i.label()))
        })
    };

    let (n_total, m_total) = obs.basis_totals(basis);
    let (delta_n, delta_m) = if params.finite {
        (
            hoeffding_delta(n_total, params.epsilon_sec)?,
            hoeffding_delta(m_total, params.epsilon_sec)?,
        )
    } else {
        (0.0, 0.0)
    };
    let n_u = |i: Intensity| -> Result<f64, Error> { Ok(cell(i)?.n_detected + delta_n) };
    let n_l = |i: Intensity| -> Result<f64, Error> {
        Ok((cell(i)?.n_detected - delta_n).max(0.0))
    };
    let m_u = |i: Intensity| -> Result<f64, Error> { Ok(cell(i)?.n_error + delta_m) };
    let m_l = |i: Intensity| -> Result<f64, Error> { Ok((cell(i)?.n_error - delta_m).max(0.0)) };

    // Poisson photon-number weights of the mixed source, conditional on the
    // basis.
    let tau = |n: u32| -> f64 {
        Intensity::ALL
            .iter()
            .map(|&i| {
                let a = source.intensity(i);
                let mut pn = libm::exp(-a);
                for k in 1..=n {
                    pn *= a / k as f64;
                }
                p(i) * pn
            })
            .sum()
    };
    let (tau0, tau1) = (tau(0), tau(1));

    let s0 = tau0 / (nu1 - nu2)
        * (libm::exp(nu2) * nu1 * n_l(Omega)? / p(Omega)
            - libm::exp(nu1) * nu2 * n_u(Nu)? / p(Nu));
    let s0 = if s0 < 0.0 {
        warnings.push(format!("{}-basis vacuum-event estimate below zero; clamped", basis.label()));
        0.0
    } else {
        s0
    };

    let denom = mu * nu1 - mu * nu2 - nu1 * nu1 + nu2 * nu2;
    if denom <= 0.0 {
        return Err(Error::Domain(format!(
            "degenerate decoy intensities (mu={mu}, nu1={nu1}, nu2={nu2})"
        )));
    }
    let s1 = mu * tau1 / denom
        * (libm::exp(nu1) * n_l(Nu)? / p(Nu) - libm::exp(nu2) * n_u(Omega)? / p(Omega)
            - (nu1 * nu1 - nu2 * nu2) / (mu * mu)
                * (libm::exp(mu) * n_u(Mu)? / p(Mu) - s0 / tau0));
    let s1 = if s1 < 0.0 {
        warnings.push(format!(
            "{}-basis single-photon-event estimate below zero; clamped",
            basis.label()
        ));
        0.0
    } else {
        s1
    };

    let v1 = tau1 / (nu1 - nu2)
        * (libm::exp(nu1) * m_u(Nu)? / p(Nu) - libm::exp(nu2) * m_l(Omega)? / p(Omega));
    let v1 = v1.max(0.0);

    Ok(BasisEstimates { s0, s1, v1 })
}

/// Evaluate the key-rate expression on a count table. The key is distilled
/// from the X basis; the conjugate basis supplies the phase-error bound.
pub fn bb84_key_rate(
    obs: &Bb84Observations,
    source: &SourceSettings,
    params: &Bb84SecurityParams,
) -> Result<Bb84KeyRateReport, Error> {
    source.validate()?;
    for (name, eps) in [("epsilon_sec", params.epsilon_sec), ("epsilon_cor", params.epsilon_cor)] {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Domain(format!("{name} {eps} outside (0, 1)")));
        }
    }
    if params.f_e < 1.0 {
        return Err(Error::Domain(format!(
            "error-correction efficiency {} below the Shannon limit",
            params.f_e
        )));
    }
    if !(obs.n_denominator >= 1.0) {
        return Err(Error::Domain(format!("pulse count {} below 1", obs.n_denominator)));
    }
    let mut warnings = Vec::new();

    let key = estimate_basis(obs, source, params, Basis::X, &mut warnings)?;
    let check = estimate_basis(obs, source, params, Basis::Y, &mut warnings)?;

    let (n_key, m_key) = obs.basis_totals(Basis::X);
    if n_key <= 0.0 {
        return Err(Error::Undefined("no detections in the key basis".into()));
    }
    let qber_key = m_key / n_key;
    let lambda_ec = n_key * params.f_e * binary_entropy(qber_key);

    let (e1_phase, privacy) = if check.s1 <= 0.0 || key.s1 <= 0.0 {
        warnings.push("single-photon estimate vanished; privacy amplification removes all bits".into());
        (0.5, 0.0)
    } else {
        let ratio = (check.v1 / check.s1).min(0.5);
        let e1 = if params.finite {
            ratio + gamma(params.epsilon_sec, ratio, check.s1, key.s1)
        } else {
            ratio
        };
        if e1 >= 0.5 {
            warnings.push("phase-error bound reached 0.5; no private bits".into());
            (0.5, 0.0)
        } else {
            (e1, 1.0 - binary_entropy(e1))
        }
    };

    let constants = if params.finite {
        let log2 = |v: f64| libm::log(v) / core::f64::consts::LN_2;
        6.0 * log2(21.0 / params.epsilon_sec) + log2(2.0 / params.epsilon_cor)
    } else {
        0.0
    };
    let secret_bits = key.s0 + key.s1 * privacy - lambda_ec - constants;
    let raw = secret_bits / obs.n_denominator;

    Ok(Bb84KeyRateReport {
        key_rate: raw.max(0.0),
        key_rate_raw: raw,
        s0_key: key.s0,
        s1_key: key.s1,
        e1_phase,
        lambda_ec,
        qber_key,
        warnings,
    })
}

/// Convenience wrapper: analytic channel model straight to a key rate.
pub fn bb84_key_rate_analytic(
    scenario: &Bb84Scenario,
    params: &Bb84SecurityParams,
) -> Result<Bb84KeyRateReport, Error> {
    let obs = Bb84Observations::from_analytic(scenario)?;
    bb84_key_rate(&obs, &scenario.source, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::DetectorModel;

    fn reference_source() -> SourceSettings {
        SourceSettings {
            mu: 0.4,
            nu: 0.1,
            omega: 0.01,
            prob: [[0.35, 0.105, 0.045], [0.35, 0.104, 0.046]],
        }
    }

    fn scenario(n_total: f64) -> Bb84Scenario {
        Bb84Scenario {
            source: reference_source(),
            link: OpticalLinkModel {
                eta_a: crate::db_to_transmittance(4.0),
                eta_b: 1.0,
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

    /// Synthetic photon-number model: counts built from known per-photon
    /// yields, asymptotic estimates must bracket the known s0/s1.
    #[test]
    fn decoy_estimates_bracket_known_events() {
        let src = reference_source();
        let yield_n = |n: u32| -> f64 { 1.0 - 0.9999 * libm::pow(0.88, n as f64) };
        let error_n = |n: u32| -> f64 {
            if n == 0 {
                0.5
            } else {
                0.02
            }
        };
        let n_total = 1e12;
        let mut obs = Bb84Observations::new(n_total);
        let mut truth_s0 = [0.0; 2];
        let mut truth_s1 = [0.0; 2];
        for basis in Basis::ALL {
            for i in Intensity::ALL {
                let a = src.intensity(i);
                let sent = n_total * src.prob(basis, i);
                let mut det = 0.0;
                let mut err = 0.0;
                for n in 0..40 {
                    let w = poisson(n, a) * yield_n(n);
                    det += w;
                    err += w * error_n(n);
                }
                obs.set(basis, i, Bb84CellObservation {
                    n_detected: sent * det,
                    n_error: sent * err,
                });
                truth_s0[basis.index()] += sent * poisson(0, a) * yield_n(0);
                truth_s1[basis.index()] += sent * poisson(1, a) * yield_n(1);
            }
        }
        let params = Bb84SecurityParams { finite: false, ..Bb84SecurityParams::REFERENCE };
        let report = bb84_key_rate(&obs, &src, &params).unwrap();
        let (s0_true, s1_true) = (truth_s0[0], truth_s1[0]);
        assert!(report.s1_key <= s1_true * (1.0 + 1e-9), "{} vs {s1_true}", report.s1_key);
        assert!(report.s1_key > 0.6 * s1_true, "{} vs {s1_true}", report.s1_key);
        // The vacuum estimate is a lower bound; with multiphoton-heavy
        // yields it can clamp all the way to zero.
        assert!(report.s0_key <= s0_true * (1.0 + 1e-9), "{} vs {s0_true}", report.s0_key);
        assert!(report.e1_phase >= 0.02 - 1e-9);
    }

    #[test]
    fn finite_rate_below_asymptotic_and_grows_with_data() {
        let asym = bb84_key_rate_analytic(
            &scenario(1e12),
            &Bb84SecurityParams { finite: false, ..Bb84SecurityParams::REFERENCE },
        )
        .unwrap();
        let small = bb84_key_rate_analytic(&scenario(1e10), &Bb84SecurityParams::REFERENCE).unwrap();
        let large = bb84_key_rate_analytic(&scenario(1e12), &Bb84SecurityParams::REFERENCE).unwrap();
        assert!(asym.key_rate > 0.0);
        assert!(small.key_rate < large.key_rate);
        assert!(large.key_rate < asym.key_rate);
    }

    #[test]
    fn starved_session_yields_nothing() {
        let report = bb84_key_rate_analytic(&scenario(1e4), &Bb84SecurityParams::REFERENCE).unwrap();
        assert_eq!(report.key_rate, 0.0);
        assert!(report.key_rate_raw <= 0.0);
    }

    #[test]
    fn missing_cell_is_an_error() {
        let obs = Bb84Observations::new(1e9);
        let err = bb84_key_rate(&obs, &reference_source(), &Bb84SecurityParams::REFERENCE)
            .unwrap_err();
        assert!(matches!(err, Error::MissingCell(_) | Error::Undefined(_)));
    }

    #[test]
    fn zero_probability_intensity_rejected() {
        let mut src = reference_source();
        src.prob = [[0.35, 0.15, 0.0], [0.35, 0.104, 0.046]];
        let scenario = Bb84Scenario { source: src, ..scenario(1e12) };
        assert!(bb84_key_rate_analytic(&scenario, &Bb84SecurityParams::REFERENCE).is_err());
    }
}
