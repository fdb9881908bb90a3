//! Shared domain types: source settings, detector and link models.

use alloc::format;
use core::f64::consts::PI;

use crate::Error;

/// Preparation basis. `X` codes with relative phases {0, π}, `Y` with
/// {π/2, 3π/2}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Basis {
    X,
    Y,
}

impl Basis {
    pub const ALL: [Basis; 2] = [Basis::X, Basis::Y];

    pub fn index(self) -> usize {
        match self {
            Basis::X => 0,
            Basis::Y => 1,
        }
    }

    /// The two relative-phase settings of the basis's code table.
    pub fn phase_settings(self) -> [f64; 2] {
        match self {
            Basis::X => [0.0, PI],
            Basis::Y => [PI / 2.0, 3.0 * PI / 2.0],
        }
    }

    pub fn conjugate(self) -> Basis {
        match self {
            Basis::X => Basis::Y,
            Basis::Y => Basis::X,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Basis::X => "X",
            Basis::Y => "Y",
        }
    }
}

/// Decoy-intensity class: signal μ, decoy ν and weak/vacuum decoy ω.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Intensity {
    Mu,
    Nu,
    Omega,
}

impl Intensity {
    pub const ALL: [Intensity; 3] = [Intensity::Mu, Intensity::Nu, Intensity::Omega];

    pub fn index(self) -> usize {
        match self {
            Intensity::Mu => 0,
            Intensity::Nu => 1,
            Intensity::Omega => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Intensity::Mu => "mu",
            Intensity::Nu => "nu",
            Intensity::Omega => "omega",
        }
    }
}

/// Three-intensity decoy source of one transmitter: the intensities and the
/// joint emission probabilities over (basis, intensity).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SourceSettings {
    /// Signal mean photon number.
    pub mu: f64,
    /// Decoy mean photon number.
    pub nu: f64,
    /// Weak/vacuum decoy mean photon number.
    pub omega: f64,
    /// `prob[basis][intensity]`: probability that a pulse is prepared with
    /// that basis and intensity class. Sums to 1 over all six cells.
    pub prob: [[f64; 3]; 2],
}

impl SourceSettings {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.omega >= 0.0 && self.nu > self.omega) {
            return Err(Error::Domain(format!(
                "decoy ordering requires nu > omega >= 0, got nu={} omega={}",
                self.nu, self.omega
            )));
        }
        if self.mu <= self.nu + self.omega {
            return Err(Error::Domain(format!(
                "decoy ordering requires mu > nu + omega, got mu={} nu={} omega={}",
                self.mu, self.nu, self.omega
            )));
        }
        let mut total = 0.0;
        for row in &self.prob {
            for &p in row {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Domain(format!("emission probability {p} outside [0, 1]")));
                }
                total += p;
            }
        }
        if libm::fabs(total - 1.0) > 1e-12 {
            return Err(Error::Domain(format!(
                "emission probabilities must sum to 1, got {total}"
            )));
        }
        Ok(())
    }

    pub fn intensity(&self, class: Intensity) -> f64 {
        match class {
            Intensity::Mu => self.mu,
            Intensity::Nu => self.nu,
            Intensity::Omega => self.omega,
        }
    }

    pub fn prob(&self, basis: Basis, class: Intensity) -> f64 {
        self.prob[basis.index()][class.index()]
    }

    /// Marginal probability of emitting in the given basis.
    pub fn basis_weight(&self, basis: Basis) -> f64 {
        self.prob[basis.index()].iter().sum()
    }

    /// Intensity-class probability conditional on the basis.
    pub fn prob_given_basis(&self, basis: Basis, class: Intensity) -> f64 {
        let w = self.basis_weight(basis);
        if w == 0.0 {
            0.0
        } else {
            self.prob(basis, class) / w
        }
    }
}

/// Threshold single-photon detector with dark counts and a memoryless
/// afterpulse rate.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DetectorModel {
    /// Dark-count probability per gate.
    pub y0: f64,
    /// Afterpulse probability per gate.
    pub p_ap: f64,
    /// Detection efficiency.
    pub eta_d: f64,
}

impl DetectorModel {
    pub fn validate(&self) -> Result<(), Error> {
        if !(0.0..1.0).contains(&self.y0) {
            return Err(Error::Domain(format!("dark-count rate {} outside [0, 1)", self.y0)));
        }
        if !(0.0..1.0).contains(&self.p_ap) {
            return Err(Error::Domain(format!("afterpulse rate {} outside [0, 1)", self.p_ap)));
        }
        if !(self.eta_d > 0.0 && self.eta_d <= 1.0) {
            return Err(Error::Domain(format!("detection efficiency {} outside (0, 1]", self.eta_d)));
        }
        Ok(())
    }

    pub const IDEAL: DetectorModel = DetectorModel { y0: 0.0, p_ap: 0.0, eta_d: 1.0 };
}

/// Optical model of one receiver and its two feeding channels. For BB84 only
/// the `a` side is used.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OpticalLinkModel {
    /// Channel transmittance Alice→receiver, including receiver internal loss
    /// but not detector efficiency.
    pub eta_a: f64,
    /// Channel transmittance Bob→receiver.
    pub eta_b: f64,
    /// Misalignment-error rate.
    pub e_d: f64,
    pub detector: DetectorModel,
    /// Receiver reference phase, radians. Zero when frames are aligned.
    pub theta_c: f64,
}

impl OpticalLinkModel {
    pub fn validate(&self) -> Result<(), Error> {
        // Zero transmittance is a legal degenerate channel (it yields a zero
        // key rate, not an error).
        for (name, eta) in [("eta_a", self.eta_a), ("eta_b", self.eta_b)] {
            if !(0.0..=1.0).contains(&eta) {
                return Err(Error::Domain(format!("{name}={eta} outside [0, 1]")));
            }
        }
        if !(0.0..0.5).contains(&self.e_d) {
            return Err(Error::Domain(format!("misalignment e_d={} outside [0, 0.5)", self.e_d)));
        }
        self.detector.validate()
    }

    /// Effective transmittance of the `a` channel with detector efficiency
    /// folded in. The click-probability formula carries no explicit
    /// efficiency, so it lives upstream of the arrival amplitudes.
    pub fn eta_eff_a(&self) -> f64 {
        self.eta_a * self.detector.eta_d
    }

    pub fn eta_eff_b(&self) -> f64 {
        self.eta_b * self.detector.eta_d
    }
}
