//! Modeling and analysis workbench for a hybrid phase-encoding QKD system in
//! which two users run MDI-QKD through an untrusted measurement node that also
//! serves them individually as a BB84 receiver.
//!
//! The crate is split along the processing pipeline:
//!
//! * [`optics`] — closed-form channel model: detection intensities at the two
//!   single-photon detectors, click probabilities, analytic gains and QBERs
//!   for both protocols, and Hong-Ou-Mandel visibility.
//! * [`montecarlo`] — pulse-level stochastic simulator; the brute-force
//!   cross-check for `optics` and a generator of synthetic statistics.
//! * [`mdi_keyrate`] / [`bb84_keyrate`] — finite-size three-intensity
//!   decoy-state secure-key-rate engines.
//! * [`optimizer`] — particle-swarm search over source intensities and
//!   emission probabilities.
//! * [`network`] — protocol assignment, rate composition and survivability
//!   analysis for hybrid topologies.
//!
//! Everything here is `no_std` + `alloc`; IO, file formats and the CLI live in
//! the companion `nsaqkd` crate.

// Negated comparisons below are deliberate NaN guards: `!(x > 0.0)` rejects
// NaN where `x <= 0.0` would accept it.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod bb84_keyrate;
pub mod error;
pub mod mdi_keyrate;
pub mod montecarlo;
pub mod network;
pub mod optics;
pub mod optimizer;
pub mod stats;
pub mod types;

pub use error::Error;
pub use types::{Basis, DetectorModel, Intensity, OpticalLinkModel, SourceSettings};

/// Linear transmittance for a loss given in dB.
pub fn db_to_transmittance(loss_db: f64) -> f64 {
    libm::pow(10.0, -loss_db / 10.0)
}
