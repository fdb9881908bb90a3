//! Pulse-level stochastic simulator for both protocols.
//!
//! Runs are deterministic in (config, seed) and are organized in fixed-size
//! shards, each with its own counter-derived RNG stream, so a run can be
//! driven from any number of worker threads and merged by shard index without
//! changing the result.

use alloc::format;
use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::optics::{click_probability_unchecked, detection_intensities_from_amplitudes};
use crate::types::{Basis, Intensity, OpticalLinkModel, SourceSettings};
use crate::Error;

/// Pulses per shard. Fixed so that threading never changes shard boundaries.
pub const SHARD_SIZE: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MdiSessionConfig {
    pub n_pulses: u64,
    pub seed: u64,
    pub source_a: SourceSettings,
    pub source_b: SourceSettings,
    pub link: OpticalLinkModel,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Bb84SessionConfig {
    pub n_pulses: u64,
    pub seed: u64,
    pub source: SourceSettings,
    pub link: OpticalLinkModel,
    /// Receiver's probability of measuring in X. Defaults to the source's
    /// X-basis marginal when absent.
    pub receiver_prob_x: Option<f64>,
}

/// Counters of one MDI (intensity-pair, basis) cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MdiCell {
    pub n_pairs: u64,
    pub n_coincidence: u64,
    pub n_error: u64,
}

/// Sifted coincidence statistics of an MDI run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ObservedStatisticsMdi {
    pub n_pulses: u64,
    pub n_sifted: u64,
    cells: [[[MdiCell; 3]; 3]; 2],
}

impl ObservedStatisticsMdi {
    pub fn cell(&self, basis: Basis, a: Intensity, b: Intensity) -> &MdiCell {
        &self.cells[basis.index()][a.index()][b.index()]
    }

    fn cell_mut(&mut self, basis: Basis, a: Intensity, b: Intensity) -> &mut MdiCell {
        &mut self.cells[basis.index()][a.index()][b.index()]
    }

    /// Gain estimate of a cell, in the code-table-sum normalization used by
    /// the protocol's gain equations: four setting pairs per basis, so the
    /// per-pair coincidence fraction is scaled by 4.
    pub fn gain(&self, basis: Basis, a: Intensity, b: Intensity) -> Option<f64> {
        let c = self.cell(basis, a, b);
        (c.n_pairs > 0).then(|| 4.0 * c.n_coincidence as f64 / c.n_pairs as f64)
    }

    /// Binomial standard error of [`Self::gain`].
    pub fn gain_std_error(&self, basis: Basis, a: Intensity, b: Intensity) -> Option<f64> {
        let c = self.cell(basis, a, b);
        (c.n_pairs > 0).then(|| {
            let n = c.n_pairs as f64;
            let p = c.n_coincidence as f64 / n;
            4.0 * libm::sqrt(p * (1.0 - p) / n)
        })
    }

    pub fn qber(&self, basis: Basis, a: Intensity, b: Intensity) -> Option<f64> {
        let c = self.cell(basis, a, b);
        (c.n_coincidence > 0).then(|| c.n_error as f64 / c.n_coincidence as f64)
    }

    pub fn qber_std_error(&self, basis: Basis, a: Intensity, b: Intensity) -> Option<f64> {
        let c = self.cell(basis, a, b);
        (c.n_coincidence > 0).then(|| {
            let n = c.n_coincidence as f64;
            let p = c.n_error as f64 / n;
            libm::sqrt(p * (1.0 - p) / n)
        })
    }

    pub fn total_cell_pairs(&self) -> u64 {
        self.cells
            .iter()
            .flat_map(|b| b.iter().flat_map(|r| r.iter()))
            .map(|c| c.n_pairs)
            .sum()
    }

    pub fn merge(&mut self, other: &ObservedStatisticsMdi) {
        self.n_pulses += other.n_pulses;
        self.n_sifted += other.n_sifted;
        for bi in 0..2 {
            for ai in 0..3 {
                for bj in 0..3 {
                    let dst = &mut self.cells[bi][ai][bj];
                    let src = &other.cells[bi][ai][bj];
                    dst.n_pairs += src.n_pairs;
                    dst.n_coincidence += src.n_coincidence;
                    dst.n_error += src.n_error;
                }
            }
        }
    }
}

/// Counters of one BB84 (intensity, basis) cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Bb84Cell {
    /// Pulses sent in this cell whose bases matched at the receiver.
    pub n_sent: u64,
    pub n_detected: u64,
    pub n_error: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ObservedStatisticsBb84 {
    pub n_pulses: u64,
    pub n_sifted: u64,
    cells: [[Bb84Cell; 3]; 2],
}

impl ObservedStatisticsBb84 {
    pub fn cell(&self, basis: Basis, i: Intensity) -> &Bb84Cell {
        &self.cells[basis.index()][i.index()]
    }

    fn cell_mut(&mut self, basis: Basis, i: Intensity) -> &mut Bb84Cell {
        &mut self.cells[basis.index()][i.index()]
    }

    pub fn gain(&self, basis: Basis, i: Intensity) -> Option<f64> {
        let c = self.cell(basis, i);
        (c.n_sent > 0).then(|| c.n_detected as f64 / c.n_sent as f64)
    }

    pub fn gain_std_error(&self, basis: Basis, i: Intensity) -> Option<f64> {
        let c = self.cell(basis, i);
        (c.n_sent > 0).then(|| {
            let n = c.n_sent as f64;
            let p = c.n_detected as f64 / n;
            libm::sqrt(p * (1.0 - p) / n)
        })
    }

    pub fn qber(&self, basis: Basis, i: Intensity) -> Option<f64> {
        let c = self.cell(basis, i);
        (c.n_detected > 0).then(|| c.n_error as f64 / c.n_detected as f64)
    }

    pub fn total_cell_sent(&self) -> u64 {
        self.cells.iter().flat_map(|b| b.iter()).map(|c| c.n_sent).sum()
    }

    pub fn merge(&mut self, other: &ObservedStatisticsBb84) {
        self.n_pulses += other.n_pulses;
        self.n_sifted += other.n_sifted;
        for bi in 0..2 {
            for ii in 0..3 {
                let dst = &mut self.cells[bi][ii];
                let src = &other.cells[bi][ii];
                dst.n_sent += src.n_sent;
                dst.n_detected += src.n_detected;
                dst.n_error += src.n_error;
            }
        }
    }
}

/// Number of shards a run of `n_pulses` splits into.
pub fn shard_count(n_pulses: u64) -> u64 {
    n_pulses.div_ceil(SHARD_SIZE)
}

// splitmix64; used only to expand (seed, shard, salt) into an RNG key.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn shard_rng(seed: u64, shard: u64, salt: u64) -> ChaCha8Rng {
    let mut state = seed ^ salt;
    let mut key = [0u8; 32];
    state = state.wrapping_add(shard.wrapping_mul(0xd1342543de82ef95));
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

#[inline]
fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    // 53-bit uniform in [0, 1).
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

struct EmissionSampler {
    // Cumulative probability over the six (basis, intensity) cells.
    cum: [f64; 6],
}

impl EmissionSampler {
    fn new(source: &SourceSettings) -> Self {
        let mut cum = [0.0; 6];
        let mut acc = 0.0;
        for (i, slot) in cum.iter_mut().enumerate() {
            acc += source.prob[i / 3][i % 3];
            *slot = acc;
        }
        cum[5] = 1.0;
        EmissionSampler { cum }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> (Basis, Intensity) {
        let u = uniform(rng);
        let idx = self.cum.iter().position(|&c| u < c).unwrap_or(5);
        let basis = if idx < 3 { Basis::X } else { Basis::Y };
        (basis, Intensity::ALL[idx % 3])
    }
}

fn validate_mdi(cfg: &MdiSessionConfig) -> Result<(), Error> {
    if cfg.n_pulses == 0 {
        return Err(Error::Domain("n_pulses must be at least 1".into()));
    }
    cfg.source_a.validate()?;
    cfg.source_b.validate()?;
    cfg.link.validate()
}

/// Simulate one shard of an MDI session. Shard `i` covers pulses
/// `[i·SHARD_SIZE, min((i+1)·SHARD_SIZE, n_pulses))`.
pub fn simulate_mdi_shard(cfg: &MdiSessionConfig, shard: u64) -> ObservedStatisticsMdi {
    let lo = shard * SHARD_SIZE;
    let hi = cfg.n_pulses.min(lo + SHARD_SIZE);
    let mut rng = shard_rng(cfg.seed, shard, 0x6d64_6931);
    let sampler_a = EmissionSampler::new(&cfg.source_a);
    let sampler_b = EmissionSampler::new(&cfg.source_b);
    let link = &cfg.link;
    let detector = &link.detector;
    let two_pi = 2.0 * core::f64::consts::PI;

    let mut out =
        ObservedStatisticsMdi { n_pulses: hi.saturating_sub(lo), ..Default::default() };
    for _ in lo..hi {
        let (basis_a, int_a) = sampler_a.draw(&mut rng);
        let (basis_b, int_b) = sampler_b.draw(&mut rng);
        // Key bits, global phases and the misalignment draw are consumed
        // unconditionally so sifting does not shift the stream.
        let bit_a = (rng.next_u64() & 1) as usize;
        let bit_b = (rng.next_u64() & 1) as usize;
        let dphi = uniform(&mut rng) * two_pi - uniform(&mut rng) * two_pi;
        let u1 = uniform(&mut rng);
        let u2 = uniform(&mut rng);
        let u_flip = uniform(&mut rng);
        if basis_a != basis_b {
            continue;
        }
        out.n_sifted += 1;
        let theta_a = basis_a.phase_settings()[bit_a];
        let theta_b = basis_b.phase_settings()[bit_b];
        let a_sq = cfg.source_a.intensity(int_a) * link.eta_eff_a() / 4.0;
        let b_sq = cfg.source_b.intensity(int_b) * link.eta_eff_b() / 4.0;
        let (psi1, psi2) = detection_intensities_from_amplitudes(
            a_sq, b_sq, theta_a, theta_b, link.theta_c, dphi,
        );
        let cell = out.cell_mut(basis_a, int_a, int_b);
        cell.n_pairs += 1;
        let click1 = u1 < click_probability_unchecked(psi1, detector);
        let click2 = u2 < click_probability_unchecked(psi2, detector);
        if click1 && click2 {
            cell.n_coincidence += 1;
            let matched = bit_a == bit_b;
            let flip = u_flip < link.e_d;
            let error = match basis_a {
                Basis::X => !matched ^ flip,
                Basis::Y => matched ^ flip,
            };
            if error {
                cell.n_error += 1;
            }
        }
    }
    out
}

/// Full single-threaded MDI run; shards merged in index order.
pub fn simulate_mdi(cfg: &MdiSessionConfig) -> Result<ObservedStatisticsMdi, Error> {
    validate_mdi(cfg)?;
    let mut out = ObservedStatisticsMdi::default();
    for shard in 0..shard_count(cfg.n_pulses) {
        out.merge(&simulate_mdi_shard(cfg, shard));
    }
    Ok(out)
}

fn validate_bb84(cfg: &Bb84SessionConfig) -> Result<(), Error> {
    if cfg.n_pulses == 0 {
        return Err(Error::Domain("n_pulses must be at least 1".into()));
    }
    if let Some(p) = cfg.receiver_prob_x {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("receiver_prob_x {p} outside [0, 1]")));
        }
    }
    cfg.source.validate()?;
    cfg.link.validate()
}

/// Simulate one shard of a BB84 session on the `a` channel of the link.
pub fn simulate_bb84_shard(cfg: &Bb84SessionConfig, shard: u64) -> ObservedStatisticsBb84 {
    let lo = shard * SHARD_SIZE;
    let hi = cfg.n_pulses.min(lo + SHARD_SIZE);
    let mut rng = shard_rng(cfg.seed, shard, 0x6262_3834);
    let sampler = EmissionSampler::new(&cfg.source);
    let prob_x = cfg.receiver_prob_x.unwrap_or_else(|| cfg.source.basis_weight(Basis::X));
    let link = &cfg.link;
    let detector = &link.detector;

    let mut out =
        ObservedStatisticsBb84 { n_pulses: hi.saturating_sub(lo), ..Default::default() };
    for _ in lo..hi {
        let (basis, class) = sampler.draw(&mut rng);
        let receiver_basis = if uniform(&mut rng) < prob_x { Basis::X } else { Basis::Y };
        let u_correct = uniform(&mut rng);
        let u_wrong = uniform(&mut rng);
        let u_double = uniform(&mut rng);
        if basis != receiver_basis {
            continue;
        }
        out.n_sifted += 1;
        let cell = out.cell_mut(basis, class);
        cell.n_sent += 1;
        let arriving = cfg.source.intensity(class) * link.eta_eff_a();
        let click_correct =
            u_correct < click_probability_unchecked(arriving * (1.0 - link.e_d), detector);
        let click_wrong = u_wrong < click_probability_unchecked(arriving * link.e_d, detector);
        match (click_correct, click_wrong) {
            (false, false) => {}
            (true, false) => cell.n_detected += 1,
            (false, true) => {
                cell.n_detected += 1;
                cell.n_error += 1;
            }
            (true, true) => {
                // Double click: valid response, random bit assignment.
                cell.n_detected += 1;
                if u_double < 0.5 {
                    cell.n_error += 1;
                }
            }
        }
    }
    out
}

/// Full single-threaded BB84 run.
pub fn simulate_bb84(cfg: &Bb84SessionConfig) -> Result<ObservedStatisticsBb84, Error> {
    validate_bb84(cfg)?;
    let mut out = ObservedStatisticsBb84::default();
    for shard in 0..shard_count(cfg.n_pulses) {
        out.merge(&simulate_bb84_shard(cfg, shard));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HomSessionConfig {
    pub n_pairs: u64,
    pub seed: u64,
    pub link: OpticalLinkModel,
    /// Common pulse intensity on both arms.
    pub iota: f64,
    /// When false the pulses are treated as distinguishable and the dip
    /// vanishes.
    pub interference: bool,
}

/// Raw coincidence counters of a HOM run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HomCounts {
    pub n_pairs: u64,
    pub coincidences_interfering: u64,
    pub coincidences_distinguishable: u64,
}

impl HomCounts {
    pub fn merge(&mut self, other: &HomCounts) {
        self.n_pairs += other.n_pairs;
        self.coincidences_interfering += other.coincidences_interfering;
        self.coincidences_distinguishable += other.coincidences_distinguishable;
    }
}

pub fn simulate_hom_shard(cfg: &HomSessionConfig, shard: u64) -> HomCounts {
    let lo = shard * SHARD_SIZE;
    let hi = cfg.n_pairs.min(lo + SHARD_SIZE);
    let mut rng = shard_rng(cfg.seed, shard, 0x686f_6d76);
    let link = &cfg.link;
    let detector = &link.detector;
    let a_sq = cfg.iota * link.eta_eff_a() / 4.0;
    let b_sq = cfg.iota * link.eta_eff_b() / 4.0;
    let half_pi = core::f64::consts::FRAC_PI_2;
    let two_pi = 2.0 * core::f64::consts::PI;
    let flat = click_probability_unchecked(a_sq + b_sq, detector);

    let mut out = HomCounts { n_pairs: hi.saturating_sub(lo), ..Default::default() };
    for _ in lo..hi {
        let dphi = uniform(&mut rng) * two_pi;
        let (p1, p2) = if cfg.interference {
            let (psi1, psi2) = detection_intensities_from_amplitudes(
                a_sq, b_sq, half_pi, half_pi, link.theta_c, dphi,
            );
            (
                click_probability_unchecked(psi1, detector),
                click_probability_unchecked(psi2, detector),
            )
        } else {
            (flat, flat)
        };
        if uniform(&mut rng) < p1 && uniform(&mut rng) < p2 {
            out.coincidences_interfering += 1;
        }
        if uniform(&mut rng) < flat && uniform(&mut rng) < flat {
            out.coincidences_distinguishable += 1;
        }
    }
    out
}

/// Visibility and its standard error from raw HOM counts.
pub fn hom_visibility_from_counts(counts: &HomCounts) -> Result<(f64, f64), Error> {
    let min = counts.coincidences_interfering.min(counts.coincidences_distinguishable);
    if min < 100 {
        return Err(Error::LowStatistics { needed: 100, got: min });
    }
    let c_on = counts.coincidences_interfering as f64;
    let c_off = counts.coincidences_distinguishable as f64;
    let ratio = c_on / c_off;
    let visibility = 1.0 - ratio;
    let std_error = ratio * libm::sqrt(1.0 / c_on + 1.0 / c_off);
    Ok((visibility, std_error))
}

/// Monte Carlo HOM visibility: `1 − C_interfering/C_distinguishable` with a
/// binomial standard error.
pub fn estimate_hom_visibility(cfg: &HomSessionConfig) -> Result<(f64, f64), Error> {
    if cfg.n_pairs == 0 {
        return Err(Error::Domain("n_pairs must be at least 1".into()));
    }
    if cfg.iota < 0.0 {
        return Err(Error::Domain(format!("negative intensity {}", cfg.iota)));
    }
    cfg.link.validate()?;
    let mut counts = HomCounts::default();
    for shard in 0..shard_count(cfg.n_pairs) {
        counts.merge(&simulate_hom_shard(cfg, shard));
    }
    hom_visibility_from_counts(&counts)
}

/// Convenience: collect all shard statistics of an MDI run into a vector so a
/// caller can fan them out across threads and merge by index.
pub fn mdi_shard_indices(cfg: &MdiSessionConfig) -> Result<Vec<u64>, Error> {
    validate_mdi(cfg)?;
    Ok((0..shard_count(cfg.n_pulses)).collect())
}

pub fn bb84_shard_indices(cfg: &Bb84SessionConfig) -> Result<Vec<u64>, Error> {
    validate_bb84(cfg)?;
    Ok((0..shard_count(cfg.n_pulses)).collect())
}
