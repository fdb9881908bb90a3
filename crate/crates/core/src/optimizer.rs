//! Particle-swarm maximization of the key-rate engines over source settings.
//!
//! The swarm is generic over the objective; domain wrappers map a decision
//! vector (intensities plus probability logits) onto valid source settings
//! via a repair projection, so every particle position evaluates to a
//! well-formed protocol configuration.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bb84_keyrate::{bb84_key_rate_analytic, Bb84Scenario, Bb84SecurityParams};
use crate::mdi_keyrate::{mdi_key_rate_analytic, MdiScenario, MdiSecurityParams};
use crate::types::SourceSettings;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PsoConfig {
    pub swarm_size: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub seed: u64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        PsoConfig {
            swarm_size: 50,
            iterations: 200,
            inertia: 0.72,
            cognitive: 1.49,
            social: 1.49,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PsoResult {
    pub best_position: Vec<f64>,
    pub best_value: f64,
    pub evaluations: u64,
    /// Best value after each iteration; non-decreasing.
    pub history: Vec<f64>,
}

#[inline]
fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Maximize `objective` over the axis-aligned box `bounds`. Dimensions with
/// `lo == hi` are pinned to that value. Deterministic in the seed.
pub fn maximize<F>(
    objective: F,
    bounds: &[(f64, f64)],
    cfg: &PsoConfig,
) -> Result<PsoResult, Error>
where
    F: FnMut(&[f64]) -> f64,
{
    maximize_seeded(objective, bounds, &[], cfg)
}

/// [`maximize`] with warm-start positions: each seed replaces one particle's
/// random initialization (clamped into the box), so a known-good candidate
/// is never lost to a sparse feasible region.
pub fn maximize_seeded<F>(
    mut objective: F,
    bounds: &[(f64, f64)],
    seeds: &[Vec<f64>],
    cfg: &PsoConfig,
) -> Result<PsoResult, Error>
where
    F: FnMut(&[f64]) -> f64,
{
    if bounds.is_empty() {
        return Err(Error::Domain("empty search space".into()));
    }
    if cfg.swarm_size < 2 || cfg.iterations == 0 {
        return Err(Error::Domain("need a swarm of at least 2 and a positive iteration count".into()));
    }
    for &(lo, hi) in bounds {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::Domain(format!("invalid bound ({lo}, {hi})")));
        }
    }
    let dim = bounds.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut positions = vec![vec![0.0; dim]; cfg.swarm_size];
    let mut velocities = vec![vec![0.0; dim]; cfg.swarm_size];
    for p in 0..cfg.swarm_size {
        for d in 0..dim {
            let (lo, hi) = bounds[d];
            let span = hi - lo;
            positions[p][d] = lo + uniform(&mut rng) * span;
            velocities[p][d] = (uniform(&mut rng) - 0.5) * span;
        }
    }
    for (p, seed) in seeds.iter().enumerate().take(cfg.swarm_size) {
        if seed.len() != dim {
            return Err(Error::Domain(format!(
                "seed position has {} dimensions, expected {dim}",
                seed.len()
            )));
        }
        for d in 0..dim {
            let (lo, hi) = bounds[d];
            positions[p][d] = seed[d].clamp(lo, hi);
            velocities[p][d] = 0.0;
        }
    }

    let mut evaluations = 0u64;
    let mut best_local = positions.clone();
    let mut best_local_value = vec![f64::NEG_INFINITY; cfg.swarm_size];
    let mut best_position = positions[0].clone();
    let mut best_value = f64::NEG_INFINITY;
    for p in 0..cfg.swarm_size {
        let v = objective(&positions[p]);
        evaluations += 1;
        best_local_value[p] = v;
        if v > best_value {
            best_value = v;
            best_position = positions[p].clone();
        }
    }

    let mut history = Vec::with_capacity(cfg.iterations);
    for _ in 0..cfg.iterations {
        for p in 0..cfg.swarm_size {
            for d in 0..dim {
                let (lo, hi) = bounds[d];
                if lo == hi {
                    positions[p][d] = lo;
                    velocities[p][d] = 0.0;
                    continue;
                }
                let r1 = uniform(&mut rng);
                let r2 = uniform(&mut rng);
                velocities[p][d] = cfg.inertia * velocities[p][d]
                    + cfg.cognitive * r1 * (best_local[p][d] - positions[p][d])
                    + cfg.social * r2 * (best_position[d] - positions[p][d]);
                let mut x = positions[p][d] + velocities[p][d];
                if x < lo {
                    x = lo;
                    velocities[p][d] = 0.0;
                } else if x > hi {
                    x = hi;
                    velocities[p][d] = 0.0;
                }
                positions[p][d] = x;
            }
            let v = objective(&positions[p]);
            evaluations += 1;
            if v > best_local_value[p] {
                best_local_value[p] = v;
                best_local[p].copy_from_slice(&positions[p]);
            }
            if v > best_value {
                best_value = v;
                best_position.copy_from_slice(&positions[p]);
            }
        }
        history.push(best_value);
    }

    Ok(PsoResult { best_position, best_value, evaluations, history })
}

/// Decision-vector layout of a source: `[mu, nu, omega, l0..l5]` where the
/// six logits map onto the (basis, intensity) emission probabilities through
/// a softmax.
pub const SOURCE_DIM: usize = 9;

/// Softmax of the six logits into the emission-probability table.
pub fn softmax_probabilities(logits: &[f64]) -> [[f64; 3]; 2] {
    let mut max = f64::NEG_INFINITY;
    for &l in logits {
        if l > max {
            max = l;
        }
    }
    let mut exps = [0.0; 6];
    let mut sum = 0.0;
    for (i, &l) in logits.iter().enumerate() {
        exps[i] = libm::exp(l - max);
        sum += exps[i];
    }
    let mut prob = [[0.0; 3]; 2];
    for i in 0..6 {
        prob[i / 3][i % 3] = exps[i] / sum;
    }
    prob
}

/// Margin enforced between the decoy intensities by the repair projection.
pub const INTENSITY_MARGIN: f64 = 1e-4;

/// Map a decision vector onto valid source settings. Intensities are
/// repaired to satisfy the decoy ordering `mu > nu + omega`, `nu > omega`.
pub fn decode_source(x: &[f64]) -> Result<SourceSettings, Error> {
    if x.len() != SOURCE_DIM {
        return Err(Error::Domain(format!(
            "decision vector has {} dimensions, expected {SOURCE_DIM}",
            x.len()
        )));
    }
    let omega = x[2].max(0.0);
    let nu = x[1].max(omega + INTENSITY_MARGIN);
    let mu = x[0].max(nu + omega + INTENSITY_MARGIN);
    let source = SourceSettings { mu, nu, omega, prob: softmax_probabilities(&x[3..9]) };
    source.validate()?;
    Ok(source)
}

/// Inverse of [`decode_source`]: encodes settings as a decision vector, for
/// warm-starting the swarm. Logits are centered so they sit inside the
/// default box.
pub fn encode_source(source: &SourceSettings) -> Vec<f64> {
    let mut x = vec![source.mu, source.nu, source.omega];
    let logits: Vec<f64> = source
        .prob
        .iter()
        .flatten()
        .map(|&p| libm::log(p.max(1e-9)))
        .collect();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &l in &logits {
        lo = lo.min(l);
        hi = hi.max(l);
    }
    let shift = (lo + hi) / 2.0;
    x.extend(logits.iter().map(|l| l - shift));
    x
}

/// Default search box for a source decision vector.
pub fn source_bounds() -> Vec<(f64, f64)> {
    let mut b = vec![(0.01, 1.0), (0.005, 0.5), (0.0, 0.2)];
    b.extend(core::iter::repeat_n((-4.0, 4.0), 6));
    b
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SourceOptimum {
    pub source: SourceSettings,
    pub key_rate: f64,
    /// Set when no candidate achieved a positive rate; `source` then merely
    /// echoes the best-scoring (still useless) settings.
    pub zero_rate: bool,
    pub evaluations: u64,
    pub history: Vec<f64>,
}

/// Optimize the BB84 source settings of a scenario; the channel and pulse
/// budget stay fixed. Infeasible or failing configurations score zero.
pub fn optimize_bb84_source(
    base: &Bb84Scenario,
    params: &Bb84SecurityParams,
    cfg: &PsoConfig,
) -> Result<SourceOptimum, Error> {
    base.link.validate()?;
    let seeds = [encode_source(&base.source)];
    let result = maximize_seeded(
        |x| {
            let Ok(source) = decode_source(x) else { return 0.0 };
            let scenario = Bb84Scenario { source, ..base.clone() };
            bb84_key_rate_analytic(&scenario, params).map(|r| r.key_rate).unwrap_or(0.0)
        },
        &source_bounds(),
        &seeds,
        cfg,
    )?;
    let source = decode_source(&result.best_position)?;
    Ok(SourceOptimum {
        source,
        key_rate: result.best_value,
        zero_rate: result.best_value <= 0.0,
        evaluations: result.evaluations,
        history: result.history,
    })
}

/// Optimize a symmetric MDI configuration: both parties share the optimized
/// source settings.
pub fn optimize_mdi_source(
    base: &MdiScenario,
    params: &MdiSecurityParams,
    cfg: &PsoConfig,
) -> Result<SourceOptimum, Error> {
    base.link.validate()?;
    let seeds = [encode_source(&base.source_a)];
    let result = maximize_seeded(
        |x| {
            let Ok(source) = decode_source(x) else { return 0.0 };
            let scenario = MdiScenario {
                source_a: source.clone(),
                source_b: source,
                ..base.clone()
            };
            mdi_key_rate_analytic(&scenario, params).map(|r| r.key_rate).unwrap_or(0.0)
        },
        &source_bounds(),
        &seeds,
        cfg,
    )?;
    let source = decode_source(&result.best_position)?;
    Ok(SourceOptimum {
        source,
        key_rate: result.best_value,
        zero_rate: result.best_value <= 0.0,
        evaluations: result.evaluations,
        history: result.history,
    })
}
