//! Entropy and concentration-bound helpers shared by the key-rate engines.

use alloc::format;

use crate::Error;

/// Binary Shannon entropy H2(x) = −x·log2(x) − (1−x)·log2(1−x).
pub fn binary_entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    let log2 = |v: f64| libm::log(v) / core::f64::consts::LN_2;
    -x * log2(x) - (1.0 - x) * log2(1.0 - x)
}

/// The fluctuation width function used inside the Chernoff bounds:
/// `f(x) = sqrt(2·ln(1/x))`.
///
/// Kept as the single swappable point for alternate width choices; the
/// engines expose a multiplicative `f_scale` for sensitivity studies.
pub fn chernoff_width(x: f64) -> f64 {
    libm::sqrt(2.0 * libm::log(1.0 / x))
}

/// Chernoff-style upper/lower bounds on an observed rate `q` over `n` trials
/// at failure probability `epsilon`:
///
/// ```text
/// upper = q·(1 + f((ε/2)⁴/16)/sqrt(n·q))
/// lower = q·(1 − f((ε/2)^{3/2})/sqrt(n·q))
/// ```
///
/// The lower bound is clamped at 0. For `q = 0` the upper bound comes from
/// the n-trial zero-observation tail.
pub fn chernoff_bounds(q: f64, n: f64, epsilon: f64, f_scale: f64) -> Result<(f64, f64), Error> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain(format!("observed rate {q} outside [0, 1]")));
    }
    if n < 1.0 {
        return Err(Error::Domain(format!("trial count {n} below 1")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!("failure probability {epsilon} outside (0, 1)")));
    }
    let x_upper = libm::pow(epsilon / 2.0, 4.0) / 16.0;
    let x_lower = libm::pow(epsilon / 2.0, 1.5);
    if q == 0.0 {
        let upper = (libm::log(1.0 / x_upper) / n).min(1.0);
        return Ok((upper, 0.0));
    }
    let scale = libm::sqrt(n * q);
    let upper = (q * (1.0 + f_scale * chernoff_width(x_upper) / scale)).min(1.0);
    let lower = (q * (1.0 - f_scale * chernoff_width(x_lower) / scale)).max(0.0);
    Ok((upper, lower))
}

/// Hoeffding deviation term `sqrt((n/2)·ln(21/ε))` applied to event counts.
pub fn hoeffding_delta(n_total: f64, epsilon_sec: f64) -> Result<f64, Error> {
    if n_total < 0.0 {
        return Err(Error::Domain(format!("total count {n_total} negative")));
    }
    // ε = 21 is the degenerate edge where the log term vanishes; anything
    // above would make the radicand negative.
    if !(epsilon_sec > 0.0 && epsilon_sec <= 21.0) {
        return Err(Error::Domain(format!(
            "failure probability {epsilon_sec} outside (0, 21]"
        )));
    }
    Ok(libm::sqrt(n_total / 2.0 * libm::log(21.0 / epsilon_sec)))
}

/// Hoeffding bounds on an observed count given the basis-total trial count.
pub fn hoeffding_bounds(
    count: f64,
    n_basis_total: f64,
    epsilon_sec: f64,
) -> Result<(f64, f64), Error> {
    if count < 0.0 || n_basis_total < count {
        return Err(Error::Domain(format!(
            "need 0 <= count <= basis total, got count={count} total={n_basis_total}"
        )));
    }
    let delta = hoeffding_delta(n_basis_total, epsilon_sec)?;
    Ok((count + delta, (count - delta).max(0.0)))
}
