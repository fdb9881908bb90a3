//! Simulator-versus-analytic cross-checks: the closed-form channel model and
//! the pulse-level sampler must agree cell by cell within counting noise.

use nsaqkd_core::montecarlo::{
    simulate_bb84, simulate_mdi, Bb84SessionConfig, MdiSessionConfig, SHARD_SIZE,
};
use nsaqkd_core::optics::{bb84_gain_qber, mdi_gain_qber};
use nsaqkd_core::types::{Basis, DetectorModel, Intensity, OpticalLinkModel, SourceSettings};

fn source() -> SourceSettings {
    SourceSettings {
        mu: 0.5,
        nu: 0.1,
        omega: 0.01,
        prob: [[0.35, 0.105, 0.045], [0.35, 0.104, 0.046]],
    }
}

fn link() -> OpticalLinkModel {
    OpticalLinkModel {
        eta_a: 0.0606,
        eta_b: 0.0606,
        e_d: 0.02,
        detector: DetectorModel { y0: 7.5e-6, p_ap: 0.0, eta_d: 0.25 },
        theta_c: 0.0,
    }
}

/// Count-level 3-sigma check with a small discreteness allowance so
/// few-event cells do not flag spuriously.
fn close(observed: u64, trials: u64, p: f64) -> bool {
    let lambda = trials as f64 * p;
    let sigma = (lambda * (1.0 - p)).sqrt();
    ((observed as f64) - lambda).abs() <= 3.0 * sigma + 2.0
}

#[test]
fn mdi_cells_match_the_channel_model_across_seeds() {
    let base = MdiSessionConfig {
        n_pulses: 1_000_000,
        seed: 0,
        source_a: source(),
        source_b: source(),
        link: link(),
    };
    let mut failed_runs = 0;
    for seed in 0..30 {
        let stats = simulate_mdi(&MdiSessionConfig { seed, ..base.clone() }).unwrap();
        let mut ok = true;
        for &basis in &Basis::ALL {
            for &a in &Intensity::ALL {
                for &b in &Intensity::ALL {
                    let cell = stats.cell(basis, a, b);
                    let point = mdi_gain_qber(
                        basis,
                        base.source_a.intensity(a),
                        base.source_b.intensity(b),
                        &base.link,
                    )
                    .unwrap();
                    // Per-pair coincidence probability is a quarter of the
                    // cell gain (four code settings share the cell).
                    let p_click = point.gain / 4.0;
                    ok &= close(cell.n_coincidence, cell.n_pairs, p_click);
                    ok &= close(cell.n_error, cell.n_pairs, p_click * point.qber);
                }
            }
        }
        if !ok {
            failed_runs += 1;
        }
    }
    assert_eq!(failed_runs, 0, "{failed_runs}/30 seeded runs outside 3 sigma");
}

#[test]
fn bb84_cells_match_the_channel_model_across_seeds() {
    let base = Bb84SessionConfig {
        n_pulses: 1_000_000,
        seed: 0,
        source: source(),
        link: link(),
        receiver_prob_x: None,
    };
    let mut failed_runs = 0;
    for seed in 0..30 {
        let stats = simulate_bb84(&Bb84SessionConfig { seed, ..base.clone() }).unwrap();
        let mut ok = true;
        for &basis in &Basis::ALL {
            for &i in &Intensity::ALL {
                let cell = stats.cell(basis, i);
                let point = bb84_gain_qber(basis, base.source.intensity(i), &base.link).unwrap();
                ok &= close(cell.n_detected, cell.n_sent, point.gain);
                ok &= close(cell.n_error, cell.n_sent, point.gain * point.qber);
            }
        }
        if !ok {
            failed_runs += 1;
        }
    }
    assert_eq!(failed_runs, 0, "{failed_runs}/30 seeded runs outside 3 sigma");
}

#[test]
fn counting_conservation() {
    let cfg = MdiSessionConfig {
        n_pulses: 400_000,
        seed: 5,
        source_a: source(),
        source_b: source(),
        link: link(),
    };
    let stats = simulate_mdi(&cfg).unwrap();
    assert_eq!(stats.n_pulses, 400_000);
    assert_eq!(stats.total_cell_pairs(), stats.n_sifted);
    assert!(stats.n_sifted < stats.n_pulses);
    for &basis in &Basis::ALL {
        for &a in &Intensity::ALL {
            for &b in &Intensity::ALL {
                let cell = stats.cell(basis, a, b);
                assert!(cell.n_error <= cell.n_coincidence);
                assert!(cell.n_coincidence <= cell.n_pairs);
            }
        }
    }
}

/// Shard streams must be statistically independent: the sifted-cell
/// occupancy over a long run has to match the multinomial expectation.
/// The threshold is the chi-square 0.001 critical value for 18 degrees of
/// freedom.
#[test]
fn shard_splitting_preserves_the_emission_distribution() {
    let n_pulses = 256 * SHARD_SIZE;
    let cfg = MdiSessionConfig {
        n_pulses,
        seed: 42,
        source_a: source(),
        source_b: source(),
        link: link(),
    };
    let stats = simulate_mdi(&cfg).unwrap();

    let mut chi2 = 0.0;
    let mut sifted_p = 0.0;
    for &basis in &Basis::ALL {
        for &a in &Intensity::ALL {
            for &b in &Intensity::ALL {
                let p = cfg.source_a.prob(basis, a) * cfg.source_b.prob(basis, b);
                sifted_p += p;
                let expected = n_pulses as f64 * p;
                let observed = stats.cell(basis, a, b).n_pairs as f64;
                chi2 += (observed - expected).powi(2) / expected;
            }
        }
    }
    // Basis-mismatched pairs form the 19th category.
    let expected = n_pulses as f64 * (1.0 - sifted_p);
    let observed = (n_pulses - stats.n_sifted) as f64;
    chi2 += (observed - expected).powi(2) / expected;

    const CHI2_CRIT_DF18_P001: f64 = 42.312;
    assert!(chi2 < CHI2_CRIT_DF18_P001, "chi2 = {chi2}");
}
