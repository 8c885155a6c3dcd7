//! Acceptance suite. Every test prints one PASS line on success and
//! asserts the stated tolerance; run with `--nocapture` to see the lines.

mod common;

use std::time::Instant;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use qfi_rixs::angular::{clebsch_gordan, dipole_matrix, HalfInt, OrbitalBasis};
use qfi_rixs::bounds::{commutator_offset, PolChannel, TMatrixSet};
use qfi_rixs::geometry::{BeamGeometry, PolarizationVector};
use qfi_rixs::linalg::CMatrix;
use qfi_rixs::manybody::{
    apply_t_q, qfi_pure, random_k_producible_state, t_sq_expectation, LatticeSpec, PartitionSpec,
};
use qfi_rixs::scattering::TMatrix;
use qfi_rixs::verification::{
    check_angular_properties, check_bound_soundness, check_identity, check_mixed_ordering,
    check_mixed_soundness, check_phase_nullification, check_ucl_convergence, SuiteConfig,
};

const SEED: u64 = 20260810;

fn suite_config() -> SuiteConfig {
    SuiteConfig {
        seed: SEED,
        ..SuiteConfig::default()
    }
}

#[test]
fn criterion_01_spectral_identity() {
    let start = Instant::now();
    let outcome = check_identity(&suite_config()).unwrap();
    assert!(
        outcome.passed,
        "criterion 1 failed: worst relative deviation {:.3e} (tolerance {:.0e})\n{}",
        outcome.statistic, outcome.threshold, outcome.detail
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 120, "runtime budget exceeded: {elapsed:?}");
    println!(
        "criterion 1 (paired-spectra QFI identity, 20 tuples at 1e-8): PASS \
         [deviation {:.3e}, {elapsed:?}]",
        outcome.statistic
    );
}

#[test]
fn criterion_02_ucl_convergence() {
    let start = Instant::now();
    let outcome = check_ucl_convergence(&suite_config()).unwrap();
    assert!(
        outcome.passed,
        "criterion 2 failed: slope {:.4} not within -1 +- 0.1",
        outcome.statistic
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 300, "runtime budget exceeded: {elapsed:?}");
    println!(
        "criterion 2 (UCL convergence slope -1 +- 0.1): PASS [slope {:.4}, {elapsed:?}]",
        outcome.statistic
    );
}

#[test]
fn criterion_03_bound_soundness() {
    let start = Instant::now();
    let cfg = suite_config();
    assert_eq!(cfg.bound_samples, 10_000);
    assert_eq!(cfg.geometries, 20);
    let outcome = check_bound_soundness(&cfg).unwrap();
    assert!(
        outcome.passed,
        "criterion 3 failed: a state exceeded its bound by relative margin {:.3e}",
        outcome.statistic
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 600, "runtime budget exceeded: {elapsed:?}");
    println!(
        "criterion 3 (10,000 k-producible states, zero bound violations at 1e-9): PASS \
         [worst margin {:.3e}, {elapsed:?}]",
        outcome.statistic
    );
}

#[test]
fn criterion_04_phase_nullification() {
    let cfg = suite_config();
    assert!(cfg.phase_cases >= 1_000);
    let outcome = check_phase_nullification(&cfg).unwrap();
    assert!(
        outcome.passed,
        "criterion 4 failed: |Re e^(2i phase) <T_q^2>| = {:.3e} exceeds 1e-12",
        outcome.statistic
    );
    println!(
        "criterion 4 (phase nullification below 1e-12 on {} states): PASS [max {:.3e}]",
        cfg.phase_cases, outcome.statistic
    );
}

#[test]
fn criterion_05_angular_map_properties() {
    let start = Instant::now();
    let cfg = suite_config();
    assert_eq!(cfg.angular_grid, 50);
    let outcome = check_angular_properties(&cfg).unwrap();
    assert!(
        outcome.passed,
        "criterion 5 failed: angular-map deviation {:.3e} exceeds 1e-10",
        outcome.statistic
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "runtime budget exceeded: {elapsed:?}");
    println!(
        "criterion 5 (pi-pi anti-diagonal constancy, constant sigma channels, \
         peak coincidence on a 50x50 grid at 1e-10): PASS [deviation {:.3e}, {elapsed:?}]",
        outcome.statistic
    );
}

#[test]
fn criterion_06_mixed_bound_soundness_and_offset() {
    let cfg = suite_config();
    assert!(cfg.mixed_weights >= 1_000);
    let outcome = check_mixed_soundness(&cfg).unwrap();
    assert!(
        outcome.passed,
        "criterion 6 failed: mixed integral exceeded the bound by {:.3e}",
        outcome.statistic
    );

    // offset term against an independent eigendecomposition route
    let mut rng = ChaCha12Rng::seed_from_u64(SEED ^ 0x6);
    let basis = OrbitalBasis::atomic_2p_3d();
    let mut worst: f64 = 0.0;
    for _ in 0..30 {
        let geom = BeamGeometry::new(
            rng.gen::<f64>() * std::f64::consts::FRAC_PI_2,
            rng.gen::<f64>() * std::f64::consts::FRAC_PI_2,
            rng.gen::<f64>() * 6.0,
        )
        .unwrap();
        let set = TMatrixSet::from_geometry(&geom, &basis, 1.0).unwrap();
        let n_sites = 1 + (rng.gen::<u8>() % 4) as usize;
        let offset = commutator_offset(&set, n_sites).unwrap();
        let mut reference: f64 = 0.0;
        for (_, t) in set.iter() {
            let comm = t.entries().adjoint() * t.entries() - t.entries() * t.entries().adjoint();
            reference = reference.max(common::lambda_max_power_iteration(&comm));
        }
        let expected = 2.0 * n_sites as f64 * reference.max(0.0);
        worst = worst.max((offset - expected).abs());
    }
    assert!(
        worst < 1e-10,
        "criterion 6 failed: offset deviates from the independent route by {worst:.3e}"
    );
    println!(
        "criterion 6 (mixed-bound soundness over {} weight vectors; offset matches \
         power iteration within 1e-10): PASS [margin {:.3e}, offset dev {:.3e}]",
        cfg.mixed_weights, outcome.statistic, worst
    );
}

#[test]
fn criterion_07_mixed_ordering() {
    let outcome = check_mixed_ordering(&suite_config()).unwrap();
    assert!(
        outcome.passed,
        "criterion 7 failed: mixed bound fell below a resolved bound (margin {:.3e})",
        outcome.statistic
    );
    assert!(
        outcome.statistic > 0.0,
        "criterion 7 failed: strict inequality expected when commutators are nonzero"
    );
    println!(
        "criterion 7 (mixed total dominates resolved bounds, strictly for \
         non-normal channels): PASS [min margin {:.3e}]",
        outcome.statistic
    );
}

#[test]
fn criterion_08_kronecker_oracle_equivalence() {
    let mut rng = ChaCha12Rng::seed_from_u64(SEED ^ 0x8);
    let lattice = LatticeSpec::chain(2, 2).unwrap();
    let whole = PartitionSpec::whole(2);
    let mut worst: f64 = 0.0;
    for trial in 0..100u64 {
        let t = TMatrix::from_entries(CMatrix::from_fn(4, 4, |_, _| {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        }));
        let q: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
        let phase: f64 = rng.gen::<f64>() * std::f64::consts::PI;
        let state = random_k_producible_state(&lattice, &whole, SEED ^ trial).unwrap();
        let dense = common::dense_t_q(&lattice, &t, q);

        // apply_t_q
        let fast = apply_t_q(&state, &t, q).unwrap();
        let slow = &dense * state.amplitudes();
        worst = worst.max((&fast - &slow).norm());

        // t_sq_expectation
        let tsq_fast = t_sq_expectation(&state, &t, q).unwrap();
        let tsq_slow = state.amplitudes().dotc(&(&dense * &slow));
        worst = worst.max((tsq_fast - tsq_slow).norm());

        // qfi_pure against the dense generator variance
        let rot = C64::from_polar(1.0, phase);
        let generator = (dense.map(|z| z * rot) + dense.adjoint().map(|z| z * rot.conj()))
            .map(|z| z * std::f64::consts::FRAC_1_SQRT_2);
        let applied = &generator * state.amplitudes();
        let mean = state.amplitudes().dotc(&applied).re;
        let f_dense = 4.0 * (applied.norm_squared() - mean * mean);
        let f_fast = qfi_pure(&state, &t, q, phase).unwrap();
        worst = worst.max((f_dense - f_fast).abs() / f_dense.abs().max(1.0));
    }
    assert!(
        worst < 1e-12,
        "criterion 8 failed: oracle deviation {worst:.3e} exceeds 1e-12"
    );
    println!(
        "criterion 8 (dense Kronecker oracle equivalence, 100 trials at 1e-12): PASS \
         [worst {worst:.3e}]"
    );
}

#[test]
fn criterion_09_cg_and_dipole_correctness() {
    // CG orthonormality up to j = 5/2
    let h = HalfInt::from_twice;
    let mut worst_cg: f64 = 0.0;
    for tj1 in 0..=5i32 {
        for tj2 in 0..=5i32 {
            let mut tjs = Vec::new();
            let mut tj = (tj1 - tj2).abs();
            while tj <= tj1 + tj2 {
                tjs.push(tj);
                tj += 2;
            }
            for &tja in &tjs {
                for &tjb in &tjs {
                    for tma in (-tja..=tja).step_by(2) {
                        for tmb in (-tjb..=tjb).step_by(2) {
                            let mut sum = 0.0;
                            for tm1 in (-tj1..=tj1).step_by(2) {
                                for tm2 in (-tj2..=tj2).step_by(2) {
                                    let a = clebsch_gordan(
                                        h(tj1),
                                        h(tm1),
                                        h(tj2),
                                        h(tm2),
                                        h(tja),
                                        h(tma),
                                    )
                                    .unwrap();
                                    let b = clebsch_gordan(
                                        h(tj1),
                                        h(tm1),
                                        h(tj2),
                                        h(tm2),
                                        h(tjb),
                                        h(tmb),
                                    )
                                    .unwrap();
                                    sum += a * b;
                                }
                            }
                            let expected =
                                if tja == tjb && tma == tmb { 1.0 } else { 0.0 };
                            worst_cg = worst_cg.max((sum - expected).abs());
                        }
                    }
                }
            }
        }
    }
    assert!(
        worst_cg < 1e-12,
        "criterion 9 failed: CG orthonormality deviation {worst_cg:.3e}"
    );

    // dipole matrices against sphere quadrature for 50 random polarizations
    let basis = OrbitalBasis::atomic_2p_3d();
    let mut rng = ChaCha12Rng::seed_from_u64(SEED ^ 0x9);
    let mut worst_dipole: f64 = 0.0;
    for trial in 0..50 {
        let raw = nalgebra::Vector3::new(
            C64::new(rng.sample(StandardNormal), 0.0),
            C64::new(rng.sample(StandardNormal), 0.0),
            C64::new(rng.sample(StandardNormal), 0.0),
        );
        // odd trials get genuinely complex polarizations
        let raw = if trial % 2 == 1 {
            raw.map(|z| z + C64::new(0.0, rng.sample(StandardNormal)))
        } else {
            raw
        };
        let (eps, _) = PolarizationVector::normalized(raw).unwrap();
        let m = dipole_matrix(&eps, &basis, 1.0).unwrap();
        for (a, core) in basis.core().iter().enumerate() {
            for (b, val) in basis.valence().iter().enumerate() {
                let entry = m.entries()[(a, b)];
                if core.spin != val.spin {
                    assert_eq!(
                        entry,
                        C64::new(0.0, 0.0),
                        "criterion 9 failed: spin-flip entry not exactly zero"
                    );
                    continue;
                }
                if (core.ml - val.ml).abs() > 1 {
                    assert_eq!(
                        entry,
                        C64::new(0.0, 0.0),
                        "criterion 9 failed: |delta m| > 1 entry not exactly zero"
                    );
                }
                let oracle = common::dipole_element_quadrature(
                    &eps, core.l, core.ml, val.l, val.ml,
                );
                worst_dipole = worst_dipole.max((entry - oracle).norm());
            }
        }
    }
    assert!(
        worst_dipole < 1e-8,
        "criterion 9 failed: dipole vs quadrature deviation {worst_dipole:.3e}"
    );
    println!(
        "criterion 9 (CG orthonormality to j=5/2 at 1e-12; dipole vs quadrature at 1e-8; \
         exact selection-rule zeros): PASS [CG {worst_cg:.3e}, dipole {worst_dipole:.3e}]"
    );
}

#[test]
fn bound_ordering_rows() {
    // supporting check: in a swept table with mixed rows, every mixed total
    // dominates the resolved rows at the same grid point and k
    let mut config = qfi_rixs::bounds::SweepConfig::new(OrbitalBasis::atomic_2p_3d());
    config.grid_n = 5;
    config.include_mixed = true;
    config.ks = vec![1, 2];
    config.sites = vec![0.0, 1.0];
    let rows = qfi_rixs::bounds::angular_sweep(&config).unwrap();
    let channels: Vec<String> = PolChannel::ALL.iter().map(|c| c.to_string()).collect();
    for point in rows.chunks((channels.len() + 1) * config.ks.len()) {
        for &k in &config.ks {
            let mixed_total = point
                .iter()
                .find(|r| r.channel == "mixed" && r.k == k)
                .unwrap()
                .total;
            for r in point.iter().filter(|r| r.k == k && r.channel != "mixed") {
                assert!(mixed_total >= r.total * (1.0 - 1e-12));
            }
        }
    }
}
