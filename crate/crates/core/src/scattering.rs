//! Single-site scattering matrices and the Hermitian generator built from
//! them.
//!
//! The scattering matrix composes a de-excitation with an excitation
//! amplitude, `T = M_s^H M_i`, and is generally non-Hermitian. Hermitian
//! observables are obtained by phase symmetrization, with the phase chosen
//! per state so the anomalous squared-operator term drops out. This module
//! is state-free: expectation values needed for the phase are supplied by
//! the caller.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::angular::DipoleMatrix;
use crate::geometry::PolarizationVector;
use crate::linalg::{self, CMatrix, LinalgError};

#[derive(Debug, Error)]
pub enum ScatteringError {
    #[error("dipole matrices do not share core/valence bases")]
    BasisMismatch,
    #[error("matrix dimension {got} does not match valence dimension {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Polarization-resolved single-site scattering matrix `T(eps_i, eps_s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TMatrix {
    entries: CMatrix,
    eps_i: Option<PolarizationVector>,
    eps_s: Option<PolarizationVector>,
}

impl TMatrix {
    /// Wrap an explicit valence x valence matrix (no polarization record).
    pub fn from_entries(entries: CMatrix) -> Self {
        Self {
            entries,
            eps_i: None,
            eps_s: None,
        }
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn eps_i(&self) -> Option<&PolarizationVector> {
        self.eps_i.as_ref()
    }

    pub fn eps_s(&self) -> Option<&PolarizationVector> {
        self.eps_s.as_ref()
    }

    /// Commutator `[T^H, T]`; traceless and Hermitian, zero iff T is normal.
    pub fn adjoint_commutator(&self) -> CMatrix {
        linalg::commutator(&self.entries.adjoint(), &self.entries)
    }
}

/// Scattering matrix `T_ab = sum_g conj(M_s[g, a]) M_i[g, b]`.
pub fn t_matrix(m_i: &DipoleMatrix, m_s: &DipoleMatrix) -> Result<TMatrix, ScatteringError> {
    if m_i.basis() != m_s.basis() {
        return Err(ScatteringError::BasisMismatch);
    }
    let entries = m_s.entries().adjoint() * m_i.entries();
    Ok(TMatrix {
        entries,
        eps_i: m_i.polarization().cloned(),
        eps_s: m_s.polarization().cloned(),
    })
}

/// The reversed-polarization matrix `T(eps_s, eps_i) = T(eps_i, eps_s)^H`.
pub fn conjugate_t(t: &TMatrix) -> TMatrix {
    TMatrix {
        entries: t.entries.adjoint(),
        eps_i: t.eps_s.clone(),
        eps_s: t.eps_i.clone(),
    }
}

/// Threshold below which `<T_q^2>` is treated as zero when optimizing the
/// phase; any phase nullifies an exactly vanishing term.
pub const T_SQ_DEGENERATE_TOL: f64 = 1e-12;

/// Phase that nullifies the anomalous term: `pi/4 - Arg(<T_q^2>)/2`,
/// reduced to `[0, pi)`. Returns `pi/4` when `<T_q^2>` vanishes.
pub fn optimal_phase(t_sq_expectation: C64) -> f64 {
    if t_sq_expectation.norm() < T_SQ_DEGENERATE_TOL {
        return FRAC_PI_4;
    }
    let phi = FRAC_PI_4 - 0.5 * t_sq_expectation.arg();
    phi.rem_euclid(PI)
}

/// Site-local Hermitian generator matrix at one lattice site.
#[derive(Debug, Clone)]
pub struct LocalGeneratorMatrix {
    entries: CMatrix,
    site_index: usize,
}

impl LocalGeneratorMatrix {
    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn site_index(&self) -> usize {
        self.site_index
    }

    /// Eigenvalue spread of the (Hermitian) local generator.
    pub fn spread(&self) -> Result<f64, ScatteringError> {
        eigenvalue_spread(&self.entries)
    }
}

/// Local generator `e^{i(q r_j + phase)} T + e^{-i(q r_j + phase)} T^H`,
/// Hermitian by construction.
pub fn local_generator(
    t: &TMatrix,
    q_chain: f64,
    r_j: f64,
    phase: f64,
    site_index: usize,
) -> LocalGeneratorMatrix {
    let theta = q_chain * r_j + phase;
    let forward = t.entries.scale_complex(C64::from_polar(1.0, theta));
    let entries = &forward + forward.adjoint();
    LocalGeneratorMatrix {
        entries,
        site_index,
    }
}

/// Descriptor of the momentum-resolved Hermitian generator
/// `(e^{i phase} T_q + e^{-i phase} T_q^H) / sqrt(2)` on a chain.
#[derive(Debug, Clone)]
pub struct HermitianGenerator {
    pub t: TMatrix,
    pub q_chain: f64,
    pub phase: f64,
    pub site_positions: Vec<f64>,
}

impl HermitianGenerator {
    pub fn new(t: TMatrix, q_chain: f64, phase: f64, site_positions: Vec<f64>) -> Self {
        Self {
            t,
            q_chain,
            phase,
            site_positions,
        }
    }

    /// Site-local generator matrices, one per site.
    pub fn local_matrices(&self) -> Vec<LocalGeneratorMatrix> {
        self.site_positions
            .iter()
            .enumerate()
            .map(|(j, &r)| local_generator(&self.t, self.q_chain, r, self.phase, j))
            .collect()
    }
}

/// Tolerance used when validating Hermiticity of spread inputs.
pub const SPREAD_HERMITICITY_TOL: f64 = 1e-10;

/// Spread `lambda_max - lambda_min` of a Hermitian matrix.
///
/// Non-Hermitian input (beyond 1e-10) is a domain error reporting the
/// largest asymmetry.
pub fn eigenvalue_spread(h: &CMatrix) -> Result<f64, ScatteringError> {
    let decomp = linalg::eigh(h, SPREAD_HERMITICITY_TOL)?;
    Ok(decomp.spread())
}

trait ScaleComplex {
    fn scale_complex(&self, z: C64) -> CMatrix;
}

impl ScaleComplex for CMatrix {
    fn scale_complex(&self, z: C64) -> CMatrix {
        self.map(|e| e * z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular::{dipole_matrix, OrbitalBasis};
    use crate::geometry::{Beam, BeamGeometry, PolLabel};
    use crate::linalg::haar_unitary;
    use nalgebra::Vector3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha12Rng) -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        })
    }

    fn atomic_t(theta_i: f64, theta_s: f64, li: PolLabel, ls: PolLabel) -> TMatrix {
        let geom = BeamGeometry::new(theta_i, theta_s, 0.0).unwrap();
        let basis = OrbitalBasis::atomic_2p_3d();
        let m_i = dipole_matrix(&geom.polarization(Beam::Incident, li), &basis, 1.0).unwrap();
        let m_s = dipole_matrix(&geom.polarization(Beam::Scattered, ls), &basis, 1.0).unwrap();
        t_matrix(&m_i, &m_s).unwrap()
    }

    #[test]
    fn t_matrix_equals_triple_loop() {
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let basis = OrbitalBasis::atomic_2p_3d();
        let eps = |v: Vector3<f64>| {
            crate::geometry::PolarizationVector::from_real(v.normalize()).unwrap()
        };
        let mut m_i = dipole_matrix(&eps(Vector3::new(1.0, 0.2, -0.3)), &basis, 1.0).unwrap();
        let mut m_s = dipole_matrix(&eps(Vector3::new(0.1, -0.9, 0.4)), &basis, 1.0).unwrap();
        // overwrite with fully random entries to exercise generic matrices
        let _ = &mut m_i;
        let _ = &mut m_s;
        let a = random_matrix(6, 10, &mut rng);
        let b = random_matrix(6, 10, &mut rng);
        let t = b.adjoint() * &a;
        for alpha in 0..10 {
            for beta in 0..10 {
                let mut sum = C64::new(0.0, 0.0);
                for gamma in 0..6 {
                    sum += b[(gamma, alpha)].conj() * a[(gamma, beta)];
                }
                assert!((t[(alpha, beta)] - sum).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn adjoint_identity_on_angle_grid() {
        use std::f64::consts::FRAC_PI_2;
        for i in 0..5 {
            for j in 0..5 {
                let ti = FRAC_PI_2 * i as f64 / 4.0;
                let ts = FRAC_PI_2 * j as f64 / 4.0;
                for (li, ls) in [
                    (PolLabel::Pi, PolLabel::Pi),
                    (PolLabel::Pi, PolLabel::Sigma),
                    (PolLabel::Sigma, PolLabel::Pi),
                ] {
                    let t_fwd = atomic_t(ti, ts, li, ls);
                    // reversed roles: incident gets the scattered polarization
                    let geom = BeamGeometry::new(ti, ts, 0.0).unwrap();
                    let basis = OrbitalBasis::atomic_2p_3d();
                    let m_rev_i =
                        dipole_matrix(&geom.polarization(Beam::Scattered, ls), &basis, 1.0)
                            .unwrap();
                    let m_rev_s =
                        dipole_matrix(&geom.polarization(Beam::Incident, li), &basis, 1.0)
                            .unwrap();
                    let t_rev = t_matrix(&m_rev_i, &m_rev_s).unwrap();
                    let diff = (t_rev.entries() - t_fwd.entries().adjoint()).map(|z| z.norm());
                    assert!(diff.max() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn equal_polarizations_give_hermitian_psd() {
        let t = atomic_t(0.7, 0.7, PolLabel::Pi, PolLabel::Pi);
        // equal polarizations only when theta_i = theta_s gives pi_i = pi_s? No:
        // pi_i != pi_s in general. Build T = M^H M directly instead.
        let geom = BeamGeometry::new(0.4, 0.9, 0.0).unwrap();
        let basis = OrbitalBasis::atomic_2p_3d();
        let m = dipole_matrix(&geom.polarization(Beam::Incident, PolLabel::Pi), &basis, 1.0)
            .unwrap();
        let t_same = t_matrix(&m, &m).unwrap();
        assert!(crate::linalg::hermiticity_error(t_same.entries()) < 1e-14);
        let eig = crate::linalg::eigh(t_same.entries(), 1e-12).unwrap();
        assert!(eig.min() > -1e-12, "PSD: min eigenvalue {}", eig.min());
        drop(t);
    }

    #[test]
    fn conjugate_t_is_involution() {
        let t = atomic_t(0.3, 1.1, PolLabel::Pi, PolLabel::Sigma);
        let back = conjugate_t(&conjugate_t(&t));
        assert_eq!(back.entries(), t.entries());
        let tr: C64 = conjugate_t(&t).entries().trace();
        assert!((tr - t.entries().trace().conj()).norm() < 1e-14);
    }

    #[test]
    fn optimal_phase_examples() {
        let phi = optimal_phase(C64::new(1.0, 0.0));
        assert!((phi - FRAC_PI_4).abs() < 1e-15);
        assert!((C64::from_polar(1.0, 2.0 * phi) * C64::new(1.0, 0.0)).re.abs() < 1e-15);

        let phi = optimal_phase(C64::new(0.0, 1.0));
        assert!(phi.abs() < 1e-15);
        assert!((C64::from_polar(1.0, 2.0 * phi) * C64::new(0.0, 1.0)).re.abs() < 1e-15);

        assert!((optimal_phase(C64::new(0.0, 0.0)) - FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn optimal_phase_nullifies_real_part() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for _ in 0..200 {
            let z = C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            let phi = optimal_phase(z);
            assert!((0.0..PI).contains(&phi));
            let nulled = (C64::from_polar(1.0, 2.0 * phi) * z).re;
            assert!(nulled.abs() < 1e-13 * z.norm().max(1.0));
        }
    }

    #[test]
    fn local_generator_cases() {
        let t = atomic_t(0.5, 0.8, PolLabel::Pi, PolLabel::Sigma);
        // phase argument zero on a Hermitian T doubles it
        let geom = BeamGeometry::new(0.4, 0.9, 0.0).unwrap();
        let basis = OrbitalBasis::atomic_2p_3d();
        let m = dipole_matrix(&geom.polarization(Beam::Incident, PolLabel::Pi), &basis, 1.0)
            .unwrap();
        let t_h = t_matrix(&m, &m).unwrap();
        let g = local_generator(&t_h, 0.0, 0.0, 0.0, 0);
        assert!((g.entries() - t_h.entries().map(|z| z * 2.0)).norm() < 1e-14);

        // phase pi flips the sign relative to phase 0
        let g0 = local_generator(&t, 1.3, 2.0, 0.0, 0);
        let gpi = local_generator(&t, 1.3, 2.0, PI, 0);
        assert!((g0.entries() + gpi.entries()).norm() < 1e-13);

        // exact Hermiticity by construction
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        for _ in 0..100 {
            let raw = random_matrix(6, 6, &mut rng);
            let t = TMatrix::from_entries(raw);
            let g = local_generator(&t, rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>(), 0);
            assert_eq!(crate::linalg::hermiticity_error(g.entries()), 0.0);
            let eig = crate::linalg::eigh(g.entries(), 1e-12).unwrap();
            assert!(eig.values.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn spread_examples_and_unitary_invariance() {
        let diag = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(1.0, 0.0),
            C64::new(-1.0, 0.0),
        ]));
        assert!((eigenvalue_spread(&diag).unwrap() - 2.0).abs() < 1e-14);
        let id = CMatrix::identity(5, 5);
        assert!(eigenvalue_spread(&id).unwrap().abs() < 1e-14);

        let mut rng = ChaCha12Rng::seed_from_u64(23);
        for _ in 0..100 {
            let raw = random_matrix(8, 8, &mut rng);
            let h = (&raw + raw.adjoint()).scale(0.5);
            let s0 = eigenvalue_spread(&h).unwrap();
            let u = haar_unitary(8, &mut rng);
            let rotated = &u * &h * u.adjoint();
            let s1 = eigenvalue_spread(&rotated).unwrap();
            assert!((s0 - s1).abs() < 1e-10, "spread changed: {s0} vs {s1}");
        }
    }

    #[test]
    fn spread_rejects_non_hermitian() {
        let mut m = CMatrix::zeros(3, 3);
        m[(0, 1)] = C64::new(0.5, 0.0);
        match eigenvalue_spread(&m) {
            Err(ScatteringError::Linalg(LinalgError::NotHermitian { max_asymmetry, .. })) => {
                assert!((max_asymmetry - 0.5).abs() < 1e-15);
            }
            other => panic!("expected Hermiticity error, got {other:?}"),
        }
    }
}
