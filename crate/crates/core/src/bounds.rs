//! k-producibility QFI upper bounds and angular sweeps.
//!
//! The polarization-resolved bound is `k * sum_j spread(T_bar_j)^2` with
//! `T_bar_j` the site-local Hermitian generator. The mixed-polarization
//! bound adds to the envelope (the largest resolved bound over the four
//! pi/sigma channels) an offset `2 N max lambda_max([T^H, T])` that is
//! independent of the entanglement depth.

use std::fmt;
use std::fs;
use std::path::Path;

use nalgebra::Vector3;
use rayon::prelude::*;
use thiserror::Error;

use crate::angular::{dipole_matrix, AngularError, OrbitalBasis};
use crate::geometry::{Beam, BeamGeometry, GeometryError, PolLabel};
use crate::linalg;
use crate::scattering::{local_generator, t_matrix, ScatteringError, TMatrix};

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("k = {k} is outside 1..={n}")]
    KOutOfRange { k: usize, n: usize },
    #[error("site list is empty")]
    EmptySites,
    #[error("channel matrices have mismatched dimensions: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("commutator trace {trace:.3e} exceeds the traceless tolerance {tol:.3e}")]
    NotTraceless { trace: f64, tol: f64 },
    #[error("sweep grid must have at least 2 points per axis, got {0}")]
    GridTooSmall(usize),
    #[error("sweep k list is empty")]
    EmptyKList,
    #[error(transparent)]
    Scattering(#[from] ScatteringError),
    #[error(transparent)]
    Angular(#[from] AngularError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// One of the four pi/sigma polarization configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PolChannel {
    pub incident: PolLabel,
    pub scattered: PolLabel,
}

impl PolChannel {
    pub const ALL: [PolChannel; 4] = [
        PolChannel {
            incident: PolLabel::Pi,
            scattered: PolLabel::Pi,
        },
        PolChannel {
            incident: PolLabel::Pi,
            scattered: PolLabel::Sigma,
        },
        PolChannel {
            incident: PolLabel::Sigma,
            scattered: PolLabel::Pi,
        },
        PolChannel {
            incident: PolLabel::Sigma,
            scattered: PolLabel::Sigma,
        },
    ];

    pub fn parse(s: &str) -> Option<Self> {
        let (i, s_label) = s.split_once('-')?;
        let parse_one = |x: &str| match x.trim() {
            "pi" => Some(PolLabel::Pi),
            "sigma" => Some(PolLabel::Sigma),
            _ => None,
        };
        Some(PolChannel {
            incident: parse_one(i)?,
            scattered: parse_one(s_label)?,
        })
    }
}

impl fmt::Display for PolChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.incident, self.scattered)
    }
}

/// The four scattering matrices of the pi/sigma channel grid.
#[derive(Debug, Clone)]
pub struct TMatrixSet {
    matrices: [TMatrix; 4],
}

impl TMatrixSet {
    /// Matrices must be given in [`PolChannel::ALL`] order and share a
    /// dimension.
    pub fn new(matrices: [TMatrix; 4]) -> Result<Self, BoundsError> {
        let dim = matrices[0].dim();
        for m in &matrices[1..] {
            if m.dim() != dim {
                return Err(BoundsError::DimensionMismatch(dim, m.dim()));
            }
        }
        Ok(Self { matrices })
    }

    /// Build all four channels for a geometry on the atomic dipole path.
    pub fn from_geometry(
        geom: &BeamGeometry,
        basis: &OrbitalBasis,
        radial: f64,
    ) -> Result<Self, BoundsError> {
        let mut mats = Vec::with_capacity(4);
        for channel in PolChannel::ALL {
            let eps_i = geom.polarization(Beam::Incident, channel.incident);
            let eps_s = geom.polarization(Beam::Scattered, channel.scattered);
            let m_i = dipole_matrix(&eps_i, basis, radial)?;
            let m_s = dipole_matrix(&eps_s, basis, radial)?;
            mats.push(t_matrix(&m_i, &m_s)?);
        }
        let matrices: [TMatrix; 4] = mats.try_into().expect("four channels");
        Ok(Self { matrices })
    }

    pub fn get(&self, channel: PolChannel) -> &TMatrix {
        let idx = PolChannel::ALL
            .iter()
            .position(|&c| c == channel)
            .expect("channel in canonical set");
        &self.matrices[idx]
    }

    pub fn iter(&self) -> impl Iterator<Item = (PolChannel, &TMatrix)> {
        PolChannel::ALL.iter().copied().zip(self.matrices.iter())
    }
}

/// Result of the polarization-resolved k-producibility bound.
#[derive(Debug, Clone)]
pub struct BoundResult {
    pub k: usize,
    /// `k * sum_j spread_j^2`, in units of the intensity normalization.
    pub value: f64,
    pub per_site_spreads: Vec<f64>,
    pub geometry: Option<BeamGeometry>,
    pub polarization_labels: Option<(PolLabel, PolLabel)>,
}

/// QFI upper bound for k-producible states:
/// `k * sum_j spread(local generator at j)^2`.
pub fn k_producible_bound(
    t: &TMatrix,
    q_chain: f64,
    sites: &[f64],
    phase: f64,
    k: usize,
) -> Result<BoundResult, BoundsError> {
    if sites.is_empty() {
        return Err(BoundsError::EmptySites);
    }
    if k < 1 || k > sites.len() {
        return Err(BoundsError::KOutOfRange { k, n: sites.len() });
    }
    let mut per_site_spreads = Vec::with_capacity(sites.len());
    let mut sum_sq = 0.0;
    for (j, &r_j) in sites.iter().enumerate() {
        let spread = local_generator(t, q_chain, r_j, phase, j).spread()?;
        sum_sq += spread * spread;
        per_site_spreads.push(spread);
    }
    Ok(BoundResult {
        k,
        value: k as f64 * sum_sq,
        per_site_spreads,
        geometry: None,
        polarization_labels: None,
    })
}

/// Traceless tolerance for `[T^H, T]`, relative to the matrix scale.
const TRACELESS_TOL: f64 = 1e-12;

/// Offset term of the mixed-polarization bound:
/// `2 N max over channels of lambda_max([T^H, T])`.
pub fn commutator_offset(set: &TMatrixSet, n_sites: usize) -> Result<f64, BoundsError> {
    let mut max_lambda = f64::NEG_INFINITY;
    for (_, t) in set.iter() {
        let comm = t.adjoint_commutator();
        let scale = t.entries().norm_squared().max(1.0);
        let trace = comm.trace().norm();
        if trace > TRACELESS_TOL * scale {
            return Err(BoundsError::NotTraceless {
                trace,
                tol: TRACELESS_TOL * scale,
            });
        }
        let eig = linalg::eigh(&comm, 1e-10).map_err(ScatteringError::from)?;
        max_lambda = max_lambda.max(eig.max());
    }
    // traceless Hermitian matrices have lambda_max >= 0
    Ok(2.0 * n_sites as f64 * max_lambda.max(0.0))
}

/// Result of the mixed-polarization (polarization-unresolved) bound.
#[derive(Debug, Clone)]
pub struct MixedBoundResult {
    pub k: usize,
    /// Largest polarization-resolved bound over the four channels.
    pub envelope_term: f64,
    /// Depth-independent commutator offset.
    pub offset_term: f64,
    pub total: f64,
    /// The resolved bound of every channel, in [`PolChannel::ALL`] order.
    pub per_channel_bounds: [f64; 4],
}

/// Mixed-polarization bound: envelope plus commutator offset. `phases`
/// are per-channel generator phases in [`PolChannel::ALL`] order.
pub fn mixed_pol_bound(
    set: &TMatrixSet,
    q_chain: f64,
    sites: &[f64],
    phases: [f64; 4],
    k: usize,
) -> Result<MixedBoundResult, BoundsError> {
    let mut per_channel_bounds = [0.0f64; 4];
    for (idx, (_, t)) in set.iter().enumerate() {
        per_channel_bounds[idx] = k_producible_bound(t, q_chain, sites, phases[idx], k)?.value;
    }
    let envelope_term = per_channel_bounds.iter().copied().fold(0.0f64, f64::max);
    let offset_term = commutator_offset(set, sites.len())?;
    Ok(MixedBoundResult {
        k,
        envelope_term,
        offset_term,
        total: envelope_term + offset_term,
        per_channel_bounds,
    })
}

/// Configuration of an angular sweep over the `(theta_i, theta_s)` grid.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    /// Grid points per axis over `[0, pi/2]`, endpoints included.
    pub grid_n: usize,
    /// Azimuth of the scattering plane.
    pub phi: f64,
    pub channels: Vec<PolChannel>,
    pub ks: Vec<usize>,
    pub basis: OrbitalBasis,
    pub radial: f64,
    /// Chain site positions entering the per-site generator phases.
    pub sites: Vec<f64>,
    pub lattice_direction: Vector3<f64>,
    /// Generator phase; the data-only default is pi/4 (a vanishing
    /// `<T_q^2>` leaves the phase free).
    pub phase: f64,
    /// Append mixed-polarization rows per grid point.
    pub include_mixed: bool,
}

impl SweepConfig {
    pub fn new(basis: OrbitalBasis) -> Self {
        Self {
            grid_n: 50,
            phi: 0.0,
            channels: PolChannel::ALL.to_vec(),
            ks: vec![1],
            basis,
            radial: 1.0,
            sites: vec![0.0],
            lattice_direction: Vector3::new(1.0, 0.0, 0.0),
            phase: std::f64::consts::FRAC_PI_4,
            include_mixed: false,
        }
    }

    fn validate(&self) -> Result<(), BoundsError> {
        if self.grid_n < 2 {
            return Err(BoundsError::GridTooSmall(self.grid_n));
        }
        if self.ks.is_empty() {
            return Err(BoundsError::EmptyKList);
        }
        if self.sites.is_empty() {
            return Err(BoundsError::EmptySites);
        }
        for &k in &self.ks {
            if k < 1 || k > self.sites.len() {
                return Err(BoundsError::KOutOfRange {
                    k,
                    n: self.sites.len(),
                });
            }
        }
        Ok(())
    }
}

/// One output row of an angular sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub theta_i: f64,
    pub theta_s: f64,
    /// "pi-pi", "pi-sigma", "sigma-pi", "sigma-sigma", or "mixed".
    pub channel: String,
    pub k: usize,
    /// Resolved bound, or the envelope term for mixed rows.
    pub bound: f64,
    /// Commutator offset; zero for resolved rows.
    pub offset: f64,
    pub total: f64,
}

/// Dense sweep over the angle grid. Grid points are evaluated in parallel
/// and merged by index, so the row order is deterministic:
/// theta_i-major, then theta_s, then channels in config order, then k
/// ascending, with mixed rows after the resolved ones.
pub fn angular_sweep(config: &SweepConfig) -> Result<Vec<SweepRow>, BoundsError> {
    config.validate()?;
    let n = config.grid_n;
    let step = std::f64::consts::FRAC_PI_2 / (n - 1) as f64;
    let points: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .collect();
    let per_point: Vec<Result<Vec<SweepRow>, BoundsError>> = points
        .par_iter()
        .map(|&(i, j)| {
            let theta_i = i as f64 * step;
            let theta_s = j as f64 * step;
            sweep_point(config, theta_i, theta_s)
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_point {
        rows.extend(r?);
    }
    Ok(rows)
}

fn sweep_point(
    config: &SweepConfig,
    theta_i: f64,
    theta_s: f64,
) -> Result<Vec<SweepRow>, BoundsError> {
    // clamp FP overshoot of the last grid point
    let geom = BeamGeometry::new(
        theta_i.min(std::f64::consts::FRAC_PI_2),
        theta_s.min(std::f64::consts::FRAC_PI_2),
        config.phi,
    )?;
    let q_chain = geom.momentum_transfer(&config.lattice_direction)?.q_chain;
    let set = TMatrixSet::from_geometry(&geom, &config.basis, config.radial)?;
    let mut rows = Vec::new();
    for &channel in &config.channels {
        let t = set.get(channel);
        for &k in &config.ks {
            let result = k_producible_bound(t, q_chain, &config.sites, config.phase, k)?;
            rows.push(SweepRow {
                theta_i,
                theta_s,
                channel: channel.to_string(),
                k,
                bound: result.value,
                offset: 0.0,
                total: result.value,
            });
        }
    }
    if config.include_mixed {
        for &k in &config.ks {
            let mixed = mixed_pol_bound(&set, q_chain, &config.sites, [config.phase; 4], k)?;
            rows.push(SweepRow {
                theta_i,
                theta_s,
                channel: "mixed".to_string(),
                k,
                bound: mixed.envelope_term,
                offset: mixed.offset_term,
                total: mixed.total,
            });
        }
    }
    Ok(rows)
}

/// Write sweep rows as CSV with the header
/// `theta_i_deg,theta_s_deg,channel,k,bound,offset,total`.
pub fn write_sweep_csv<P: AsRef<Path>>(path: P, rows: &[SweepRow]) -> Result<(), BoundsError> {
    let mut out = String::from("theta_i_deg,theta_s_deg,channel,k,bound,offset,total\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.theta_i.to_degrees(),
            row.theta_s.to_degrees(),
            row.channel,
            row.k,
            row.bound,
            row.offset,
            row.total,
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CMatrix;
    use num_complex::Complex64 as C64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    fn random_t(dim: usize, rng: &mut ChaCha12Rng) -> TMatrix {
        TMatrix::from_entries(CMatrix::from_fn(dim, dim, |_, _| {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        }))
    }

    fn atomic_set(theta_i: f64, theta_s: f64) -> TMatrixSet {
        let geom = BeamGeometry::new(theta_i, theta_s, 0.0).unwrap();
        TMatrixSet::from_geometry(&geom, &OrbitalBasis::atomic_2p_3d(), 1.0).unwrap()
    }

    #[test]
    fn bound_linear_in_k() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let t = random_t(6, &mut rng);
        let sites = [0.0, 1.0, 2.0, 3.0];
        let b1 = k_producible_bound(&t, 0.7, &sites, 0.3, 1).unwrap();
        let b2 = k_producible_bound(&t, 0.7, &sites, 0.3, 2).unwrap();
        let b4 = k_producible_bound(&t, 0.7, &sites, 0.3, 4).unwrap();
        assert!((b2.value - 2.0 * b1.value).abs() < 1e-12 * b1.value);
        assert!((b4.value - 2.0 * b2.value).abs() < 1e-12 * b2.value);
        assert!(b1.per_site_spreads.len() == 4);
        // invariant: value = k * sum of squared spreads
        let sum_sq: f64 = b1.per_site_spreads.iter().map(|s| s * s).sum();
        assert!((b1.value - sum_sq).abs() < 1e-12 * sum_sq);
    }

    #[test]
    fn zero_t_gives_zero_bound() {
        let t = TMatrix::from_entries(CMatrix::zeros(4, 4));
        for k in 1..=3 {
            let b = k_producible_bound(&t, 1.0, &[0.0, 1.0, 2.0], 0.5, k).unwrap();
            assert_eq!(b.value, 0.0);
        }
    }

    #[test]
    fn k_range_validated() {
        let t = TMatrix::from_entries(CMatrix::zeros(4, 4));
        assert!(matches!(
            k_producible_bound(&t, 0.0, &[0.0, 1.0], 0.0, 0),
            Err(BoundsError::KOutOfRange { .. })
        ));
        assert!(matches!(
            k_producible_bound(&t, 0.0, &[0.0, 1.0], 0.0, 3),
            Err(BoundsError::KOutOfRange { .. })
        ));
    }

    #[test]
    fn hermitian_channels_have_zero_offset() {
        // eps_i = eps_s makes T Hermitian, hence normal: zero commutator
        let geom = BeamGeometry::new(0.5, 0.9, 0.0).unwrap();
        let basis = OrbitalBasis::atomic_2p_3d();
        let eps = geom.polarization(Beam::Incident, PolLabel::Pi);
        let m = dipole_matrix(&eps, &basis, 1.0).unwrap();
        let t = t_matrix(&m, &m).unwrap();
        let set = TMatrixSet::new([t.clone(), t.clone(), t.clone(), t]).unwrap();
        let offset = commutator_offset(&set, 3).unwrap();
        assert!(offset.abs() < 1e-10);
    }

    #[test]
    fn offset_linear_in_sites_and_matches_dense_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        for _ in 0..20 {
            let ts: Vec<TMatrix> = (0..4).map(|_| random_t(5, &mut rng)).collect();
            let set = TMatrixSet::new([
                ts[0].clone(),
                ts[1].clone(),
                ts[2].clone(),
                ts[3].clone(),
            ])
            .unwrap();
            let o2 = commutator_offset(&set, 2).unwrap();
            let o4 = commutator_offset(&set, 4).unwrap();
            assert!((o4 - 2.0 * o2).abs() < 1e-12 * o2.max(1.0));

            // independent evaluation: explicit commutator, full eigh
            let mut expected: f64 = 0.0;
            for t in &ts {
                let c = t.entries().adjoint() * t.entries() - t.entries() * t.entries().adjoint();
                let eig = crate::linalg::eigh(&c, 1e-10).unwrap();
                expected = expected.max(eig.max());
            }
            assert!((o2 - 4.0 * expected).abs() < 1e-10 * expected.max(1.0));
        }
    }

    #[test]
    fn mixed_total_dominates_every_channel() {
        let set = atomic_set(0.4, 1.0);
        let sites = [0.0, 1.0, 2.0];
        let phases = [std::f64::consts::FRAC_PI_4; 4];
        for k in 1..=3 {
            let mixed = mixed_pol_bound(&set, 0.8, &sites, phases, k).unwrap();
            assert!((mixed.total - mixed.envelope_term - mixed.offset_term).abs() < 1e-12);
            assert!(mixed.offset_term >= 0.0);
            for &b in &mixed.per_channel_bounds {
                assert!(mixed.total >= b * (1.0 - 1e-12));
            }
            assert!(
                (mixed.envelope_term
                    - mixed
                        .per_channel_bounds
                        .iter()
                        .copied()
                        .fold(0.0f64, f64::max))
                .abs()
                    < 1e-15
            );
        }
    }

    #[test]
    fn sweep_row_count_and_determinism() {
        let mut config = SweepConfig::new(OrbitalBasis::atomic_2p_3d());
        config.grid_n = 2;
        config.ks = vec![1];
        config.include_mixed = true;
        let rows = angular_sweep(&config).unwrap();
        // 4 grid points x (4 channels + 1 mixed) x 1 k
        assert_eq!(rows.len(), 4 * 5);
        let rows2 = angular_sweep(&config).unwrap();
        for (a, b) in rows.iter().zip(&rows2) {
            assert_eq!(a.total, b.total);
            assert_eq!(a.channel, b.channel);
        }
    }

    #[test]
    fn sweep_pi_sigma_channel_is_constant() {
        let mut config = SweepConfig::new(OrbitalBasis::atomic_2p_3d());
        config.grid_n = 6;
        config.channels = vec![PolChannel {
            incident: PolLabel::Pi,
            scattered: PolLabel::Sigma,
        }];
        let rows = angular_sweep(&config).unwrap();
        let first = rows[0].bound;
        for row in &rows {
            assert!(
                (row.bound - first).abs() < 1e-10 * first.max(1.0),
                "pi-sigma bound must be angle-independent"
            );
        }
    }

    #[test]
    fn sweep_pi_pi_depends_only_on_total_angle() {
        let mut config = SweepConfig::new(OrbitalBasis::atomic_2p_3d());
        config.grid_n = 9;
        config.channels = vec![PolChannel {
            incident: PolLabel::Pi,
            scattered: PolLabel::Pi,
        }];
        let rows = angular_sweep(&config).unwrap();
        // equal angle sums must give equal bounds
        for a in &rows {
            for b in &rows {
                let sum_a = a.theta_i + a.theta_s;
                let sum_b = b.theta_i + b.theta_s;
                if (sum_a - sum_b).abs() < 1e-13 {
                    assert!(
                        (a.bound - b.bound).abs() < 1e-10 * a.bound.max(1.0),
                        "anti-diagonal constancy violated"
                    );
                }
            }
        }
    }

    #[test]
    fn csv_output_shape() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        let mut config = SweepConfig::new(OrbitalBasis::atomic_2p_3d());
        config.grid_n = 2;
        let rows = angular_sweep(&config).unwrap();
        write_sweep_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "theta_i_deg,theta_s_deg,channel,k,bound,offset,total"
        );
        assert_eq!(lines.count(), rows.len());
    }
}
