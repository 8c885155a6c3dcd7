//! Dense N-site spin-orbital states and exact quantum Fisher information.
//!
//! Every state is a full complex amplitude vector over the product space
//! `(2 n_orb)^N`, capped at desk scale. This layer is the brute-force
//! oracle against which the spectral pipeline and the producibility bounds
//! are validated: operators are applied by site-wise tensor contraction,
//! never by forming the global matrix.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, CMatrix, CVector};
use crate::scattering::{local_generator, ScatteringError, TMatrix};

/// Default cap on the total Hilbert-space dimension.
pub const DEFAULT_DIMENSION_CAP: usize = 200_000;

/// Tolerance on the state norm.
pub const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ManyBodyError {
    #[error("lattice must have at least one site and one orbital")]
    EmptyLattice,
    #[error("total dimension {dim} exceeds the cap {cap}")]
    DimensionCapExceeded { dim: u128, cap: usize },
    #[error("site positions list has length {got}, expected {expected}")]
    PositionCountMismatch { got: usize, expected: usize },
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("operator dimension {got} does not match the local dimension {expected}")]
    LocalDimensionMismatch { got: usize, expected: usize },
    #[error("state has dimension {got}, lattice requires {expected}")]
    StateDimensionMismatch { got: usize, expected: usize },
    #[error("state norm {norm} deviates from 1 beyond {tol}")]
    NotNormalized { norm: f64, tol: f64 },
    #[error(transparent)]
    Scattering(#[from] ScatteringError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid state file header: {0}")]
    Header(String),
}

/// Chain of spin-orbital sites with a fixed local dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    n_sites: usize,
    n_orb: usize,
    site_positions: Vec<f64>,
}

impl LatticeSpec {
    /// Uniform chain with positions `r_j = j` (lattice constant 1).
    pub fn chain(n_sites: usize, n_orb: usize) -> Result<Self, ManyBodyError> {
        let positions = (0..n_sites).map(|j| j as f64).collect();
        Self::with_positions(n_sites, n_orb, positions, DEFAULT_DIMENSION_CAP)
    }

    pub fn with_positions(
        n_sites: usize,
        n_orb: usize,
        site_positions: Vec<f64>,
        cap: usize,
    ) -> Result<Self, ManyBodyError> {
        if n_sites == 0 || n_orb == 0 {
            return Err(ManyBodyError::EmptyLattice);
        }
        if site_positions.len() != n_sites {
            return Err(ManyBodyError::PositionCountMismatch {
                got: site_positions.len(),
                expected: n_sites,
            });
        }
        let local = 2 * n_orb as u128;
        let mut dim: u128 = 1;
        for _ in 0..n_sites {
            dim = dim.saturating_mul(local);
            if dim > cap as u128 {
                return Err(ManyBodyError::DimensionCapExceeded { dim, cap });
            }
        }
        Ok(Self {
            n_sites,
            n_orb,
            site_positions,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_orb(&self) -> usize {
        self.n_orb
    }

    /// Local dimension `2 * n_orb` (spin times orbital).
    pub fn local_dim(&self) -> usize {
        2 * self.n_orb
    }

    pub fn site_positions(&self) -> &[f64] {
        &self.site_positions
    }

    pub fn total_dim(&self) -> usize {
        self.local_dim().pow(self.n_sites as u32)
    }
}

/// Normalized dense state over the N-site product space.
#[derive(Debug, Clone, PartialEq)]
pub struct ManyBodyState {
    amplitudes: CVector,
    lattice: LatticeSpec,
}

impl ManyBodyState {
    pub fn new(amplitudes: CVector, lattice: LatticeSpec) -> Result<Self, ManyBodyError> {
        if amplitudes.len() != lattice.total_dim() {
            return Err(ManyBodyError::StateDimensionMismatch {
                got: amplitudes.len(),
                expected: lattice.total_dim(),
            });
        }
        let norm = amplitudes.norm();
        if !(norm.is_finite() && (norm - 1.0).abs() <= NORM_TOL) {
            return Err(ManyBodyError::NotNormalized {
                norm,
                tol: NORM_TOL,
            });
        }
        Ok(Self {
            amplitudes,
            lattice,
        })
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }
}

/// Disjoint site blocks covering the lattice; `k` is the largest block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    blocks: Vec<Vec<usize>>,
}

impl PartitionSpec {
    pub fn new(blocks: Vec<Vec<usize>>, n_sites: usize) -> Result<Self, ManyBodyError> {
        let mut seen = vec![false; n_sites];
        for block in &blocks {
            if block.is_empty() {
                return Err(ManyBodyError::InvalidPartition("empty block".into()));
            }
            for &site in block {
                if site >= n_sites {
                    return Err(ManyBodyError::InvalidPartition(format!(
                        "site {site} out of range 0..{n_sites}"
                    )));
                }
                if seen[site] {
                    return Err(ManyBodyError::InvalidPartition(format!(
                        "site {site} appears in more than one block"
                    )));
                }
                seen[site] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(ManyBodyError::InvalidPartition(format!(
                "site {missing} is not covered"
            )));
        }
        Ok(Self { blocks })
    }

    /// All-singleton partition (fully separable, k = 1).
    pub fn singletons(n_sites: usize) -> Self {
        Self {
            blocks: (0..n_sites).map(|j| vec![j]).collect(),
        }
    }

    /// Single block of all sites (unconstrained, k = N).
    pub fn whole(n_sites: usize) -> Self {
        Self {
            blocks: vec![(0..n_sites).collect()],
        }
    }

    /// Random partition with every block of size at most `k`, containing at
    /// least one block of size exactly `min(k, n_sites)`.
    pub fn random<R: rand::Rng>(n_sites: usize, k: usize, rng: &mut R) -> Self {
        use rand::seq::SliceRandom;
        let k = k.clamp(1, n_sites);
        let mut sites: Vec<usize> = (0..n_sites).collect();
        sites.shuffle(rng);
        let mut blocks = Vec::new();
        let mut rest = sites.as_slice();
        let mut first = true;
        while !rest.is_empty() {
            let size = if first {
                k.min(rest.len())
            } else {
                rng.gen_range(1..=k.min(rest.len()))
            };
            first = false;
            blocks.push(rest[..size].to_vec());
            rest = &rest[size..];
        }
        Self { blocks }
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Producibility class: the largest block size.
    pub fn k(&self) -> usize {
        self.blocks.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Haar-random k-producible pure state: an independent normalized complex
/// Gaussian vector on every block, assembled as a tensor product.
/// Deterministic for a fixed seed and partition.
pub fn random_k_producible_state(
    lattice: &LatticeSpec,
    partition: &PartitionSpec,
    seed: u64,
) -> Result<ManyBodyState, ManyBodyError> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    random_k_producible_state_with_rng(lattice, partition, &mut rng)
}

/// Same as [`random_k_producible_state`] but drawing from a caller-owned
/// stream, for batch sampling.
pub fn random_k_producible_state_with_rng<R: rand::Rng>(
    lattice: &LatticeSpec,
    partition: &PartitionSpec,
    rng: &mut R,
) -> Result<ManyBodyState, ManyBodyError> {
    // re-validate against this lattice (the partition may predate it)
    let partition = PartitionSpec::new(partition.blocks.clone(), lattice.n_sites())?;
    let d = lattice.local_dim();
    let block_states: Vec<CVector> = partition
        .blocks()
        .iter()
        .map(|block| linalg::random_unit_vector(d.pow(block.len() as u32), rng))
        .collect();

    let dim = lattice.total_dim();
    let n = lattice.n_sites();
    let mut digits = vec![0usize; n];
    let mut amplitudes = CVector::zeros(dim);
    for idx in 0..dim {
        let mut rem = idx;
        for site in (0..n).rev() {
            digits[site] = rem % d;
            rem /= d;
        }
        let mut amp = C64::new(1.0, 0.0);
        for (block, psi) in partition.blocks().iter().zip(&block_states) {
            let mut block_idx = 0usize;
            for &site in block {
                block_idx = block_idx * d + digits[site];
            }
            amp *= psi[block_idx];
        }
        amplitudes[idx] = amp;
    }
    ManyBodyState::new(amplitudes, lattice.clone())
}

/// Apply a local operator (`op.ncols()` in, `op.nrows()` out) at `site` of a
/// state whose per-site dimensions are `dims`, accumulating
/// `scale * (1 x .. x op x .. x 1) |input>` into `output`.
///
/// `output` must have the dimensions of `dims` with `dims[site]` replaced by
/// `op.nrows()`.
pub(crate) fn accumulate_site_operator(
    input: &CVector,
    dims: &[usize],
    site: usize,
    op: &CMatrix,
    scale: C64,
    output: &mut CVector,
) {
    let d_in = op.ncols();
    let d_out = op.nrows();
    debug_assert_eq!(dims[site], d_in);
    let inner: usize = dims[site + 1..].iter().product();
    let outer: usize = dims[..site].iter().product();
    debug_assert_eq!(input.len(), outer * d_in * inner);
    debug_assert_eq!(output.len(), outer * d_out * inner);

    for o in 0..outer {
        let in_base = o * d_in * inner;
        let out_base = o * d_out * inner;
        for i in 0..inner {
            for a in 0..d_out {
                let mut acc = C64::new(0.0, 0.0);
                for b in 0..d_in {
                    acc += op[(a, b)] * input[in_base + b * inner + i];
                }
                output[out_base + a * inner + i] += scale * acc;
            }
        }
    }
}

fn check_local_dim(lattice: &LatticeSpec, t: &TMatrix) -> Result<(), ManyBodyError> {
    if t.dim() != lattice.local_dim() {
        return Err(ManyBodyError::LocalDimensionMismatch {
            got: t.dim(),
            expected: lattice.local_dim(),
        });
    }
    Ok(())
}

/// `T_q |psi> = sum_j e^{i q r_j} (1 x .. x T_j x .. x 1) |psi>`,
/// computed site-wise without forming the global matrix. The result is
/// unnormalized.
pub fn apply_t_q(
    state: &ManyBodyState,
    t: &TMatrix,
    q_chain: f64,
) -> Result<CVector, ManyBodyError> {
    let lattice = state.lattice();
    check_local_dim(lattice, t)?;
    let dims = vec![lattice.local_dim(); lattice.n_sites()];
    let mut out = CVector::zeros(state.amplitudes().len());
    for (j, &r_j) in lattice.site_positions().iter().enumerate() {
        let phase = C64::from_polar(1.0, q_chain * r_j);
        accumulate_site_operator(state.amplitudes(), &dims, j, t.entries(), phase, &mut out);
    }
    Ok(out)
}

/// `T_q^H |psi>`: the adjoint matrix at every site with reversed momentum.
pub fn apply_t_q_adjoint(
    state: &ManyBodyState,
    t: &TMatrix,
    q_chain: f64,
) -> Result<CVector, ManyBodyError> {
    let lattice = state.lattice();
    check_local_dim(lattice, t)?;
    let adj = t.entries().adjoint();
    let dims = vec![lattice.local_dim(); lattice.n_sites()];
    let mut out = CVector::zeros(state.amplitudes().len());
    for (j, &r_j) in lattice.site_positions().iter().enumerate() {
        let phase = C64::from_polar(1.0, -q_chain * r_j);
        accumulate_site_operator(state.amplitudes(), &dims, j, &adj, phase, &mut out);
    }
    Ok(out)
}

/// Hermitian generator applied to a state:
/// `O_q |psi> = (e^{i phase} T_q + e^{-i phase} T_q^H)|psi> / sqrt(2)`.
pub fn apply_generator(
    state: &ManyBodyState,
    t: &TMatrix,
    q_chain: f64,
    phase: f64,
) -> Result<CVector, ManyBodyError> {
    let fwd = apply_t_q(state, t, q_chain)?;
    let rev = apply_t_q_adjoint(state, t, q_chain)?;
    let ph = C64::from_polar(1.0, phase);
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    Ok(CVector::from_fn(fwd.len(), |i, _| {
        (ph * fwd[i] + ph.conj() * rev[i]) * inv_sqrt2
    }))
}

/// `<psi| T_q |psi>`.
pub fn t_expectation(
    state: &ManyBodyState,
    t: &TMatrix,
    q_chain: f64,
) -> Result<C64, ManyBodyError> {
    let applied = apply_t_q(state, t, q_chain)?;
    Ok(state.amplitudes().dotc(&applied))
}

/// `<psi| T_q^2 |psi>` via two applications of `T_q`.
pub fn t_sq_expectation(
    state: &ManyBodyState,
    t: &TMatrix,
    q_chain: f64,
) -> Result<C64, ManyBodyError> {
    let once = apply_t_q(state, t, q_chain)?;
    let lattice = state.lattice();
    let dims = vec![lattice.local_dim(); lattice.n_sites()];
    let mut twice = CVector::zeros(once.len());
    for (j, &r_j) in lattice.site_positions().iter().enumerate() {
        let phase = C64::from_polar(1.0, q_chain * r_j);
        accumulate_site_operator(&once, &dims, j, t.entries(), phase, &mut twice);
    }
    Ok(state.amplitudes().dotc(&twice))
}

fn check_normalized(state: &ManyBodyState) -> Result<(), ManyBodyError> {
    let norm = state.amplitudes().norm();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(ManyBodyError::NotNormalized {
            norm,
            tol: NORM_TOL,
        });
    }
    Ok(())
}

/// Pure-state QFI `4 (<O_q^2> - <O_q>^2)` for the phase-symmetrized
/// generator. Non-negative by the variance form.
pub fn qfi_pure(
    state: &ManyBodyState,
    t: &TMatrix,
    q_chain: f64,
    phase: f64,
) -> Result<f64, ManyBodyError> {
    check_normalized(state)?;
    let applied = apply_generator(state, t, q_chain, phase)?;
    let mean = state.amplitudes().dotc(&applied).re;
    let second = applied.norm_squared();
    Ok((4.0 * (second - mean * mean)).max(0.0))
}

/// QFI through connected correlators:
/// `2<T^H T>_c + 2<T T^H>_c + 4 Re[e^{2 i phase} <T^2>_c]`.
///
/// Algebraically identical to [`qfi_pure`]; kept as an independent route
/// and as the diagnostic separating the three spectral contributions.
pub fn qfi_cumulant(
    state: &ManyBodyState,
    t: &TMatrix,
    q_chain: f64,
    phase: f64,
) -> Result<f64, ManyBodyError> {
    check_normalized(state)?;
    let fwd = apply_t_q(state, t, q_chain)?;
    let rev = apply_t_q_adjoint(state, t, q_chain)?;
    let t_mean = state.amplitudes().dotc(&fwd);
    let tdt = fwd.norm_squared() - t_mean.norm_sqr();
    let ttd = rev.norm_squared() - t_mean.norm_sqr();
    let t_sq = rev.dotc(&fwd) - t_mean * t_mean;
    let rot = C64::from_polar(1.0, 2.0 * phase);
    Ok(2.0 * tdt + 2.0 * ttd + 4.0 * (rot * t_sq).re)
}

/// Largest QFI attainable by fully separable (k = 1) product states:
/// `sum_j spread(local generator at j)^2 / 2`, attained by the equal
/// superposition of extremal local eigenvectors at every site.
pub fn max_qfi_product_states(
    lattice: &LatticeSpec,
    t: &TMatrix,
    q_chain: f64,
    phase: f64,
) -> Result<f64, ManyBodyError> {
    check_local_dim(lattice, t)?;
    let mut total = 0.0;
    for (j, &r_j) in lattice.site_positions().iter().enumerate() {
        let local = local_generator(t, q_chain, r_j, phase, j);
        let spread = local.spread()?;
        total += spread * spread;
    }
    Ok(total / 2.0)
}

/// The product state that attains [`max_qfi_product_states`]: at every site
/// the equal superposition of the extreme eigenvectors of the local
/// generator.
pub fn extremal_product_state(
    lattice: &LatticeSpec,
    t: &TMatrix,
    q_chain: f64,
    phase: f64,
) -> Result<ManyBodyState, ManyBodyError> {
    check_local_dim(lattice, t)?;
    let d = lattice.local_dim();
    let mut site_states: Vec<CVector> = Vec::with_capacity(lattice.n_sites());
    for (j, &r_j) in lattice.site_positions().iter().enumerate() {
        let local = local_generator(t, q_chain, r_j, phase, j);
        let eig = linalg::eigh(local.entries(), crate::scattering::SPREAD_HERMITICITY_TOL)
            .map_err(ScatteringError::from)?;
        let lo = eig.eigenvector(0);
        let hi = eig.eigenvector(d - 1);
        let combo = (lo + hi).unscale(2.0f64.sqrt());
        site_states.push(combo);
    }
    let dim = lattice.total_dim();
    let n = lattice.n_sites();
    let mut amplitudes = CVector::zeros(dim);
    for idx in 0..dim {
        let mut rem = idx;
        let mut amp = C64::new(1.0, 0.0);
        for site in (0..n).rev() {
            amp *= site_states[site][rem % d];
            rem /= d;
        }
        amplitudes[idx] = amp;
    }
    let norm = amplitudes.norm();
    ManyBodyState::new(amplitudes.unscale(norm), lattice.clone())
}

/// Write a state as a one-line JSON header (the lattice spec) followed by
/// little-endian `f64` (re, im) pairs.
pub fn write_state<P: AsRef<Path>>(path: P, state: &ManyBodyState) -> Result<(), ManyBodyError> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    let header = serde_json::to_string(state.lattice()).expect("serializable lattice");
    w.write_all(header.as_bytes())?;
    w.write_all(b"\n")?;
    for amp in state.amplitudes().iter() {
        w.write_all(&amp.re.to_le_bytes())?;
        w.write_all(&amp.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Read a state written by [`write_state`].
pub fn read_state<P: AsRef<Path>>(path: P) -> Result<ManyBodyState, ManyBodyError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| ManyBodyError::Header("missing newline after header".into()))?;
    let lattice: LatticeSpec = serde_json::from_slice(&bytes[..newline])
        .map_err(|e| ManyBodyError::Header(e.to_string()))?;
    let payload = &bytes[newline + 1..];
    let dim = lattice.total_dim();
    if payload.len() != dim * 16 {
        return Err(ManyBodyError::Header(format!(
            "payload has {} bytes, lattice requires {}",
            payload.len(),
            dim * 16
        )));
    }
    let mut amplitudes = CVector::zeros(dim);
    for i in 0..dim {
        let re = f64::from_le_bytes(payload[16 * i..16 * i + 8].try_into().unwrap());
        let im = f64::from_le_bytes(payload[16 * i + 8..16 * i + 16].try_into().unwrap());
        amplitudes[i] = C64::new(re, im);
    }
    ManyBodyState::new(amplitudes, lattice)
}
