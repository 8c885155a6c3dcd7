//! Exact-diagonalization RIXS simulator on small spin-orbital clusters.
//!
//! The valence model is a configurable chain: Heisenberg spin exchange,
//! crystal-field splittings per orbital, an optional Kugel-Khomskii-like
//! spin-orbital exchange, and a uniform Zeeman field. The intermediate
//! (core-hole) sectors replace one site's valence space by a core shell and
//! add the edge energy, core spin-orbit coupling, and an exchange coupling
//! of the core spin to the neighboring valence spins. All resolvents are
//! applied exactly through full Hermitian eigendecompositions, giving every
//! cross section as an exact pole sum.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::angular::DipoleMatrix;
use crate::linalg::{self, CMatrix, CVector, Eigh, LinalgError};
use crate::manybody::{accumulate_site_operator, LatticeSpec, ManyBodyError};
use crate::scattering::TMatrix;

/// Default cap on the dimension of any sector handed to the dense
/// eigensolver.
pub const DEFAULT_DIAG_CAP: usize = 2048;

/// Elastic-line exclusion: poles with `omega <= 1e-9 * bandwidth` are
/// treated as elastic and dropped from Stokes integrals.
pub const ELASTIC_CUT_FRACTION: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RixsError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("sector dimension {dim} exceeds the diagonalization cap {cap}")]
    DiagCapExceeded { dim: usize, cap: usize },
    #[error("dipole matrix is {rows}x{cols}, model requires {core_dim}x{valence_dim}")]
    DipoleShape {
        rows: usize,
        cols: usize,
        core_dim: usize,
        valence_dim: usize,
    },
    #[error("spectrum metadata mismatch: {0}")]
    MetadataMismatch(String),
    #[error("spectrum carries no metadata but the operation requires it")]
    MetadataMissing,
    #[error("invalid mixing weights: {0}")]
    InvalidWeights(String),
    #[error("operation requires a pole spectrum, got a sampled one")]
    NotPoleSpectrum,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    ManyBody(#[from] ManyBodyError),
    #[error("cache i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("cache parse error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Valence Hamiltonian parameters (energy units: the spin exchange).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValenceParams {
    /// Heisenberg spin exchange on nearest-neighbor bonds.
    pub j_spin: f64,
    /// Crystal-field energy per orbital, length `n_orb`.
    pub delta_cf: Vec<f64>,
    /// Spin-orbital exchange: `j_so * (S_j . S_j') * orbital swap`.
    pub j_so: f64,
    /// Uniform Zeeman field coupling to S^z at every site (core spin
    /// included in intermediate sectors).
    pub zeeman: f64,
    /// Close the chain into a ring (only meaningful for 3 or more sites).
    pub periodic: bool,
}

/// Intermediate-state (core-hole) parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreParams {
    /// Core orbital momentum (1 for a p shell); the core local dimension is
    /// `2 (2 l_core + 1)`.
    pub l_core: u32,
    /// Edge energy offset of the core-hole sector.
    pub edge_energy: f64,
    /// Core spin-orbit coupling `xi L . S` on the core shell.
    pub xi_soc: f64,
    /// Exchange of the core-site spin with nearest-neighbor valence spins.
    pub u_core: f64,
}

/// Full cluster model: lattice, valence and core parameters, inverse
/// core-hole lifetime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub lattice: LatticeSpec,
    pub valence: ValenceParams,
    pub core: CoreParams,
    pub gamma: f64,
    #[serde(default = "default_diag_cap")]
    pub diag_cap: usize,
}

fn default_diag_cap() -> usize {
    DEFAULT_DIAG_CAP
}

impl ClusterModel {
    pub fn new(
        lattice: LatticeSpec,
        valence: ValenceParams,
        core: CoreParams,
        gamma: f64,
    ) -> Result<Self, RixsError> {
        let model = Self {
            lattice,
            valence,
            core,
            gamma,
            diag_cap: DEFAULT_DIAG_CAP,
        };
        model.validate()?;
        Ok(model)
    }

    /// A ready-to-run ring cluster with order-one couplings and
    /// symmetry-breaking fields chosen so the ground state is unique
    /// (ferromagnetic exchange plus a Zeeman field; odd antiferromagnetic
    /// rings would have a degenerate ground multiplet).
    pub fn default_cluster(n_sites: usize, n_orb: usize) -> Result<Self, RixsError> {
        let lattice = LatticeSpec::chain(n_sites, n_orb)?;
        let delta_cf = (0..n_orb).map(|l| 0.4 * l as f64).collect();
        Self::new(
            lattice,
            ValenceParams {
                j_spin: -1.0,
                delta_cf,
                j_so: -0.3,
                zeeman: -0.2,
                periodic: n_sites >= 3,
            },
            CoreParams {
                l_core: 1,
                edge_energy: 15.0,
                xi_soc: 0.8,
                u_core: 0.6,
            },
            10.0,
        )
    }

    pub fn validate(&self) -> Result<(), RixsError> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(RixsError::InvalidModel(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if self.valence.delta_cf.len() != self.lattice.n_orb() {
            return Err(RixsError::InvalidModel(format!(
                "delta_cf has {} entries, lattice has {} orbitals",
                self.valence.delta_cf.len(),
                self.lattice.n_orb()
            )));
        }
        for v in [
            self.valence.j_spin,
            self.valence.j_so,
            self.valence.zeeman,
            self.core.edge_energy,
            self.core.xi_soc,
            self.core.u_core,
        ] {
            if !v.is_finite() {
                return Err(RixsError::InvalidModel("non-finite coupling".into()));
            }
        }
        let dim = self.lattice.total_dim();
        if dim > self.diag_cap {
            return Err(RixsError::DiagCapExceeded {
                dim,
                cap: self.diag_cap,
            });
        }
        let sector = self.sector_dim();
        if sector > self.diag_cap {
            return Err(RixsError::DiagCapExceeded {
                dim: sector,
                cap: self.diag_cap,
            });
        }
        Ok(())
    }

    pub fn core_local_dim(&self) -> usize {
        2 * (2 * self.core.l_core as usize + 1)
    }

    fn sector_dim(&self) -> usize {
        let dv = self.lattice.local_dim();
        self.core_local_dim() * dv.pow(self.lattice.n_sites() as u32 - 1)
    }

    fn bonds(&self) -> Vec<(usize, usize)> {
        let n = self.lattice.n_sites();
        let mut bonds: Vec<(usize, usize)> = (0..n.saturating_sub(1)).map(|j| (j, j + 1)).collect();
        if self.valence.periodic && n >= 3 {
            bonds.push((n - 1, 0));
        }
        bonds
    }
}

/// Which Hamiltonian sector to diagonalize.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sector {
    Valence,
    CoreHoleAt(usize),
}

/// Eigendecomposition with ascending eigenvalues; index 0 is the ground
/// state of the sector.
pub type SpectralDecomposition = Eigh;

fn pauli_half() -> [CMatrix; 3] {
    let z = |re: f64, im: f64| C64::new(re, im);
    [
        CMatrix::from_row_slice(2, 2, &[z(0.0, 0.0), z(0.5, 0.0), z(0.5, 0.0), z(0.0, 0.0)]),
        CMatrix::from_row_slice(2, 2, &[z(0.0, 0.0), z(0.0, -0.5), z(0.0, 0.5), z(0.0, 0.0)]),
        CMatrix::from_row_slice(2, 2, &[z(0.5, 0.0), z(0.0, 0.0), z(0.0, 0.0), z(-0.5, 0.0)]),
    ]
}

/// Spin-1/2 operators on a local space of `n_orb` orbitals (spin-major).
fn spin_ops(n_orb: usize) -> [CMatrix; 3] {
    let id = CMatrix::identity(n_orb, n_orb);
    pauli_half().map(|s| s.kronecker(&id))
}

/// Orbital angular momentum matrices (L_x, L_y, L_z) on the `2l+1` m-basis.
fn l_ops(l: u32) -> [CMatrix; 3] {
    let dim = (2 * l + 1) as usize;
    let lf = l as f64;
    let idx = |m: i32| (m + l as i32) as usize;
    let mut lp = CMatrix::zeros(dim, dim);
    for m in -(l as i32)..(l as i32) {
        let mf = m as f64;
        lp[(idx(m + 1), idx(m))] = C64::new((lf * (lf + 1.0) - mf * (mf + 1.0)).sqrt(), 0.0);
    }
    let lm = lp.adjoint();
    let lx = (&lp + &lm).scale(0.5);
    let ly = (&lp - &lm).map(|z| z * C64::new(0.0, -0.5));
    let mut lz = CMatrix::zeros(dim, dim);
    for m in -(l as i32)..=(l as i32) {
        lz[(idx(m), idx(m))] = C64::new(m as f64, 0.0);
    }
    [lx, ly, lz]
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

fn add_one_site(h: &mut CMatrix, dims: &[usize], site: usize, op: &CMatrix, scale: f64) {
    let dim: usize = dims.iter().product();
    let stride = strides(dims)[site];
    let d = dims[site];
    for c in 0..dim {
        let b = (c / stride) % d;
        for a in 0..d {
            let v = op[(a, b)];
            if v == C64::new(0.0, 0.0) {
                continue;
            }
            let r = (c as isize + (a as isize - b as isize) * stride as isize) as usize;
            h[(r, c)] += v * scale;
        }
    }
}

fn add_two_site(
    h: &mut CMatrix,
    dims: &[usize],
    s1: usize,
    op1: &CMatrix,
    s2: usize,
    op2: &CMatrix,
    scale: f64,
) {
    debug_assert_ne!(s1, s2);
    let dim: usize = dims.iter().product();
    let st = strides(dims);
    let (d1, d2) = (dims[s1], dims[s2]);
    for c in 0..dim {
        let b1 = (c / st[s1]) % d1;
        let b2 = (c / st[s2]) % d2;
        for a1 in 0..d1 {
            let v1 = op1[(a1, b1)];
            if v1 == C64::new(0.0, 0.0) {
                continue;
            }
            for a2 in 0..d2 {
                let v2 = op2[(a2, b2)];
                if v2 == C64::new(0.0, 0.0) {
                    continue;
                }
                let r = (c as isize
                    + (a1 as isize - b1 as isize) * st[s1] as isize
                    + (a2 as isize - b2 as isize) * st[s2] as isize)
                    as usize;
                h[(r, c)] += v1 * v2 * scale;
            }
        }
    }
}

fn orbital_unit(n_orb: usize, a: usize, b: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n_orb, n_orb);
    m[(a, b)] = C64::new(1.0, 0.0);
    m
}

fn build_hamiltonian(model: &ClusterModel, sector: Sector) -> CMatrix {
    let n = model.lattice.n_sites();
    let n_orb = model.lattice.n_orb();
    let dv = model.lattice.local_dim();
    let core_site = match sector {
        Sector::Valence => None,
        Sector::CoreHoleAt(j) => Some(j),
    };
    let mut dims = vec![dv; n];
    if let Some(j) = core_site {
        dims[j] = model.core_local_dim();
    }
    let dim: usize = dims.iter().product();
    let mut h = CMatrix::zeros(dim, dim);

    let sv = spin_ops(n_orb);

    // single-site valence terms: crystal field and Zeeman
    let mut site_term = CMatrix::zeros(dv, dv);
    for (l, &cf) in model.valence.delta_cf.iter().enumerate() {
        let p = orbital_unit(n_orb, l, l);
        site_term += CMatrix::identity(2, 2).kronecker(&p).scale(cf);
    }
    site_term += sv[2].map(|z| z * model.valence.zeeman);

    for j in 0..n {
        if Some(j) == core_site {
            continue;
        }
        add_one_site(&mut h, &dims, j, &site_term, 1.0);
    }

    // core-site terms
    if let Some(j) = core_site {
        let lc = model.core.l_core;
        let n_corb = (2 * lc + 1) as usize;
        let sc = spin_ops(n_corb);
        let lops = l_ops(lc);
        let pauli = pauli_half();
        let dcore = model.core_local_dim();
        let mut core_term = CMatrix::identity(dcore, dcore).scale(model.core.edge_energy);
        // core spin-orbit coupling, spin-major kron: spin (x) orbital
        for a in 0..3 {
            core_term += pauli[a].kronecker(&lops[a]).scale(model.core.xi_soc);
        }
        core_term += sc[2].map(|z| z * model.valence.zeeman);
        add_one_site(&mut h, &dims, j, &core_term, 1.0);

        // core-valence spin exchange on bonds touching the core site
        for (a, b) in model.bonds() {
            let (core_end, val_end) = if a == j {
                (a, b)
            } else if b == j {
                (b, a)
            } else {
                continue;
            };
            for ax in 0..3 {
                add_two_site(
                    &mut h,
                    &dims,
                    core_end,
                    &sc[ax],
                    val_end,
                    &sv[ax],
                    model.core.u_core,
                );
            }
        }
    }

    // valence-valence bonds not touching the core site
    let pauli = pauli_half();
    for (a, b) in model.bonds() {
        if Some(a) == core_site || Some(b) == core_site {
            continue;
        }
        for ax in 0..3 {
            add_two_site(&mut h, &dims, a, &sv[ax], b, &sv[ax], model.valence.j_spin);
        }
        if model.valence.j_so != 0.0 {
            // (S_j . S_j') (x) orbital swap, expanded over unit matrices
            for ax in 0..3 {
                for la in 0..n_orb {
                    for lb in 0..n_orb {
                        let op_a = pauli[ax].kronecker(&orbital_unit(n_orb, la, lb));
                        let op_b = pauli[ax].kronecker(&orbital_unit(n_orb, lb, la));
                        add_two_site(&mut h, &dims, a, &op_a, b, &op_b, model.valence.j_so);
                    }
                }
            }
        }
    }

    h
}

/// Full Hermitian eigendecomposition of one sector.
pub fn diagonalize(
    model: &ClusterModel,
    sector: Sector,
) -> Result<SpectralDecomposition, RixsError> {
    model.validate()?;
    let h = build_hamiltonian(model, sector);
    Ok(linalg::eigh(&h, 1e-12)?)
}

#[derive(Serialize, Deserialize)]
struct CachedEigh {
    values: Vec<f64>,
    vectors: Vec<Vec<(f64, f64)>>,
}

impl CachedEigh {
    fn from_eigh(e: &Eigh) -> Self {
        let n = e.dim();
        let vectors = (0..n)
            .map(|j| {
                (0..n)
                    .map(|i| (e.vectors[(i, j)].re, e.vectors[(i, j)].im))
                    .collect()
            })
            .collect();
        Self {
            values: e.values.clone(),
            vectors,
        }
    }

    fn into_eigh(self) -> Eigh {
        let n = self.values.len();
        let mut vectors = CMatrix::zeros(n, n);
        for (j, col) in self.vectors.iter().enumerate() {
            for (i, &(re, im)) in col.iter().enumerate() {
                vectors[(i, j)] = C64::new(re, im);
            }
        }
        Eigh {
            values: self.values,
            vectors,
        }
    }
}

/// A cluster model with every sector diagonalized, ready to emit spectra.
pub struct SolvedModel {
    model: ClusterModel,
    valence: SpectralDecomposition,
    cores: Vec<SpectralDecomposition>,
}

impl SolvedModel {
    pub fn solve(model: &ClusterModel) -> Result<Self, RixsError> {
        Self::solve_with_cache(model, None)
    }

    /// Diagonalize all sectors, loading/storing decompositions in
    /// `cache_dir` when given. Sectors are solved in parallel.
    pub fn solve_with_cache(
        model: &ClusterModel,
        cache_dir: Option<&Path>,
    ) -> Result<Self, RixsError> {
        model.validate()?;
        let key = cache_dir.map(|dir| (dir.to_path_buf(), model_cache_key(model)));
        let mut sectors: Vec<Sector> = vec![Sector::Valence];
        sectors.extend((0..model.lattice.n_sites()).map(Sector::CoreHoleAt));
        let solved: Vec<Result<Eigh, RixsError>> = sectors
            .par_iter()
            .map(|&sector| solve_sector(model, sector, key.as_ref()))
            .collect();
        let mut decomps = Vec::with_capacity(solved.len());
        for r in solved {
            decomps.push(r?);
        }
        let valence = decomps.remove(0);
        Ok(Self {
            model: model.clone(),
            valence,
            cores: decomps,
        })
    }

    pub fn model(&self) -> &ClusterModel {
        &self.model
    }

    pub fn valence(&self) -> &SpectralDecomposition {
        &self.valence
    }

    pub fn core_sector(&self, j: usize) -> &SpectralDecomposition {
        &self.cores[j]
    }

    pub fn ground_energy(&self) -> f64 {
        self.valence.values[0]
    }

    /// Ground state of the valence sector.
    pub fn ground_state(&self) -> CVector {
        self.valence.eigenvector(0)
    }

    /// Width of the valence spectrum `E_max - E_G`.
    pub fn valence_bandwidth(&self) -> f64 {
        self.valence.max() - self.valence.min()
    }

    /// Energy gap between the two lowest valence levels; a vanishing gap
    /// signals a degenerate ground multiplet.
    pub fn ground_gap(&self) -> f64 {
        if self.valence.values.len() > 1 {
            self.valence.values[1] - self.valence.values[0]
        } else {
            f64::INFINITY
        }
    }

    fn check_dipole_shape(&self, m: &DipoleMatrix) -> Result<(), RixsError> {
        let (rows, cols) = (m.entries().nrows(), m.entries().ncols());
        let core_dim = self.model.core_local_dim();
        let valence_dim = self.model.lattice.local_dim();
        if rows != core_dim || cols != valence_dim {
            return Err(RixsError::DipoleShape {
                rows,
                cols,
                core_dim,
                valence_dim,
            });
        }
        Ok(())
    }

    /// Kramers-Heisenberg final state
    /// `sum_j e^{i q r_j} D_j(eps_s)^H (H' - E_G - omega_in - i Gamma)^-1 D_j(eps_i) |G>`
    /// with the resolvent applied exactly in each intermediate eigenbasis.
    pub fn final_state(
        &self,
        m_i: &DipoleMatrix,
        m_s: &DipoleMatrix,
        q_chain: f64,
        omega_in: f64,
    ) -> Result<CVector, RixsError> {
        self.final_state_with_gamma(m_i, m_s, q_chain, omega_in, self.model.gamma)
    }

    pub fn final_state_with_gamma(
        &self,
        m_i: &DipoleMatrix,
        m_s: &DipoleMatrix,
        q_chain: f64,
        omega_in: f64,
        gamma: f64,
    ) -> Result<CVector, RixsError> {
        self.check_dipole_shape(m_i)?;
        self.check_dipole_shape(m_s)?;
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(RixsError::InvalidModel(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        let n = self.model.lattice.n_sites();
        let dv = self.model.lattice.local_dim();
        let dc = self.model.core_local_dim();
        let dims_val = vec![dv; n];
        let ground = self.ground_state();
        let e_g = self.ground_energy();
        let m_s_adj = m_s.entries().adjoint();
        let mut out = CVector::zeros(self.model.lattice.total_dim());
        for (j, &r_j) in self.model.lattice.site_positions().iter().enumerate() {
            let mut dims_core = dims_val.clone();
            dims_core[j] = dc;
            let sector_dim: usize = dims_core.iter().product();
            // excite: valence -> core-hole sector
            let mut excited = CVector::zeros(sector_dim);
            accumulate_site_operator(
                &ground,
                &dims_val,
                j,
                m_i.entries(),
                C64::new(1.0, 0.0),
                &mut excited,
            );
            // resolvent in the intermediate eigenbasis
            let decomp = &self.cores[j];
            let mut coeffs = decomp.vectors.adjoint() * &excited;
            for (c, &e_n) in coeffs.iter_mut().zip(decomp.values.iter()) {
                *c /= C64::new(e_n - e_g - omega_in, -gamma);
            }
            let propagated = &decomp.vectors * coeffs;
            // de-excite with the site phase
            accumulate_site_operator(
                &propagated,
                &dims_core,
                j,
                &m_s_adj,
                C64::from_polar(1.0, q_chain * r_j),
                &mut out,
            );
        }
        Ok(out)
    }

    /// Exact pole spectrum of a final state: poles at `E_n - E_G` with
    /// weights `|<n|Psi_f>|^2`.
    pub fn spectrum(&self, final_state: &CVector, meta: SpectrumMetadata) -> Spectrum {
        let coeffs = self.valence.vectors.adjoint() * final_state;
        let e_g = self.ground_energy();
        let poles: Vec<(f64, f64)> = self
            .valence
            .values
            .iter()
            .zip(coeffs.iter())
            .map(|(&e, c)| (e - e_g, c.norm_sqr()))
            .collect();
        let mut meta = meta;
        meta.bandwidth = Some(self.valence_bandwidth());
        Spectrum {
            data: SpectrumData::Poles(poles),
            metadata: Some(meta),
        }
    }

    /// Spectrum in the ultrashort core-hole lifetime limit: the final state
    /// is `i T_q |G> / Gamma` exactly.
    pub fn ucl_spectrum(
        &self,
        t: &TMatrix,
        q_chain: f64,
        gamma: f64,
        meta: SpectrumMetadata,
    ) -> Result<Spectrum, RixsError> {
        let applied = self.apply_t_q_to_ground(t, q_chain)?;
        let scaled = applied.map(|z| z * C64::new(0.0, 1.0 / gamma));
        let mut meta = meta;
        meta.gamma = gamma;
        Ok(self.spectrum(&scaled, meta))
    }

    /// `T_q |G>` on the solved ground state.
    pub fn apply_t_q_to_ground(&self, t: &TMatrix, q_chain: f64) -> Result<CVector, RixsError> {
        let dv = self.model.lattice.local_dim();
        if t.dim() != dv {
            return Err(RixsError::DipoleShape {
                rows: t.dim(),
                cols: t.dim(),
                core_dim: dv,
                valence_dim: dv,
            });
        }
        let n = self.model.lattice.n_sites();
        let dims = vec![dv; n];
        let ground = self.ground_state();
        let mut applied = CVector::zeros(ground.len());
        for (j, &r_j) in self.model.lattice.site_positions().iter().enumerate() {
            accumulate_site_operator(
                &ground,
                &dims,
                j,
                t.entries(),
                C64::from_polar(1.0, q_chain * r_j),
                &mut applied,
            );
        }
        Ok(applied)
    }
}

fn solve_sector(
    model: &ClusterModel,
    sector: Sector,
    cache: Option<&(PathBuf, String)>,
) -> Result<Eigh, RixsError> {
    let sector_name = match sector {
        Sector::Valence => "valence".to_string(),
        Sector::CoreHoleAt(j) => format!("core{j}"),
    };
    if let Some((dir, key)) = cache {
        let path = dir.join(format!("{key}-{sector_name}.json"));
        if path.exists() {
            let text = fs::read_to_string(&path)?;
            let cached: CachedEigh = serde_json::from_str(&text)?;
            return Ok(cached.into_eigh());
        }
    }
    let h = build_hamiltonian(model, sector);
    let decomp = linalg::eigh(&h, 1e-12)?;
    if let Some((dir, key)) = cache {
        fs::create_dir_all(dir)?;
        let path = dir.join(format!("{key}-{sector_name}.json"));
        let text = serde_json::to_string(&CachedEigh::from_eigh(&decomp))?;
        fs::write(path, text)?;
    }
    Ok(decomp)
}

fn model_cache_key(model: &ClusterModel) -> String {
    let canonical = serde_json::to_string(model).expect("serializable model");
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let digest = hasher.finalize();
    digest.iter().take(12).map(|b| format!("{b:02x}")).collect()
}

/// Provenance of a spectrum: momentum, polarization labels, incident
/// energy, lifetime, and (for simulated spectra) the valence bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMetadata {
    pub q_chain: f64,
    pub eps_i: String,
    pub eps_s: String,
    pub omega_in: f64,
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
}

/// Pole or sampled representation of a cross section.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectrumData {
    /// `(omega_n, weight_n)` pairs sorted ascending in omega.
    Poles(Vec<(f64, f64)>),
    /// Intensity samples on an ascending omega grid.
    Sampled { omega: Vec<f64>, intensity: Vec<f64> },
}

/// A RIXS spectrum with optional provenance metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub data: SpectrumData,
    pub metadata: Option<SpectrumMetadata>,
}

impl Spectrum {
    /// Total spectral weight: pole sum or full trapezoidal integral.
    pub fn total_weight(&self) -> f64 {
        match &self.data {
            SpectrumData::Poles(poles) => poles.iter().map(|&(_, w)| w).sum(),
            SpectrumData::Sampled { omega, intensity } => trapezoid(omega, intensity, f64::MIN),
        }
    }

    /// Span of the poles, or of the sample grid.
    fn span(&self) -> f64 {
        match &self.data {
            SpectrumData::Poles(poles) => match (poles.first(), poles.last()) {
                (Some(&(lo, _)), Some(&(hi, _))) => hi - lo,
                _ => 0.0,
            },
            SpectrumData::Sampled { omega, .. } => match (omega.first(), omega.last()) {
                (Some(&lo), Some(&hi)) => hi - lo,
                _ => 0.0,
            },
        }
    }

    /// The elastic cutoff used by Stokes integrals on pole data.
    pub fn elastic_cut(&self) -> f64 {
        let bandwidth = self
            .metadata
            .as_ref()
            .and_then(|m| m.bandwidth)
            .unwrap_or_else(|| self.span());
        ELASTIC_CUT_FRACTION * bandwidth
    }

    /// Number of poles and total weight at or below the elastic cutoff.
    /// More than one pole here signals a degenerate ground multiplet.
    pub fn elastic_poles(&self) -> (usize, f64) {
        match &self.data {
            SpectrumData::Poles(poles) => {
                let cut = self.elastic_cut();
                poles
                    .iter()
                    .filter(|&&(omega, _)| omega <= cut)
                    .fold((0, 0.0), |(n, tot), &(_, weight)| (n + 1, tot + weight))
            }
            SpectrumData::Sampled { .. } => (0, 0.0),
        }
    }

    /// Spectral weight above the elastic line (poles) or over `omega > 0`
    /// (sampled data).
    pub fn stokes_weight(&self) -> f64 {
        match &self.data {
            SpectrumData::Poles(poles) => {
                let cut = self.elastic_cut();
                poles
                    .iter()
                    .filter(|&&(omega, _)| omega > cut)
                    .map(|&(_, w)| w)
                    .sum()
            }
            SpectrumData::Sampled { omega, intensity } => trapezoid(omega, intensity, 0.0),
        }
    }

    /// Lorentzian rendering of a pole spectrum on a grid; sampled data is
    /// linearly interpolated.
    pub fn broadened(&self, grid: &[f64], eta: f64) -> Vec<f64> {
        match &self.data {
            SpectrumData::Poles(poles) => grid
                .iter()
                .map(|&w| {
                    poles
                        .iter()
                        .map(|&(wn, wt)| {
                            wt * eta / std::f64::consts::PI / ((w - wn) * (w - wn) + eta * eta)
                        })
                        .sum()
                })
                .collect(),
            SpectrumData::Sampled { omega, intensity } => grid
                .iter()
                .map(|&w| interp_linear(omega, intensity, w))
                .collect(),
        }
    }
}

/// Trapezoidal integral of samples restricted to `omega > lower`, with the
/// boundary segment clipped by linear interpolation.
fn trapezoid(omega: &[f64], intensity: &[f64], lower: f64) -> f64 {
    let mut total = 0.0;
    for i in 1..omega.len() {
        let (x0, x1) = (omega[i - 1], omega[i]);
        let (y0, y1) = (intensity[i - 1], intensity[i]);
        if x1 <= lower {
            continue;
        }
        if x0 >= lower {
            total += 0.5 * (y0 + y1) * (x1 - x0);
        } else {
            // segment straddles the boundary
            let t = (lower - x0) / (x1 - x0);
            let y_mid = y0 + t * (y1 - y0);
            total += 0.5 * (y_mid + y1) * (x1 - lower);
        }
    }
    total
}

fn interp_linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[xs.len() - 1] {
        return ys[ys.len() - 1];
    }
    let idx = xs.partition_point(|&v| v < x);
    let (x0, x1) = (xs[idx - 1], xs[idx]);
    let (y0, y1) = (ys[idx - 1], ys[idx]);
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// `Gamma^2` times the Stokes (inelastic) spectral weight.
///
/// The elastic pole is excluded by the `1e-9 * bandwidth` cutoff, which
/// realizes the connected-correlator subtraction exactly when the ground
/// state is unique.
pub fn stokes_integral(spec: &Spectrum, gamma: f64) -> Result<f64, RixsError> {
    if let Some(meta) = &spec.metadata {
        if relative_mismatch(meta.gamma, gamma) {
            return Err(RixsError::MetadataMismatch(format!(
                "gamma {gamma} does not match spectrum gamma {}",
                meta.gamma
            )));
        }
    }
    Ok(gamma * gamma * spec.stokes_weight())
}

fn relative_mismatch(a: f64, b: f64) -> bool {
    (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// QFI from a conjugate spectrum pair:
/// `2 Gamma^2 [ integral I(q, ei, es) + integral I(-q, es, ei) ]` over the
/// Stokes range. Both spectra must carry metadata and be mutually
/// conjugate.
pub fn qfi_from_spectra(fwd: &Spectrum, rev: &Spectrum, gamma: f64) -> Result<f64, RixsError> {
    let meta_f = fwd.metadata.as_ref().ok_or(RixsError::MetadataMissing)?;
    let meta_r = rev.metadata.as_ref().ok_or(RixsError::MetadataMissing)?;
    if relative_mismatch(meta_f.gamma, gamma) || relative_mismatch(meta_r.gamma, gamma) {
        return Err(RixsError::MetadataMismatch(format!(
            "gamma mismatch: {} vs {} vs requested {gamma}",
            meta_f.gamma, meta_r.gamma
        )));
    }
    if (meta_f.q_chain + meta_r.q_chain).abs() > 1e-12 * meta_f.q_chain.abs().max(1.0) {
        return Err(RixsError::MetadataMismatch(format!(
            "momenta are not reversed: {} vs {}",
            meta_f.q_chain, meta_r.q_chain
        )));
    }
    if meta_f.eps_i != meta_r.eps_s || meta_f.eps_s != meta_r.eps_i {
        return Err(RixsError::MetadataMismatch(format!(
            "polarizations are not swapped: ({}, {}) vs ({}, {})",
            meta_f.eps_i, meta_f.eps_s, meta_r.eps_i, meta_r.eps_s
        )));
    }
    Ok(2.0 * (stokes_integral(fwd, gamma)? + stokes_integral(rev, gamma)?))
}

/// Incoherent mixture of four polarization channels at fixed `q`:
/// pole-wise weighted union. Weights must be a convex combination.
pub fn mixed_spectrum(specs: &[Spectrum; 4], weights: [f64; 4]) -> Result<Spectrum, RixsError> {
    for &w in &weights {
        if !(w.is_finite() && w >= 0.0) {
            return Err(RixsError::InvalidWeights(format!(
                "weight {w} is not a finite non-negative number"
            )));
        }
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(RixsError::InvalidWeights(format!(
            "weights sum to {total}, expected 1"
        )));
    }
    let mut reference: Option<&SpectrumMetadata> = None;
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let mut max_bandwidth: Option<f64> = None;
    for (spec, &w) in specs.iter().zip(&weights) {
        let meta = spec.metadata.as_ref().ok_or(RixsError::MetadataMissing)?;
        if let Some(r) = reference {
            if relative_mismatch(r.q_chain, meta.q_chain)
                || relative_mismatch(r.omega_in, meta.omega_in)
                || relative_mismatch(r.gamma, meta.gamma)
            {
                return Err(RixsError::MetadataMismatch(
                    "mixed channels must share (q, omega_in, gamma)".into(),
                ));
            }
        } else {
            reference = Some(meta);
        }
        if let Some(b) = meta.bandwidth {
            max_bandwidth = Some(max_bandwidth.map_or(b, |m: f64| m.max(b)));
        }
        match &spec.data {
            SpectrumData::Poles(poles) => {
                pooled.extend(poles.iter().map(|&(omega, weight)| (omega, w * weight)));
            }
            SpectrumData::Sampled { .. } => return Err(RixsError::NotPoleSpectrum),
        }
    }
    pooled.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite poles"));
    // merge poles that coincide (the channels share one eigenbasis)
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pooled.len());
    for (omega, weight) in pooled {
        match merged.last_mut() {
            Some((prev_omega, prev_weight))
                if (omega - *prev_omega).abs() <= 1e-12 * (1.0 + omega.abs()) =>
            {
                *prev_weight += weight;
            }
            _ => merged.push((omega, weight)),
        }
    }
    let reference = reference.expect("four spectra");
    Ok(Spectrum {
        data: SpectrumData::Poles(merged),
        metadata: Some(SpectrumMetadata {
            q_chain: reference.q_chain,
            eps_i: "mixed".into(),
            eps_s: "mixed".into(),
            omega_in: reference.omega_in,
            gamma: reference.gamma,
            bandwidth: max_bandwidth,
        }),
    })
}

/// How a spectrum is rendered to CSV.
#[derive(Debug, Clone, Copy)]
pub enum SpectrumCsvFormat {
    /// `# poles` sentinel followed by `omega,weight` rows.
    Poles,
    /// Lorentzian-broadened `omega,intensity` rows on a uniform grid.
    Broadened { points: usize, eta: f64 },
}

/// Write a spectrum as CSV plus a JSON metadata sidecar (`<stem>.json`).
pub fn write_spectrum_csv<P: AsRef<Path>>(
    path: P,
    spec: &Spectrum,
    format: SpectrumCsvFormat,
) -> Result<(), RixsError> {
    let path = path.as_ref();
    let mut out = String::new();
    match format {
        SpectrumCsvFormat::Poles => {
            let poles = match &spec.data {
                SpectrumData::Poles(p) => p,
                SpectrumData::Sampled { .. } => return Err(RixsError::NotPoleSpectrum),
            };
            out.push_str("# poles\n");
            out.push_str("omega,weight\n");
            for &(omega, weight) in poles {
                out.push_str(&format!("{omega},{weight}\n"));
            }
        }
        SpectrumCsvFormat::Broadened { points, eta } => {
            let span = spec.span().max(eta);
            let lo = -0.1 * span;
            let hi = 1.1 * span;
            let n = points.max(2);
            let grid: Vec<f64> = (0..n)
                .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                .collect();
            let values = spec.broadened(&grid, eta);
            out.push_str("omega,intensity\n");
            for (w, v) in grid.iter().zip(&values) {
                out.push_str(&format!("{w},{v}\n"));
            }
        }
    }
    let mut file = fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    if let Some(meta) = &spec.metadata {
        let sidecar = path.with_extension("json");
        fs::write(sidecar, serde_json::to_string_pretty(meta)?)?;
    }
    Ok(())
}
