//! Angular-momentum algebra and dipole transition matrices.
//!
//! Dipole matrix elements between a core and a valence shell are assembled
//! from the rank-1 decomposition of `eps . r`: the polarization vector is
//! expanded in spherical tensor components and each component picks up a
//! Gaunt factor, itself a product of two Clebsch-Gordan coefficients. The
//! Condon-Shortley phase convention is used throughout. Matrices can also
//! be imported from a JSON file produced by an external electronic
//! structure calculation, bypassing the atomic path entirely.

use std::fmt;
use std::fs;
use std::path::Path;

use nalgebra::Vector3;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, PolarizationVector};
use crate::linalg::CMatrix;

#[derive(Debug, Error)]
pub enum AngularError {
    #[error("invalid quantum numbers: {0}")]
    InvalidQuantumNumbers(String),
    #[error("duplicate spin-orbital {0} in {1} basis")]
    DuplicateOrbital(String, &'static str),
    #[error("valence frame matrix is {rows}x{cols}, expected {dim}x{dim}")]
    FrameDimensionMismatch { rows: usize, cols: usize, dim: usize },
    #[error("valence frame matrix is not unitary: max |U^H U - 1| = {0:.3e}")]
    FrameNotUnitary(f64),
    #[error("matrix {name} has {rows} rows x {cols} cols, basis requires {expected_rows}x{expected_cols}")]
    DimensionMismatch {
        name: &'static str,
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },
    #[error("matrix {name} has a non-finite entry at row {row}, column {col}")]
    NonFiniteEntry {
        name: &'static str,
        row: usize,
        col: usize,
    },
    #[error("radial integral must be finite, got {0}")]
    InvalidRadialIntegral(f64),
    #[error("dipole matrices do not share a basis")]
    BasisMismatch,
    #[error("invalid polarization in file: {0}")]
    Polarization(#[from] GeometryError),
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("failed to parse {path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
}

/// Half-integer angular momentum quantum number, stored as twice its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HalfInt(i32);

impl HalfInt {
    /// Construct from twice the value, so `from_twice(3)` is 3/2.
    pub fn from_twice(twice: i32) -> Self {
        Self(twice)
    }

    pub fn twice(self) -> i32 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    fn is_whole(self) -> bool {
        self.0 % 2 == 0
    }
}

impl From<i32> for HalfInt {
    fn from(whole: i32) -> Self {
        Self(2 * whole)
    }
}

impl fmt::Display for HalfInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_whole() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

const MAX_FACTORIAL: usize = 170;

fn factorials() -> &'static [f64; MAX_FACTORIAL + 1] {
    use std::sync::OnceLock;
    static TABLE: OnceLock<[f64; MAX_FACTORIAL + 1]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [1.0; MAX_FACTORIAL + 1];
        for n in 1..=MAX_FACTORIAL {
            t[n] = t[n - 1] * n as f64;
        }
        t
    })
}

/// Factorial of a twice-value that must be an even non-negative integer.
fn fact_half(twice: i32) -> f64 {
    debug_assert!(twice >= 0 && twice % 2 == 0);
    factorials()[(twice / 2) as usize]
}

fn validate_jm(j: HalfInt, m: HalfInt, label: &str) -> Result<(), AngularError> {
    if j.twice() < 0 {
        return Err(AngularError::InvalidQuantumNumbers(format!(
            "{label}: j = {j} is negative"
        )));
    }
    if (j.twice() - m.twice()) % 2 != 0 {
        return Err(AngularError::InvalidQuantumNumbers(format!(
            "{label}: m = {m} is not of the same kind (integer/half-integer) as j = {j}"
        )));
    }
    if m.twice().abs() > j.twice() {
        return Err(AngularError::InvalidQuantumNumbers(format!(
            "{label}: |m| = |{m}| exceeds j = {j}"
        )));
    }
    Ok(())
}

/// Clebsch-Gordan coefficient `<j1 m1; j2 m2 | j m>` in the Condon-Shortley
/// convention, evaluated with the closed-form Racah sum.
///
/// Returns exactly zero when `m1 + m2 != m` or the triangle condition on
/// `(j1, j2, j)` fails; invalid quantum numbers are an error.
pub fn clebsch_gordan(
    j1: HalfInt,
    m1: HalfInt,
    j2: HalfInt,
    m2: HalfInt,
    j: HalfInt,
    m: HalfInt,
) -> Result<f64, AngularError> {
    validate_jm(j1, m1, "(j1, m1)")?;
    validate_jm(j2, m2, "(j2, m2)")?;
    validate_jm(j, m, "(j, m)")?;

    let (tj1, tm1) = (j1.twice(), m1.twice());
    let (tj2, tm2) = (j2.twice(), m2.twice());
    let (tj, tm) = (j.twice(), m.twice());

    if tm1 + tm2 != tm {
        return Ok(0.0);
    }
    // triangle condition, including the integer-perimeter requirement
    if tj < (tj1 - tj2).abs() || tj > tj1 + tj2 || (tj1 + tj2 + tj) % 2 != 0 {
        return Ok(0.0);
    }

    let prefactor = ((tj + 1) as f64 * fact_half(tj1 + tj2 - tj) * fact_half(tj1 - tj2 + tj)
        * fact_half(-tj1 + tj2 + tj)
        / fact_half(tj1 + tj2 + tj + 2))
    .sqrt();
    let norm = (fact_half(tj + tm)
        * fact_half(tj - tm)
        * fact_half(tj1 - tm1)
        * fact_half(tj1 + tm1)
        * fact_half(tj2 - tm2)
        * fact_half(tj2 + tm2))
    .sqrt();

    // Racah sum over all k with non-negative factorial arguments (twice-values)
    let k_min = 0.max(tj2 - tj - tm1).max(tj1 - tj + tm2);
    let k_max = (tj1 + tj2 - tj).min(tj1 - tm1).min(tj2 + tm2);
    let mut sum = 0.0;
    let mut tk = k_min;
    while tk <= k_max {
        let sign = if (tk / 2) % 2 == 0 { 1.0 } else { -1.0 };
        let denom = fact_half(tk)
            * fact_half(tj1 + tj2 - tj - tk)
            * fact_half(tj1 - tm1 - tk)
            * fact_half(tj2 + tm2 - tk)
            * fact_half(tj - tj2 + tm1 + tk)
            * fact_half(tj - tj1 - tm2 + tk);
        sum += sign / denom;
        tk += 2;
    }
    Ok(prefactor * norm * sum)
}

/// Matrix element `<l_bra m_bra | C^k_q | l_ket m_ket>` of the Racah
/// spherical tensor between spherical harmonics (the Gaunt factor).
pub fn racah_c_element(
    l_bra: u32,
    m_bra: i32,
    k: u32,
    q: i32,
    l_ket: u32,
    m_ket: i32,
) -> Result<f64, AngularError> {
    let lb = HalfInt::from(l_bra as i32);
    let lk = HalfInt::from(l_ket as i32);
    let cg_m = clebsch_gordan(
        lk,
        HalfInt::from(m_ket),
        HalfInt::from(k as i32),
        HalfInt::from(q),
        lb,
        HalfInt::from(m_bra),
    )?;
    let cg_0 = clebsch_gordan(
        lk,
        HalfInt::from(0),
        HalfInt::from(k as i32),
        HalfInt::from(0),
        lb,
        HalfInt::from(0),
    )?;
    let ratio = ((2 * l_ket + 1) as f64 / (2 * l_bra + 1) as f64).sqrt();
    Ok(cg_m * cg_0 * ratio)
}

/// Rank-1 spherical tensor components `(c_-1, c_0, c_+1)` of a polarization
/// vector, defined so that `eps . r = r * sum_m c_m C^1_m`.
pub fn spherical_tensor_components(eps: &PolarizationVector) -> [C64; 3] {
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let (ex, ey, ez) = (eps.x(), eps.y(), eps.z());
    let i = C64::i();
    [
        (ex + i * ey) * inv_sqrt2,
        ez,
        -(ex - i * ey) * inv_sqrt2,
    ]
}

/// Spin projection of a spin-orbital.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spin {
    Up,
    Down,
}

/// One single-particle basis state: principal label, orbital momentum,
/// magnetic quantum number, and spin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpinOrbital {
    pub n: u32,
    pub l: u32,
    pub ml: i32,
    pub spin: Spin,
}

impl SpinOrbital {
    pub fn new(n: u32, l: u32, ml: i32, spin: Spin) -> Result<Self, AngularError> {
        if ml.abs() > l as i32 {
            return Err(AngularError::InvalidQuantumNumbers(format!(
                "|ml| = {} exceeds l = {l}",
                ml.abs()
            )));
        }
        Ok(Self { n, l, ml, spin })
    }

    fn validate(&self) -> Result<(), AngularError> {
        Self::new(self.n, self.l, self.ml, self.spin).map(|_| ())
    }
}

impl fmt::Display for SpinOrbital {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let arrow = match self.spin {
            Spin::Up => "+",
            Spin::Down => "-",
        };
        write!(f, "(n={},l={},ml={},{})", self.n, self.l, self.ml, arrow)
    }
}

/// Expression frame for the valence block of dipole and scattering matrices.
#[derive(Debug, Clone, PartialEq)]
pub enum ValenceFrame {
    Spherical,
    /// Unitary whose columns are the frame orbitals in the spherical basis,
    /// over the full (spin-extended) valence dimension.
    Cubic(CMatrix),
}

/// Ordered core and valence shells plus the valence expression frame.
///
/// Basis ordering is spin-major: all spin-up orbitals first, each group
/// running over ml ascending. This matches the tensor factorization
/// `spin (x) orbital` used by the many-body layer.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitalBasis {
    core: Vec<SpinOrbital>,
    valence: Vec<SpinOrbital>,
    valence_frame: ValenceFrame,
}

fn shell(n: u32, l: u32, ms: &[i32]) -> Vec<SpinOrbital> {
    let mut out = Vec::with_capacity(2 * ms.len());
    for spin in [Spin::Up, Spin::Down] {
        for &ml in ms {
            out.push(SpinOrbital { n, l, ml, spin });
        }
    }
    out
}

impl OrbitalBasis {
    pub fn new(core: Vec<SpinOrbital>, valence: Vec<SpinOrbital>) -> Result<Self, AngularError> {
        for (list, which) in [(&core, "core"), (&valence, "valence")] {
            for so in list.iter() {
                so.validate()?;
            }
            for (i, a) in list.iter().enumerate() {
                if list[i + 1..].contains(a) {
                    return Err(AngularError::DuplicateOrbital(a.to_string(), which));
                }
            }
        }
        Ok(Self {
            core,
            valence,
            valence_frame: ValenceFrame::Spherical,
        })
    }

    /// Full atomic shells `n_core l_core -> n_val l_val`, spherical frame.
    pub fn atomic(n_core: u32, l_core: u32, n_val: u32, l_val: u32) -> Self {
        let core_ms: Vec<i32> = (-(l_core as i32)..=l_core as i32).collect();
        let val_ms: Vec<i32> = (-(l_val as i32)..=l_val as i32).collect();
        Self {
            core: shell(n_core, l_core, &core_ms),
            valence: shell(n_val, l_val, &val_ms),
            valence_frame: ValenceFrame::Spherical,
        }
    }

    /// The default L-edge basis: 2p core (6 spin-orbitals) and 3d valence
    /// (10 spin-orbitals) in the spherical m-basis.
    pub fn atomic_2p_3d() -> Self {
        Self::atomic(2, 1, 3, 2)
    }

    /// Full core shell but only the listed valence ml values, for toy
    /// clusters with a reduced orbital count.
    pub fn atomic_with_valence_ms(
        n_core: u32,
        l_core: u32,
        n_val: u32,
        l_val: u32,
        val_ms: &[i32],
    ) -> Result<Self, AngularError> {
        let core_ms: Vec<i32> = (-(l_core as i32)..=l_core as i32).collect();
        Self::new(shell(n_core, l_core, &core_ms), shell(n_val, l_val, val_ms))
    }

    /// Switch the valence frame to an explicit unitary (columns are the new
    /// orbitals in the spherical basis, spin-extended dimension).
    pub fn with_valence_frame(mut self, unitary: CMatrix) -> Result<Self, AngularError> {
        let dim = self.valence.len();
        if unitary.nrows() != dim || unitary.ncols() != dim {
            return Err(AngularError::FrameDimensionMismatch {
                rows: unitary.nrows(),
                cols: unitary.ncols(),
                dim,
            });
        }
        let gram = unitary.adjoint() * &unitary;
        let mut err = 0.0f64;
        for i in 0..dim {
            for j in 0..dim {
                let expected = if i == j { 1.0 } else { 0.0 };
                err = err.max((gram[(i, j)] - C64::new(expected, 0.0)).norm());
            }
        }
        if err > 1e-12 {
            return Err(AngularError::FrameNotUnitary(err));
        }
        self.valence_frame = ValenceFrame::Cubic(unitary);
        Ok(self)
    }

    /// Switch the valence frame to real (cubic) harmonics. Requires a full
    /// valence shell ordered spin-major with ml ascending, as produced by
    /// [`OrbitalBasis::atomic`].
    pub fn with_cubic_valence_frame(self) -> Result<Self, AngularError> {
        let l = match self.valence.first() {
            Some(so) => so.l,
            None => {
                return Err(AngularError::InvalidQuantumNumbers(
                    "cannot build a cubic frame on an empty valence shell".into(),
                ))
            }
        };
        let n_orb = (2 * l + 1) as usize;
        if self.valence.len() != 2 * n_orb {
            return Err(AngularError::InvalidQuantumNumbers(
                "cubic frame requires the full valence shell".into(),
            ));
        }
        let u_orb = real_harmonics_unitary(l);
        let spin_id = CMatrix::identity(2, 2);
        let u = spin_id.kronecker(&u_orb);
        self.with_valence_frame(u)
    }

    pub fn core(&self) -> &[SpinOrbital] {
        &self.core
    }

    pub fn valence(&self) -> &[SpinOrbital] {
        &self.valence
    }

    pub fn valence_frame(&self) -> &ValenceFrame {
        &self.valence_frame
    }

    pub fn core_dim(&self) -> usize {
        self.core.len()
    }

    pub fn valence_dim(&self) -> usize {
        self.valence.len()
    }

    /// Number of valence orbitals per spin.
    pub fn valence_orbitals(&self) -> usize {
        self.valence.len() / 2
    }
}

/// Unitary from the complex spherical basis (ml ascending) to real
/// harmonics, columns ordered `m=0, (c_1, s_1), (c_2, s_2), ...`.
pub fn real_harmonics_unitary(l: u32) -> CMatrix {
    let dim = (2 * l + 1) as usize;
    let idx = |ml: i32| (ml + l as i32) as usize;
    let mut u = CMatrix::zeros(dim, dim);
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut col = 0;
    u[(idx(0), col)] = C64::new(1.0, 0.0);
    col += 1;
    for m in 1..=l as i32 {
        let cs_sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        // cosine-type: (|l,-m> + (-1)^m |l,m>)/sqrt(2)
        u[(idx(-m), col)] = C64::new(inv_sqrt2, 0.0);
        u[(idx(m), col)] = C64::new(cs_sign * inv_sqrt2, 0.0);
        col += 1;
        // sine-type: i(|l,-m> - (-1)^m |l,m>)/sqrt(2)
        u[(idx(-m), col)] = C64::new(0.0, inv_sqrt2);
        u[(idx(m), col)] = C64::new(0.0, -cs_sign * inv_sqrt2);
        col += 1;
    }
    u
}

/// Complex core x valence dipole transition matrix for one polarization.
#[derive(Debug, Clone, PartialEq)]
pub struct DipoleMatrix {
    entries: CMatrix,
    basis: OrbitalBasis,
    polarization: Option<PolarizationVector>,
    radial_integral: f64,
}

impl DipoleMatrix {
    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn basis(&self) -> &OrbitalBasis {
        &self.basis
    }

    /// The polarization the matrix was computed for; `None` for imported
    /// matrices that do not declare one.
    pub fn polarization(&self) -> Option<&PolarizationVector> {
        self.polarization.as_ref()
    }

    pub fn radial_integral(&self) -> f64 {
        self.radial_integral
    }
}

/// Dipole transition matrix `M(eps)` on the atomic (Wigner-Eckart) path.
///
/// Entry `(alpha, beta)` is `radial * sum_m c_m(eps) <l_c m_c|C^1_m|l_v m_v>`
/// for equal spins and exactly zero otherwise. A cubic valence frame rotates
/// the columns by the stored unitary.
pub fn dipole_matrix(
    eps: &PolarizationVector,
    basis: &OrbitalBasis,
    radial: f64,
) -> Result<DipoleMatrix, AngularError> {
    if !radial.is_finite() {
        return Err(AngularError::InvalidRadialIntegral(radial));
    }
    let c = spherical_tensor_components(eps);
    let mut entries = CMatrix::zeros(basis.core_dim(), basis.valence_dim());
    for (a, core) in basis.core().iter().enumerate() {
        for (b, val) in basis.valence().iter().enumerate() {
            if core.spin != val.spin {
                continue;
            }
            let mut amp = C64::new(0.0, 0.0);
            for (ci, m) in [(-1i32, 0usize), (0, 1), (1, 2)].map(|(m, i)| (i, m)) {
                let gaunt = racah_c_element(core.l, core.ml, 1, m, val.l, val.ml)?;
                if gaunt != 0.0 {
                    amp += c[ci] * gaunt;
                }
            }
            entries[(a, b)] = amp * radial;
        }
    }
    if let ValenceFrame::Cubic(u) = basis.valence_frame() {
        entries *= u;
    }
    Ok(DipoleMatrix {
        entries,
        basis: basis.clone(),
        polarization: Some(eps.clone()),
        radial_integral: radial,
    })
}

#[derive(Serialize, Deserialize)]
struct ComplexEntry(f64, f64);

#[derive(Serialize, Deserialize)]
struct MatrixPair {
    eps_i: Vec<Vec<ComplexEntry>>,
    eps_s: Vec<Vec<ComplexEntry>>,
}

#[derive(Serialize, Deserialize)]
struct PolarizationPair {
    eps_i: [ComplexEntry; 3],
    eps_s: [ComplexEntry; 3],
}

#[derive(Serialize, Deserialize)]
struct DipoleFile {
    core_basis: Vec<SpinOrbital>,
    valence_basis: Vec<SpinOrbital>,
    radial_integral: f64,
    matrices: MatrixPair,
    #[serde(skip_serializing_if = "Option::is_none")]
    polarizations: Option<PolarizationPair>,
}

fn matrix_from_rows(
    name: &'static str,
    rows: &[Vec<ComplexEntry>],
    expected_rows: usize,
    expected_cols: usize,
) -> Result<CMatrix, AngularError> {
    let mismatch = |rows_got: usize, cols_got: usize| AngularError::DimensionMismatch {
        name,
        rows: rows_got,
        cols: cols_got,
        expected_rows,
        expected_cols,
    };
    if rows.len() != expected_rows {
        let cols = rows.first().map_or(0, Vec::len);
        return Err(mismatch(rows.len(), cols));
    }
    let mut m = CMatrix::zeros(expected_rows, expected_cols);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != expected_cols {
            return Err(mismatch(rows.len(), row.len()));
        }
        for (j, ComplexEntry(re, im)) in row.iter().enumerate() {
            if !re.is_finite() || !im.is_finite() {
                return Err(AngularError::NonFiniteEntry { name, row: i, col: j });
            }
            m[(i, j)] = C64::new(*re, *im);
        }
    }
    Ok(m)
}

fn rows_from_matrix(m: &CMatrix) -> Vec<Vec<ComplexEntry>> {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| ComplexEntry(m[(i, j)].re, m[(i, j)].im))
                .collect()
        })
        .collect()
}

fn polarization_from_entries(e: &[ComplexEntry; 3]) -> Result<PolarizationVector, AngularError> {
    let v = Vector3::new(
        C64::new(e[0].0, e[0].1),
        C64::new(e[1].0, e[1].1),
        C64::new(e[2].0, e[2].1),
    );
    Ok(PolarizationVector::new(v)?)
}

/// Load a pair of dipole matrices (incident, scattered) from a JSON file.
///
/// The file declares both bases explicitly; shape and finiteness are
/// validated before anything is returned.
pub fn load_dipole_matrices<P: AsRef<Path>>(
    path: P,
) -> Result<(DipoleMatrix, DipoleMatrix), AngularError> {
    let path_str = path.as_ref().display().to_string();
    let text = fs::read_to_string(&path).map_err(|source| AngularError::Io {
        path: path_str.clone(),
        source,
    })?;
    let file: DipoleFile = serde_json::from_str(&text).map_err(|source| AngularError::Parse {
        path: path_str,
        source,
    })?;
    if !file.radial_integral.is_finite() {
        return Err(AngularError::InvalidRadialIntegral(file.radial_integral));
    }
    let basis = OrbitalBasis::new(file.core_basis, file.valence_basis)?;
    let (nc, nv) = (basis.core_dim(), basis.valence_dim());
    let entries_i = matrix_from_rows("eps_i", &file.matrices.eps_i, nc, nv)?;
    let entries_s = matrix_from_rows("eps_s", &file.matrices.eps_s, nc, nv)?;
    let (pol_i, pol_s) = match &file.polarizations {
        Some(p) => (
            Some(polarization_from_entries(&p.eps_i)?),
            Some(polarization_from_entries(&p.eps_s)?),
        ),
        None => (None, None),
    };
    let mk = |entries, polarization| DipoleMatrix {
        entries,
        basis: basis.clone(),
        polarization,
        radial_integral: file.radial_integral,
    };
    Ok((mk(entries_i, pol_i), mk(entries_s, pol_s)))
}

/// Write a pair of dipole matrices to the JSON interchange format.
pub fn save_dipole_matrices<P: AsRef<Path>>(
    path: P,
    m_i: &DipoleMatrix,
    m_s: &DipoleMatrix,
) -> Result<(), AngularError> {
    if m_i.basis != m_s.basis || m_i.radial_integral != m_s.radial_integral {
        return Err(AngularError::BasisMismatch);
    }
    let pol_entry = |p: &PolarizationVector| {
        [
            ComplexEntry(p.x().re, p.x().im),
            ComplexEntry(p.y().re, p.y().im),
            ComplexEntry(p.z().re, p.z().im),
        ]
    };
    let polarizations = match (m_i.polarization(), m_s.polarization()) {
        (Some(pi), Some(ps)) => Some(PolarizationPair {
            eps_i: pol_entry(pi),
            eps_s: pol_entry(ps),
        }),
        _ => None,
    };
    let file = DipoleFile {
        core_basis: m_i.basis.core().to_vec(),
        valence_basis: m_i.basis.valence().to_vec(),
        radial_integral: m_i.radial_integral,
        matrices: MatrixPair {
            eps_i: rows_from_matrix(&m_i.entries),
            eps_s: rows_from_matrix(&m_s.entries),
        },
        polarizations,
    };
    let text = serde_json::to_string_pretty(&file).expect("serializable");
    let path_str = path.as_ref().display().to_string();
    fs::write(&path, text).map_err(|source| AngularError::Io {
        path: path_str,
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn h(twice: i32) -> HalfInt {
        HalfInt::from_twice(twice)
    }

    #[test]
    fn cg_stretched_state() {
        let v = clebsch_gordan(1.into(), 1.into(), 1.into(), 1.into(), 2.into(), 2.into());
        assert!((v.unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cg_m_selection_rule() {
        let v = clebsch_gordan(1.into(), 0.into(), 1.into(), 1.into(), 2.into(), 0.into());
        assert_eq!(v.unwrap(), 0.0);
    }

    #[test]
    fn cg_racah_value() {
        // <1,0;1,0|2,0> = sqrt(2/3)
        let v = clebsch_gordan(1.into(), 0.into(), 1.into(), 0.into(), 2.into(), 0.into()).unwrap();
        assert!((v - (2.0f64 / 3.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn cg_half_integer_value() {
        // <1/2,1/2;1/2,-1/2|0,0> = 1/sqrt(2)
        let v = clebsch_gordan(h(1), h(1), h(1), h(-1), h(0), h(0)).unwrap();
        assert!((v - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-14);
    }

    #[test]
    fn cg_invalid_quantum_numbers() {
        assert!(clebsch_gordan(1.into(), 2.into(), 1.into(), 0.into(), 2.into(), 2.into()).is_err());
        assert!(clebsch_gordan(h(-2), h(0), h(0), h(0), h(0), h(0)).is_err());
        assert!(clebsch_gordan(h(2), h(1), h(0), h(0), h(2), h(1)).is_err());
    }

    #[test]
    fn cg_orthonormality_small() {
        // sum over (m1, m2) of CG(..|J M) CG(..|J' M') = delta for all J, M
        let (tj1, tj2) = (5i32, 4i32);
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
                                let a = clebsch_gordan(h(tj1), h(tm1), h(tj2), h(tm2), h(tja), h(tma))
                                    .unwrap();
                                let b = clebsch_gordan(h(tj1), h(tm1), h(tj2), h(tm2), h(tjb), h(tmb))
                                    .unwrap();
                                sum += a * b;
                            }
                        }
                        let expected = if tja == tjb && tma == tmb { 1.0 } else { 0.0 };
                        assert!(
                            (sum - expected).abs() < 1e-12,
                            "J={tja}/2 J'={tjb}/2 M={tma}/2 M'={tmb}/2 sum={sum}"
                        );
                    }
                }
            }
        }
    }

    fn unit(x: f64, y: f64, z: f64) -> PolarizationVector {
        PolarizationVector::from_real(Vector3::new(x, y, z)).unwrap()
    }

    #[test]
    fn tensor_components_along_axes() {
        let c = spherical_tensor_components(&unit(0.0, 0.0, 1.0));
        assert!((c[0].norm()) < 1e-15 && (c[2].norm()) < 1e-15);
        assert!((c[1] - C64::new(1.0, 0.0)).norm() < 1e-15);

        let c = spherical_tensor_components(&unit(1.0, 0.0, 0.0));
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        assert!((c[0] - C64::new(inv_sqrt2, 0.0)).norm() < 1e-15);
        assert!(c[1].norm() < 1e-15);
        assert!((c[2] + C64::new(inv_sqrt2, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn tensor_components_circular() {
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        let eps = PolarizationVector::new(Vector3::new(
            C64::new(inv_sqrt2, 0.0),
            C64::new(0.0, inv_sqrt2),
            C64::new(0.0, 0.0),
        ))
        .unwrap();
        let c = spherical_tensor_components(&eps);
        assert!(c[0].norm() < 1e-15);
        assert!(c[1].norm() < 1e-15);
        assert!((c[2] + C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn tensor_components_unit_sum() {
        let eps = unit(0.3, 0.5, (1.0f64 - 0.09 - 0.25).sqrt());
        let c = spherical_tensor_components(&eps);
        let total: f64 = c.iter().map(|z| z.norm_sqr()).sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dipole_spin_blocks_and_selection() {
        let basis = OrbitalBasis::atomic_2p_3d();
        let m = dipole_matrix(&unit(0.0, 0.0, 1.0), &basis, 1.0).unwrap();
        for (a, core) in basis.core().iter().enumerate() {
            for (b, val) in basis.valence().iter().enumerate() {
                let entry = m.entries()[(a, b)];
                if core.spin != val.spin {
                    assert_eq!(entry, C64::new(0.0, 0.0), "spin flip must vanish exactly");
                } else if core.ml != val.ml {
                    // z polarization drives only the m-conserving channel
                    assert_eq!(entry, C64::new(0.0, 0.0));
                }
            }
        }
        // at least one allowed channel is nonzero
        assert!(m.entries().norm() > 0.1);
    }

    #[test]
    fn dipole_linearity_in_polarization() {
        let basis = OrbitalBasis::atomic_2p_3d();
        let e1 = unit(1.0, 0.0, 0.0);
        let e2 = unit(0.0, 0.4, (1.0f64 - 0.16).sqrt());
        let (a, b) = (0.7, -1.3);
        let combo = Vector3::new(
            e1.x() * a + e2.x() * b,
            e1.y() * a + e2.y() * b,
            e1.z() * a + e2.z() * b,
        );
        let (eps, norm) = PolarizationVector::normalized(combo).unwrap();
        let m_combo = dipole_matrix(&eps, &basis, 1.0).unwrap();
        let m1 = dipole_matrix(&e1, &basis, 1.0).unwrap();
        let m2 = dipole_matrix(&e2, &basis, 1.0).unwrap();
        let expected = m1.entries() * C64::new(a, 0.0) + m2.entries() * C64::new(b, 0.0);
        let got = m_combo.entries() * C64::new(norm, 0.0);
        assert!((got - expected).norm() < 1e-13);
    }

    #[test]
    fn dipole_singular_values_frame_invariant() {
        let eps = unit(0.36, -0.48, 0.8);
        let spherical = OrbitalBasis::atomic_2p_3d();
        let cubic = OrbitalBasis::atomic_2p_3d()
            .with_cubic_valence_frame()
            .unwrap();
        let m_sph = dipole_matrix(&eps, &spherical, 1.0).unwrap();
        let m_cub = dipole_matrix(&eps, &cubic, 1.0).unwrap();
        let mut sv_sph = m_sph.entries().clone().singular_values().as_slice().to_vec();
        let mut sv_cub = m_cub.entries().clone().singular_values().as_slice().to_vec();
        sv_sph.sort_by(|x, y| y.partial_cmp(x).unwrap());
        sv_cub.sort_by(|x, y| y.partial_cmp(x).unwrap());
        for (a, b) in sv_sph.iter().zip(&sv_cub) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn real_harmonics_unitary_is_unitary() {
        for l in 1..=3u32 {
            let u = real_harmonics_unitary(l);
            let g = u.adjoint() * &u;
            let dim = (2 * l + 1) as usize;
            for i in 0..dim {
                for j in 0..dim {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((g[(i, j)] - C64::new(expected, 0.0)).norm() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn duplicate_orbitals_rejected() {
        let so = SpinOrbital::new(2, 1, 0, Spin::Up).unwrap();
        assert!(OrbitalBasis::new(vec![so, so], vec![]).is_err());
    }

    #[test]
    fn dipole_file_roundtrip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dipole.json");
        let basis = OrbitalBasis::atomic_2p_3d();
        let m_i = dipole_matrix(&unit(1.0, 0.0, 0.0), &basis, 1.0).unwrap();
        let m_s = dipole_matrix(&unit(0.0, 1.0, 0.0), &basis, 1.0).unwrap();
        save_dipole_matrices(&path, &m_i, &m_s).unwrap();
        let (r_i, r_s) = load_dipole_matrices(&path).unwrap();
        assert_eq!(r_i.entries(), m_i.entries(), "bit-identical roundtrip");
        assert_eq!(r_s.entries(), m_s.entries());
        assert_eq!(
            r_i.polarization().unwrap().components(),
            m_i.polarization().unwrap().components()
        );

        // wrong shape: drop a row
        let text = std::fs::read_to_string(&path).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let rows = v["matrices"]["eps_i"].as_array_mut().unwrap();
        rows.pop();
        let bad = dir.path().join("bad_shape.json");
        std::fs::write(&bad, serde_json::to_string(&v).unwrap()).unwrap();
        match load_dipole_matrices(&bad) {
            Err(AngularError::DimensionMismatch { rows, .. }) => assert_eq!(rows, 5),
            other => panic!("expected dimension error, got {other:?}"),
        }

        // NaN entry gets located
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["matrices"]["eps_s"][2][3][0] = serde_json::Value::String("NaN".into());
        let bad = dir.path().join("bad_nan.json");
        std::fs::write(&bad, serde_json::to_string(&v).unwrap()).unwrap();
        // serde_json rejects the string; also test a true non-finite via f64::NAN encoding
        assert!(load_dipole_matrices(&bad).is_err());
    }
}
