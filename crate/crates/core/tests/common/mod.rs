//! Independent numerical oracles used by the acceptance suite. Everything
//! here is deliberately implemented through different routes than the
//! library: quadrature instead of Clebsch-Gordan algebra, dense Kronecker
//! products instead of site-wise contraction, power iteration instead of
//! the Hermitian eigensolver.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use qfi_rixs::geometry::PolarizationVector;
use qfi_rixs::manybody::LatticeSpec;
use qfi_rixs::scattering::TMatrix;

pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Gauss-Legendre nodes and weights on [-1, 1] via Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // evaluate P_n and P_n' by recurrence
            let (mut p0, mut p1) = (1.0f64, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0f64, x);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Associated Legendre P_l^m(x) with the Condon-Shortley phase, m >= 0.
fn assoc_legendre(l: u32, m: u32, x: f64) -> f64 {
    assert!(m <= l);
    let mut pmm = 1.0;
    if m > 0 {
        let somx2 = ((1.0 - x) * (1.0 + x)).sqrt();
        let mut fact = 1.0;
        for _ in 0..m {
            pmm *= -fact * somx2;
            fact += 2.0;
        }
    }
    if l == m {
        return pmm;
    }
    let mut pmmp1 = x * (2.0 * m as f64 + 1.0) * pmm;
    if l == m + 1 {
        return pmmp1;
    }
    let mut pll = 0.0;
    for ll in (m + 2)..=l {
        pll = ((2.0 * ll as f64 - 1.0) * x * pmmp1 - (ll + m - 1) as f64 * pmm)
            / (ll - m) as f64;
        pmm = pmmp1;
        pmmp1 = pll;
    }
    pll
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Spherical harmonic Y_lm(theta, phi), Condon-Shortley convention.
pub fn spherical_harmonic(l: u32, m: i32, cos_theta: f64, phi: f64) -> C64 {
    let m_abs = m.unsigned_abs();
    let norm = ((2.0 * l as f64 + 1.0) / (4.0 * std::f64::consts::PI)
        * factorial(l - m_abs)
        / factorial(l + m_abs))
    .sqrt();
    let p = assoc_legendre(l, m_abs, cos_theta);
    let base = norm * p;
    let phase = C64::from_polar(1.0, m_abs as f64 * phi);
    if m >= 0 {
        phase * base
    } else {
        // Y_{l,-m} = (-1)^m conj(Y_{l,m})
        let sign = if m_abs % 2 == 0 { 1.0 } else { -1.0 };
        (phase * base).conj() * sign
    }
}

/// Dipole matrix element by direct sphere quadrature:
/// integral of conj(Y_core) (eps . r_hat) Y_valence over the sphere.
pub fn dipole_element_quadrature(
    eps: &PolarizationVector,
    l_core: u32,
    m_core: i32,
    l_val: u32,
    m_val: i32,
) -> C64 {
    let n_theta = 24;
    let n_phi = 32;
    let (nodes, weights) = gauss_legendre(n_theta);
    let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
    let mut total = C64::new(0.0, 0.0);
    for (x, w) in nodes.iter().zip(&weights) {
        let sin_theta = (1.0 - x * x).sqrt();
        for p in 0..n_phi {
            let phi = p as f64 * dphi;
            let r_hat = (sin_theta * phi.cos(), sin_theta * phi.sin(), *x);
            let eps_dot_r =
                eps.x() * r_hat.0 + eps.y() * r_hat.1 + eps.z() * r_hat.2;
            let y_core = spherical_harmonic(l_core, m_core, *x, phi);
            let y_val = spherical_harmonic(l_val, m_val, *x, phi);
            total += y_core.conj() * eps_dot_r * y_val * (*w * dphi);
        }
    }
    total
}

/// Dense global `T_q` built from explicit Kronecker products.
pub fn dense_t_q(lattice: &LatticeSpec, t: &TMatrix, q_chain: f64) -> CMatrix {
    let d = lattice.local_dim();
    let dim = lattice.total_dim();
    let mut out = CMatrix::zeros(dim, dim);
    for (j, &r) in lattice.site_positions().iter().enumerate() {
        let mut factors: Vec<CMatrix> = vec![CMatrix::identity(d, d); lattice.n_sites()];
        factors[j] = t.entries().map(|z| z * C64::from_polar(1.0, q_chain * r));
        let mut acc = factors[0].clone();
        for f in &factors[1..] {
            acc = acc.kronecker(f);
        }
        out += acc;
    }
    out
}

/// Largest eigenvalue of a Hermitian matrix by shifted power iteration,
/// independent of the library eigensolver.
pub fn lambda_max_power_iteration(h: &CMatrix) -> f64 {
    let n = h.nrows();
    // shift so the target eigenvalue is the dominant one in magnitude
    let shift: f64 = (0..n)
        .map(|i| (0..n).map(|j| h[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let shifted = h + CMatrix::identity(n, n).map(|z| z * shift);
    let mut v = CVector::from_element(n, C64::new(1.0, 0.1));
    v = v.clone().unscale(v.norm());
    let mut lambda = 0.0;
    for _ in 0..20_000 {
        let w = &shifted * &v;
        let new_lambda = v.dotc(&w).re;
        let norm = w.norm();
        if norm == 0.0 {
            return -shift;
        }
        let w = w.unscale(norm);
        let delta = (new_lambda - lambda).abs();
        v = w;
        lambda = new_lambda;
        if delta < 1e-14 * lambda.abs().max(1.0) {
            break;
        }
    }
    lambda - shift
}
