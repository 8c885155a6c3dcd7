//! Scattering geometry: beam directions, momentum transfer, and pi/sigma
//! polarization vectors.
//!
//! Conventions (fixed once, used everywhere): the sample plane is x-y with
//! normal z. At azimuth `phi = 0` the scattering plane is x-z, the incident
//! beam runs along `(cos theta_i, 0, -sin theta_i)` and the scattered beam
//! along `(-cos theta_s, 0, -sin theta_s)`, so the angle between the two
//! beams is `pi - (theta_i + theta_s)`. A nonzero `phi` rigidly rotates the
//! whole scattering plane about z. The sigma polarization is the rotated
//! y-axis (the scattering-plane normal) and pi = k_hat x sigma_hat.

use std::f64::consts::{FRAC_PI_2, TAU};

use nalgebra::Vector3;
use num_complex::Complex64 as C64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("{name} = {value} rad is outside [{min}, {max}]")]
    AngleOutOfRange {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("wavevector magnitude must be positive and finite, got {0}")]
    InvalidWavevectorMagnitude(f64),
    #[error("polarization vector norm {norm} deviates from 1 by more than {tol}")]
    NotUnitNorm { norm: f64, tol: f64 },
    #[error("lattice direction must be a unit vector, got norm {0}")]
    InvalidLatticeDirection(f64),
}

/// Which of the two beams a polarization vector belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Beam {
    Incident,
    Scattered,
}

/// Pi (in-plane) or sigma (plane-normal) photon polarization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolLabel {
    Pi,
    Sigma,
}

impl PolLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            PolLabel::Pi => "pi",
            PolLabel::Sigma => "sigma",
        }
    }
}

impl std::fmt::Display for PolLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Grazing angles and azimuth defining the scattering setup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamGeometry {
    theta_i: f64,
    theta_s: f64,
    phi: f64,
    k_in: f64,
    k_out: f64,
}

impl BeamGeometry {
    /// Geometry from grazing angles (radians) with unit wavevector magnitudes.
    ///
    /// `theta_i`, `theta_s` must lie in `[0, pi/2]` and `phi` in `[0, 2*pi)`.
    pub fn new(theta_i: f64, theta_s: f64, phi: f64) -> Result<Self, GeometryError> {
        let check = |name: &'static str, value: f64, min: f64, max: f64| {
            if !value.is_finite() || value < min || value > max {
                Err(GeometryError::AngleOutOfRange {
                    name,
                    value,
                    min,
                    max,
                })
            } else {
                Ok(())
            }
        };
        check("theta_i", theta_i, 0.0, FRAC_PI_2)?;
        check("theta_s", theta_s, 0.0, FRAC_PI_2)?;
        if !phi.is_finite() || phi < 0.0 || phi >= TAU {
            return Err(GeometryError::AngleOutOfRange {
                name: "phi",
                value: phi,
                min: 0.0,
                max: TAU,
            });
        }
        Ok(Self {
            theta_i,
            theta_s,
            phi,
            k_in: 1.0,
            k_out: 1.0,
        })
    }

    pub fn from_degrees(theta_i: f64, theta_s: f64, phi: f64) -> Result<Self, GeometryError> {
        Self::new(
            theta_i.to_radians(),
            theta_s.to_radians(),
            phi.to_radians(),
        )
    }

    /// Override the photon wavevector magnitudes (defaults are 1).
    pub fn with_wavevector_magnitudes(
        mut self,
        k_in: f64,
        k_out: f64,
    ) -> Result<Self, GeometryError> {
        for k in [k_in, k_out] {
            if !k.is_finite() || k <= 0.0 {
                return Err(GeometryError::InvalidWavevectorMagnitude(k));
            }
        }
        self.k_in = k_in;
        self.k_out = k_out;
        Ok(self)
    }

    pub fn theta_i(&self) -> f64 {
        self.theta_i
    }

    pub fn theta_s(&self) -> f64 {
        self.theta_s
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn k_in(&self) -> f64 {
        self.k_in
    }

    pub fn k_out(&self) -> f64 {
        self.k_out
    }

    fn rotate_about_z(&self, v: Vector3<f64>) -> Vector3<f64> {
        let (s, c) = self.phi.sin_cos();
        Vector3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
    }

    /// Unit propagation directions `(k_hat_i, k_hat_s)`.
    pub fn beam_directions(&self) -> (Vector3<f64>, Vector3<f64>) {
        let ki = Vector3::new(self.theta_i.cos(), 0.0, -self.theta_i.sin());
        let ks = Vector3::new(-self.theta_s.cos(), 0.0, -self.theta_s.sin());
        (self.rotate_about_z(ki), self.rotate_about_z(ks))
    }

    /// Pi or sigma polarization vector of the requested beam.
    ///
    /// Sigma is the scattering-plane normal (independent of the grazing
    /// angles); pi is `k_hat x sigma_hat`, in the plane and orthogonal to
    /// its beam.
    pub fn polarization(&self, beam: Beam, label: PolLabel) -> PolarizationVector {
        let sigma = self.rotate_about_z(Vector3::new(0.0, 1.0, 0.0));
        let v = match label {
            PolLabel::Sigma => sigma,
            PolLabel::Pi => {
                let (ki, ks) = self.beam_directions();
                let k = match beam {
                    Beam::Incident => ki,
                    Beam::Scattered => ks,
                };
                k.cross(&sigma)
            }
        };
        PolarizationVector::from_real(v).expect("construction yields unit vectors")
    }

    /// Momentum transfer `q = k_i - k_s` and its projection onto the chain.
    pub fn momentum_transfer(
        &self,
        lattice_direction: &Vector3<f64>,
    ) -> Result<MomentumTransfer, GeometryError> {
        let norm = lattice_direction.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(GeometryError::InvalidLatticeDirection(norm));
        }
        let (ki, ks) = self.beam_directions();
        let q = ki.scale(self.k_in) - ks.scale(self.k_out);
        Ok(MomentumTransfer {
            q,
            q_chain: q.dot(lattice_direction),
        })
    }
}

/// Unit-norm complex polarization vector in the sample frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizationVector {
    components: Vector3<C64>,
}

impl PolarizationVector {
    const NORM_TOL: f64 = 1e-12;

    pub fn new(components: Vector3<C64>) -> Result<Self, GeometryError> {
        let norm_sq: f64 = components.iter().map(|c| c.norm_sqr()).sum();
        let norm = norm_sq.sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > Self::NORM_TOL {
            return Err(GeometryError::NotUnitNorm {
                norm,
                tol: Self::NORM_TOL,
            });
        }
        Ok(Self { components })
    }

    pub fn from_real(v: Vector3<f64>) -> Result<Self, GeometryError> {
        Self::new(Vector3::new(
            C64::new(v.x, 0.0),
            C64::new(v.y, 0.0),
            C64::new(v.z, 0.0),
        ))
    }

    /// Normalize an arbitrary nonzero vector into a polarization vector,
    /// returning the original norm alongside.
    pub fn normalized(v: Vector3<C64>) -> Result<(Self, f64), GeometryError> {
        let norm_sq: f64 = v.iter().map(|c| c.norm_sqr()).sum();
        let norm = norm_sq.sqrt();
        if !norm.is_finite() || norm < 1e-12 {
            return Err(GeometryError::NotUnitNorm {
                norm,
                tol: Self::NORM_TOL,
            });
        }
        let unit = Self {
            components: v.map(|c| c / norm),
        };
        Ok((unit, norm))
    }

    pub fn components(&self) -> &Vector3<C64> {
        &self.components
    }

    pub fn x(&self) -> C64 {
        self.components.x
    }

    pub fn y(&self) -> C64 {
        self.components.y
    }

    pub fn z(&self) -> C64 {
        self.components.z
    }

    /// Complex bilinear dot product (no conjugation).
    pub fn dot(&self, other: &Self) -> C64 {
        self.components.x * other.components.x
            + self.components.y * other.components.y
            + self.components.z * other.components.z
    }
}

/// Momentum transfer vector and its chain projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumTransfer {
    pub q: Vector3<f64>,
    pub q_chain: f64,
}
