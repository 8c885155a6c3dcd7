//! Entanglement witnesses for spin-orbital systems probed by resonant
//! inelastic x-ray scattering (RIXS).
//!
//! The crate builds the full chain from a scattering geometry to an
//! entanglement-depth certificate:
//!
//! - [`geometry`]: beam directions, momentum transfer, and pi/sigma
//!   polarization vectors of the scattering setup.
//! - [`angular`]: Clebsch-Gordan algebra and dipole transition matrices
//!   between core and valence shells, either computed for atomic orbitals
//!   or imported from a file.
//! - [`scattering`]: single-site scattering matrices, the Hermitian
//!   generator obtained by phase symmetrization, and the optimal phase.
//! - [`manybody`]: dense N-site spin-orbital states, k-producible state
//!   sampling, and exact quantum Fisher information -- the brute-force
//!   oracle layer.
//! - [`rixssim`]: exact-diagonalization Kramers-Heisenberg simulator on
//!   small clusters, spectral integrals, and QFI extraction from paired
//!   spectra.
//! - [`bounds`]: k-producibility QFI bounds, the mixed-polarization
//!   relaxation, and angular sweeps.
//! - [`witness`]: spectrum ingestion, measured QFI, and depth
//!   certification reports.
//! - [`verification`]: seeded property suites shared by the CLI `verify`
//!   command and the acceptance tests.

pub mod angular;
pub mod bounds;
pub mod geometry;
pub mod linalg;
pub mod manybody;
pub mod rixssim;
pub mod scattering;
pub mod verification;
pub mod witness;

pub use num_complex::Complex64;
