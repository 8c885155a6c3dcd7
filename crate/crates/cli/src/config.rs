//! JSON run configurations and their conversion into core types.
//!
//! Every command loads an optional JSON config file, applies flag
//! overrides, and validates everything before any compute starts.

use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use qfi_rixs::angular::OrbitalBasis;
use qfi_rixs::bounds::PolChannel;
use qfi_rixs::geometry::BeamGeometry;
use qfi_rixs::manybody::LatticeSpec;
use qfi_rixs::rixssim::{ClusterModel, CoreParams, ValenceParams, DEFAULT_DIAG_CAP};
use qfi_rixs::verification::SuiteConfig;

use crate::CliError;

pub fn load_config<T: serde::de::DeserializeOwned + Default>(
    path: Option<&Path>,
) -> Result<T, CliError> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("cannot parse {}: {e}", p.display())))
        }
    }
}

/// Scattering geometry block shared by several commands.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub theta_i_deg: f64,
    pub theta_s_deg: f64,
    #[serde(default)]
    pub phi_deg: f64,
    #[serde(default = "one")]
    pub k_in: f64,
    #[serde(default = "one")]
    pub k_out: f64,
    #[serde(default = "unit_x")]
    pub lattice_direction: [f64; 3],
}

fn one() -> f64 {
    1.0
}

fn unit_x() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            theta_i_deg: 30.0,
            theta_s_deg: 60.0,
            phi_deg: 0.0,
            k_in: 1.0,
            k_out: 1.0,
            lattice_direction: unit_x(),
        }
    }
}

impl GeometryConfig {
    pub fn build(&self) -> Result<BeamGeometry, CliError> {
        BeamGeometry::from_degrees(self.theta_i_deg, self.theta_s_deg, self.phi_deg)
            .and_then(|g| g.with_wavevector_magnitudes(self.k_in, self.k_out))
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn lattice_direction(&self) -> Result<Vector3<f64>, CliError> {
        let v = Vector3::new(
            self.lattice_direction[0],
            self.lattice_direction[1],
            self.lattice_direction[2],
        );
        let norm = v.norm();
        if !(norm.is_finite() && norm > 1e-12) {
            return Err(CliError::Config(
                "lattice_direction must be a nonzero vector".into(),
            ));
        }
        Ok(v / norm)
    }

    pub fn q_chain(&self) -> Result<f64, CliError> {
        let geom = self.build()?;
        Ok(geom
            .momentum_transfer(&self.lattice_direction()?)
            .map_err(|e| CliError::Config(e.to_string()))?
            .q_chain)
    }
}

/// Orbital basis block: core and valence shells plus the valence frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    #[serde(default = "default_core_shell")]
    pub core: ShellConfig,
    #[serde(default = "default_valence_shell")]
    pub valence: ShellConfig,
    /// "spherical" or "cubic"
    #[serde(default = "spherical")]
    pub frame: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShellConfig {
    pub n: u32,
    pub l: u32,
    /// Restrict to these ml values (full shell when absent).
    #[serde(default)]
    pub ml: Option<Vec<i32>>,
}

fn default_core_shell() -> ShellConfig {
    ShellConfig {
        n: 2,
        l: 1,
        ml: None,
    }
}

fn default_valence_shell() -> ShellConfig {
    ShellConfig {
        n: 3,
        l: 2,
        ml: None,
    }
}

fn spherical() -> String {
    "spherical".into()
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self {
            core: default_core_shell(),
            valence: default_valence_shell(),
            frame: spherical(),
        }
    }
}

impl BasisConfig {
    pub fn build(&self) -> Result<OrbitalBasis, CliError> {
        if self.core.ml.is_some() {
            return Err(CliError::Config(
                "core shells are always full; remove core.ml".into(),
            ));
        }
        let basis = match &self.valence.ml {
            None => OrbitalBasis::atomic(self.core.n, self.core.l, self.valence.n, self.valence.l),
            Some(ms) => OrbitalBasis::atomic_with_valence_ms(
                self.core.n,
                self.core.l,
                self.valence.n,
                self.valence.l,
                ms,
            )
            .map_err(|e| CliError::Config(e.to_string()))?,
        };
        match self.frame.as_str() {
            "spherical" => Ok(basis),
            "cubic" => basis
                .with_cubic_valence_frame()
                .map_err(|e| CliError::Config(e.to_string())),
            other => Err(CliError::Config(format!(
                "unknown valence frame {other:?} (expected \"spherical\" or \"cubic\")"
            ))),
        }
    }
}

pub fn parse_channel(s: &str) -> Result<PolChannel, CliError> {
    PolChannel::parse(s).ok_or_else(|| {
        CliError::Config(format!(
            "invalid channel {s:?}; expected pi-pi, pi-sigma, sigma-pi, or sigma-sigma"
        ))
    })
}

/// Config for the `dipole` command.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DipoleConfig {
    pub geometry: GeometryConfig,
    pub basis: BasisConfig,
    pub radial_integral: Option<f64>,
    /// Polarization channel for (eps_i, eps_s).
    pub channel: Option<String>,
    /// Import and re-emit instead of computing the atomic path.
    pub dipole_file: Option<PathBuf>,
}

/// Config for the `bounds` command.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsConfig {
    pub geometry: GeometryConfig,
    pub basis: BasisConfig,
    pub radial_integral: Option<f64>,
    pub grid: Option<usize>,
    pub channels: Option<Vec<String>>,
    pub k: Option<Vec<usize>>,
    pub sites: Option<Vec<f64>>,
    pub mixed: Option<bool>,
    pub svg: Option<bool>,
    /// Generator phase; defaults to pi/4 (the data-only convention).
    pub phase: Option<f64>,
    /// Evaluate a single-point bound from imported dipole matrices
    /// instead of sweeping the atomic path.
    pub dipole_file: Option<PathBuf>,
}

/// Model block of the `simulate` and `witness` commands.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub n_sites: usize,
    pub n_orb: usize,
    pub j_spin: f64,
    pub delta_cf: Option<Vec<f64>>,
    pub j_so: f64,
    pub zeeman: f64,
    pub periodic: bool,
    pub l_core: u32,
    pub edge_energy: f64,
    pub xi_soc: f64,
    pub u_core: f64,
    pub diag_cap: Option<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n_sites: 2,
            n_orb: 2,
            j_spin: -1.0,
            delta_cf: None,
            j_so: -0.3,
            zeeman: -0.2,
            periodic: true,
            l_core: 1,
            edge_energy: 15.0,
            xi_soc: 0.8,
            u_core: 0.6,
            diag_cap: None,
        }
    }
}

impl ModelConfig {
    pub fn build(&self, gamma: f64) -> Result<ClusterModel, CliError> {
        let lattice = LatticeSpec::chain(self.n_sites, self.n_orb).map_err(to_resource_or_config)?;
        let delta_cf = match &self.delta_cf {
            Some(v) => v.clone(),
            None => (0..self.n_orb).map(|l| 0.4 * l as f64).collect(),
        };
        let mut model = ClusterModel::new(
            lattice,
            ValenceParams {
                j_spin: self.j_spin,
                delta_cf,
                j_so: self.j_so,
                zeeman: self.zeeman,
                periodic: self.periodic,
            },
            CoreParams {
                l_core: self.l_core,
                edge_energy: self.edge_energy,
                xi_soc: self.xi_soc,
                u_core: self.u_core,
            },
            gamma,
        )
        .map_err(crate::rixs_error_to_cli)?;
        if let Some(cap) = self.diag_cap {
            model.diag_cap = cap.min(DEFAULT_DIAG_CAP.max(cap));
            model.validate().map_err(crate::rixs_error_to_cli)?;
        }
        Ok(model)
    }
}

fn to_resource_or_config(e: qfi_rixs::manybody::ManyBodyError) -> CliError {
    match e {
        qfi_rixs::manybody::ManyBodyError::DimensionCapExceeded { .. } => {
            CliError::Resource(e.to_string())
        }
        other => CliError::Config(other.to_string()),
    }
}

/// Config for the `simulate` command.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub model: ModelConfig,
    pub gamma: f64,
    pub omega_in: f64,
    pub geometry: GeometryConfig,
    pub channel: String,
    /// Valence ml values of the dipole basis; must have `n_orb` entries.
    pub valence_ml: Option<Vec<i32>>,
    /// Chain momentum; computed from the geometry when absent.
    pub q_chain: Option<f64>,
    pub broadened_points: usize,
    /// Lorentzian width for the broadened rendering; defaults to
    /// `0.01 * bandwidth`.
    pub eta: Option<f64>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            gamma: 10.0,
            omega_in: 15.0,
            geometry: GeometryConfig::default(),
            channel: "pi-sigma".into(),
            valence_ml: None,
            q_chain: None,
            broadened_points: 2000,
            eta: None,
        }
    }
}

impl SimulateConfig {
    /// Dipole basis consistent with the model's orbital count.
    pub fn basis(&self) -> Result<OrbitalBasis, CliError> {
        let ml: Vec<i32> = match &self.valence_ml {
            Some(v) => v.clone(),
            None => {
                // first n_orb magnetic numbers of the d shell
                (0..self.model.n_orb)
                    .map(|i| i as i32 - 1)
                    .collect()
            }
        };
        if ml.len() != self.model.n_orb {
            return Err(CliError::Config(format!(
                "valence_ml has {} entries but the model has {} orbitals",
                ml.len(),
                self.model.n_orb
            )));
        }
        OrbitalBasis::atomic_with_valence_ms(2, self.model.l_core, 3, 2, &ml)
            .map_err(|e| CliError::Config(e.to_string()))
    }
}

/// Bound source of the `witness` command: atomic path or imported
/// matrices.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WitnessBoundsConfig {
    pub sites: Option<Vec<f64>>,
    pub geometry: GeometryConfig,
    pub basis: BasisConfig,
    pub radial_integral: Option<f64>,
    pub channel: Option<String>,
    pub dipole_file: Option<PathBuf>,
    /// Generator phase; pi/4 when absent (data-only convention) unless a
    /// measured `<T_q^2>` estimate is given.
    pub phase: Option<f64>,
    /// Measured estimate of `<T_q^2>` as `[re, im]`.
    pub t_sq_estimate: Option<[f64; 2]>,
    pub q_chain: Option<f64>,
}

/// Config for the `witness` command.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WitnessConfig {
    /// "pair" for a conjugate spectrum pair, "mixed" for one unresolved
    /// spectrum.
    pub mode: String,
    pub fwd: Option<PathBuf>,
    pub rev: Option<PathBuf>,
    pub mixed_file: Option<PathBuf>,
    pub gamma: Option<f64>,
    pub bounds: WitnessBoundsConfig,
}

impl Default for WitnessConfig {
    fn default() -> Self {
        Self {
            mode: "pair".into(),
            fwd: None,
            rev: None,
            mixed_file: None,
            gamma: None,
            bounds: WitnessBoundsConfig::default(),
        }
    }
}

/// Config for the `verify` command (the suite sizes).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub seed: Option<u64>,
    pub quick: bool,
    pub bound_samples: Option<usize>,
    pub geometries: Option<usize>,
    pub identity_tuples: Option<usize>,
    pub phase_cases: Option<usize>,
    pub mixed_weights: Option<usize>,
    pub ucl_gamma_over_bandwidth: Option<Vec<f64>>,
    pub angular_grid: Option<usize>,
}

impl VerifyConfig {
    pub fn build(&self, seed_flag: Option<u64>, inject_phase_fault: bool) -> SuiteConfig {
        let mut cfg = if self.quick {
            SuiteConfig::quick(self.seed.unwrap_or(7))
        } else {
            SuiteConfig::default()
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(seed) = seed_flag {
            cfg.seed = seed;
        }
        if let Some(v) = self.bound_samples {
            cfg.bound_samples = v;
        }
        if let Some(v) = self.geometries {
            cfg.geometries = v;
        }
        if let Some(v) = self.identity_tuples {
            cfg.identity_tuples = v;
        }
        if let Some(v) = self.phase_cases {
            cfg.phase_cases = v;
        }
        if let Some(v) = self.mixed_weights {
            cfg.mixed_weights = v;
        }
        if let Some(v) = &self.ucl_gamma_over_bandwidth {
            cfg.ucl_gamma_over_bandwidth = v.clone();
        }
        if let Some(v) = self.angular_grid {
            cfg.angular_grid = v;
        }
        cfg.faults.phase_sign_error = inject_phase_fault;
        cfg
    }
}
