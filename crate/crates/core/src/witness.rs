//! Spectrum ingestion, measured QFI, and entanglement-depth certificates.
//!
//! This layer consumes spectra (simulated pole sums or measured samples),
//! evaluates the paired-spectrum QFI or the mixed-polarization integral,
//! compares against the k-producibility bounds, and emits a versioned
//! report. Negative measured intensities are clipped to zero and counted
//! rather than rejected; preprocessing beyond that is out of scope.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rixssim::{
    stokes_integral, RixsError, Spectrum, SpectrumData, SpectrumMetadata,
};

#[derive(Debug, Error)]
pub enum WitnessError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: omega decreases from {prev} to {value}")]
    NonMonotoneOmega {
        path: String,
        line: usize,
        prev: f64,
        value: f64,
    },
    #[error("metadata sidecar {path} is malformed: {source}")]
    Sidecar {
        path: String,
        source: serde_json::Error,
    },
    #[error("gamma must be positive, got {0}")]
    InvalidGamma(f64),
    #[error(transparent)]
    Rixs(#[from] RixsError),
}

/// A spectrum loaded from disk plus loader diagnostics.
#[derive(Debug, Clone)]
pub struct LoadedSpectrum {
    pub spectrum: Spectrum,
    /// Negative intensity samples clipped to zero.
    pub clipped_negative: usize,
}

/// Load a spectrum CSV (pole or sampled form) written per the simulator
/// interchange format, along with its optional `<stem>.json` metadata
/// sidecar.
pub fn load_measured_spectrum<P: AsRef<Path>>(path: P) -> Result<LoadedSpectrum, WitnessError> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| WitnessError::Io {
        path: path_str.clone(),
        source,
    })?;

    let mut lines = text.lines().enumerate().peekable();
    let mut is_poles = false;
    if let Some((_, first)) = lines.peek() {
        if first.trim() == "# poles" {
            is_poles = true;
            lines.next();
        }
    }
    // header row
    match lines.next() {
        Some((_, header))
            if header.trim() == "omega,intensity" || header.trim() == "omega,weight" => {}
        Some((idx, header)) => {
            return Err(WitnessError::Parse {
                path: path_str,
                line: idx + 1,
                message: format!("unrecognized header {header:?}"),
            })
        }
        None => {
            return Err(WitnessError::Parse {
                path: path_str,
                line: 1,
                message: "empty file".into(),
            })
        }
    }

    let mut omegas: Vec<f64> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut clipped = 0usize;
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (a, b) = line.split_once(',').ok_or_else(|| WitnessError::Parse {
            path: path_str.clone(),
            line: idx + 1,
            message: "expected two comma-separated columns".into(),
        })?;
        let parse = |s: &str| -> Result<f64, WitnessError> {
            s.trim().parse::<f64>().map_err(|e| WitnessError::Parse {
                path: path_str.clone(),
                line: idx + 1,
                message: format!("bad number {s:?}: {e}"),
            })
        };
        let omega = parse(a)?;
        let mut value = parse(b)?;
        if !omega.is_finite() || !value.is_finite() {
            return Err(WitnessError::Parse {
                path: path_str.clone(),
                line: idx + 1,
                message: "non-finite value".into(),
            });
        }
        if let Some(&prev) = omegas.last() {
            if omega < prev {
                return Err(WitnessError::NonMonotoneOmega {
                    path: path_str.clone(),
                    line: idx + 1,
                    prev,
                    value: omega,
                });
            }
        }
        if value < 0.0 {
            value = 0.0;
            clipped += 1;
        }
        omegas.push(omega);
        values.push(value);
    }

    let sidecar = path.with_extension("json");
    let metadata: Option<SpectrumMetadata> = if sidecar.exists() {
        let text = fs::read_to_string(&sidecar).map_err(|source| WitnessError::Io {
            path: sidecar.display().to_string(),
            source,
        })?;
        Some(
            serde_json::from_str(&text).map_err(|source| WitnessError::Sidecar {
                path: sidecar.display().to_string(),
                source,
            })?,
        )
    } else {
        None
    };

    let data = if is_poles {
        SpectrumData::Poles(omegas.into_iter().zip(values).collect())
    } else {
        SpectrumData::Sampled {
            omega: omegas,
            intensity: values,
        }
    };
    Ok(LoadedSpectrum {
        spectrum: Spectrum { data, metadata },
        clipped_negative: clipped,
    })
}

fn check_conjugate_pair(fwd: &Spectrum, rev: &Spectrum) -> Result<(), WitnessError> {
    if let (Some(f), Some(r)) = (&fwd.metadata, &rev.metadata) {
        if (f.q_chain + r.q_chain).abs() > 1e-12 * f.q_chain.abs().max(1.0) {
            return Err(RixsError::MetadataMismatch(format!(
                "momenta are not reversed: {} vs {}",
                f.q_chain, r.q_chain
            ))
            .into());
        }
        if f.eps_i != r.eps_s || f.eps_s != r.eps_i {
            return Err(RixsError::MetadataMismatch(format!(
                "polarizations are not swapped: ({}, {}) vs ({}, {})",
                f.eps_i, f.eps_s, r.eps_i, r.eps_s
            ))
            .into());
        }
    }
    Ok(())
}

/// QFI from a conjugate spectrum pair: `2 Gamma^2 (int fwd + int rev)` over
/// the Stokes range, trapezoidal on sampled grids and pole sums on pole
/// data. Metadata, where present, must be consistent with `gamma` and
/// mutually conjugate.
pub fn measured_qfi(fwd: &Spectrum, rev: &Spectrum, gamma: f64) -> Result<f64, WitnessError> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(WitnessError::InvalidGamma(gamma));
    }
    check_conjugate_pair(fwd, rev)?;
    Ok(2.0 * (stokes_integral(fwd, gamma)? + stokes_integral(rev, gamma)?))
}

/// Relative change of the Stokes integral when every other sample is
/// dropped; a large value flags an under-resolved grid. `None` for pole
/// spectra (they are exact).
pub fn integral_refinement_change(spec: &Spectrum) -> Option<f64> {
    match &spec.data {
        SpectrumData::Poles(_) => None,
        SpectrumData::Sampled { omega, intensity } => {
            let full = spec.stokes_weight();
            let half_omega: Vec<f64> = omega.iter().copied().step_by(2).collect();
            let half_intensity: Vec<f64> = intensity.iter().copied().step_by(2).collect();
            let half_spec = Spectrum {
                data: SpectrumData::Sampled {
                    omega: half_omega,
                    intensity: half_intensity,
                },
                metadata: spec.metadata.clone(),
            };
            let half = half_spec.stokes_weight();
            if full.abs() < f64::MIN_POSITIVE {
                Some(0.0)
            } else {
                Some((full - half).abs() / full.abs())
            }
        }
    }
}

/// Which comparison produced a certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessChannel {
    PolarizationResolved,
    Mixed,
}

/// Provenance and diagnostics carried by a report.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ProvenanceRecord {
    pub files: Vec<String>,
    pub gamma: Option<f64>,
    pub geometry_note: Option<String>,
    pub clipped_negative: usize,
    /// Relative change of the integral on a half-density grid; values
    /// above 0.01 flag an under-resolved measurement.
    pub refinement_change: Option<f64>,
    /// Depth-independent offset term of a mixed-polarization bound.
    pub mixed_offset_term: Option<f64>,
    pub warnings: Vec<String>,
}

/// Entanglement-depth certificate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WitnessReport {
    /// Schema version of this report.
    pub format: u32,
    pub channel: WitnessChannel,
    /// Measured or simulated QFI value (mixed: `4 Gamma^2 int I^mp`).
    pub f_q_value: f64,
    /// Bound per producibility class k = 1..N.
    pub bounds_by_k: BTreeMap<usize, f64>,
    /// `1 + max{k : bound(k) < f_q}`, capped at N; 1 when nothing is
    /// violated.
    pub certified_depth: usize,
    pub inputs: ProvenanceRecord,
}

impl WitnessReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable report")
    }

    /// Human-readable rendering.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let channel = match self.channel {
            WitnessChannel::PolarizationResolved => "polarization-resolved",
            WitnessChannel::Mixed => "mixed-polarization",
        };
        out.push_str(&format!("entanglement witness report (format {})\n", self.format));
        out.push_str(&format!("channel: {channel}\n"));
        out.push_str(&format!("F_Q = {:.12e}\n", self.f_q_value));
        for (k, bound) in &self.bounds_by_k {
            let mark = if self.f_q_value > *bound { "VIOLATED" } else { "ok" };
            out.push_str(&format!("  k = {k}: bound = {bound:.12e}  [{mark}]\n"));
        }
        out.push_str(&format!("certified depth: {}\n", self.certified_depth));
        if let Some(gamma) = self.inputs.gamma {
            out.push_str(&format!("gamma: {gamma}\n"));
        }
        if self.inputs.clipped_negative > 0 {
            out.push_str(&format!(
                "warning: {} negative intensity samples clipped to zero\n",
                self.inputs.clipped_negative
            ));
        }
        if let Some(change) = self.inputs.refinement_change {
            if change > 0.01 {
                out.push_str(&format!(
                    "warning: integral changes by {:.2}% on a half-density grid\n",
                    100.0 * change
                ));
            }
        }
        for w in &self.inputs.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        out
    }
}

fn certify_impl(
    f_q: f64,
    bound_fn: &mut dyn FnMut(usize) -> f64,
    n_sites: usize,
    channel: WitnessChannel,
    inputs: ProvenanceRecord,
) -> WitnessReport {
    let mut bounds_by_k = BTreeMap::new();
    let mut depth = 1usize;
    for k in 1..=n_sites {
        let bound = bound_fn(k);
        bounds_by_k.insert(k, bound);
        if f_q > bound {
            depth = (k + 1).min(n_sites.max(1));
        }
    }
    WitnessReport {
        format: 1,
        channel,
        f_q_value: f_q,
        bounds_by_k,
        certified_depth: depth,
        inputs,
    }
}

/// Certificate from a polarization-resolved QFI value against the
/// k-producibility bounds. The depth is the smallest class not excluded,
/// capped at the cluster size.
pub fn certify(
    f_q: f64,
    mut bound_fn: impl FnMut(usize) -> f64,
    n_sites: usize,
    inputs: ProvenanceRecord,
) -> WitnessReport {
    certify_impl(
        f_q,
        &mut bound_fn,
        n_sites,
        WitnessChannel::PolarizationResolved,
        inputs,
    )
}

/// Certificate from a mixed-polarization integral `4 Gamma^2 int I^mp`
/// against the mixed bound totals.
pub fn certify_mixed(
    integral_value: f64,
    mut mixed_bound_fn: impl FnMut(usize) -> f64,
    n_sites: usize,
    inputs: ProvenanceRecord,
) -> WitnessReport {
    certify_impl(
        integral_value,
        &mut mixed_bound_fn,
        n_sites,
        WitnessChannel::Mixed,
        inputs,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rixssim::{write_spectrum_csv, SpectrumCsvFormat};

    fn pole_spectrum(poles: Vec<(f64, f64)>, q: f64, gamma: f64) -> Spectrum {
        Spectrum {
            data: SpectrumData::Poles(poles),
            metadata: Some(SpectrumMetadata {
                q_chain: q,
                eps_i: "pi".into(),
                eps_s: "sigma".into(),
                omega_in: 10.0,
                gamma,
                bandwidth: Some(2.0),
            }),
        }
    }

    #[test]
    fn single_row_file_loads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.csv");
        std::fs::write(&path, "omega,intensity\n0.5,2.0\n").unwrap();
        let loaded = load_measured_spectrum(&path).unwrap();
        match loaded.spectrum.data {
            SpectrumData::Sampled { ref omega, ref intensity } => {
                assert_eq!(omega, &[0.5]);
                assert_eq!(intensity, &[2.0]);
            }
            _ => panic!("expected sampled data"),
        }
        assert_eq!(loaded.clipped_negative, 0);
        assert!(loaded.spectrum.metadata.is_none());
    }

    #[test]
    fn descending_omega_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "omega,intensity\n0.0,1.0\n1.0,1.0\n0.5,1.0\n").unwrap();
        match load_measured_spectrum(&path) {
            Err(WitnessError::NonMonotoneOmega { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected monotonicity error, got {other:?}"),
        }
    }

    #[test]
    fn negative_intensities_clipped_and_counted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("neg.csv");
        std::fs::write(&path, "omega,intensity\n0.0,-1.0\n1.0,3.0\n2.0,-0.5\n").unwrap();
        let loaded = load_measured_spectrum(&path).unwrap();
        assert_eq!(loaded.clipped_negative, 2);
        assert_eq!(loaded.spectrum.total_weight(), 3.0); // trapezoid of (0,3,0)
    }

    #[test]
    fn roundtrip_through_simulator_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("poles.csv");
        let spec = pole_spectrum(vec![(0.0, 0.25), (1.5, 0.5), (2.0, 0.125)], 0.7, 8.0);
        write_spectrum_csv(&path, &spec, SpectrumCsvFormat::Poles).unwrap();
        let loaded = load_measured_spectrum(&path).unwrap();
        assert_eq!(loaded.spectrum.metadata, spec.metadata);
        let got = loaded.spectrum.stokes_weight();
        let want = spec.stokes_weight();
        assert!((got - want).abs() <= 1e-12 * want.max(1.0));
        assert_eq!(loaded.spectrum.data, spec.data, "bit-exact pole roundtrip");
    }

    #[test]
    fn measured_qfi_zero_and_linearity() {
        let fwd = pole_spectrum(vec![(0.0, 0.0)], 0.3, 4.0);
        let mut rev = pole_spectrum(vec![(0.0, 0.0)], -0.3, 4.0);
        if let Some(m) = rev.metadata.as_mut() {
            std::mem::swap(&mut m.eps_i, &mut m.eps_s);
        }
        assert_eq!(measured_qfi(&fwd, &rev, 4.0).unwrap(), 0.0);

        let fwd1 = pole_spectrum(vec![(1.0, 0.5)], 0.3, 4.0);
        let mut rev1 = pole_spectrum(vec![(1.0, 0.25)], -0.3, 4.0);
        if let Some(m) = rev1.metadata.as_mut() {
            std::mem::swap(&mut m.eps_i, &mut m.eps_s);
        }
        let base = measured_qfi(&fwd1, &rev1, 4.0).unwrap();
        // scaling both intensities by c scales the result by c
        let fwd2 = pole_spectrum(vec![(1.0, 1.5)], 0.3, 4.0);
        let mut rev2 = pole_spectrum(vec![(1.0, 0.75)], -0.3, 4.0);
        if let Some(m) = rev2.metadata.as_mut() {
            std::mem::swap(&mut m.eps_i, &mut m.eps_s);
        }
        let scaled = measured_qfi(&fwd2, &rev2, 4.0).unwrap();
        assert!((scaled - 3.0 * base).abs() < 1e-12 * base);
    }

    #[test]
    fn measured_qfi_rejects_mismatched_metadata() {
        let fwd = pole_spectrum(vec![(1.0, 0.5)], 0.3, 4.0);
        let rev_same_labels = pole_spectrum(vec![(1.0, 0.5)], -0.3, 4.0);
        assert!(measured_qfi(&fwd, &rev_same_labels, 4.0).is_err());
        let mut rev = pole_spectrum(vec![(1.0, 0.5)], -0.3, 8.0);
        if let Some(m) = rev.metadata.as_mut() {
            std::mem::swap(&mut m.eps_i, &mut m.eps_s);
        }
        assert!(measured_qfi(&fwd, &rev, 4.0).is_err(), "gamma mismatch");
    }

    #[test]
    fn certify_threshold_logic() {
        let bounds = [2.0, 4.0, 6.0];
        let bound_fn = |k: usize| bounds[k - 1];
        // below bound(1): depth 1
        let r = certify(1.5, bound_fn, 3, ProvenanceRecord::default());
        assert_eq!(r.certified_depth, 1);
        // between bound(1) and bound(2): depth 2
        let r = certify(3.0, bound_fn, 3, ProvenanceRecord::default());
        assert_eq!(r.certified_depth, 2);
        // above bound(N-1): depth N
        let r = certify(5.0, bound_fn, 3, ProvenanceRecord::default());
        assert_eq!(r.certified_depth, 3);
        // above bound(N): still capped at N
        let r = certify(100.0, bound_fn, 3, ProvenanceRecord::default());
        assert_eq!(r.certified_depth, 3);
        assert_eq!(r.bounds_by_k.len(), 3);
    }

    #[test]
    fn certify_monotone_in_f_q() {
        let bound_fn = |k: usize| k as f64;
        let mut last = 0;
        for i in 0..40 {
            let f = i as f64 * 0.2;
            let r = certify(f, bound_fn, 5, ProvenanceRecord::default());
            assert!(r.certified_depth >= last);
            last = r.certified_depth;
        }
    }

    #[test]
    fn certify_mixed_cases() {
        // offset alone above the integral: depth 1
        let mixed_fn = |k: usize| 10.0 + k as f64;
        let r = certify_mixed(5.0, mixed_fn, 4, ProvenanceRecord::default());
        assert_eq!(r.certified_depth, 1);
        assert_eq!(r.channel, WitnessChannel::Mixed);
        let r = certify_mixed(0.0, mixed_fn, 4, ProvenanceRecord::default());
        assert_eq!(r.certified_depth, 1);
    }

    #[test]
    fn report_serializes_with_format_field() {
        let r = certify(3.0, |k| k as f64, 2, ProvenanceRecord::default());
        let json = r.to_json();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["format"], 1);
        assert_eq!(v["certified_depth"], 2);
        let text = r.render_text();
        assert!(text.contains("certified depth: 2"));
    }

    #[test]
    fn refinement_change_flags_coarse_grids() {
        // a smooth spectrum on a dense grid barely changes under halving
        let omega: Vec<f64> = (0..200).map(|i| i as f64 * 0.01).collect();
        let intensity: Vec<f64> = omega.iter().map(|&w| (-((w - 1.0) * 4.0).powi(2)).exp()).collect();
        let dense = Spectrum {
            data: SpectrumData::Sampled { omega, intensity },
            metadata: None,
        };
        let change = integral_refinement_change(&dense).unwrap();
        assert!(change < 0.01, "dense grid change {change}");

        // a sharp peak resolved by a single odd-index sample collapses
        // when every other point is dropped
        let coarse = Spectrum {
            data: SpectrumData::Sampled {
                omega: vec![0.0, 1.0, 2.0, 3.0, 4.0],
                intensity: vec![0.0, 0.0, 5.0, 0.1, 0.0],
            },
            metadata: None,
        };
        let change = integral_refinement_change(&coarse).unwrap();
        assert!(change > 0.01, "coarse grid change {change}");
    }
}
