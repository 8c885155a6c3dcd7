//! Implementations of the five subcommands.

use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;

use qfi_rixs::angular::{dipole_matrix, load_dipole_matrices, save_dipole_matrices};
use qfi_rixs::bounds::{
    angular_sweep, k_producible_bound, mixed_pol_bound, write_sweep_csv, SweepConfig,
    TMatrixSet,
};
use qfi_rixs::geometry::Beam;
use qfi_rixs::rixssim::{
    stokes_integral, write_spectrum_csv, SolvedModel, SpectrumCsvFormat,
    SpectrumMetadata,
};
use qfi_rixs::scattering::{optimal_phase, t_matrix, TMatrix};
use qfi_rixs::verification::run_suite;
use qfi_rixs::witness::{
    certify, certify_mixed, integral_refinement_change, load_measured_spectrum, measured_qfi,
    ProvenanceRecord,
};

use crate::config::{
    load_config, parse_channel, BoundsConfig, DipoleConfig, SimulateConfig, VerifyConfig,
    WitnessConfig,
};
use crate::{rixs_error_to_cli, svg, CliError};

fn ensure_out_dir(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Config(format!("cannot create output directory: {e}")))
}

fn cache_dir_from_env() -> Option<PathBuf> {
    std::env::var_os("QFI_RIXS_CACHE").map(PathBuf::from)
}

pub fn cmd_dipole(
    config_path: Option<&Path>,
    out: &Path,
    dipole_file: Option<&Path>,
    channel_flag: Option<&str>,
) -> Result<(), CliError> {
    let mut cfg: DipoleConfig = load_config(config_path)?;
    if let Some(p) = dipole_file {
        cfg.dipole_file = Some(p.to_path_buf());
    }
    if let Some(c) = channel_flag {
        cfg.channel = Some(c.to_string());
    }
    ensure_out_dir(out)?;
    let target = out.join("dipole_matrices.json");

    let (m_i, m_s) = match &cfg.dipole_file {
        Some(path) => load_dipole_matrices(path).map_err(|e| CliError::Data(e.to_string()))?,
        None => {
            let geom = cfg.geometry.build()?;
            let basis = cfg.basis.build()?;
            let radial = cfg.radial_integral.unwrap_or(1.0);
            let channel = parse_channel(cfg.channel.as_deref().unwrap_or("pi-sigma"))?;
            let eps_i = geom.polarization(Beam::Incident, channel.incident);
            let eps_s = geom.polarization(Beam::Scattered, channel.scattered);
            (
                dipole_matrix(&eps_i, &basis, radial)
                    .map_err(|e| CliError::Config(e.to_string()))?,
                dipole_matrix(&eps_s, &basis, radial)
                    .map_err(|e| CliError::Config(e.to_string()))?,
            )
        }
    };
    save_dipole_matrices(&target, &m_i, &m_s).map_err(|e| CliError::Data(e.to_string()))?;
    println!("wrote {}", target.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_bounds(
    config_path: Option<&Path>,
    out: &Path,
    grid: Option<usize>,
    channels: Option<&str>,
    k_list: Option<&str>,
    dipole_file: Option<&Path>,
    svg_flag: bool,
) -> Result<(), CliError> {
    let mut cfg: BoundsConfig = load_config(config_path)?;
    if let Some(g) = grid {
        cfg.grid = Some(g);
    }
    if let Some(c) = channels {
        cfg.channels = Some(c.split(',').map(str::to_string).collect());
    }
    if let Some(ks) = k_list {
        let parsed: Result<Vec<usize>, _> = ks.split(',').map(|s| s.trim().parse()).collect();
        cfg.k = Some(parsed.map_err(|e| CliError::Config(format!("bad k list: {e}")))?);
    }
    if let Some(p) = dipole_file {
        cfg.dipole_file = Some(p.to_path_buf());
    }
    let want_svg = svg_flag || cfg.svg.unwrap_or(false);
    ensure_out_dir(out)?;
    let csv_path = out.join("sweep.csv");

    if let Some(path) = &cfg.dipole_file {
        // single-point bounds from imported matrices
        let (m_i, m_s) = load_dipole_matrices(path).map_err(|e| CliError::Data(e.to_string()))?;
        let t = t_matrix(&m_i, &m_s).map_err(|e| CliError::Data(e.to_string()))?;
        let q = cfg.geometry.q_chain()?;
        let sites = cfg.sites.clone().unwrap_or_else(|| vec![0.0]);
        let phase = cfg.phase.unwrap_or(std::f64::consts::FRAC_PI_4);
        let ks = cfg.k.clone().unwrap_or_else(|| vec![1]);
        let mut rows = Vec::new();
        for &k in &ks {
            let b = k_producible_bound(&t, q, &sites, phase, k)
                .map_err(|e| CliError::Config(e.to_string()))?;
            rows.push(qfi_rixs::bounds::SweepRow {
                theta_i: cfg.geometry.theta_i_deg.to_radians(),
                theta_s: cfg.geometry.theta_s_deg.to_radians(),
                channel: "imported".into(),
                k,
                bound: b.value,
                offset: 0.0,
                total: b.value,
            });
        }
        write_sweep_csv(&csv_path, &rows).map_err(|e| CliError::Data(e.to_string()))?;
        println!("wrote {}", csv_path.display());
        return Ok(());
    }

    let mut sweep = SweepConfig::new(cfg.basis.build()?);
    if let Some(g) = cfg.grid {
        sweep.grid_n = g;
    }
    sweep.phi = cfg.geometry.phi_deg.to_radians();
    sweep.lattice_direction = cfg.geometry.lattice_direction()?;
    if let Some(chs) = &cfg.channels {
        sweep.channels = chs
            .iter()
            .map(|c| parse_channel(c))
            .collect::<Result<Vec<_>, _>>()?;
    }
    if let Some(ks) = &cfg.k {
        sweep.ks = ks.clone();
    }
    if let Some(sites) = &cfg.sites {
        sweep.sites = sites.clone();
    }
    if let Some(r) = cfg.radial_integral {
        sweep.radial = r;
    }
    if let Some(p) = cfg.phase {
        sweep.phase = p;
    }
    sweep.include_mixed = cfg.mixed.unwrap_or(false);

    let rows = angular_sweep(&sweep).map_err(|e| CliError::Config(e.to_string()))?;
    write_sweep_csv(&csv_path, &rows).map_err(|e| CliError::Data(e.to_string()))?;
    println!("wrote {} ({} rows)", csv_path.display(), rows.len());

    if want_svg {
        let n = sweep.grid_n;
        let mut channel_names: Vec<String> =
            sweep.channels.iter().map(|c| c.to_string()).collect();
        if sweep.include_mixed {
            channel_names.push("mixed".into());
        }
        for name in channel_names {
            for &k in &sweep.ks {
                let values: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.channel == name && r.k == k)
                    .map(|r| r.total)
                    .collect();
                if values.len() != n * n {
                    continue;
                }
                let path = out.join(format!("sweep_{name}_k{k}.svg"));
                svg::write_heatmap(&path, n, &values, &format!("{name} bound, k = {k}"))?;
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

pub fn cmd_simulate(
    config_path: Option<&Path>,
    out: &Path,
    gamma_flag: Option<f64>,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let mut cfg: SimulateConfig = load_config(config_path)?;
    if let Some(g) = gamma_flag {
        cfg.gamma = g;
    }
    if !(cfg.gamma.is_finite() && cfg.gamma > 0.0) {
        return Err(CliError::Config(format!(
            "gamma must be positive, got {}",
            cfg.gamma
        )));
    }
    let model = cfg.model.build(cfg.gamma)?;
    let basis = cfg.basis()?;
    let geom = cfg.geometry.build()?;
    let channel = parse_channel(&cfg.channel)?;
    let q_chain = match cfg.q_chain {
        Some(q) => q,
        None => cfg.geometry.q_chain()?,
    };
    ensure_out_dir(out)?;

    let cache = cache_dir_from_env();
    let solved = SolvedModel::solve_with_cache(&model, cache.as_deref())
        .map_err(rixs_error_to_cli)?;

    let mut warnings: Vec<String> = Vec::new();
    let bandwidth = solved.valence_bandwidth();
    if solved.ground_gap() < 1e-9 * bandwidth.max(1.0) {
        warnings.push(
            "ground state is degenerate: the elastic-line exclusion drops the whole multiplet; \
             integrals no longer realize the connected correlator"
                .to_string(),
        );
    }

    let eps_i = geom.polarization(Beam::Incident, channel.incident);
    let eps_s = geom.polarization(Beam::Scattered, channel.scattered);
    let radial = 1.0;
    let m_i = dipole_matrix(&eps_i, &basis, radial).map_err(|e| CliError::Config(e.to_string()))?;
    let m_s = dipole_matrix(&eps_s, &basis, radial).map_err(|e| CliError::Config(e.to_string()))?;

    let fwd_state = solved
        .final_state(&m_i, &m_s, q_chain, cfg.omega_in)
        .map_err(rixs_error_to_cli)?;
    let rev_state = solved
        .final_state(&m_s, &m_i, -q_chain, cfg.omega_in)
        .map_err(rixs_error_to_cli)?;

    let meta = |q: f64, ei: String, es: String| SpectrumMetadata {
        q_chain: q,
        eps_i: ei,
        eps_s: es,
        omega_in: cfg.omega_in,
        gamma: cfg.gamma,
        bandwidth: None,
    };
    let fwd_meta = meta(
        q_chain,
        channel.incident.to_string(),
        channel.scattered.to_string(),
    );
    let rev_meta = meta(
        -q_chain,
        channel.scattered.to_string(),
        channel.incident.to_string(),
    );

    let fwd = solved.spectrum(&fwd_state, fwd_meta);
    let rev = solved.spectrum(&rev_state, rev_meta);

    for spec in [&fwd, &rev] {
        let (n_elastic, _) = spec.elastic_poles();
        if n_elastic > 1 {
            warnings.push(format!(
                "{n_elastic} poles fall below the elastic cutoff (degenerate ground multiplet)"
            ));
            break;
        }
    }

    let eta = cfg.eta.unwrap_or(0.01 * bandwidth.max(1e-9));
    let files = [
        ("spectrum_fwd.csv", &fwd, SpectrumCsvFormat::Poles),
        ("spectrum_rev.csv", &rev, SpectrumCsvFormat::Poles),
        (
            "spectrum_fwd_broadened.csv",
            &fwd,
            SpectrumCsvFormat::Broadened {
                points: cfg.broadened_points,
                eta,
            },
        ),
        (
            "spectrum_rev_broadened.csv",
            &rev,
            SpectrumCsvFormat::Broadened {
                points: cfg.broadened_points,
                eta,
            },
        ),
    ];
    let mut written = Vec::new();
    for (name, spec, format) in files {
        let path = out.join(name);
        write_spectrum_csv(&path, spec, format).map_err(|e| CliError::Data(e.to_string()))?;
        written.push(path.display().to_string());
    }

    let summary = serde_json::json!({
        "format": 1,
        "seed": seed,
        "model": model,
        "q_chain": q_chain,
        "omega_in": cfg.omega_in,
        "gamma": cfg.gamma,
        "channel": cfg.channel,
        "bandwidth": bandwidth,
        "ground_gap": solved.ground_gap(),
        "site_positions": model.lattice.site_positions(),
        "files": written,
        "warnings": warnings,
    });
    let summary_path = out.join("run_summary.json");
    std::fs::write(
        &summary_path,
        serde_json::to_string_pretty(&summary).expect("serializable"),
    )
    .map_err(|e| CliError::Data(e.to_string()))?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    println!("wrote {}", summary_path.display());
    Ok(())
}

/// Resolve the scattering matrix used for witness bounds.
fn witness_t_matrix(
    cfg: &WitnessConfig,
    fwd_meta: Option<&SpectrumMetadata>,
) -> Result<(TMatrix, Option<TMatrixSet>), CliError> {
    if let Some(path) = &cfg.bounds.dipole_file {
        let (m_i, m_s) = load_dipole_matrices(path).map_err(|e| CliError::Data(e.to_string()))?;
        let t = t_matrix(&m_i, &m_s).map_err(|e| CliError::Data(e.to_string()))?;
        return Ok((t, None));
    }
    let geom = cfg.bounds.geometry.build()?;
    let basis = cfg.bounds.basis.build()?;
    let radial = cfg.bounds.radial_integral.unwrap_or(1.0);
    let set = TMatrixSet::from_geometry(&geom, &basis, radial)
        .map_err(|e| CliError::Config(e.to_string()))?;
    // channel priority: explicit config, then spectrum metadata labels
    let channel = match &cfg.bounds.channel {
        Some(c) => parse_channel(c)?,
        None => match fwd_meta {
            Some(meta) => parse_channel(&format!("{}-{}", meta.eps_i, meta.eps_s))
                .map_err(|_| {
                    CliError::Config(
                        "bounds.channel is required when spectrum labels are not pi/sigma".into(),
                    )
                })?,
            None => parse_channel("pi-sigma")?,
        },
    };
    Ok((set.get(channel).clone(), Some(set)))
}

fn witness_phase(cfg: &WitnessConfig) -> f64 {
    if let Some(p) = cfg.bounds.phase {
        return p;
    }
    if let Some([re, im]) = cfg.bounds.t_sq_estimate {
        return optimal_phase(C64::new(re, im));
    }
    std::f64::consts::FRAC_PI_4
}

pub fn cmd_witness(
    config_path: Option<&Path>,
    out: &Path,
    gamma_flag: Option<f64>,
    dipole_file: Option<&Path>,
) -> Result<(), CliError> {
    let mut cfg: WitnessConfig = load_config(config_path)?;
    if let Some(p) = dipole_file {
        cfg.bounds.dipole_file = Some(p.to_path_buf());
    }
    let sites = cfg.bounds.sites.clone().ok_or_else(|| {
        CliError::Config("bounds.sites is required (chain positions of the probed cluster)".into())
    })?;
    if sites.is_empty() {
        return Err(CliError::Config("bounds.sites must not be empty".into()));
    }
    let n_sites = sites.len();
    ensure_out_dir(out)?;

    let report = match cfg.mode.as_str() {
        "pair" => {
            let fwd_path = cfg
                .fwd
                .clone()
                .ok_or_else(|| CliError::Config("pair mode requires \"fwd\"".into()))?;
            let rev_path = cfg
                .rev
                .clone()
                .ok_or_else(|| CliError::Config("pair mode requires \"rev\"".into()))?;
            let fwd = load_measured_spectrum(&fwd_path).map_err(|e| CliError::Data(e.to_string()))?;
            let rev = load_measured_spectrum(&rev_path).map_err(|e| CliError::Data(e.to_string()))?;
            let gamma = gamma_flag
                .or(cfg.gamma)
                .or_else(|| fwd.spectrum.metadata.as_ref().map(|m| m.gamma))
                .ok_or_else(|| {
                    CliError::Config("gamma is required (flag, config, or sidecar)".into())
                })?;
            let f_q = measured_qfi(&fwd.spectrum, &rev.spectrum, gamma)
                .map_err(|e| CliError::Data(e.to_string()))?;

            let (t, _) = witness_t_matrix(&cfg, fwd.spectrum.metadata.as_ref())?;
            let q_chain = cfg
                .bounds
                .q_chain
                .or_else(|| fwd.spectrum.metadata.as_ref().map(|m| m.q_chain))
                .map_or_else(|| cfg.bounds.geometry.q_chain(), Ok)?;
            let phase = witness_phase(&cfg);
            let mut bound_values = Vec::with_capacity(n_sites);
            for k in 1..=n_sites {
                bound_values.push(
                    k_producible_bound(&t, q_chain, &sites, phase, k)
                        .map_err(|e| CliError::Config(e.to_string()))?
                        .value,
                );
            }
            let mut inputs = ProvenanceRecord {
                files: vec![
                    fwd_path.display().to_string(),
                    rev_path.display().to_string(),
                ],
                gamma: Some(gamma),
                ..Default::default()
            };
            inputs.clipped_negative = fwd.clipped_negative + rev.clipped_negative;
            let changes: Vec<f64> = [&fwd.spectrum, &rev.spectrum]
                .iter()
                .filter_map(|s| integral_refinement_change(s))
                .collect();
            inputs.refinement_change = changes.iter().copied().reduce(f64::max);
            for spec in [&fwd.spectrum, &rev.spectrum] {
                let (n_elastic, _) = spec.elastic_poles();
                if n_elastic > 1 {
                    inputs.warnings.push(format!(
                        "{n_elastic} poles below the elastic cutoff: degenerate ground multiplet"
                    ));
                }
            }
            certify(f_q, |k| bound_values[k - 1], n_sites, inputs)
        }
        "mixed" => {
            let mixed_path = cfg
                .mixed_file
                .clone()
                .ok_or_else(|| CliError::Config("mixed mode requires \"mixed_file\"".into()))?;
            let mixed =
                load_measured_spectrum(&mixed_path).map_err(|e| CliError::Data(e.to_string()))?;
            let gamma = gamma_flag
                .or(cfg.gamma)
                .or_else(|| mixed.spectrum.metadata.as_ref().map(|m| m.gamma))
                .ok_or_else(|| {
                    CliError::Config("gamma is required (flag, config, or sidecar)".into())
                })?;
            let integral = 4.0
                * stokes_integral(&mixed.spectrum, gamma)
                    .map_err(|e| CliError::Data(e.to_string()))?;

            if cfg.bounds.dipole_file.is_some() {
                return Err(CliError::Config(
                    "mixed-mode bounds need all four pi/sigma channels; use the geometry/basis \
                     source instead of a dipole file"
                        .into(),
                ));
            }
            let geom = cfg.bounds.geometry.build()?;
            let basis = cfg.bounds.basis.build()?;
            let radial = cfg.bounds.radial_integral.unwrap_or(1.0);
            let set = TMatrixSet::from_geometry(&geom, &basis, radial)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let q_chain = cfg
                .bounds
                .q_chain
                .or_else(|| mixed.spectrum.metadata.as_ref().map(|m| m.q_chain))
                .map_or_else(|| cfg.bounds.geometry.q_chain(), Ok)?;
            let phase = witness_phase(&cfg);
            let mut totals = Vec::with_capacity(n_sites);
            let mut offset = 0.0;
            for k in 1..=n_sites {
                let b = mixed_pol_bound(&set, q_chain, &sites, [phase; 4], k)
                    .map_err(|e| CliError::Config(e.to_string()))?;
                offset = b.offset_term;
                totals.push(b.total);
            }
            let mut inputs = ProvenanceRecord {
                files: vec![mixed_path.display().to_string()],
                gamma: Some(gamma),
                mixed_offset_term: Some(offset),
                ..Default::default()
            };
            inputs.clipped_negative = mixed.clipped_negative;
            inputs.refinement_change = integral_refinement_change(&mixed.spectrum);
            certify_mixed(integral, |k| totals[k - 1], n_sites, inputs)
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown witness mode {other:?} (expected \"pair\" or \"mixed\")"
            )))
        }
    };

    let json_path = out.join("witness_report.json");
    std::fs::write(&json_path, report.to_json()).map_err(|e| CliError::Data(e.to_string()))?;
    let text_path = out.join("witness_report.txt");
    std::fs::write(&text_path, report.render_text())
        .map_err(|e| CliError::Data(e.to_string()))?;
    print!("{}", report.render_text());
    println!("wrote {}", json_path.display());
    Ok(())
}

pub fn cmd_verify(
    config_path: Option<&Path>,
    out: &Path,
    seed_flag: Option<u64>,
    inject_phase_fault: bool,
) -> Result<(), CliError> {
    let cfg: VerifyConfig = load_config(config_path)?;
    let suite = cfg.build(seed_flag, inject_phase_fault);
    ensure_out_dir(out)?;
    let report = run_suite(&suite).map_err(|e| CliError::Data(e.to_string()))?;
    for check in &report.checks {
        let status = if check.passed { "PASS" } else { "FAIL" };
        println!(
            "{status} {name}: statistic {stat:.3e} (threshold {thr:.3e}) -- {detail}",
            name = check.name,
            stat = check.statistic,
            thr = check.threshold,
            detail = check.detail,
        );
    }
    let path = out.join("verify_summary.json");
    std::fs::write(&path, report.to_json()).map_err(|e| CliError::Data(e.to_string()))?;
    println!("wrote {}", path.display());
    if report.all_passed {
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        Err(CliError::Verification(format!(
            "failed checks: {}",
            failed.join(", ")
        )))
    }
}
