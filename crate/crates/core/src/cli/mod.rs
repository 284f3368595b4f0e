//! Command-line front end: scenario files, run artifacts and reports.
//!
//! All files use SI units; metrics.txt and plots convert to mm and Hz for
//! display and say so.

pub mod config;
pub mod plot;
pub mod trace;

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use config::{ConfigError, DisturbanceSource, OmegaUnit, ResolvedScenario, ScenarioFile};
pub use plot::{render_svg, PlotOptions};
pub use trace::{parse_trace, write_trace, TraceError, TRACE_HEADER};

use crate::error::Error;
use crate::guidance::{check_simplified_gains, lyapunov_certificate};
use crate::sim::{
    calibrate_disturbance_closed_loop, run, sweep, Calibration, GuidanceMode, RunMetrics,
    RunOutput, SweepGrid, SweepRow,
};

pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

pub const THREADS_ENV: &str = "HELIX_ILOS_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "helix-ilos",
    version,
    about = "Path following for magnetic helical microswimmers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario and write trace.csv, manifest.txt and metrics.txt.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run two scenarios and tabulate their tail metrics.
    Compare {
        #[arg(long = "config-a")]
        config_a: PathBuf,
        #[arg(long = "config-b")]
        config_b: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the guidance gains against the stability conditions.
    Certify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Render a trace as SVG.
    Plot {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Step-out limit in rad/s for the reference line.
        #[arg(long = "omega-so")]
        omega_so: Option<f64>,
    },
    /// Run a grid of gains around a base scenario and write sweep.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "alpha-d", value_delimiter = ',')]
        alpha_d: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        sigma0: Vec<f64>,
        #[arg(long = "k-d", value_delimiter = ',')]
        k_d: Vec<f64>,
        #[arg(long = "delta-los", value_delimiter = ',')]
        delta_los: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        mode: Vec<GuidanceMode>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    fn io(path: &Path, err: std::io::Error) -> Self {
        CliError {
            code: EXIT_IO,
            message: format!("{}: {err}", path.display()),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        match &err {
            Error::Diverged { t, reason, last } => {
                let mut message = format!("run diverged at t = {t} s: {reason}");
                if let Some(r) = last {
                    let _ = write!(
                        message,
                        " (last good state t = {} s, p = ({}, {}) m)",
                        r.t, r.p_x, r.p_z
                    );
                }
                CliError {
                    code: EXIT_DIVERGED,
                    message,
                }
            }
            _ => CliError::config(err.to_string()),
        }
    }
}

/// Writes to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let name = path
        .file_name()
        .map_or("out".into(), |n| n.to_string_lossy().into_owned());
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    fs::write(&tmp, contents).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

/// Parsed and resolved scenario file, with the raw file kept for manifests.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub file: ScenarioFile,
    pub resolved: ResolvedScenario,
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    load_config_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

pub fn load_config_str(text: &str) -> Result<LoadedConfig, ConfigError> {
    let (file, lines) = ScenarioFile::parse_with_lines(text)?;
    let resolved = file.resolve().map_err(|mut e| {
        e.line = e.line.or_else(|| lines.get(&e.key).copied());
        e
    })?;
    Ok(LoadedConfig { file, resolved })
}

/// Replaces a `calibrate_offset` request by the calibrated disturbance.
pub fn apply_calibration(resolved: &mut ResolvedScenario) -> Result<Option<Calibration>, CliError> {
    let DisturbanceSource::Calibrate { target } = resolved.source else {
        return Ok(None);
    };
    let cal = calibrate_disturbance_closed_loop(&resolved.scenario, target)?;
    resolved.scenario.disturbance = cal.disturbance.clone();
    Ok(Some(cal))
}

/// Config that replays the run exactly (calibration frozen into explicit
/// `d_mu_*`) plus an informational `[manifest]` section.
pub fn build_manifest(
    loaded: &LoadedConfig,
    calibration: Option<&Calibration>,
    output: &RunOutput,
) -> Result<ScenarioFile, CliError> {
    let scenario = &loaded.resolved.scenario;
    let mut file = loaded.file.clone();
    file.manifest.clear();
    let mut info = |k: &str, v: String| file.manifest.push((k.to_string(), v));
    info("code_version", env!("CARGO_PKG_VERSION").to_string());
    info(
        "omega_so_unit",
        loaded.resolved.omega_unit.as_str().to_string(),
    );
    info(
        "omega_so_rad_s",
        format!("{}", scenario.controller.omega_so),
    );
    info("angles", "degrees in file, radians internally".to_string());
    info("e11_resolved", format!("{}", scenario.swimmer.e11()?));
    info(
        "e11_hat_resolved",
        format!("{}", scenario.controller.e11_hat),
    );
    let d = scenario.disturbance.at(0.0);
    match (loaded.resolved.source, calibration) {
        (DisturbanceSource::Calibrate { target }, Some(cal)) => {
            let analytic = cal.analytic.at(0.0);
            info("disturbance_source", "calibrated".to_string());
            info("calibrate_offset_target", format!("{target}"));
            info(
                "calibration_achieved_offset",
                format!("{}", cal.achieved_offset),
            );
            info("calibration_iterations", format!("{}", cal.iterations));
            info("analytic_d_mu_x", format!("{}", analytic.x));
            info("analytic_d_mu_z", format!("{}", analytic.y));
        }
        (DisturbanceSource::Explicit, _) => info("disturbance_source", "explicit".to_string()),
        _ => info("disturbance_source", "none".to_string()),
    }
    let m = &output.metrics;
    info("rows", format!("{}", output.trace.len()));
    info("mean_abs_eps_tail", format!("{}", m.mean_abs_eps_tail));
    info("ss_rotation_speed", format!("{}", m.ss_rotation_speed));
    info("tail_speed", format!("{}", m.tail_speed));
    info("max_u_mag", format!("{}", m.max_u_mag));
    info("converged", format!("{}", m.converged));

    if calibration.is_some() {
        file.calibrate_offset = None;
        file.d_mu_x = Some(d.x);
        file.d_mu_z = Some(d.y);
    }
    Ok(file)
}

pub fn metrics_text(mode: GuidanceMode, alpha_d: f64, rows: usize, m: &RunMetrics) -> String {
    let mut out = String::from("# display units: mm, Hz (rotation rates), um/s\n");
    let _ = writeln!(out, "mode = {}", mode.as_str());
    let _ = writeln!(out, "alpha_d = {alpha_d}");
    let _ = writeln!(out, "rows = {rows}");
    let _ = writeln!(out, "tail_window_s = {}", m.tail_window);
    let _ = writeln!(out, "mean_abs_eps_tail_mm = {}", m.mean_abs_eps_tail * 1e3);
    let _ = writeln!(out, "ss_rotation_speed_hz = {}", m.ss_rotation_speed / TAU);
    let _ = writeln!(out, "tail_speed_um_s = {}", m.tail_speed * 1e6);
    let _ = writeln!(out, "max_u_mag_hz = {}", m.max_u_mag / TAU);
    let _ = writeln!(out, "converged = {}", m.converged);
    out
}

pub fn run_cli(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut text = String::new();
    let result = match cli.command {
        Command::Simulate { config, out } => cmd_simulate(&config, &out, &mut text),
        Command::Compare {
            config_a,
            config_b,
            out,
        } => cmd_compare(&config_a, &config_b, &out, &mut text),
        Command::Certify { config } => cmd_certify(&config, &mut text),
        Command::Plot {
            trace,
            out,
            omega_so,
        } => cmd_plot(&trace, &out, omega_so, &mut text),
        Command::Sweep {
            config,
            out,
            alpha_d,
            sigma0,
            k_d,
            delta_los,
            mode,
        } => {
            let grid = SweepGrid {
                alpha_d,
                sigma0,
                k_d,
                delta_los,
                modes: mode,
            };
            cmd_sweep(&config, &out, &grid, &mut text)
        }
    };
    stdout
        .write_all(text.as_bytes())
        .map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
    result
}

pub fn cmd_simulate(config: &Path, out_dir: &Path, report: &mut String) -> Result<(), CliError> {
    let mut loaded = load_config(config)?;
    let calibration = apply_calibration(&mut loaded.resolved)?;
    let scenario = &loaded.resolved.scenario;
    let output = run(scenario)?;
    let manifest = build_manifest(&loaded, calibration.as_ref(), &output)?;
    let metrics = metrics_text(
        scenario.mode,
        scenario.guidance.alpha_d,
        output.trace.len(),
        &output.metrics,
    );

    write_atomic(&out_dir.join("trace.csv"), &write_trace(&output.trace))?;
    write_atomic(&out_dir.join("manifest.txt"), &manifest.serialize())?;
    write_atomic(&out_dir.join("metrics.txt"), &metrics)?;
    report.push_str(&metrics);
    Ok(())
}

fn compare_row(
    label: &str,
    loaded: &LoadedConfig,
    outcome: &Result<RunOutput, CliError>,
) -> String {
    let s = &loaded.resolved.scenario;
    match outcome {
        Ok(out) => format!(
            "{label:<4}{:<18}{:<10}{:<24}{:<24}ok",
            s.mode.as_str(),
            s.guidance.alpha_d,
            format!("{:.6}", out.metrics.mean_abs_eps_tail * 1e3),
            format!("{:.6}", out.metrics.ss_rotation_speed / TAU),
        ),
        Err(e) => format!(
            "{label:<4}{:<18}{:<10}{:<24}{:<24}{}",
            s.mode.as_str(),
            s.guidance.alpha_d,
            "-",
            "-",
            e.message
        ),
    }
}

pub fn cmd_compare(
    config_a: &Path,
    config_b: &Path,
    out_dir: &Path,
    report: &mut String,
) -> Result<(), CliError> {
    let mut a = load_config(config_a)?;
    let mut b = load_config(config_b)?;
    let exec = |loaded: &mut LoadedConfig| -> Result<RunOutput, CliError> {
        apply_calibration(&mut loaded.resolved)?;
        Ok(run(&loaded.resolved.scenario)?)
    };
    let (ra, rb) = rayon::join(|| exec(&mut a), || exec(&mut b));

    let mut table = format!(
        "{:<4}{:<18}{:<10}{:<24}{:<24}status\n",
        "run", "mode", "alpha_d", "mean_abs_eps_tail_mm", "ss_rotation_speed_hz"
    );
    let _ = writeln!(table, "{}", compare_row("a", &a, &ra));
    let _ = writeln!(table, "{}", compare_row("b", &b, &rb));
    if let (Ok(x), Ok(y)) = (&ra, &rb) {
        let _ = writeln!(
            table,
            "tail_error_ratio_a_over_b = {}",
            x.metrics.mean_abs_eps_tail / y.metrics.mean_abs_eps_tail
        );
    }
    write_atomic(&out_dir.join("compare.txt"), &table)?;
    report.push_str(&table);
    Ok(())
}

pub fn cmd_certify(config: &Path, report: &mut String) -> Result<(), CliError> {
    let loaded = load_config(config)?;
    let scenario = &loaded.resolved.scenario;
    let g = scenario.effective_guidance();
    let check = check_simplified_gains(&g);
    let _ = writeln!(report, "mode = {}", scenario.mode.as_str());
    let _ = writeln!(report, "simplified_lhs = {:.3}", check.lhs);
    let _ = writeln!(report, "simplified_lhs_exact = {}", check.lhs);
    let _ = writeln!(report, "simplified_ok = {}", check.ok);
    match lyapunov_certificate(&g) {
        Ok(cert) => {
            let _ = writeln!(report, "ges_ok = {}", cert.ges_ok);
            let _ = writeln!(report, "iss_ok = {}", cert.iss_ok);
            let _ = writeln!(
                report,
                "iss_radius_per_dstar = {}",
                cert.iss_radius_per_dstar
            );
            if loaded.resolved.source == DisturbanceSource::Explicit {
                let d_star = scenario.disturbance.d_star();
                let _ = writeln!(report, "d_star = {d_star}");
                let _ = writeln!(report, "iss_radius = {}", cert.iss_radius(d_star));
            }
        }
        Err(e) => {
            let _ = writeln!(report, "certificate = unavailable ({e})");
        }
    }
    Ok(())
}

pub fn cmd_plot(
    trace: &Path,
    out: &Path,
    omega_so: Option<f64>,
    report: &mut String,
) -> Result<(), CliError> {
    let text = fs::read_to_string(trace)
        .map_err(|e| CliError::config(format!("{}: {e}", trace.display())))?;
    let rows =
        parse_trace(&text).map_err(|e| CliError::config(format!("{}: {e}", trace.display())))?;
    write_atomic(out, &render_svg(&rows, &PlotOptions { omega_so }))?;
    let _ = writeln!(report, "wrote {} ({} rows)", out.display(), rows.len());
    Ok(())
}

pub const SWEEP_HEADER: &str = "mode,alpha_d,sigma0,k_d,delta_los,simplified_lhs,simplified_ok,mean_abs_eps_tail,ss_rotation_speed,tail_speed,converged,error";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for row in rows {
        let g = row.point.guidance;
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},",
            row.point.mode.as_str(),
            g.alpha_d,
            g.sigma0,
            g.k_d,
            g.delta_los,
            row.gain_check.lhs,
            row.gain_check.ok
        );
        let _ = match &row.outcome {
            Ok(m) => writeln!(
                out,
                "{},{},{},{},",
                m.mean_abs_eps_tail, m.ss_rotation_speed, m.tail_speed, m.converged
            ),
            Err(e) => writeln!(out, ",,,,\"{}\"", e.replace('"', "'")),
        };
    }
    out
}

pub fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| {
                CliError::config(format!(
                    "{THREADS_ENV} must be a positive integer, got `{v}`"
                ))
            }),
        Err(_) => Ok(None),
    }
}

pub fn cmd_sweep(
    config: &Path,
    out_dir: &Path,
    grid: &SweepGrid,
    report: &mut String,
) -> Result<(), CliError> {
    let threads = threads_from_env()?;
    let mut loaded = load_config(config)?;
    apply_calibration(&mut loaded.resolved)?;
    let rows = sweep(&loaded.resolved.scenario, grid, threads)?;
    let csv = sweep_csv(&rows);
    write_atomic(&out_dir.join("sweep.csv"), &csv)?;
    report.push_str(&csv);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "\
[swimmer]
e11 = 9.3e-5
[guidance]
alpha_d = 600
sigma0 = 0.01
k_d = 0.15
delta_los = 0.00075
[controller]
omega_so = 2.8
omega_so_unit = hz
[sim]
p0_z = -0.001
t_end = 2
";

    #[test]
    fn resolve_errors_carry_line_numbers() {
        let text = SMALL.replace("alpha_d = 600", "alpha_d = -1");
        let err = load_config_str(&text).unwrap_err();
        assert_eq!(err.key, "alpha_d");
        assert_eq!(err.line, Some(4));
    }

    #[test]
    fn manifest_replays_to_same_scenario() {
        let loaded = load_config_str(SMALL).unwrap();
        let output = run(&loaded.resolved.scenario).unwrap();
        let manifest = build_manifest(&loaded, None, &output).unwrap();
        let replay = load_config_str(&manifest.serialize()).unwrap();
        assert_eq!(replay.resolved, loaded.resolved);
        assert!(manifest
            .manifest
            .iter()
            .any(|(k, v)| k == "disturbance_source" && v == "none"));
    }

    #[test]
    fn diverged_maps_to_exit_three() {
        let err: CliError = Error::Diverged {
            t: 1.0,
            reason: "x".into(),
            last: None,
        }
        .into();
        assert_eq!(err.code, EXIT_DIVERGED);
        assert_eq!(CliError::from(Error::NoPropulsion).code, EXIT_CONFIG);
    }
}
