//! Flat `key = value` scenario files.
//!
//! Every field is optional at the file level so that a parsed file
//! serializes back to the same text; defaults and consistency rules are
//! applied by [`ScenarioFile::resolve`].

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::controller::ControllerParams;
use crate::error::Error;
use crate::guidance::{GuidanceParams, PathSpec};
use crate::model::{DisturbanceSpec, DragCoefficients, HelixGeometry, SwimmerParams};
use crate::sim::{GuidanceMode, SimScenario, DEFAULT_TAIL_WINDOW, DIVERGENCE_RADIUS};
use crate::Vec2;

pub const SECTIONS: [&str; 6] = [
    "swimmer",
    "path",
    "guidance",
    "controller",
    "disturbance",
    "sim",
];

/// Informational section written into run manifests; its keys are not
/// interpreted.
pub const MANIFEST_SECTION: &str = "manifest";

pub const DEFAULT_T_END: f64 = 100.0;
pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_OMEGA0: f64 = 1.0;

const GEOMETRY_KEYS: [&str; 7] = [
    "theta_h_deg",
    "n_h",
    "r_h",
    "xi_par",
    "xi_perp",
    "xi_vm",
    "k_h_mag",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OmegaUnit {
    RadS,
    /// Cycles per second; multiplied by 2π on load.
    Hz,
}

impl OmegaUnit {
    pub fn as_str(&self) -> &'static str {
        match self {
            OmegaUnit::RadS => "rad_s",
            OmegaUnit::Hz => "hz",
        }
    }

    pub fn to_rad_s(&self, value: f64) -> f64 {
        match self {
            OmegaUnit::RadS => value,
            OmegaUnit::Hz => value * std::f64::consts::TAU,
        }
    }
}

impl FromStr for OmegaUnit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rad_s" => Ok(OmegaUnit::RadS),
            "hz" => Ok(OmegaUnit::Hz),
            other => Err(format!("unknown unit `{other}` (expected `rad_s` or `hz`)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, key: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            line: Some(line),
            key: key.into(),
            message: message.into(),
        }
    }

    fn key(key: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            line: None,
            key: key.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: key `{}`: {}", self.key, self.message),
            None => write!(f, "key `{}`: {}", self.key, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScenarioFile {
    // [swimmer]
    pub e11: Option<f64>,
    pub theta_h_deg: Option<f64>,
    pub n_h: Option<f64>,
    pub r_h: Option<f64>,
    pub xi_par: Option<f64>,
    pub xi_perp: Option<f64>,
    pub xi_vm: Option<f64>,
    pub k_h_mag: Option<f64>,
    // [path]
    pub theta_r_deg: Option<f64>,
    // [guidance]
    pub alpha_d: Option<f64>,
    pub sigma0: Option<f64>,
    pub k_d: Option<f64>,
    pub delta_los: Option<f64>,
    // [controller]
    pub omega_so: Option<f64>,
    pub omega_so_unit: Option<OmegaUnit>,
    pub omega0: Option<f64>,
    pub e11_hat: Option<f64>,
    pub d_mu_hat_x: Option<f64>,
    pub d_mu_hat_z: Option<f64>,
    // [disturbance]
    pub d_mu_x: Option<f64>,
    pub d_mu_z: Option<f64>,
    pub calibrate_offset: Option<f64>,
    // [sim]
    pub p0_x: Option<f64>,
    pub p0_z: Option<f64>,
    pub s0: Option<f64>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub mode: Option<GuidanceMode>,
    /// `[manifest]` entries, kept verbatim and in order.
    pub manifest: Vec<(String, String)>,
}

/// Line number of every key seen while parsing, for error reporting.
pub type KeyLines = BTreeMap<String, usize>;

impl ScenarioFile {
    fn section_of(key: &str) -> Option<&'static str> {
        Some(match key {
            "e11" | "theta_h_deg" | "n_h" | "r_h" | "xi_par" | "xi_perp" | "xi_vm" | "k_h_mag" => {
                "swimmer"
            }
            "theta_r_deg" => "path",
            "alpha_d" | "sigma0" | "k_d" | "delta_los" => "guidance",
            "omega_so" | "omega_so_unit" | "omega0" | "e11_hat" | "d_mu_hat_x" | "d_mu_hat_z" => {
                "controller"
            }
            "d_mu_x" | "d_mu_z" | "calibrate_offset" => "disturbance",
            "p0_x" | "p0_z" | "s0" | "t_end" | "dt" | "mode" => "sim",
            _ => return None,
        })
    }

    fn number_mut(&mut self, key: &str) -> Option<&mut Option<f64>> {
        Some(match key {
            "e11" => &mut self.e11,
            "theta_h_deg" => &mut self.theta_h_deg,
            "n_h" => &mut self.n_h,
            "r_h" => &mut self.r_h,
            "xi_par" => &mut self.xi_par,
            "xi_perp" => &mut self.xi_perp,
            "xi_vm" => &mut self.xi_vm,
            "k_h_mag" => &mut self.k_h_mag,
            "theta_r_deg" => &mut self.theta_r_deg,
            "alpha_d" => &mut self.alpha_d,
            "sigma0" => &mut self.sigma0,
            "k_d" => &mut self.k_d,
            "delta_los" => &mut self.delta_los,
            "omega_so" => &mut self.omega_so,
            "omega0" => &mut self.omega0,
            "e11_hat" => &mut self.e11_hat,
            "d_mu_hat_x" => &mut self.d_mu_hat_x,
            "d_mu_hat_z" => &mut self.d_mu_hat_z,
            "d_mu_x" => &mut self.d_mu_x,
            "d_mu_z" => &mut self.d_mu_z,
            "calibrate_offset" => &mut self.calibrate_offset,
            "p0_x" => &mut self.p0_x,
            "p0_z" => &mut self.p0_z,
            "s0" => &mut self.s0,
            "t_end" => &mut self.t_end,
            "dt" => &mut self.dt,
            _ => return None,
        })
    }

    /// `(section, key, value)` for every present key, in canonical order.
    fn entries(&self) -> Vec<(&'static str, &'static str, String)> {
        let num = |key: &'static str, v: Option<f64>| v.map(|v| (key, format!("{v}")));
        let rows = [
            num("e11", self.e11),
            num("theta_h_deg", self.theta_h_deg),
            num("n_h", self.n_h),
            num("r_h", self.r_h),
            num("xi_par", self.xi_par),
            num("xi_perp", self.xi_perp),
            num("xi_vm", self.xi_vm),
            num("k_h_mag", self.k_h_mag),
            num("theta_r_deg", self.theta_r_deg),
            num("alpha_d", self.alpha_d),
            num("sigma0", self.sigma0),
            num("k_d", self.k_d),
            num("delta_los", self.delta_los),
            num("omega_so", self.omega_so),
            self.omega_so_unit
                .map(|u| ("omega_so_unit", u.as_str().to_string())),
            num("omega0", self.omega0),
            num("e11_hat", self.e11_hat),
            num("d_mu_hat_x", self.d_mu_hat_x),
            num("d_mu_hat_z", self.d_mu_hat_z),
            num("d_mu_x", self.d_mu_x),
            num("d_mu_z", self.d_mu_z),
            num("calibrate_offset", self.calibrate_offset),
            num("p0_x", self.p0_x),
            num("p0_z", self.p0_z),
            num("s0", self.s0),
            num("t_end", self.t_end),
            num("dt", self.dt),
            self.mode.map(|m| ("mode", m.as_str().to_string())),
        ];
        rows.into_iter()
            .flatten()
            .map(|(k, v)| (Self::section_of(k).expect("known key"), k, v))
            .collect()
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::parse_with_lines(text).map(|(file, _)| file)
    }

    pub fn parse_with_lines(text: &str) -> Result<(Self, KeyLines), ConfigError> {
        let mut file = ScenarioFile::default();
        let mut lines = KeyLines::new();
        let mut section: Option<String> = None;

        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::at(lineno, line, "unterminated section header"))?
                    .trim();
                if !SECTIONS.contains(&name) && name != MANIFEST_SECTION {
                    return Err(ConfigError::at(lineno, name, "unknown section"));
                }
                section = Some(name.to_string());
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::at(lineno, line, "expected `key = value`"));
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(ConfigError::at(lineno, key, "empty key"));
            }
            let Some(current) = section.as_deref() else {
                return Err(ConfigError::at(lineno, key, "key outside of any section"));
            };
            if current == MANIFEST_SECTION {
                file.manifest.push((key.to_string(), value.to_string()));
                continue;
            }
            match Self::section_of(key) {
                None => return Err(ConfigError::at(lineno, key, "unknown key")),
                Some(expected) if expected != current => {
                    return Err(ConfigError::at(
                        lineno,
                        key,
                        format!("belongs in [{expected}], found in [{current}]"),
                    ))
                }
                Some(_) => {}
            }
            if lines.insert(key.to_string(), lineno).is_some() {
                return Err(ConfigError::at(lineno, key, "duplicate key"));
            }
            if value.is_empty() {
                return Err(ConfigError::at(lineno, key, "missing value"));
            }
            match key {
                "omega_so_unit" => {
                    file.omega_so_unit = Some(
                        value
                            .parse()
                            .map_err(|e: String| ConfigError::at(lineno, key, e))?,
                    )
                }
                "mode" => {
                    file.mode = Some(
                        value
                            .parse()
                            .map_err(|e: String| ConfigError::at(lineno, key, e))?,
                    )
                }
                _ => {
                    let v: f64 = value.parse().map_err(|_| {
                        ConfigError::at(lineno, key, format!("`{value}` is not a number"))
                    })?;
                    if !v.is_finite() {
                        return Err(ConfigError::at(lineno, key, "must be finite"));
                    }
                    *file.number_mut(key).expect("numeric key") = Some(v);
                }
            }
        }
        Ok((file, lines))
    }

    pub fn serialize(&self) -> String {
        let entries = self.entries();
        let mut out = String::new();
        for section in SECTIONS {
            let rows: Vec<_> = entries.iter().filter(|(s, _, _)| *s == section).collect();
            if rows.is_empty() {
                continue;
            }
            if !out.is_empty() {
                out.push('\n');
            }
            let _ = writeln!(out, "[{section}]");
            for (_, key, value) in rows {
                let _ = writeln!(out, "{key} = {value}");
            }
        }
        if !self.manifest.is_empty() {
            if !out.is_empty() {
                out.push('\n');
            }
            let _ = writeln!(out, "[{MANIFEST_SECTION}]");
            for (key, value) in &self.manifest {
                let _ = writeln!(out, "{key} = {value}");
            }
        }
        out
    }

    fn require(&self, key: &'static str, v: Option<f64>) -> Result<f64, ConfigError> {
        v.ok_or_else(|| ConfigError::key(key, "required"))
    }

    /// Builds the scenario. A `calibrate_offset` request is returned as
    /// [`DisturbanceSource::Calibrate`] with a zero disturbance in place;
    /// see [`crate::cli::apply_calibration`].
    pub fn resolve(&self) -> Result<ResolvedScenario, ConfigError> {
        let geometry_given: Vec<&str> = self
            .entries()
            .into_iter()
            .map(|(_, k, _)| k)
            .filter(|k| GEOMETRY_KEYS.contains(k))
            .collect();
        let swimmer = match (self.e11, geometry_given.len()) {
            (Some(_), n) if n > 0 => {
                return Err(ConfigError::key(
                    geometry_given[0],
                    "give either e11 or the geometry and drag set, not both",
                ))
            }
            (Some(e11), _) => SwimmerParams::Direct { e11 },
            (None, n) if n == GEOMETRY_KEYS.len() => SwimmerParams::Physical {
                geometry: HelixGeometry {
                    theta_h: self.theta_h_deg.unwrap().to_radians(),
                    n_h: self.n_h.unwrap(),
                    r_h: self.r_h.unwrap(),
                    r_c: 0.0,
                    r_m: 0.0,
                    k_h_mag: self.k_h_mag.unwrap(),
                },
                drag: DragCoefficients {
                    xi_par: self.xi_par.unwrap(),
                    xi_perp: self.xi_perp.unwrap(),
                    xi_vm: self.xi_vm.unwrap(),
                },
            },
            (None, 0) => {
                return Err(ConfigError::key(
                    "e11",
                    "required (or the full geometry and drag set)",
                ))
            }
            (None, _) => {
                let missing = GEOMETRY_KEYS
                    .iter()
                    .find(|k| !geometry_given.contains(k))
                    .unwrap();
                return Err(ConfigError::key(
                    *missing,
                    "required when geometry is used instead of e11",
                ));
            }
        };
        let e11 = swimmer.e11().map_err(|e| lib_error(e, "e11"))?;
        if e11 == 0.0 {
            return Err(ConfigError::key(
                if self.e11.is_some() { "e11" } else { "xi_perp" },
                "propulsion gain is zero",
            ));
        }

        let guidance = GuidanceParams {
            alpha_d: self.require("alpha_d", self.alpha_d)?,
            sigma0: self.require("sigma0", self.sigma0)?,
            k_d: self.require("k_d", self.k_d)?,
            delta_los: self.require("delta_los", self.delta_los)?,
        };
        let omega_unit = self
            .omega_so_unit
            .ok_or_else(|| ConfigError::key("omega_so_unit", "required (`rad_s` or `hz`)"))?;
        let omega_so = omega_unit.to_rad_s(self.require("omega_so", self.omega_so)?);
        let mut controller =
            ControllerParams::continuous(omega_so, self.omega0.unwrap_or(DEFAULT_OMEGA0));
        controller.e11_hat = self.e11_hat.unwrap_or(1.0);
        controller.d_mu_hat = Vec2::new(
            self.d_mu_hat_x.unwrap_or(0.0),
            self.d_mu_hat_z.unwrap_or(0.0),
        );

        let explicit = self.d_mu_x.is_some() || self.d_mu_z.is_some();
        let source = match (explicit, self.calibrate_offset) {
            (true, Some(_)) => {
                return Err(ConfigError::key(
                    "calibrate_offset",
                    "give either d_mu_x/d_mu_z or calibrate_offset, not both",
                ))
            }
            (true, None) => DisturbanceSource::Explicit,
            (false, Some(target)) => DisturbanceSource::Calibrate { target },
            (false, None) => DisturbanceSource::None,
        };
        let disturbance = match source {
            DisturbanceSource::Explicit => DisturbanceSpec::constant(Vec2::new(
                self.d_mu_x.unwrap_or(0.0),
                self.d_mu_z.unwrap_or(0.0),
            )),
            _ => DisturbanceSpec::zero(),
        };

        let scenario = SimScenario {
            swimmer,
            path: PathSpec::new(self.theta_r_deg.unwrap_or(0.0).to_radians()),
            guidance,
            controller,
            disturbance,
            p0: Vec2::new(self.p0_x.unwrap_or(0.0), self.p0_z.unwrap_or(0.0)),
            s0: self.s0.unwrap_or(0.0),
            t_end: self.t_end.unwrap_or(DEFAULT_T_END),
            dt: self.dt.unwrap_or(DEFAULT_DT),
            mode: self.mode.unwrap_or(GuidanceMode::Ilos),
            hold_dt: None,
            tail_window: DEFAULT_TAIL_WINDOW.min(self.t_end.unwrap_or(DEFAULT_T_END)),
            divergence_radius: DIVERGENCE_RADIUS,
        };
        scenario.validate().map_err(|e| lib_error(e, "e11"))?;
        Ok(ResolvedScenario {
            scenario,
            source,
            omega_unit,
        })
    }
}

/// Maps a library validation error onto the config key that caused it.
fn lib_error(err: Error, fallback: &str) -> ConfigError {
    let key = match &err {
        Error::InvalidParameter { name, .. } => match *name {
            "theta_h" => "theta_h_deg",
            "d_mu_hat" => "d_mu_hat_x",
            "p0/s0" => "p0_x",
            "tail_window" => "t_end",
            other => other,
        },
        Error::DegenerateHelix => "theta_h_deg",
        _ => fallback,
    };
    ConfigError::key(key, err.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DisturbanceSource {
    None,
    Explicit,
    /// Signed target for the conventional-LOS tail offset (m).
    Calibrate {
        target: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedScenario {
    pub scenario: SimScenario,
    pub source: DisturbanceSource,
    pub omega_unit: OmegaUnit,
}
