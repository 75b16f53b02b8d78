//! Run configuration: a strict, diffable INI dialect and its typed form.
//!
//! Grammar (line oriented):
//!
//! * `#` or `;` starts a comment line; blank lines are ignored;
//! * `[section]` opens a section; every key must live inside a known
//!   section; a section may appear at most once;
//! * `key = value` assigns; keys are lowercase, values are trimmed,
//!   unquoted; duplicate keys are rejected;
//! * unknown sections or keys are errors (typos must not silently pick
//!   defaults); every diagnostic carries the 1-based line number.
//!
//! Sections and keys (defaults in parentheses):
//!
//! * `[run]`    — `mode` (required unless a CLI flag supplies it; one of
//!   `direct`, `inverse`, `verify`, `sweep`), `case`
//!   (`taylor-vortex-r2`), `out` (`out`), `seed` (`42`), `jobs` (`1`);
//! * `[grid]`   — `nx` (`64`), `ny` (`64`);
//! * `[time]`   — `t0` (`0`), `dt` (`1e-3`), `t_final` (`0.25`);
//! * `[physics]`— `mu` (`0.1`), `alpha` (`1`), `beta` (`0.5`), `r` (`2`);
//!   for catalog-case runs, keys written here override the case's own
//!   coefficients and unwritten keys inherit from the case (see
//!   [`RunConfig::resolve_case`]); for data-driven runs they are used
//!   directly;
//! * `[inverse]`— `tol` (`1e-8`), `max_iter` (`100`), `ball_radius` (`1`),
//!   `g0_min` (`0.1`);
//! * `[sweep]`  — `horizons` (`0.05,0.1,0.2,0.4,0.8`), `exponents`
//!   (unset: use `[physics] r`);
//! * `[data]`   — `u0`, `g`, `omega`, `phi`: paths to externally produced
//!   fields/series; all four must be given together.  When present they
//!   replace the manufactured case as the inverse problem's data.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;

use crate::direct::{PhysicalParams, SolverConfig};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::inverse::{DataChecks, PicardOptions};
use crate::io::fmt_f64;
use crate::manufactured::{self, VortexCase};

/// Workflow selected by `[run] mode` or the `--mode` flag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Direct,
    Inverse,
    Verify,
    Sweep,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Direct => "direct",
            Mode::Inverse => "inverse",
            Mode::Verify => "verify",
            Mode::Sweep => "sweep",
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "direct" => Ok(Mode::Direct),
            "inverse" => Ok(Mode::Inverse),
            "verify" => Ok(Mode::Verify),
            "sweep" => Ok(Mode::Sweep),
            other => Err(format!(
                "unknown mode `{other}` (expected direct, inverse, verify, or sweep)"
            )),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Which `[physics]` keys were written explicitly (as opposed to defaulted).
/// Explicit keys override the selected catalog case; the rest inherit from
/// it.  See [`RunConfig::resolve_case`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PhysicsOverrides {
    pub mu: bool,
    pub alpha: bool,
    pub beta: bool,
    pub r: bool,
}

/// External data files replacing the manufactured case in inverse mode.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DataPaths {
    pub u0: PathBuf,
    pub g: PathBuf,
    pub omega: PathBuf,
    pub phi: PathBuf,
}

/// Fully resolved run configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    pub case: String,
    pub out: PathBuf,
    pub seed: u64,
    pub jobs: usize,
    pub nx: usize,
    pub ny: usize,
    pub t0: f64,
    pub dt: f64,
    pub t_final: f64,
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub r: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub ball_radius: f64,
    pub g0_min: f64,
    pub sweep_horizons: Vec<f64>,
    pub sweep_exponents: Option<Vec<f64>>,
    pub data: Option<DataPaths>,
    /// Parser bookkeeping, not part of the rendered configuration.
    #[serde(skip)]
    pub physics_explicit: PhysicsOverrides,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: None,
            case: "taylor-vortex-r2".into(),
            out: "out".into(),
            seed: 42,
            jobs: 1,
            nx: 64,
            ny: 64,
            t0: 0.0,
            dt: 1e-3,
            t_final: 0.25,
            mu: 0.1,
            alpha: 1.0,
            beta: 0.5,
            r: 2.0,
            tol: 1e-8,
            max_iter: 100,
            ball_radius: 1.0,
            g0_min: 0.1,
            sweep_horizons: vec![0.05, 0.1, 0.2, 0.4, 0.8],
            sweep_exponents: None,
            data: None,
            physics_explicit: PhysicsOverrides::default(),
        }
    }
}

fn cfg_err(line: usize, message: impl Into<String>) -> Error {
    Error::ConfigParse { line, message: message.into() }
}

fn parse_f64(line: usize, key: &str, raw: &str) -> Result<f64> {
    let v: f64 =
        raw.parse().map_err(|_| cfg_err(line, format!("bad number for `{key}`: `{raw}`")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(cfg_err(line, format!("`{key}` must be finite, got `{raw}`")))
    }
}

fn parse_usize(line: usize, key: &str, raw: &str) -> Result<usize> {
    raw.parse().map_err(|_| cfg_err(line, format!("bad integer for `{key}`: `{raw}`")))
}

fn parse_f64_list(line: usize, key: &str, raw: &str) -> Result<Vec<f64>> {
    let out = raw
        .split(',')
        .map(|item| parse_f64(line, key, item.trim()))
        .collect::<Result<Vec<f64>>>()?;
    if out.is_empty() {
        return Err(cfg_err(line, format!("`{key}` needs at least one value")));
    }
    Ok(out)
}

impl RunConfig {
    /// Parses the INI dialect documented at module level, applying defaults
    /// for everything not mentioned.
    pub fn from_ini(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut section: Option<(&str, usize)> = None;
        let mut seen_sections: Vec<&str> = Vec::new();
        let mut seen_keys: Vec<(String, String)> = Vec::new();
        let mut data_u0 = None;
        let mut data_g = None;
        let mut data_omega = None;
        let mut data_phi = None;

        for (lineno, raw_line) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| cfg_err(lineno, format!("unterminated section `{line}`")))?
                    .trim();
                let known =
                    ["run", "grid", "time", "physics", "inverse", "sweep", "data"];
                let canonical = known
                    .iter()
                    .find(|&&k| k == name)
                    .ok_or_else(|| cfg_err(lineno, format!("unknown section `[{name}]`")))?;
                if seen_sections.contains(canonical) {
                    return Err(cfg_err(lineno, format!("section `[{name}]` appears twice")));
                }
                seen_sections.push(canonical);
                section = Some((canonical, lineno));
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| cfg_err(lineno, format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let (section_name, _) = section
                .ok_or_else(|| cfg_err(lineno, format!("key `{key}` before any section")))?;
            if seen_keys.iter().any(|(s, k)| s == section_name && k == key) {
                return Err(cfg_err(
                    lineno,
                    format!("duplicate key `{key}` in section `[{section_name}]`"),
                ));
            }
            seen_keys.push((section_name.to_string(), key.to_string()));

            match (section_name, key) {
                ("run", "mode") => {
                    cfg.mode =
                        Some(Mode::from_str(value).map_err(|m| cfg_err(lineno, m))?);
                }
                ("run", "case") => cfg.case = value.to_string(),
                ("run", "out") => cfg.out = PathBuf::from(value),
                ("run", "seed") => {
                    cfg.seed = value
                        .parse()
                        .map_err(|_| cfg_err(lineno, format!("bad integer for `seed`: `{value}`")))?;
                }
                ("run", "jobs") => {
                    cfg.jobs = parse_usize(lineno, "jobs", value)?;
                    if cfg.jobs == 0 {
                        return Err(cfg_err(lineno, "`jobs` must be at least 1"));
                    }
                }
                ("grid", "nx") => cfg.nx = parse_usize(lineno, "nx", value)?,
                ("grid", "ny") => cfg.ny = parse_usize(lineno, "ny", value)?,
                ("time", "t0") => cfg.t0 = parse_f64(lineno, "t0", value)?,
                ("time", "dt") => cfg.dt = parse_f64(lineno, "dt", value)?,
                ("time", "t_final") => cfg.t_final = parse_f64(lineno, "t_final", value)?,
                ("physics", "mu") => {
                    cfg.mu = parse_f64(lineno, "mu", value)?;
                    cfg.physics_explicit.mu = true;
                }
                ("physics", "alpha") => {
                    cfg.alpha = parse_f64(lineno, "alpha", value)?;
                    cfg.physics_explicit.alpha = true;
                }
                ("physics", "beta") => {
                    cfg.beta = parse_f64(lineno, "beta", value)?;
                    cfg.physics_explicit.beta = true;
                }
                ("physics", "r") => {
                    cfg.r = parse_f64(lineno, "r", value)?;
                    cfg.physics_explicit.r = true;
                }
                ("inverse", "tol") => cfg.tol = parse_f64(lineno, "tol", value)?,
                ("inverse", "max_iter") => {
                    cfg.max_iter = parse_usize(lineno, "max_iter", value)?
                }
                ("inverse", "ball_radius") => {
                    cfg.ball_radius = parse_f64(lineno, "ball_radius", value)?
                }
                ("inverse", "g0_min") => cfg.g0_min = parse_f64(lineno, "g0_min", value)?,
                ("sweep", "horizons") => {
                    cfg.sweep_horizons = parse_f64_list(lineno, "horizons", value)?
                }
                ("sweep", "exponents") => {
                    cfg.sweep_exponents = Some(parse_f64_list(lineno, "exponents", value)?)
                }
                ("data", "u0") => data_u0 = Some(PathBuf::from(value)),
                ("data", "g") => data_g = Some(PathBuf::from(value)),
                ("data", "omega") => data_omega = Some(PathBuf::from(value)),
                ("data", "phi") => data_phi = Some(PathBuf::from(value)),
                (section_name, key) => {
                    return Err(cfg_err(
                        lineno,
                        format!("unknown key `{key}` in section `[{section_name}]`"),
                    ));
                }
            }
        }

        cfg.data = match (data_u0, data_g, data_omega, data_phi) {
            (None, None, None, None) => None,
            (Some(u0), Some(g), Some(omega), Some(phi)) => {
                Some(DataPaths { u0, g, omega, phi })
            }
            (u0, g, omega, phi) => {
                let missing: Vec<&str> = [
                    ("u0", u0.is_none()),
                    ("g", g.is_none()),
                    ("omega", omega.is_none()),
                    ("phi", phi.is_none()),
                ]
                .iter()
                .filter(|(_, m)| *m)
                .map(|(n, _)| *n)
                .collect();
                return Err(cfg_err(
                    0,
                    format!("section `[data]` is incomplete: missing {}", missing.join(", ")),
                ));
            }
        };
        Ok(cfg)
    }

    /// Renders the fully resolved configuration in the same INI dialect,
    /// deterministically (embedded in every artifact).
    pub fn to_ini_string(&self) -> String {
        let mut out = String::new();
        out.push_str("[run]\n");
        if let Some(mode) = self.mode {
            out.push_str(&format!("mode = {mode}\n"));
        }
        out.push_str(&format!("case = {}\n", self.case));
        out.push_str(&format!("out = {}\n", self.out.display()));
        out.push_str(&format!("seed = {}\n", self.seed));
        out.push_str(&format!("jobs = {}\n", self.jobs));
        out.push_str("[grid]\n");
        out.push_str(&format!("nx = {}\nny = {}\n", self.nx, self.ny));
        out.push_str("[time]\n");
        out.push_str(&format!(
            "t0 = {}\ndt = {}\nt_final = {}\n",
            fmt_f64(self.t0),
            fmt_f64(self.dt),
            fmt_f64(self.t_final)
        ));
        out.push_str("[physics]\n");
        out.push_str(&format!(
            "mu = {}\nalpha = {}\nbeta = {}\nr = {}\n",
            fmt_f64(self.mu),
            fmt_f64(self.alpha),
            fmt_f64(self.beta),
            fmt_f64(self.r)
        ));
        out.push_str("[inverse]\n");
        out.push_str(&format!(
            "tol = {}\nmax_iter = {}\nball_radius = {}\ng0_min = {}\n",
            fmt_f64(self.tol),
            self.max_iter,
            fmt_f64(self.ball_radius),
            fmt_f64(self.g0_min)
        ));
        out.push_str("[sweep]\n");
        let join = |xs: &[f64]| xs.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(",");
        out.push_str(&format!("horizons = {}\n", join(&self.sweep_horizons)));
        if let Some(exps) = &self.sweep_exponents {
            out.push_str(&format!("exponents = {}\n", join(exps)));
        }
        if let Some(data) = &self.data {
            out.push_str("[data]\n");
            out.push_str(&format!(
                "u0 = {}\ng = {}\nomega = {}\nphi = {}\n",
                data.u0.display(),
                data.g.display(),
                data.omega.display(),
                data.phi.display()
            ));
        }
        out
    }

    /// Looks up the named catalog case and merges it with `[physics]`:
    /// explicitly written keys override the case; everything else inherits
    /// from it.  The merged coefficients are written back into `self`, so a
    /// rendered configuration pins the effective physics exactly (re-parsing
    /// it reproduces the same run).
    pub fn resolve_case(&mut self) -> Result<VortexCase> {
        let mut case = manufactured::case(&self.case)?;
        if self.physics_explicit.mu { case.mu = self.mu } else { self.mu = case.mu }
        if self.physics_explicit.alpha { case.alpha = self.alpha } else { self.alpha = case.alpha }
        if self.physics_explicit.beta { case.beta = self.beta } else { self.beta = case.beta }
        if self.physics_explicit.r { case.r = self.r } else { self.r = case.r }
        self.physics_explicit = PhysicsOverrides { mu: true, alpha: true, beta: true, r: true };
        case.params()?;
        Ok(case)
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.nx, self.ny)
    }

    pub fn physical_params(&self) -> Result<PhysicalParams> {
        PhysicalParams::new(self.mu, self.alpha, self.beta, self.r)
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        SolverConfig::from_horizon(self.t0, self.dt, self.t_final)
    }

    pub fn picard_options(&self) -> PicardOptions {
        PicardOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            ball_radius: self.ball_radius,
            start: None,
        }
    }

    pub fn data_checks(&self) -> DataChecks {
        DataChecks { g0_min: self.g0_min, ..DataChecks::default() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_yields_defaults_without_mode() {
        let cfg = RunConfig::from_ini("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert!(cfg.mode.is_none());
    }

    #[test]
    fn full_document_round_trips_through_render_and_parse() {
        let text = "\
# experiment
[run]
mode = inverse
case = taylor-vortex-r3
out = results/run1
seed = 7
jobs = 2
[grid]
nx = 32
ny = 48
[time]
t0 = 0.5
dt = 2e-3
t_final = 0.75
[physics]
mu = 0.05
alpha = 2.0
beta = 0.25
r = 3
[inverse]
tol = 1e-9
max_iter = 50
ball_radius = 2.0
g0_min = 0.05
[sweep]
horizons = 0.1, 0.2
exponents = 1.0,2.0,3.0
";
        let cfg = RunConfig::from_ini(text).unwrap();
        assert_eq!(cfg.mode, Some(Mode::Inverse));
        assert_eq!(cfg.case, "taylor-vortex-r3");
        assert_eq!((cfg.nx, cfg.ny), (32, 48));
        assert_eq!(cfg.sweep_horizons, vec![0.1, 0.2]);
        assert_eq!(cfg.sweep_exponents.as_deref(), Some(&[1.0, 2.0, 3.0][..]));
        let rendered = cfg.to_ini_string();
        let reparsed = RunConfig::from_ini(&rendered).unwrap();
        assert_eq!(cfg, reparsed);
    }

    #[test]
    fn unknown_keys_and_sections_are_rejected_with_line_numbers() {
        for (text, expect_line) in [
            ("[run]\nmoed = direct\n", 2),
            ("[rnu]\n", 1),
            ("mode = direct\n", 1),
            ("[run]\nmode = hover\n", 2),
            ("[grid]\nnx = -3\n", 2),
            ("[time]\ndt = fast\n", 2),
            ("[run]\nmode = direct\nmode = sweep\n", 3),
            ("[run]\n[run]\n", 2),
            ("[time\n", 1),
            ("[physics]\nmu\n", 2),
            ("[time]\ndt = inf\n", 2),
        ] {
            match RunConfig::from_ini(text).unwrap_err() {
                Error::ConfigParse { line, .. } => {
                    assert_eq!(line, expect_line, "input: {text:?}")
                }
                other => panic!("unexpected error for {text:?}: {other}"),
            }
        }
    }

    #[test]
    fn partial_data_section_is_rejected() {
        let text = "[data]\nu0 = a.csv\ng = b.csv\n";
        let err = RunConfig::from_ini(text).unwrap_err().to_string();
        assert!(err.contains("omega") && err.contains("phi"), "{err}");
        let complete =
            "[data]\nu0 = a.csv\ng = b.csv\nomega = c.csv\nphi = d.csv\n";
        let cfg = RunConfig::from_ini(complete).unwrap();
        assert_eq!(
            cfg.data,
            Some(DataPaths {
                u0: "a.csv".into(),
                g: "b.csv".into(),
                omega: "c.csv".into(),
                phi: "d.csv".into()
            })
        );
    }

    #[test]
    fn comments_and_semicolons_are_ignored() {
        let cfg = RunConfig::from_ini("; note\n# note\n[run]\nseed = 9\n").unwrap();
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn rendered_config_is_deterministic() {
        let cfg = RunConfig { mode: Some(Mode::Sweep), ..RunConfig::default() };
        assert_eq!(cfg.to_ini_string(), cfg.to_ini_string());
        assert!(cfg.to_ini_string().contains("mode = sweep"));
    }

    #[test]
    fn case_resolution_merges_explicit_physics_only() {
        // No [physics] keys: the case's own coefficients win.
        let mut cfg = RunConfig::from_ini("[run]\ncase = taylor-vortex-r3\n").unwrap();
        let case = cfg.resolve_case().unwrap();
        assert_eq!(case.r, 3.0);
        assert_eq!(cfg.r, 3.0);
        assert_eq!(cfg.mu, case.mu);

        // Explicit keys override the case; unwritten keys still inherit.
        let mut cfg =
            RunConfig::from_ini("[run]\ncase = taylor-vortex-r3\n[physics]\nmu = 0.02\n")
                .unwrap();
        let case = cfg.resolve_case().unwrap();
        assert_eq!(case.mu, 0.02);
        assert_eq!(case.r, 3.0);

        // After resolution the rendered config reproduces the same run.
        let rendered = cfg.to_ini_string();
        let mut reparsed = RunConfig::from_ini(&rendered).unwrap();
        let case2 = reparsed.resolve_case().unwrap();
        assert_eq!((case2.mu, case2.alpha, case2.beta, case2.r),
                   (case.mu, case.alpha, case.beta, case.r));

        // Unknown case names are reported.
        let mut cfg = RunConfig::from_ini("[run]\ncase = nonsense\n").unwrap();
        assert!(matches!(cfg.resolve_case().unwrap_err(), Error::UnknownCase(_)));

        // Merged coefficients are validated.
        let mut cfg = RunConfig::from_ini("[physics]\nr = 7\n").unwrap();
        assert!(cfg.resolve_case().is_err());
    }
}
