//! `key = value` run configuration: defaults, then the config file, then
//! command-line overrides.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use spl_core::{Grid, IntervalGrid, PolarGrid, RadialGrid, SolveOptions};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Eig,
    Modes,
    HessianCheck,
    Optimize,
    Deficit,
}

impl Command {
    pub const ALL: [Command; 5] =
        [Command::Eig, Command::Modes, Command::HessianCheck, Command::Optimize, Command::Deficit];

    pub fn name(self) -> &'static str {
        match self {
            Command::Eig => "eig",
            Command::Modes => "modes",
            Command::HessianCheck => "hessian-check",
            Command::Optimize => "optimize",
            Command::Deficit => "deficit",
        }
    }

    fn defaults(self) -> &'static [(&'static str, &'static str)] {
        match self {
            Command::Eig => &[("geometry", "disk"), ("potential", "ball"), ("delta", "0.05"), ("potential_file", "")],
            Command::Modes => &[("geometry", "disk"), ("n", "4096"), ("k_max", "128")],
            Command::HessianCheck => &[
                ("geometry", "polar"),
                ("perturbations", "cos1,cos2,sin3"),
                ("steps", "0.04,0.02,0.01,0.005"),
                ("radial_n", "4096"),
            ],
            Command::Optimize => {
                &[("geometry", "disk"), ("deltas", "0,0.01,0.02,0.05"), ("max_iter", "200"), ("remark3", "false")]
            }
            Command::Deficit => &[
                ("geometry", "polar"),
                ("families", "annulus,radial-random,polar-random,normal-deformation"),
                ("samples", "50"),
                ("delta_min", "0.005"),
                ("delta_max", "0.1"),
                ("seed", "2024"),
            ],
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const COMMON: &[(&str, &str)] = &[
    ("radius", "1"),
    ("a", "-1"),
    ("b", "1"),
    ("n", "2048"),
    ("nr", "128"),
    ("ntheta", "128"),
    ("v0", "0.25"),
    ("tol", "1e-10"),
    ("solver_max_iter", "2000"),
    ("out", "out"),
];

/// Keys fixed by `remark3 = true`.
const REMARK3_PRESET: &[(&str, &str)] = &[("geometry", "interval"), ("v0", "0.6"), ("deltas", "0.1,0.2,0.4,0.8")];

fn known_key(key: &str) -> bool {
    key == "geometry"
        || COMMON.iter().any(|(k, _)| *k == key)
        || Command::ALL.iter().any(|c| c.defaults().iter().any(|(k, _)| *k == key))
}

/// Parses `key = value` lines; `#` starts a comment line.
pub fn parse_pairs(text: &str, origin: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut pairs = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("{origin}:{}: expected key = value, got '{line}'", no + 1)))?;
        let k = k.trim();
        if !known_key(k) {
            return Err(CliError::Config(format!("{origin}:{}: unknown config key '{k}'", no + 1)));
        }
        pairs.push((k.to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Geometry {
    Interval,
    Disk,
    Polar,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn resolve(command: Command, file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let mut values: BTreeMap<String, String> = BTreeMap::new();
        for (k, v) in COMMON.iter().chain(command.defaults()) {
            values.insert(k.to_string(), v.to_string());
        }
        let mut explicit = BTreeSet::new();
        let mut layers = Vec::new();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read config file {}: {e}", path.display())))?;
            layers.extend(parse_pairs(&text, &path.display().to_string())?);
        }
        for (k, v) in overrides {
            if !known_key(k) {
                return Err(CliError::Config(format!("unknown config key '{k}'")));
            }
            layers.push((k.clone(), v.clone()));
        }
        for (k, v) in layers {
            if let Some(slot) = values.get_mut(&k) {
                *slot = v;
                explicit.insert(k);
            } else {
                eprintln!("note: key '{k}' does not apply to {command} and is ignored");
            }
        }
        let mut cfg = RunConfig { command, values };
        if command == Command::Optimize && cfg.bool("remark3")? {
            for (k, v) in REMARK3_PRESET {
                if explicit.contains(*k) && cfg.str(k) != *v {
                    return Err(CliError::Config(format!(
                        "remark3 fixes {k} = {v}, but {k} = {} was given",
                        cfg.str(k)
                    )));
                }
                cfg.values.insert(k.to_string(), v.to_string());
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let geometry = self.geometry()?;
        match (self.command, geometry) {
            (Command::Modes, g) if g != Geometry::Disk => Err(CliError::Config("modes needs geometry = disk".into())),
            (Command::HessianCheck, g) if g != Geometry::Polar => {
                Err(CliError::Config("hessian-check needs geometry = polar".into()))
            }
            _ => Ok(()),
        }?;
        self.f64("v0")?;
        self.solve_options()?;
        Ok(())
    }

    pub fn str(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("key '{key}' has no default"))
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<T, CliError> {
        self.str(key)
            .parse()
            .map_err(|_| CliError::Config(format!("config key '{key}': expected {what}, got '{}'", self.str(key))))
    }

    pub fn f64(&self, key: &str) -> Result<f64, CliError> {
        let x: f64 = self.parsed(key, "a number")?;
        if x.is_finite() {
            Ok(x)
        } else {
            Err(CliError::Config(format!("config key '{key}': value must be finite")))
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize, CliError> {
        self.parsed(key, "a nonnegative integer")
    }

    pub fn u64(&self, key: &str) -> Result<u64, CliError> {
        self.parsed(key, "a nonnegative integer")
    }

    pub fn bool(&self, key: &str) -> Result<bool, CliError> {
        self.parsed(key, "true or false")
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        self.str(key)
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| CliError::Config(format!("config key '{key}': '{}' is not a number", s.trim())))
            })
            .collect()
    }

    pub fn list(&self, key: &str) -> Vec<String> {
        self.str(key).split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.str("out"))
    }

    pub fn geometry(&self) -> Result<Geometry, CliError> {
        match self.str("geometry") {
            "interval" => Ok(Geometry::Interval),
            "disk" => Ok(Geometry::Disk),
            "polar" => Ok(Geometry::Polar),
            other => Err(CliError::Config(format!(
                "config key 'geometry': unknown geometry '{other}' (interval, disk, polar)"
            ))),
        }
    }

    pub fn grid(&self) -> Result<Arc<Grid>, CliError> {
        let grid: Grid = match self.geometry()? {
            Geometry::Interval => IntervalGrid::new(self.f64("a")?, self.f64("b")?, self.usize("n")?)?.into(),
            Geometry::Disk => RadialGrid::new(self.f64("radius")?, self.usize("n")?)?.into(),
            Geometry::Polar => PolarGrid::new(self.f64("radius")?, self.usize("nr")?, self.usize("ntheta")?)?.into(),
        };
        Ok(Arc::new(grid))
    }

    pub fn solve_options(&self) -> Result<SolveOptions, CliError> {
        let tol = self.f64("tol")?;
        let max_iter = self.usize("solver_max_iter")?;
        if !(tol > 0.0) || max_iter == 0 {
            return Err(CliError::Config("tol must be positive and solver_max_iter at least 1".into()));
        }
        Ok(SolveOptions { tol, max_iter, ..Default::default() })
    }

    /// The resolved configuration in the input format.
    pub fn to_text(&self) -> String {
        let mut s = format!("# spectral-potential-lab resolved config\n# command: {}\n", self.command);
        for (k, v) in &self.values {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }
}
