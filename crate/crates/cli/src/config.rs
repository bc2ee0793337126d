//! TOML run configuration.
//!
//! ```toml
//! [model]
//! family = "exp_jumps"   # brownian | exp_jumps | tabulated
//! mu = 0.5
//! b2 = 0.0
//! lambda = 1.0
//! rho = 2.0
//!
//! [game]
//! alpha = 1.0
//! beta = 1.0
//! q = 3.0
//! K = 2.0
//!
//! [grid]
//! x_min = -2.0
//! x_max = 1.0
//! n_points = 50
//!
//! [sim]
//! n_paths = 200000
//! dt = 1e-3
//! seed = 42
//! delta = 0.1
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use levygame_core::{GameParams, JumpSpec, LevyModel, SimConfig, TabulatedDensity};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("{field}: {message}")]
    Field { field: String, message: String },
}

fn field(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Brownian,
    ExpJumps,
    Tabulated,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    family: Family,
    #[serde(default)]
    mu: f64,
    #[serde(default)]
    b2: f64,
    lambda: Option<f64>,
    rho: Option<f64>,
    density_file: Option<PathBuf>,
    tail_rate: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGame {
    alpha: f64,
    beta: f64,
    q: f64,
    #[serde(rename = "K")]
    strike: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            x_min: -2.0,
            x_max: 2.0,
            n_points: 50,
        }
    }
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        let n = self.n_points;
        let h = (self.x_max - self.x_min) / (n - 1) as f64;
        (0..n).map(|i| if i + 1 == n { self.x_max } else { self.x_min + h * i as f64 }).collect()
    }

    /// The three interior quartile points.
    pub fn quartiles(&self) -> [f64; 3] {
        let w = self.x_max - self.x_min;
        [0.25, 0.5, 0.75].map(|f| self.x_min + f * w)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSim {
    #[serde(default = "default_paths")]
    n_paths: usize,
    horizon: Option<f64>,
    #[serde(default = "default_dt")]
    dt: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_delta")]
    delta: f64,
}

fn default_paths() -> usize {
    200_000
}

fn default_dt() -> f64 {
    1e-3
}

fn default_delta() -> f64 {
    0.1
}

impl Default for RawSim {
    fn default() -> Self {
        Self {
            n_paths: default_paths(),
            horizon: None,
            dt: default_dt(),
            seed: 0,
            delta: default_delta(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: RawModel,
    game: RawGame,
    #[serde(default)]
    grid: Grid,
    #[serde(default)]
    sim: RawSim,
}

/// A validated configuration.
#[derive(Debug)]
pub struct RunConfig {
    pub family: Family,
    pub model: LevyModel,
    pub params: GameParams,
    pub grid: Grid,
    pub sim: SimConfig,
    pub delta: f64,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Parses `text`; a relative `density_file` is resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let model = build_model(&raw.model, base)?;
        let g = &raw.game;
        let params = GameParams::new(g.alpha, g.beta, g.q, g.strike).map_err(|e| field("game", e.to_string()))?;
        let grid = raw.grid;
        if !(grid.x_min.is_finite() && grid.x_max.is_finite() && grid.x_min < grid.x_max) {
            return Err(field("grid.x_max", "need finite x_min < x_max"));
        }
        if grid.n_points < 2 {
            return Err(field("grid.n_points", "need at least 2 points"));
        }
        let s = raw.sim;
        let sim = SimConfig {
            n_paths: s.n_paths,
            horizon: s.horizon,
            dt: s.dt,
            seed: s.seed,
            bridge_correction: true,
        };
        if s.n_paths < 2 {
            return Err(field("sim.n_paths", "need at least 2 paths"));
        }
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            return Err(field("sim.dt", "must be positive"));
        }
        if let Some(t) = s.horizon {
            if !(t > 0.0 && t.is_finite()) {
                return Err(field("sim.horizon", "must be positive"));
            }
        }
        if !(s.delta >= 0.0 && s.delta.is_finite()) {
            return Err(field("sim.delta", "must be non-negative"));
        }
        Ok(Self {
            family: raw.model.family,
            model,
            params,
            grid,
            sim,
            delta: s.delta,
        })
    }
}

fn build_model(m: &RawModel, base: &Path) -> Result<LevyModel, ConfigError> {
    let unused = |name: &str, present: bool| {
        if present {
            Err(field(&format!("model.{name}"), format!("not used by family {:?}", m.family)))
        } else {
            Ok(())
        }
    };
    let required = |name: &str, v: Option<f64>| v.ok_or_else(|| field(&format!("model.{name}"), "required"));
    let jumps = match m.family {
        Family::Brownian => {
            unused("lambda", m.lambda.is_some())?;
            unused("rho", m.rho.is_some())?;
            unused("density_file", m.density_file.is_some())?;
            unused("tail_rate", m.tail_rate.is_some())?;
            if !(m.b2 > 0.0) {
                return Err(field("model.b2", "the brownian family needs b2 > 0"));
            }
            JumpSpec::NoJumps
        }
        Family::ExpJumps => {
            unused("density_file", m.density_file.is_some())?;
            unused("tail_rate", m.tail_rate.is_some())?;
            JumpSpec::Exponential {
                intensity: required("lambda", m.lambda)?,
                decay: required("rho", m.rho)?,
            }
        }
        Family::Tabulated => {
            unused("lambda", m.lambda.is_some())?;
            unused("rho", m.rho.is_some())?;
            let file = m
                .density_file
                .as_ref()
                .ok_or_else(|| field("model.density_file", "required"))?;
            let tail = required("tail_rate", m.tail_rate)?;
            let (grid, values) = read_density(&base.join(file))?;
            let density =
                TabulatedDensity::new(grid, values, tail).map_err(|e| field("model.density_file", e.to_string()))?;
            JumpSpec::Tabulated(density)
        }
    };
    LevyModel::new(m.mu, m.b2, jumps).map_err(|e| field("model", e.to_string()))
}

/// Two columns `z g(z)` per line, separated by commas or whitespace; `#` starts a comment.
fn read_density(path: &Path) -> Result<(Vec<f64>, Vec<f64>), ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut grid = Vec::new();
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        let bad = || field(&format!("model.density_file line {}", i + 1), format!("expected two numbers, got {line:?}"));
        if cols.len() != 2 {
            return Err(bad());
        }
        grid.push(cols[0].parse::<f64>().map_err(|_| bad())?);
        values.push(cols[1].parse::<f64>().map_err(|_| bad())?);
    }
    Ok((grid, values))
}
