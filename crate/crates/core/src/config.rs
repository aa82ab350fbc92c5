//! Run configuration documents.
//!
//! A run is described by one JSON object. `preset` selects a benchmark whose
//! grid, supports, load and volume fraction can then be overridden key by key.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::fea::{FeaProblem, MaterialModel, SolverSettings};
use crate::grid::StructuredGrid;
use crate::machining::{HeavisideParams, DEFAULT_RAY_THRESHOLD};
use crate::optimizer::{InitialDesign, Mode, OptimizationConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Cantilever2d,
    Cantilever3d,
    Mbb3d,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoadCase {
    Cantilever,
    Mbb,
}

impl Preset {
    fn extents(self) -> Option<Vec<usize>> {
        match self {
            Preset::Cantilever2d => Some(vec![100, 100]),
            Preset::Cantilever3d | Preset::Mbb3d => Some(vec![144, 48, 48]),
            Preset::Custom => None,
        }
    }

    fn volfrac(self) -> f64 {
        match self {
            Preset::Cantilever3d => 0.3,
            _ => 0.2,
        }
    }

    fn load_case(self) -> LoadCase {
        match self {
            Preset::Mbb3d => LoadCase::Mbb,
            _ => LoadCase::Cantilever,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSettings {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub move_limit: f64,
    pub damping: f64,
    pub sensitivity_floor: f64,
    /// Uniform starting void value; `None` picks the value whose projected
    /// volume equals the target.
    pub initial_void: Option<f64>,
    pub adaptive_moves: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptimizer {
    max_iterations: Option<usize>,
    tolerance: Option<f64>,
    move_limit: Option<f64>,
    damping: Option<f64>,
    sensitivity_floor: Option<f64>,
    initial_void: Option<f64>,
    adaptive_moves: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    preset: Preset,
    extents: Option<Vec<usize>>,
    load_case: Option<LoadCase>,
    volfrac: Option<f64>,
    rmin: Option<f64>,
    penal: Option<f64>,
    emin: Option<f64>,
    e0: Option<f64>,
    nu: Option<f64>,
    mode: Option<Mode>,
    #[serde(default)]
    directions: Vec<Vec<f64>>,
    d0: Option<f64>,
    #[serde(default)]
    heaviside: HeavisideParams,
    #[serde(default)]
    optimizer: RawOptimizer,
    #[serde(default)]
    solver: SolverSettings,
    output: Option<PathBuf>,
    init_field: Option<PathBuf>,
}

/// A validated run description with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub preset: Preset,
    pub extents: Vec<usize>,
    pub load_case: LoadCase,
    pub volfrac: f64,
    pub rmin: f64,
    pub material: MaterialModel,
    pub mode: Mode,
    /// Unit insertion directions.
    pub directions: Vec<Vec<f64>>,
    pub d0: f64,
    pub heaviside: HeavisideParams,
    pub optimizer: OptimizerSettings,
    pub solver: SolverSettings,
    pub output: PathBuf,
    pub init_field: Option<PathBuf>,
}

const TOP_KEYS: &[&str] = &[
    "preset", "extents", "load_case", "volfrac", "rmin", "penal", "emin", "e0", "nu", "mode",
    "directions", "d0", "heaviside", "optimizer", "solver", "output", "init_field",
];
const HEAVISIDE_KEYS: &[&str] = &["slope1", "shift1", "slope2", "shift2"];
const OPTIMIZER_KEYS: &[&str] = &[
    "max_iterations", "tolerance", "move_limit", "damping", "sensitivity_floor", "initial_void",
    "adaptive_moves",
];
const SOLVER_KEYS: &[&str] = &[
    "kind", "tolerance", "max_iterations", "smoothing_sweeps", "smoothing_weight",
];

fn unknown_keys(doc: &Value) -> Vec<String> {
    let mut unknown = Vec::new();
    let Value::Object(top) = doc else {
        return unknown;
    };
    for (key, value) in top {
        let nested = match key.as_str() {
            "heaviside" => Some(HEAVISIDE_KEYS),
            "optimizer" => Some(OPTIMIZER_KEYS),
            "solver" => Some(SOLVER_KEYS),
            k if TOP_KEYS.contains(&k) => None,
            _ => {
                unknown.push(key.clone());
                continue;
            }
        };
        if let (Some(allowed), Value::Object(inner)) = (nested, value) {
            unknown.extend(
                inner
                    .keys()
                    .filter(|k| !allowed.contains(&k.as_str()))
                    .map(|k| format!("{key}.{k}")),
            );
        }
    }
    unknown
}

fn config_error(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_string(),
        message: message.into(),
    }
}

fn normalize(v: &[f64], index: usize) -> Result<Vec<f64>> {
    let path = format!("directions[{index}]");
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !norm.is_finite() || norm == 0.0 {
        return Err(config_error(&path, "direction must be a finite nonzero vector"));
    }
    Ok(v.iter().map(|x| x / norm).collect())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(text).map_err(|e| config_error("", e.to_string()))?;
        if !doc.is_object() {
            return Err(config_error("", "config must be a JSON object"));
        }
        let unknown = unknown_keys(&doc);
        if !unknown.is_empty() {
            return Err(Error::UnknownKeys(unknown));
        }
        let raw: RawConfig = serde_path_to_error::deserialize(doc).map_err(|e| {
            let path = e.path().to_string();
            config_error(&path, e.into_inner().to_string())
        })?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let extents = match (raw.extents, raw.preset.extents()) {
            (Some(e), _) | (None, Some(e)) => e,
            (None, None) => return Err(config_error("extents", "required for the custom preset")),
        };
        StructuredGrid::new(&extents).map_err(|e| config_error("extents", e.to_string()))?;
        let dimension = extents.len();

        let defaults = MaterialModel::default();
        let material = MaterialModel {
            e0: raw.e0.unwrap_or(defaults.e0),
            nu: raw.nu.unwrap_or(defaults.nu),
            e_min: raw.emin.unwrap_or(defaults.e_min),
            penal: raw.penal.unwrap_or(defaults.penal),
        };
        material.validate().map_err(|e| config_error("material", e.to_string()))?;

        let volfrac = raw.volfrac.unwrap_or(raw.preset.volfrac());
        if !(volfrac > 0.0 && volfrac < 1.0) {
            return Err(config_error("volfrac", format!("must lie in (0, 1), got {volfrac}")));
        }
        let rmin = raw.rmin.unwrap_or(4.0);
        if !(rmin > 0.0 && rmin.is_finite()) {
            return Err(config_error("rmin", format!("must be positive, got {rmin}")));
        }
        let d0 = raw.d0.unwrap_or(DEFAULT_RAY_THRESHOLD);
        if !(d0 > 0.0 && d0 <= 1.0) {
            return Err(config_error("d0", format!("must lie in (0, 1], got {d0}")));
        }
        raw.heaviside
            .validate()
            .map_err(|e| config_error("heaviside", e.to_string()))?;

        let mut directions = Vec::with_capacity(raw.directions.len());
        for (i, v) in raw.directions.iter().enumerate() {
            if v.len() != dimension {
                return Err(config_error(
                    &format!("directions[{i}]"),
                    format!("expected {dimension} components, got {}", v.len()),
                ));
            }
            directions.push(normalize(v, i)?);
        }
        let mode = raw.mode.unwrap_or(if directions.is_empty() {
            Mode::Reference
        } else {
            Mode::Machining
        });
        match mode {
            Mode::Machining if directions.is_empty() => {
                return Err(config_error("directions", "machining mode needs at least one direction"))
            }
            Mode::Reference if !directions.is_empty() => {
                return Err(config_error("directions", "reference mode takes no directions"))
            }
            _ => {}
        }

        let o = raw.optimizer;
        let optimizer = OptimizerSettings {
            max_iterations: o.max_iterations.unwrap_or(if dimension == 2 { 300 } else { 200 }),
            tolerance: o.tolerance.unwrap_or(0.01),
            move_limit: o.move_limit.unwrap_or(match mode {
                Mode::Reference => 0.2,
                Mode::Machining => 0.1,
            }),
            damping: o.damping.unwrap_or(0.5),
            sensitivity_floor: o.sensitivity_floor.unwrap_or(1e-10),
            initial_void: o.initial_void.or(match mode {
                Mode::Reference => Some(0.7),
                Mode::Machining => None,
            }),
            adaptive_moves: o.adaptive_moves.unwrap_or(mode == Mode::Machining),
        };

        let config = Self {
            preset: raw.preset,
            extents,
            load_case: raw.load_case.unwrap_or(raw.preset.load_case()),
            volfrac,
            rmin,
            material,
            mode,
            directions,
            d0,
            heaviside: raw.heaviside,
            optimizer,
            solver: raw.solver,
            output: raw.output.unwrap_or_else(|| PathBuf::from("output")),
            init_field: raw.init_field,
        };
        config
            .optimization_config(None)
            .validate()
            .map_err(|e| config_error("optimizer", e.to_string()))?;
        if !(config.solver.tolerance > 0.0) || config.solver.max_iterations == 0 {
            return Err(config_error("solver", "tolerance and max_iterations must be positive"));
        }
        Ok(config)
    }

    pub fn grid(&self) -> StructuredGrid {
        StructuredGrid::new(&self.extents).expect("extents validated at parse time")
    }

    pub fn problem(&self) -> FeaProblem {
        let grid = self.grid();
        match self.load_case {
            LoadCase::Cantilever => FeaProblem::cantilever(&grid, self.material),
            LoadCase::Mbb => FeaProblem::mbb_half(&grid, self.material),
        }
    }

    /// Optimizer settings; `initial_field` overrides the uniform start.
    pub fn optimization_config(&self, initial_field: Option<Vec<f64>>) -> OptimizationConfig {
        let o = &self.optimizer;
        let initial = match (initial_field, o.initial_void) {
            (Some(f), _) => InitialDesign::Field(f),
            (None, Some(v)) => InitialDesign::Uniform(v),
            (None, None) => InitialDesign::Matched,
        };
        OptimizationConfig {
            volfrac: self.volfrac,
            max_iterations: o.max_iterations,
            tolerance: o.tolerance,
            move_limit: o.move_limit,
            damping: o.damping,
            sensitivity_floor: o.sensitivity_floor,
            initial,
            mode: self.mode,
            adaptive_moves: o.adaptive_moves,
        }
    }
}

/// The three benchmark documents, as printed by `topomill presets`.
pub fn preset_documents() -> Vec<(&'static str, Value)> {
    vec![
        (
            "cantilever2d",
            serde_json::json!({
                "preset": "cantilever2d",
                "directions": [[1, 0], [0, 1], [-1, 0], [0, -1]],
                "output": "cantilever2d"
            }),
        ),
        (
            "cantilever3d",
            serde_json::json!({
                "preset": "cantilever3d",
                "directions": [[0, 0, 1], [0, 0, -1]],
                "output": "cantilever3d"
            }),
        ),
        (
            "mbb3d",
            serde_json::json!({
                "preset": "mbb3d",
                "directions": [[0, 0, 1], [0, 0, -1]],
                "output": "mbb3d"
            }),
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cantilever2d_defaults() {
        let c = RunConfig::parse(r#"{"preset":"cantilever2d","mode":"reference"}"#).unwrap();
        assert_eq!(c.extents, vec![100, 100]);
        assert_eq!(c.volfrac, 0.2);
        assert_eq!(c.rmin, 4.0);
        assert_eq!(c.mode, Mode::Reference);
        assert_eq!(c.optimizer.max_iterations, 300);
    }

    #[test]
    fn cantilever3d_with_directions() {
        let c = RunConfig::parse(r#"{"preset":"cantilever3d","directions":[[0,0,1],[0,0,-1]]}"#).unwrap();
        assert_eq!(c.extents, vec![144, 48, 48]);
        assert_eq!(c.volfrac, 0.3);
        assert_eq!(c.mode, Mode::Machining);
        assert_eq!(c.optimizer.max_iterations, 200);
    }

    #[test]
    fn custom_needs_extents() {
        let err = RunConfig::parse(r#"{"preset":"custom"}"#).unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "extents"), "{err}");
    }

    #[test]
    fn unknown_keys_are_listed() {
        let err = RunConfig::parse(r#"{"preset":"mbb3d","volume":0.3,"optimizer":{"moves":1}}"#).unwrap_err();
        match err {
            Error::UnknownKeys(keys) => assert_eq!(keys, vec!["optimizer.moves", "volume"]),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn invalid_value_reports_path() {
        let err = RunConfig::parse(r#"{"preset":"custom","extents":[4,4],"solver":{"kind":"lu"}}"#).unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "solver.kind"), "{err}");
        let err = RunConfig::parse(r#"{"preset":"cantilever2d","volfrac":1.5}"#).unwrap_err();
        assert!(matches!(err, Error::Config { ref path, .. } if path == "volfrac"), "{err}");
    }

    #[test]
    fn directions_are_normalized() {
        let c = RunConfig::parse(r#"{"preset":"custom","extents":[6,4],"directions":[[3,4]]}"#).unwrap();
        assert!((c.directions[0][0] - 0.6).abs() < 1e-15);
        assert!((c.directions[0][1] - 0.8).abs() < 1e-15);
        assert!(RunConfig::parse(r#"{"preset":"custom","extents":[6,4],"directions":[[0,0]]}"#).is_err());
        assert!(RunConfig::parse(r#"{"preset":"custom","extents":[6,4],"directions":[[0,0,1]]}"#).is_err());
    }

    #[test]
    fn mode_direction_consistency() {
        assert!(RunConfig::parse(r#"{"preset":"cantilever2d","mode":"machining"}"#).is_err());
        assert!(RunConfig::parse(r#"{"preset":"cantilever2d","mode":"reference","directions":[[1,0]]}"#).is_err());
    }

    #[test]
    fn presets_parse() {
        for (_, doc) in preset_documents() {
            RunConfig::parse(&doc.to_string()).unwrap();
        }
    }
}
