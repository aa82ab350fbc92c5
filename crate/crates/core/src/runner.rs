//! End-to-end runs: config in, artifacts on disk.

use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{check_len, Error, Result};
use crate::filter::FilterKernel;
use crate::grid::StructuredGrid;
use crate::io;
use crate::machining::{monotonicity_violation, MachiningProjection, MillingDirection};
use crate::optimizer::{OptimizationResult, Optimizer};

/// Largest ray-set contribution of fully void elements tolerated without a warning.
pub const SATURATION_WARNING: f64 = 0.4;

/// Violations up to this size are reassociation noise.
pub const MONOTONICITY_ALLOWANCE: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionCheck {
    pub direction: Vec<f64>,
    /// Largest `rho(j) - rho(e)` over elements `e` and `j` in the ray set of `e`.
    pub max_violation: f64,
    /// Elements with a solid element (above 0.5) between them and the entry
    /// face while being void themselves.
    pub blocked_voids: usize,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    fn from(pass: bool) -> Self {
        if pass {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MachinabilityReport {
    pub directions: Vec<DirectionCheck>,
    /// Void elements (below 0.5) that no direction can reach.
    pub inaccessible_voids: usize,
    pub accessible: bool,
}

fn blocked(dir: &MillingDirection, field: &[f64], e: usize) -> bool {
    field[e] < 0.5 && dir.ray_iter(e).any(|j| field[j] >= 0.5)
}

/// Machinability of a density field along each direction.
///
/// A direction passes when no void element is shadowed by solid material
/// along its rays after thresholding at 0.5.
pub fn check_field(
    grid: &StructuredGrid,
    field: &[f64],
    directions: &[Vec<f64>],
    d0: f64,
) -> Result<MachinabilityReport> {
    check_len(grid.len(), field.len())?;
    if directions.is_empty() {
        return Err(Error::invalid("at least one direction is required"));
    }
    let dirs: Vec<MillingDirection> = directions
        .iter()
        .map(|v| {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(Error::invalid("direction must be a finite nonzero vector"));
            }
            let unit: Vec<f64> = v.iter().map(|x| x / norm).collect();
            MillingDirection::new(grid, &unit, d0)
        })
        .collect::<Result<_>>()?;
    let mut checks = Vec::with_capacity(dirs.len());
    for dir in &dirs {
        let max_violation = monotonicity_violation(dir, field)?;
        let blocked_voids = (0..grid.len()).filter(|&e| blocked(dir, field, e)).count();
        checks.push(DirectionCheck {
            direction: dir.vector().to_vec(),
            max_violation,
            blocked_voids,
            verdict: Verdict::from(blocked_voids == 0),
        });
    }
    let inaccessible_voids = (0..grid.len())
        .filter(|&e| field[e] < 0.5 && dirs.iter().all(|d| blocked(d, field, e)))
        .count();
    Ok(MachinabilityReport {
        directions: checks,
        inaccessible_voids,
        accessible: inaccessible_voids == 0,
    })
}

/// Per-direction projected fields of a finished machining run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionCheck {
    pub direction: Vec<f64>,
    pub max_violation: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub compliance: f64,
    pub volume: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Monotonicity of each direction's projected field (machining mode).
    pub projections: Vec<ProjectionCheck>,
    /// Thresholded check of the final composite density.
    pub composite: Option<MachinabilityReport>,
    pub settings: RunConfig,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub result: OptimizationResult,
    pub summary: RunSummary,
    pub artifacts: Vec<PathBuf>,
}

pub fn build_optimizer(config: &RunConfig) -> Result<Optimizer> {
    let grid = config.grid();
    let problem = config.problem();
    let filter = FilterKernel::new(&grid, config.rmin)?;
    let projection = if config.directions.is_empty() {
        None
    } else {
        let dirs = config
            .directions
            .iter()
            .map(|v| MillingDirection::new(&grid, v, config.d0))
            .collect::<Result<Vec<_>>>()?;
        let floor = config.heaviside.h1(0.0);
        for d in &dirs {
            let len = d.max_ray_len();
            if len as f64 * floor > SATURATION_WARNING {
                warn!(
                    "direction {:?}: rays of {len} elements accumulate {:.3} from void alone",
                    d.vector(),
                    len as f64 * floor
                );
            }
            if !d.is_nested() {
                warn!("direction {:?}: ray sets are not nested; projected fields may not be monotone", d.vector());
            }
        }
        Some(MachiningProjection::new(dirs, config.heaviside)?)
    };
    let initial = match &config.init_field {
        Some(path) => {
            let (g, values) = io::read_density(path)?;
            if g != grid {
                return Err(Error::invalid(format!(
                    "initial field {} has extents {:?}, expected {:?}",
                    path.display(),
                    g.extents(),
                    grid.extents()
                )));
            }
            Some(values)
        }
        None => None,
    };
    Optimizer::new(&problem, filter, projection, config.solver, config.optimization_config(initial))
}

/// Optimizes and summarizes without touching the filesystem.
pub fn optimize(config: &RunConfig) -> Result<(OptimizationResult, RunSummary)> {
    let mut optimizer = build_optimizer(config)?;
    let result = optimizer.run(|r| {
        info!(
            "iter {:4}  C {:.6e}  V {:.5}  change {:.4}  ({:.2}s)",
            r.iteration, r.compliance, r.volume, r.change, r.seconds
        );
    })?;
    let grid = config.grid();
    let (projections, composite) = match (optimizer.projection(), &result.fields.projection) {
        (Some(p), Some(state)) => {
            let mut checks = Vec::new();
            for (dir, field) in p.directions().iter().zip(&state.fields) {
                let v = monotonicity_violation(dir, field)?;
                checks.push(ProjectionCheck {
                    direction: dir.vector().to_vec(),
                    max_violation: v,
                    verdict: Verdict::from(v <= MONOTONICITY_ALLOWANCE),
                });
            }
            let report = check_field(&grid, &result.fields.composite, &config.directions, config.d0)?;
            (checks, Some(report))
        }
        _ => (Vec::new(), None),
    };
    let summary = RunSummary {
        compliance: result.compliance,
        volume: result.volume,
        iterations: result.history.len(),
        converged: result.converged,
        projections,
        composite,
        settings: config.clone(),
    };
    Ok((result, summary))
}

/// Writes `history.csv`, `density.vtk`, `density.pgm` (2D) and `summary.json`.
pub fn write_artifacts(dir: &Path, grid: &StructuredGrid, result: &OptimizationResult, summary: &RunSummary) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let history = dir.join("history.csv");
    io::write_history(&history, &result.history)?;
    written.push(history);
    let vtk = dir.join("density.vtk");
    io::write_vtk(&vtk, grid, "density", &result.fields.composite)?;
    written.push(vtk);
    if grid.dimension() == 2 {
        let pgm = dir.join("density.pgm");
        io::write_pgm(&pgm, grid, &result.fields.composite)?;
        written.push(pgm);
    }
    let json = dir.join("summary.json");
    let text = serde_json::to_string_pretty(summary).map_err(|e| Error::invalid(e.to_string()))?;
    fs::write(&json, text + "\n")?;
    written.push(json);
    Ok(written)
}

pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    let (result, summary) = optimize(config)?;
    let artifacts = write_artifacts(&config.output, &config.grid(), &result, &summary)?;
    Ok(RunOutcome {
        result,
        summary,
        artifacts,
    })
}
