//! Outer optimization loop: void field -> fictitious field -> projected
//! physical field -> compliance and volume, with optimality-criteria updates.
//!
//! The optimality-criteria step works on the material variable `m = 1 - rho_v`,
//! for which compliance decreases and volume increases monotonically.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::fea::{self, FeaProblem, FeaSolver, SolveResult, SolverSettings};
use crate::filter::FilterKernel;
use crate::machining::{MachiningProjection, ProjectionState};

/// Volume target accuracy required of every design update.
pub const VOLUME_TOLERANCE: f64 = 1e-4;

const LAMBDA_RANGE: (f64, f64) = (1e-9, 1e9);
const BISECTION_TARGET: f64 = 1e-6;
const MAX_BISECTION_STEPS: usize = 200;

const MOVE_SHRINK: f64 = 0.5;
const MOVE_GROW: f64 = 1.2;
const MIN_MOVE_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Filtered SIMP without machining projection.
    Reference,
    Machining,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialDesign {
    /// Uniform void field whose physical volume equals the target.
    Matched,
    Uniform(f64),
    Field(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationConfig {
    pub volfrac: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub move_limit: f64,
    pub damping: f64,
    pub sensitivity_floor: f64,
    pub initial: InitialDesign,
    pub mode: Mode,
    /// Shrink an element's move limit whenever its update reverses direction
    /// and grow it back while the direction persists.
    pub adaptive_moves: bool,
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        Self {
            volfrac: 0.3,
            max_iterations: 300,
            tolerance: 0.01,
            move_limit: 0.2,
            damping: 0.5,
            sensitivity_floor: 1e-10,
            initial: InitialDesign::Matched,
            mode: Mode::Reference,
            adaptive_moves: false,
        }
    }
}

impl OptimizationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.volfrac > 0.0 && self.volfrac < 1.0) {
            return Err(Error::invalid(format!("volume fraction must lie in (0, 1), got {}", self.volfrac)));
        }
        if !(self.move_limit > 0.0 && self.move_limit <= 1.0) {
            return Err(Error::invalid(format!("move limit must lie in (0, 1], got {}", self.move_limit)));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::invalid(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if !(self.tolerance >= 0.0) || !(self.sensitivity_floor > 0.0) {
            return Err(Error::invalid("tolerance and sensitivity floor must be non-negative"));
        }
        match &self.initial {
            InitialDesign::Uniform(v) if !(0.0..=1.0).contains(v) => {
                Err(Error::invalid(format!("initial void value must lie in [0, 1], got {v}")))
            }
            InitialDesign::Field(f) if f.iter().any(|v| !(0.0..=1.0).contains(v)) => {
                Err(Error::invalid("initial void field values must lie in [0, 1]"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub compliance: f64,
    pub volume: f64,
    pub change: f64,
    pub seconds: f64,
}

/// Density fields derived from a void field, before the finite-element solve.
#[derive(Debug, Clone)]
pub struct PhysicalFields {
    pub rho_f: Vec<f64>,
    pub projection: Option<ProjectionState>,
    pub composite: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ForwardState {
    pub fields: PhysicalFields,
    pub solve: SolveResult,
    pub compliance: f64,
    pub volume: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub rho_v: Vec<f64>,
    pub fields: PhysicalFields,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
    pub compliance: f64,
    pub volume: f64,
}

/// The full design chain for one problem.
#[derive(Debug, Clone)]
pub struct Optimizer {
    filter: FilterKernel,
    projection: Option<MachiningProjection>,
    solver: FeaSolver,
    config: OptimizationConfig,
}

impl Optimizer {
    pub fn new(
        problem: &FeaProblem,
        filter: FilterKernel,
        projection: Option<MachiningProjection>,
        solver_settings: SolverSettings,
        config: OptimizationConfig,
    ) -> Result<Self> {
        config.validate()?;
        if filter.grid() != problem.grid() {
            return Err(Error::invalid("filter and problem grids differ"));
        }
        match (&config.mode, &projection) {
            (Mode::Machining, None) => {
                return Err(Error::invalid("machining mode needs at least one milling direction"))
            }
            (Mode::Reference, Some(_)) => {
                return Err(Error::invalid("reference mode takes no milling directions"))
            }
            (Mode::Machining, Some(p)) if p.directions()[0].grid() != problem.grid() => {
                return Err(Error::invalid("milling directions were built on a different grid"))
            }
            _ => {}
        }
        if let InitialDesign::Field(f) = &config.initial {
            check_len(problem.grid().len(), f.len())?;
        }
        Ok(Self {
            filter,
            projection,
            solver: FeaSolver::new(problem, solver_settings)?,
            config,
        })
    }

    pub fn config(&self) -> &OptimizationConfig {
        &self.config
    }

    pub fn filter(&self) -> &FilterKernel {
        &self.filter
    }

    pub fn projection(&self) -> Option<&MachiningProjection> {
        self.projection.as_ref()
    }

    pub fn problem(&self) -> &FeaProblem {
        self.solver.problem()
    }

    fn len(&self) -> usize {
        self.filter.grid().len()
    }

    /// Filter and projection stages only.
    pub fn physical(&self, rho_v: &[f64]) -> Result<PhysicalFields> {
        let rho_f = self.filter.apply(rho_v)?;
        Ok(match &self.projection {
            Some(p) => {
                let state = p.forward(&rho_f)?;
                PhysicalFields {
                    composite: state.composite.clone(),
                    projection: Some(state),
                    rho_f,
                }
            }
            None => PhysicalFields {
                composite: rho_f.clone(),
                projection: None,
                rho_f,
            },
        })
    }

    fn composite_volume(&self, rho_v: &[f64]) -> Result<f64> {
        let rho_f = self.filter.apply(rho_v)?;
        let composite = match &self.projection {
            Some(p) => p.composite(&rho_f)?,
            None => rho_f,
        };
        Ok(fea::volume_fraction(&composite))
    }

    pub fn forward(&mut self, rho_v: &[f64]) -> Result<ForwardState> {
        check_len(self.len(), rho_v.len())?;
        let fields = self.physical(rho_v)?;
        let solve = self.solver.solve(&fields.composite)?;
        Ok(ForwardState {
            compliance: solve.compliance,
            volume: fea::volume_fraction(&fields.composite),
            fields,
            solve,
        })
    }

    /// Gradients of compliance and volume with respect to the void field.
    pub fn total_gradient(&self, state: &ForwardState) -> Result<(Vec<f64>, Vec<f64>)> {
        let fields = &state.fields;
        let material = self.solver.problem().material();
        let dc = fea::compliance_sensitivity(material, &fields.composite, &state.solve);
        let dv = fea::volume_sensitivity(self.len());
        let to_void = |g: &[f64]| -> Result<Vec<f64>> {
            match (&self.projection, &fields.projection) {
                (Some(p), Some(ps)) => self.filter.backprop(&p.backprop(&fields.rho_f, ps, g)?),
                _ => self.filter.backprop(g),
            }
        };
        Ok((to_void(&dc)?, to_void(&dv)?))
    }

    /// Optimality-criteria update with the volume multiplier found by bisection.
    pub fn oc_update(&self, rho_v: &[f64], dc: &[f64], dv: &[f64]) -> Result<Vec<f64>> {
        self.oc_update_with_moves(rho_v, dc, dv, &vec![self.config.move_limit; self.len()])
    }

    /// As [`Optimizer::oc_update`] with a move limit per element.
    pub fn oc_update_with_moves(&self, rho_v: &[f64], dc: &[f64], dv: &[f64], moves: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        check_len(n, rho_v.len())?;
        check_len(n, moves.len())?;
        check_len(n, dc.len())?;
        check_len(n, dv.len())?;
        let cfg = &self.config;
        let material: Vec<f64> = rho_v.iter().map(|v| 1.0 - v).collect();
        // d/dm = -d/drho_v; both scaled to unit mean so the multiplier
        // bracket does not depend on the magnitude of the compliance
        let scale = |g: &[f64]| {
            let mean = g.iter().map(|v| v.abs()).sum::<f64>() / n as f64;
            if mean > 0.0 && mean.is_finite() { 1.0 / mean } else { 1.0 }
        };
        let (sc, sv) = (scale(dc), scale(dv));
        let gain: Vec<f64> = dc.iter().map(|g| (g * sc).max(cfg.sensitivity_floor)).collect();
        let cost: Vec<f64> = dv.iter().map(|g| (-g * sv).max(f64::MIN_POSITIVE)).collect();

        let candidate = |lambda: f64| -> Vec<f64> {
            (0..n)
                .map(|e| {
                    let m = material[e];
                    let lo = (m - moves[e]).max(0.0);
                    let hi = (m + moves[e]).min(1.0);
                    let scaled = m * (gain[e] / (lambda * cost[e])).powf(cfg.damping);
                    let next = if scaled.is_nan() { hi } else { scaled.clamp(lo, hi) };
                    1.0 - next
                })
                .collect()
        };

        let target = cfg.volfrac;
        let (mut lo, mut hi) = (LAMBDA_RANGE.0.ln(), LAMBDA_RANGE.1.ln());
        let v_lo = self.composite_volume(&candidate(lo.exp()))?;
        let v_hi = self.composite_volume(&candidate(hi.exp()))?;
        if v_lo < target - VOLUME_TOLERANCE {
            return Err(Error::BisectionFailed { target, achieved: v_lo });
        }
        if v_hi > target + VOLUME_TOLERANCE {
            return Err(Error::BisectionFailed { target, achieved: v_hi });
        }
        let mut best = (f64::INFINITY, Vec::new());
        for _ in 0..MAX_BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            let design = candidate(mid.exp());
            let v = self.composite_volume(&design)?;
            let err = (v - target).abs();
            if err < best.0 {
                best = (err, design);
            }
            if err < BISECTION_TARGET || hi - lo < 1e-13 {
                break;
            }
            // volume decreases as lambda grows
            if v > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if best.0 >= VOLUME_TOLERANCE {
            return Err(Error::BisectionFailed {
                target,
                achieved: target + best.0,
            });
        }
        Ok(best.1)
    }

    /// Starting void field.
    pub fn initial_design(&self) -> Result<Vec<f64>> {
        let n = self.len();
        match &self.config.initial {
            InitialDesign::Uniform(v) => Ok(vec![*v; n]),
            InitialDesign::Field(f) => Ok(f.clone()),
            InitialDesign::Matched if self.projection.is_none() => Ok(vec![1.0 - self.config.volfrac; n]),
            InitialDesign::Matched => {
                let target = self.config.volfrac;
                let (mut lo, mut hi) = (0.0, 1.0);
                let v_full = self.composite_volume(&vec![hi; n])?;
                if v_full > target {
                    return Err(Error::BisectionFailed { target, achieved: v_full });
                }
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if self.composite_volume(&vec![mid; n])? > target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Ok(vec![0.5 * (lo + hi); n])
            }
        }
    }

    pub fn run<F>(&mut self, mut observer: F) -> Result<OptimizationResult>
    where
        F: FnMut(&IterationRecord),
    {
        let mut rho_v = self.initial_design()?;
        let mut history = Vec::new();
        let mut converged = false;
        let limit = self.config.move_limit;
        let mut moves = vec![limit; rho_v.len()];
        let mut last_step = vec![0.0; rho_v.len()];
        for iteration in 1..=self.config.max_iterations {
            let start = Instant::now();
            let state = self.forward(&rho_v)?;
            let (dc, dv) = self.total_gradient(&state)?;
            let next = self.oc_update_with_moves(&rho_v, &dc, &dv, &moves)?;
            if self.config.adaptive_moves {
                for e in 0..moves.len() {
                    let step = next[e] - rho_v[e];
                    moves[e] = if step * last_step[e] < 0.0 {
                        (moves[e] * MOVE_SHRINK).max(MIN_MOVE_FRACTION * limit)
                    } else {
                        (moves[e] * MOVE_GROW).min(limit)
                    };
                    last_step[e] = step;
                }
            }
            let change = next
                .iter()
                .zip(&rho_v)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            rho_v = next;
            let record = IterationRecord {
                iteration,
                compliance: state.compliance,
                volume: state.volume,
                change,
                seconds: start.elapsed().as_secs_f64(),
            };
            observer(&record);
            history.push(record);
            if change < self.config.tolerance {
                converged = true;
                break;
            }
        }
        let final_state = self.forward(&rho_v)?;
        Ok(OptimizationResult {
            compliance: final_state.compliance,
            volume: final_state.volume,
            fields: final_state.fields,
            rho_v,
            history,
            converged,
        })
    }
}
