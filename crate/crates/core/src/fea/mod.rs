//! Voxel finite-element analysis with SIMP stiffness interpolation.
//!
//! Element modulus is `E_min + rho^p (E0 - E_min)`. Displacements come from
//! conjugate gradients (multigrid or Jacobi preconditioned) or a banded
//! Cholesky factorization.

mod banded;
mod cg;
mod element;
mod multigrid;

use serde::{Deserialize, Serialize};

pub use banded::{BandedCholesky, BandedMatrix};
pub use cg::{pcg, CgOutcome};
pub use element::element_stiffness;

use crate::error::{check_len, Error, Result};
use crate::grid::StructuredGrid;
use multigrid::{DirectSolver, Level, Multigrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialModel {
    pub e0: f64,
    pub nu: f64,
    pub e_min: f64,
    pub penal: f64,
}

impl Default for MaterialModel {
    fn default() -> Self {
        Self {
            e0: 1.0,
            nu: 0.3,
            e_min: 1e-9,
            penal: 3.0,
        }
    }
}

impl MaterialModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.e0 > 0.0 && self.e_min > 0.0 && self.e_min < self.e0) {
            return Err(Error::invalid(format!(
                "need 0 < e_min < e0, got e_min = {}, e0 = {}",
                self.e_min, self.e0
            )));
        }
        if !(self.penal >= 1.0) {
            return Err(Error::invalid(format!("penalization must be >= 1, got {}", self.penal)));
        }
        if !(self.nu > -1.0 && self.nu < 0.5) {
            return Err(Error::invalid(format!("poisson ratio out of range: {}", self.nu)));
        }
        Ok(())
    }

    #[inline]
    pub fn modulus(&self, rho: f64) -> f64 {
        self.e_min + rho.powf(self.penal) * (self.e0 - self.e_min)
    }

    #[inline]
    pub fn modulus_deriv(&self, rho: f64) -> f64 {
        self.penal * rho.powf(self.penal - 1.0) * (self.e0 - self.e_min)
    }
}

/// Boundary conditions, loads and material on a structured grid.
///
/// Nodes follow the grid's node numbering; DOF `node * dim + component`.
#[derive(Debug, Clone)]
pub struct FeaProblem {
    grid: StructuredGrid,
    fixed: Vec<bool>,
    loads: Vec<f64>,
    material: MaterialModel,
}

impl FeaProblem {
    pub fn new(grid: &StructuredGrid, material: MaterialModel) -> Self {
        Self {
            grid: grid.clone(),
            fixed: vec![false; grid.dof_count()],
            loads: vec![0.0; grid.dof_count()],
            material,
        }
    }

    pub fn grid(&self) -> &StructuredGrid {
        &self.grid
    }

    pub fn material(&self) -> &MaterialModel {
        &self.material
    }

    pub fn set_material(&mut self, material: MaterialModel) {
        self.material = material;
    }

    pub fn fixed(&self) -> &[bool] {
        &self.fixed
    }

    pub fn loads(&self) -> &[f64] {
        &self.loads
    }

    pub fn fix(&mut self, node: usize, component: usize) {
        self.fixed[node * self.grid.dimension() + component] = true;
    }

    /// Fixes the given components of every node matching `pred(i, j, k)`.
    pub fn fix_nodes_where<F>(&mut self, components: &[usize], pred: F)
    where
        F: Fn([usize; 3]) -> bool,
    {
        for n in 0..self.grid.node_count() {
            if pred(self.grid.node_coords(n)) {
                for &c in components {
                    self.fix(n, c);
                }
            }
        }
    }

    pub fn add_load(&mut self, node: usize, component: usize, magnitude: f64) {
        self.loads[node * self.grid.dimension() + component] += magnitude;
    }

    /// Left face clamped, unit downward load at the bottom of the right face
    /// (the corner in 2D, the middle of the bottom edge in 3D).
    pub fn cantilever(grid: &StructuredGrid, material: MaterialModel) -> Self {
        let mut p = Self::new(grid, material);
        let all: Vec<usize> = (0..grid.dimension()).collect();
        p.fix_nodes_where(&all, |c| c[0] == 0);
        let [nx, _, nz] = grid.dims();
        let kz = if grid.dimension() == 3 { nz / 2 } else { 0 };
        p.add_load(grid.node_index(nx, 0, kz), 1, -1.0);
        p
    }

    /// Half of an MBB beam cut at its symmetry plane `x = 0`: normal
    /// displacement fixed on the cut, the far bottom edge clamped, unit
    /// downward load at the center of the top face (on the cut).
    pub fn mbb_half(grid: &StructuredGrid, material: MaterialModel) -> Self {
        let mut p = Self::new(grid, material);
        let all: Vec<usize> = (0..grid.dimension()).collect();
        let [nx, ny, nz] = grid.dims();
        p.fix_nodes_where(&[0], |c| c[0] == 0);
        p.fix_nodes_where(&all, |c| c[0] == nx && c[1] == 0);
        let kz = if grid.dimension() == 3 { nz / 2 } else { 0 };
        p.add_load(grid.node_index(0, ny, kz), 1, -1.0);
        p
    }

    pub fn validate(&self) -> Result<()> {
        self.material.validate()?;
        if self.loads.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("loads must be finite"));
        }
        if !self.fixed.iter().any(|&f| f) {
            return Err(Error::invalid("no fixed degrees of freedom"));
        }
        if !self
            .loads
            .iter()
            .zip(&self.fixed)
            .any(|(&l, &f)| l != 0.0 && !f)
        {
            return Err(Error::invalid("no nonzero load on a free degree of freedom"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    /// Conjugate gradients with a geometric multigrid V-cycle.
    Multigrid,
    /// Conjugate gradients with diagonal scaling.
    Jacobi,
    /// Banded Cholesky factorization.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub kind: SolverKind,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub smoothing_sweeps: usize,
    pub smoothing_weight: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            kind: SolverKind::Multigrid,
            tolerance: 1e-8,
            max_iterations: 20_000,
            smoothing_sweeps: 2,
            smoothing_weight: 0.6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub displacement: Vec<f64>,
    pub compliance: f64,
    /// `u_e^T k0 u_e` per element for the unit-modulus element matrix.
    pub element_energy: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Reusable solver for one problem; keeps the last displacement as a warm start.
#[derive(Debug, Clone)]
pub struct FeaSolver {
    problem: FeaProblem,
    settings: SolverSettings,
    k0: Vec<f64>,
    previous: Option<Vec<f64>>,
}

impl FeaSolver {
    pub fn new(problem: &FeaProblem, settings: SolverSettings) -> Result<Self> {
        problem.validate()?;
        if !(settings.tolerance > 0.0) || settings.max_iterations == 0 {
            return Err(Error::invalid("solver tolerance and iteration cap must be positive"));
        }
        Ok(Self {
            k0: element_stiffness(problem.material.nu, problem.grid.dimension()),
            problem: problem.clone(),
            settings,
            previous: None,
        })
    }

    pub fn problem(&self) -> &FeaProblem {
        &self.problem
    }

    pub fn element_matrix(&self) -> &[f64] {
        &self.k0
    }

    pub fn solve(&mut self, rho: &[f64]) -> Result<SolveResult> {
        let grid = &self.problem.grid;
        check_len(grid.len(), rho.len())?;
        let material = self.problem.material;
        let modulus: Vec<f64> = rho.iter().map(|&r| material.modulus(r)).collect();
        let level = Level::fine(grid, &self.problem.fixed, &self.k0, modulus);
        let b: Vec<f64> = self
            .problem
            .loads
            .iter()
            .zip(&self.problem.fixed)
            .map(|(&l, &f)| if f { 0.0 } else { l })
            .collect();

        let mut u = self
            .previous
            .clone()
            .unwrap_or_else(|| vec![0.0; b.len()]);
        let s = &self.settings;
        let (iterations, relative_residual) = match s.kind {
            SolverKind::Direct => {
                DirectSolver::new(&level)?.solve(&b, &mut u);
                let mut au = vec![0.0; b.len()];
                level.apply(&u, &mut au);
                let bn = norm(&b);
                let rn = norm(&au.iter().zip(&b).map(|(a, b)| a - b).collect::<Vec<_>>());
                (1, if bn > 0.0 { rn / bn } else { 0.0 })
            }
            SolverKind::Jacobi => {
                let inv: Vec<f64> = level.diagonal().iter().map(|d| 1.0 / d).collect();
                let out = pcg(
                    |x, y| level.apply(x, y),
                    |r, z| z.iter_mut().zip(r).zip(&inv).for_each(|((z, r), d)| *z = r * d),
                    &b,
                    &mut u,
                    s.tolerance,
                    s.max_iterations,
                )?;
                (out.iterations, out.relative_residual)
            }
            SolverKind::Multigrid => {
                let mg = Multigrid::new(level, s.smoothing_sweeps.max(1), s.smoothing_weight)?;
                log::trace!("multigrid hierarchy with {} levels", mg.depth());
                let out = pcg(
                    |x, y| mg.fine().apply(x, y),
                    |r, z| mg.apply(r, z),
                    &b,
                    &mut u,
                    s.tolerance,
                    s.max_iterations,
                )?;
                (out.iterations, out.relative_residual)
            }
        };
        let result = self.finish(u, &b, iterations, relative_residual);
        self.previous = Some(result.displacement.clone());
        Ok(result)
    }

    fn finish(&self, u: Vec<f64>, b: &[f64], iterations: usize, relative_residual: f64) -> SolveResult {
        let grid = &self.problem.grid;
        let compliance = u.iter().zip(b).map(|(u, f)| u * f).sum();
        let level = Level::fine(grid, &self.problem.fixed, &self.k0, Vec::new());
        let ne = (1usize << grid.dimension()) * grid.dimension();
        let element_energy = (0..grid.len())
            .map(|e| {
                let dofs = level.edofs(e);
                let mut energy = 0.0;
                for r in 0..ne {
                    let ur = u[dofs[r] as usize];
                    let row: f64 = (0..ne).map(|c| self.k0[r * ne + c] * u[dofs[c] as usize]).sum();
                    energy += ur * row;
                }
                energy
            })
            .collect();
        SolveResult {
            displacement: u,
            compliance,
            element_energy,
            iterations,
            relative_residual,
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// One-shot solve with default settings.
pub fn solve(problem: &FeaProblem, rho: &[f64]) -> Result<SolveResult> {
    FeaSolver::new(problem, SolverSettings::default())?.solve(rho)
}

/// `dC/drho(e) = -p rho^(p-1) (E0 - E_min) u_e^T k0 u_e`.
pub fn compliance_sensitivity(material: &MaterialModel, rho: &[f64], result: &SolveResult) -> Vec<f64> {
    rho.iter()
        .zip(&result.element_energy)
        .map(|(&r, &w)| -material.modulus_deriv(r) * w)
        .collect()
}

pub fn volume_fraction(rho: &[f64]) -> f64 {
    rho.iter().sum::<f64>() / rho.len() as f64
}

pub fn volume_sensitivity(len: usize) -> Vec<f64> {
    vec![1.0 / len as f64; len]
}
