//! Linear density filter mapping the void field to the fictitious material field.
//!
//! `rho_f(f) = (1 / S_f) * sum_{i in N_f} d_fi * (1 - rho_v(i))` with cone weights
//! `d_fi = r_min - dist(f, i)` over elements strictly closer than `r_min`.
//! The stencil is translation invariant on the lattice, so only the offsets,
//! their weights and the per-element sums `S_f` are stored.

use crate::error::{check_len, Error, Result};
use crate::grid::{lattice_ball, StructuredGrid};

#[derive(Debug, Clone)]
pub struct FilterKernel {
    grid: StructuredGrid,
    radius: f64,
    stencil: Vec<StencilEntry>,
    sums: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct StencilEntry {
    offset: [isize; 3],
    linear: isize,
    weight: f64,
}

impl FilterKernel {
    pub fn new(grid: &StructuredGrid, r_min: f64) -> Result<Self> {
        if !(r_min > 0.0) || !r_min.is_finite() {
            return Err(Error::invalid(format!("filter radius must be positive, got {r_min}")));
        }
        let [nx, ny, _] = grid.dims();
        let stencil: Vec<_> = lattice_ball(grid.dimension(), r_min)
            .into_iter()
            .map(|(offset, dist)| StencilEntry {
                offset,
                linear: offset[0] + nx as isize * (offset[1] + ny as isize * offset[2]),
                weight: r_min - dist,
            })
            .filter(|s| s.weight > 0.0)
            .collect();
        let mut kernel = Self {
            grid: grid.clone(),
            radius: r_min,
            stencil,
            sums: Vec::new(),
        };
        kernel.sums = (0..grid.len())
            .map(|f| kernel.neighbors(f).map(|(_, w)| w).sum())
            .collect();
        Ok(kernel)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn grid(&self) -> &StructuredGrid {
        &self.grid
    }

    /// Normalization sum `S_f` of element `f`.
    pub fn weight_sum(&self, f: usize) -> f64 {
        self.sums[f]
    }

    /// Neighbours of `f` paired with their raw weights `d_fi`.
    pub fn neighbors(&self, f: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let c = self.grid.coords(f);
        let dims = self.grid.dims();
        self.stencil.iter().filter_map(move |s| {
            let inside = (0..3).all(|a| {
                let v = c[a] as isize + s.offset[a];
                v >= 0 && v < dims[a] as isize
            });
            inside.then(|| ((f as isize + s.linear) as usize, s.weight))
        })
    }

    /// Number of stencil entries of an interior element.
    pub fn stencil_len(&self) -> usize {
        self.stencil.len()
    }

    /// Normalized weighted average `W x`.
    pub fn average(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.grid.len(), x.len())?;
        Ok((0..x.len())
            .map(|f| {
                let acc: f64 = self.neighbors(f).map(|(i, w)| w * x[i]).sum();
                acc / self.sums[f]
            })
            .collect())
    }

    /// Transpose of [`average`](Self::average): `(W^T y)(i) = sum_f d_fi / S_f * y(f)`.
    pub fn average_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.grid.len(), y.len())?;
        let scaled: Vec<f64> = y.iter().zip(&self.sums).map(|(v, s)| v / s).collect();
        // weights are symmetric, so gathering over the same stencil is the transpose
        Ok((0..y.len())
            .map(|i| self.neighbors(i).map(|(f, w)| w * scaled[f]).sum())
            .collect())
    }

    /// Void field to fictitious field: `1 - W rho_v`.
    pub fn apply(&self, rho_v: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.average(rho_v)?;
        out.iter_mut().for_each(|v| *v = 1.0 - *v);
        Ok(out)
    }

    /// Gradient with respect to the void field given a gradient with respect to
    /// the fictitious field. Carries the minus sign of `1 - rho_v`.
    pub fn backprop(&self, grad_f: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.average_transpose(grad_f)?;
        out.iter_mut().for_each(|v| *v = -*v);
        Ok(out)
    }
}
