//! Regular quad/hex element lattices with unit edge length.
//!
//! Elements are indexed x-fastest, then y, then z. A 2D grid is stored as a
//! single layer (`nz = 1`) whose element centers carry `z = 0`.

use crate::error::{Error, Result};

/// A structured grid of unit square (2D) or unit cube (3D) elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuredGrid {
    dims: [usize; 3],
    dimension: usize,
}

impl StructuredGrid {
    /// Builds a grid from 2 or 3 element counts.
    pub fn new(extents: &[usize]) -> Result<Self> {
        let dimension = extents.len();
        if !(2..=3).contains(&dimension) {
            return Err(Error::invalid(format!(
                "grid needs 2 or 3 extents, got {dimension}"
            )));
        }
        if let Some(bad) = extents.iter().find(|&&n| n == 0) {
            return Err(Error::invalid(format!("grid extent must be >= 1, got {bad}")));
        }
        let mut dims = [1; 3];
        dims[..dimension].copy_from_slice(extents);
        Ok(Self { dims, dimension })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Element counts along x, y, z (z is 1 for 2D grids).
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn extents(&self) -> &[usize] {
        &self.dims[..self.dimension]
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, e: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [e % nx, (e / nx) % ny, e / (nx * ny)]
    }

    /// Lattice coordinates shifted by `offset`, or `None` when outside the grid.
    #[inline]
    pub fn offset(&self, e: usize, offset: [isize; 3]) -> Option<usize> {
        let c = self.coords(e);
        let mut out = [0usize; 3];
        for a in 0..3 {
            let v = c[a] as isize + offset[a];
            if v < 0 || v >= self.dims[a] as isize {
                return None;
            }
            out[a] = v as usize;
        }
        Some(self.index(out[0], out[1], out[2]))
    }

    /// Element center; `z` is 0 on 2D grids.
    pub fn center(&self, e: usize) -> [f64; 3] {
        let c = self.coords(e);
        let mut p = [c[0] as f64 + 0.5, c[1] as f64 + 0.5, c[2] as f64 + 0.5];
        if self.dimension == 2 {
            p[2] = 0.0;
        }
        p
    }

    fn check_element(&self, e: usize) -> Result<()> {
        if e < self.len() {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "element {e} out of range for grid with {} elements",
                self.len()
            )))
        }
    }

    /// All elements whose center lies strictly closer than `radius` to the
    /// center of `element`, including the element itself.
    pub fn neighbors_within_radius(&self, element: usize, radius: f64) -> Result<Vec<(usize, f64)>> {
        self.check_element(element)?;
        if !(radius > 0.0) {
            return Err(Error::invalid(format!("radius must be positive, got {radius}")));
        }
        Ok(lattice_ball(self.dimension, radius)
            .into_iter()
            .filter_map(|(off, dist)| self.offset(element, off).map(|j| (j, dist)))
            .collect())
    }

    /// Node counts along each axis (`nz + 1` is 1 for 2D grids).
    pub fn node_dims(&self) -> [usize; 3] {
        let mut n = [self.dims[0] + 1, self.dims[1] + 1, self.dims[2] + 1];
        if self.dimension == 2 {
            n[2] = 1;
        }
        n
    }

    pub fn node_count(&self) -> usize {
        self.node_dims().iter().product()
    }

    #[inline]
    pub fn node_index(&self, i: usize, j: usize, k: usize) -> usize {
        let [nx, ny, _] = self.node_dims();
        i + nx * (j + ny * k)
    }

    pub fn node_coords(&self, n: usize) -> [usize; 3] {
        let [nx, ny, _] = self.node_dims();
        [n % nx, (n / nx) % ny, n / (nx * ny)]
    }

    /// Global node numbers of an element's corners. Local corner `a` sits at
    /// offset `(a & 1, (a >> 1) & 1, (a >> 2) & 1)`; 2D elements use the first 4.
    pub fn element_nodes(&self, e: usize) -> [usize; 8] {
        let [i, j, k] = self.coords(e);
        let mut nodes = [0; 8];
        let corners = 1 << self.dimension;
        for (a, node) in nodes.iter_mut().enumerate().take(corners) {
            *node = self.node_index(i + (a & 1), j + ((a >> 1) & 1), k + ((a >> 2) & 1));
        }
        nodes
    }

    pub fn dofs_per_node(&self) -> usize {
        self.dimension
    }

    pub fn dof_count(&self) -> usize {
        self.node_count() * self.dimension
    }
}

/// Integer lattice offsets with Euclidean norm strictly below `radius`.
pub(crate) fn lattice_ball(dimension: usize, radius: f64) -> Vec<([isize; 3], f64)> {
    let reach = radius.ceil() as isize;
    let kz = if dimension == 3 { reach } else { 0 };
    let mut out = Vec::new();
    for dz in -kz..=kz {
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                let dist = ((dx * dx + dy * dy + dz * dz) as f64).sqrt();
                if dist < radius {
                    out.push(([dx, dy, dz], dist));
                }
            }
        }
    }
    out
}
