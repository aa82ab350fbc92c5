//! Ray sets along the reverse milling direction.
//!
//! Element `j` belongs to `M(e)` when the center of `j` projects onto the ray
//! `center(e) - t * d, t >= 0` with perpendicular distance below `d0`. Both
//! conditions only depend on the integer offset `center(j) - center(e)`, so a
//! direction stores the admissible offsets once, sorted by `t`, and `M(e)` is
//! the subset landing inside the grid.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::grid::StructuredGrid;

/// Default perpendicular cutoff, half an element edge.
pub const DEFAULT_RAY_THRESHOLD: f64 = 0.5;

const UNIT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
struct RayOffset {
    offset: [isize; 3],
    linear: isize,
}

/// Axis-aligned directions: the axis index and the step (+1 or -1) taken when
/// marching from an element toward the tool entry face.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AxisRay {
    pub axis: usize,
    pub step: isize,
}

/// A tool insertion direction with its precomputed ray geometry.
#[derive(Debug, Clone)]
pub struct MillingDirection {
    grid: StructuredGrid,
    vector: [f64; 3],
    threshold: f64,
    offsets: Vec<RayOffset>,
    axis: Option<AxisRay>,
}

impl MillingDirection {
    /// `vector` is the unit insertion direction (tool travels along `+vector`),
    /// with as many components as the grid has dimensions.
    pub fn new(grid: &StructuredGrid, vector: &[f64], threshold: f64) -> Result<Self> {
        if vector.len() != grid.dimension() {
            return Err(Error::invalid(format!(
                "direction has {} components on a {}D grid",
                vector.len(),
                grid.dimension()
            )));
        }
        let norm = vector.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::invalid(format!(
                "milling direction must be a unit vector, got norm {norm}"
            )));
        }
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(Error::invalid(format!(
                "ray threshold must lie in (0, 1], got {threshold}"
            )));
        }
        let mut d = [0.0; 3];
        d[..vector.len()].copy_from_slice(vector);

        let axis = {
            let nonzero: Vec<usize> = (0..3).filter(|&a| d[a] != 0.0).collect();
            match nonzero.as_slice() {
                [a] if d[*a].abs() == 1.0 => Some(AxisRay {
                    axis: *a,
                    step: if d[*a] > 0.0 { -1 } else { 1 },
                }),
                _ => None,
            }
        };

        let dims = grid.dims();
        let reach: Vec<isize> = dims.iter().map(|&n| n as isize - 1).collect();
        let mut found: Vec<(f64, RayOffset)> = Vec::new();
        for dz in -reach[2]..=reach[2] {
            for dy in -reach[1]..=reach[1] {
                for dx in -reach[0]..=reach[0] {
                    let delta = [dx as f64, dy as f64, dz as f64];
                    if let Some(t) = ray_membership(delta, d, threshold) {
                        let offset = [dx, dy, dz];
                        let linear = dx + dims[0] as isize * (dy + dims[1] as isize * dz);
                        found.push((t, RayOffset { offset, linear }));
                    }
                }
            }
        }
        found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.linear.cmp(&b.1.linear)));

        Ok(Self {
            grid: grid.clone(),
            vector: d,
            threshold,
            offsets: found.into_iter().map(|(_, o)| o).collect(),
            axis,
        })
    }

    pub fn vector(&self) -> &[f64] {
        &self.vector[..self.grid.dimension()]
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn grid(&self) -> &StructuredGrid {
        &self.grid
    }

    pub fn axis_aligned(&self) -> Option<AxisRay> {
        self.axis
    }

    /// Elements of `M(e)` ordered from `e` toward the tool entry face.
    pub fn ray_set(&self, e: usize) -> Vec<usize> {
        self.ray_iter(e).collect()
    }

    pub(crate) fn ray_iter(&self, e: usize) -> impl DoubleEndedIterator<Item = usize> + '_ {
        let c = self.grid.coords(e);
        let dims = self.grid.dims();
        self.offsets.iter().filter_map(move |o| {
            let inside = (0..3).all(|a| {
                let v = c[a] as isize + o.offset[a];
                v >= 0 && v < dims[a] as isize
            });
            inside.then(|| (e as isize + o.linear) as usize)
        })
    }

    /// Elements `e` whose ray set contains `k`.
    pub(crate) fn reverse_iter(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        let c = self.grid.coords(k);
        let dims = self.grid.dims();
        self.offsets.iter().filter_map(move |o| {
            let inside = (0..3).all(|a| {
                let v = c[a] as isize - o.offset[a];
                v >= 0 && v < dims[a] as isize
            });
            inside.then(|| (k as isize - o.linear) as usize)
        })
    }

    /// Longest ray set over the grid.
    pub fn max_ray_len(&self) -> usize {
        match self.axis {
            Some(AxisRay { axis, .. }) => self.grid.dims()[axis],
            None => (0..self.grid.len())
                .map(|e| self.ray_iter(e).count())
                .max()
                .unwrap_or(0),
        }
    }

    /// Checks that `j in M(e)` implies `M(j) ⊆ M(e)` everywhere on the grid.
    ///
    /// Projected densities are only guaranteed monotone along rays when this holds.
    pub fn is_nested(&self) -> bool {
        if self.axis.is_some() {
            return true;
        }
        let set: HashSet<[isize; 3]> = self.offsets.iter().map(|o| o.offset).collect();
        let dims = self.grid.dims();
        for a in &self.offsets {
            for b in &self.offsets {
                let sum = [
                    a.offset[0] + b.offset[0],
                    a.offset[1] + b.offset[1],
                    a.offset[2] + b.offset[2],
                ];
                // some element e has e, e + a and e + a + b all inside the grid
                let realizable = (0..3).all(|ax| {
                    let pts = [0, a.offset[ax], sum[ax]];
                    let span = pts.iter().max().unwrap() - pts.iter().min().unwrap();
                    span < dims[ax] as isize
                });
                if realizable && !set.contains(&sum) {
                    return false;
                }
            }
        }
        true
    }
}

/// Ray parameter `t` when `delta = center(j) - center(e)` passes the membership test.
pub fn ray_membership(delta: [f64; 3], direction: [f64; 3], threshold: f64) -> Option<f64> {
    let t = -(delta[0] * direction[0] + delta[1] * direction[1] + delta[2] * direction[2]);
    if t < 0.0 {
        return None;
    }
    let perp: f64 = (0..3)
        .map(|a| {
            let r = delta[a] + t * direction[a];
            r * r
        })
        .sum::<f64>()
        .sqrt();
    (perp < threshold).then_some(t)
}
