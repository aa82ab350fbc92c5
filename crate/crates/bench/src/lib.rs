//! Shared fixtures for the kernel benchmarks.

use topomill_core::{FilterKernel, HeavisideParams, MachiningProjection, MillingDirection, StructuredGrid};

/// Deterministic field in `[0, 1]` with some spatial structure.
pub fn sample_field(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 + 0.45 * ((i as f64) * 0.37).sin()).collect()
}

pub fn axis_directions(grid: &StructuredGrid) -> Vec<Vec<f64>> {
    let dim = grid.dimension();
    let mut out = Vec::new();
    for a in 0..dim {
        for s in [1.0, -1.0] {
            let mut v = vec![0.0; dim];
            v[a] = s;
            out.push(v);
        }
    }
    out
}

pub fn projection(grid: &StructuredGrid, directions: &[Vec<f64>]) -> MachiningProjection {
    let dirs = directions
        .iter()
        .map(|v| MillingDirection::new(grid, v, 0.5).expect("valid direction"))
        .collect();
    MachiningProjection::new(dirs, HeavisideParams::default()).expect("valid projection")
}

pub fn filter(grid: &StructuredGrid, r_min: f64) -> FilterKernel {
    FilterKernel::new(grid, r_min).expect("valid filter")
}
