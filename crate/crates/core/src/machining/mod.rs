//! Machining-constraint projection.
//!
//! The fictitious field is pushed through `H1`, summed along each element's ray
//! toward the tool entry face, and mapped through `H2`. Any material on a ray
//! shadows every element deeper along it, so the projected field of a direction
//! is monotone non-decreasing along the insertion direction. Multiple
//! directions are combined by an elementwise product: an element is void when
//! it is reachable from at least one direction.

mod heaviside;
mod projection;
mod rays;

pub use heaviside::{heaviside1, heaviside1_deriv, heaviside2, heaviside2_deriv, HeavisideParams};
pub use projection::{
    combine_directions, project_direction, ray_sums, ray_sums_transpose, MachiningProjection,
    ProjectionState,
};
pub use rays::{ray_membership, AxisRay, MillingDirection, DEFAULT_RAY_THRESHOLD};

/// Largest increase of `field` when stepping from an element to any element of
/// its ray set (toward the entry face). Zero for a field that is monotone
/// non-decreasing along the insertion direction.
pub fn monotonicity_violation(dir: &MillingDirection, field: &[f64]) -> crate::Result<f64> {
    crate::error::check_len(dir.grid().len(), field.len())?;
    Ok((0..field.len())
        .flat_map(|e| dir.ray_iter(e).map(move |j| field[j] - field[e]))
        .fold(0.0, f64::max))
}
