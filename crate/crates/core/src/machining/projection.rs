//! Machinability projection: fictitious field to per-direction physical fields
//! and their elementwise product, plus the exact adjoint.

use super::heaviside::HeavisideParams;
use super::rays::{AxisRay, MillingDirection};
use crate::error::{check_len, Error, Result};

/// Forward quantities retained for the adjoint pass.
#[derive(Debug, Clone)]
pub struct ProjectionState {
    /// Ray sums `s(e) = sum_{j in M(e)} H1(rho_f(j))`, one vector per direction.
    pub sums: Vec<Vec<f64>>,
    /// Per-direction physical fields `H2(s)`.
    pub fields: Vec<Vec<f64>>,
    /// Product over directions.
    pub composite: Vec<f64>,
}

/// Ray sums of `values` along one direction: `out(e) = sum_{j in M(e)} values(j)`.
///
/// Axis-aligned directions run a prefix sum from the entry face inward; other
/// directions walk the stored ray. Both accumulate from the entry face toward
/// `e`, so the two paths agree bitwise on axis-aligned rays.
pub fn ray_sums(dir: &MillingDirection, values: &[f64]) -> Vec<f64> {
    match dir.axis_aligned() {
        Some(axis) => axis_ray_sums(dir, axis, values),
        None => generic_ray_sums(dir, values),
    }
}

pub(crate) fn generic_ray_sums(dir: &MillingDirection, values: &[f64]) -> Vec<f64> {
    (0..values.len())
        .map(|e| dir.ray_iter(e).rev().fold(0.0, |acc, j| acc + values[j]))
        .collect()
}

fn axis_ray_sums(dir: &MillingDirection, axis: AxisRay, values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    for_each_line(dir, axis, |line| {
        // `line` runs from the entry face inward
        let mut acc = 0.0;
        for e in line {
            acc += values[e];
            out[e] = acc;
        }
    });
    out
}

/// Transpose of [`ray_sums`]: `out(k) = sum_{e : k in M(e)} values(e)`.
pub fn ray_sums_transpose(dir: &MillingDirection, values: &[f64]) -> Vec<f64> {
    match dir.axis_aligned() {
        Some(axis) => {
            let mut out = vec![0.0; values.len()];
            for_each_line(dir, axis, |line| {
                let line: Vec<usize> = line.collect();
                let mut acc = 0.0;
                for &k in line.iter().rev() {
                    acc += values[k];
                    out[k] = acc;
                }
            });
            out
        }
        None => (0..values.len())
            .map(|k| dir.reverse_iter(k).map(|e| values[e]).sum())
            .collect(),
    }
}

/// Visits every grid line parallel to the axis, yielding element indices
/// ordered from the tool entry face inward.
fn for_each_line<F>(dir: &MillingDirection, axis: AxisRay, mut visit: F)
where
    F: FnMut(&mut dyn Iterator<Item = usize>),
{
    let grid = dir.grid();
    let dims = grid.dims();
    let a = axis.axis;
    let (b, c) = match a {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let n = dims[a];
    for kc in 0..dims[c] {
        for kb in 0..dims[b] {
            let mut ijk = [0usize; 3];
            ijk[b] = kb;
            ijk[c] = kc;
            let mut line = (0..n).map(|s| {
                // the entry face lies on the side the ray marches toward
                let pos = if axis.step > 0 { n - 1 - s } else { s };
                let mut p = ijk;
                p[a] = pos;
                grid.index(p[0], p[1], p[2])
            });
            visit(&mut line);
        }
    }
}

/// Physical field of one direction, returning `(sums, field)`.
pub fn project_direction(
    dir: &MillingDirection,
    params: &HeavisideParams,
    rho_f: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len(dir.grid().len(), rho_f.len())?;
    let h1: Vec<f64> = rho_f.iter().map(|&v| params.h1(v)).collect();
    let sums = ray_sums(dir, &h1);
    let field = sums.iter().map(|&s| params.h2(s)).collect();
    Ok((sums, field))
}

/// Elementwise product of the per-direction fields.
pub fn combine_directions(fields: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = fields
        .first()
        .ok_or_else(|| Error::invalid("at least one direction field is required"))?;
    let mut out = first.clone();
    for f in &fields[1..] {
        check_len(out.len(), f.len())?;
        out.iter_mut().zip(f).for_each(|(o, v)| *o *= v);
    }
    Ok(out)
}

/// Products over all fields except one, per element, without division.
fn products_excluding(fields: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = fields.len();
    let len = fields[0].len();
    let mut out = vec![vec![1.0; len]; n];
    for e in 0..len {
        let mut prefix = 1.0;
        for i in 0..n {
            out[i][e] = prefix;
            prefix *= fields[i][e];
        }
        let mut suffix = 1.0;
        for i in (0..n).rev() {
            out[i][e] *= suffix;
            suffix *= fields[i][e];
        }
    }
    out
}

/// The full projection over a set of milling directions.
#[derive(Debug, Clone)]
pub struct MachiningProjection {
    directions: Vec<MillingDirection>,
    params: HeavisideParams,
}

impl MachiningProjection {
    pub fn new(directions: Vec<MillingDirection>, params: HeavisideParams) -> Result<Self> {
        params.validate()?;
        let first = directions
            .first()
            .ok_or_else(|| Error::invalid("machining projection needs at least one direction"))?;
        if directions.iter().any(|d| d.grid() != first.grid()) {
            return Err(Error::invalid("all milling directions must share one grid"));
        }
        Ok(Self { directions, params })
    }

    pub fn directions(&self) -> &[MillingDirection] {
        &self.directions
    }

    pub fn params(&self) -> &HeavisideParams {
        &self.params
    }

    fn len(&self) -> usize {
        self.directions[0].grid().len()
    }

    pub fn forward(&self, rho_f: &[f64]) -> Result<ProjectionState> {
        check_len(self.len(), rho_f.len())?;
        let h1: Vec<f64> = rho_f.iter().map(|&v| self.params.h1(v)).collect();
        let mut sums = Vec::with_capacity(self.directions.len());
        let mut fields = Vec::with_capacity(self.directions.len());
        for dir in &self.directions {
            let s = ray_sums(dir, &h1);
            fields.push(s.iter().map(|&v| self.params.h2(v)).collect());
            sums.push(s);
        }
        let composite = combine_directions(&fields)?;
        Ok(ProjectionState {
            sums,
            fields,
            composite,
        })
    }

    /// Composite field only; used by the volume bisection.
    pub fn composite(&self, rho_f: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(rho_f)?.composite)
    }

    /// Gradient with respect to `rho_f` given a gradient with respect to the composite.
    pub fn backprop(
        &self,
        rho_f: &[f64],
        state: &ProjectionState,
        grad_composite: &[f64],
    ) -> Result<Vec<f64>> {
        let n = self.len();
        check_len(n, rho_f.len())?;
        check_len(n, grad_composite.len())?;
        let others = products_excluding(&state.fields);
        let mut acc = vec![0.0; n];
        for (i, dir) in self.directions.iter().enumerate() {
            let seed: Vec<f64> = (0..n)
                .map(|e| grad_composite[e] * others[i][e] * self.params.h2_deriv(state.sums[i][e]))
                .collect();
            let back = ray_sums_transpose(dir, &seed);
            acc.iter_mut().zip(&back).for_each(|(a, b)| *a += b);
        }
        Ok(acc
            .iter()
            .zip(rho_f)
            .map(|(a, &v)| a * self.params.h1_deriv(v))
            .collect())
    }

    /// Directional derivative of the composite along `tangent` (forward mode).
    pub fn jvp(&self, rho_f: &[f64], state: &ProjectionState, tangent: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        check_len(n, rho_f.len())?;
        check_len(n, tangent.len())?;
        let dh1: Vec<f64> = rho_f
            .iter()
            .zip(tangent)
            .map(|(&v, t)| self.params.h1_deriv(v) * t)
            .collect();
        let others = products_excluding(&state.fields);
        let mut out = vec![0.0; n];
        for (i, dir) in self.directions.iter().enumerate() {
            let ds = ray_sums(dir, &dh1);
            for e in 0..n {
                out[e] += others[i][e] * self.params.h2_deriv(state.sums[i][e]) * ds[e];
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::StructuredGrid;
    use crate::machining::heaviside::{heaviside1, heaviside2};

    #[test]
    fn shadow_fills_void_below_material() {
        let g = StructuredGrid::new(&[1, 3]).unwrap();
        let dir = MillingDirection::new(&g, &[0.0, -1.0], 0.5).unwrap();
        let (sums, field) =
            project_direction(&dir, &HeavisideParams::default(), &[0.0, 1.0, 0.0]).unwrap();
        let (h0, h1) = (heaviside1(0.0), heaviside1(1.0));
        assert_eq!(sums, vec![h0 + h1 + h0, h1 + h0, h0]);
        assert!((sums[0] - 1.0049).abs() < 1e-4);
        assert!((field[0] - 0.9976).abs() < 1e-4);
        assert!((field[1] - 0.9976).abs() < 1e-4);
        assert!((field[2] - 0.0025).abs() < 1e-4);
    }

    #[test]
    fn empty_single_element() {
        let g = StructuredGrid::new(&[1, 1]).unwrap();
        let dir = MillingDirection::new(&g, &[1.0, 0.0], 0.5).unwrap();
        let (_, field) = project_direction(&dir, &HeavisideParams::default(), &[0.0]).unwrap();
        assert_eq!(field[0], heaviside2(heaviside1(0.0)));
        assert!((field[0] - 0.00254).abs() < 1e-5);
    }

    #[test]
    fn fast_path_matches_generic_path() {
        let g = StructuredGrid::new(&[5, 4, 3]).unwrap();
        let values: Vec<f64> = (0..g.len()).map(|e| ((e * 37) % 11) as f64 / 11.0).collect();
        for v in [
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
        ] {
            let dir = MillingDirection::new(&g, &v, 0.5).unwrap();
            assert!(dir.axis_aligned().is_some());
            let fast = ray_sums(&dir, &values);
            let slow = generic_ray_sums(&dir, &values);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() <= 1e-14);
            }
            let t_fast = ray_sums_transpose(&dir, &values);
            let t_slow: Vec<f64> = (0..g.len())
                .map(|k| dir.reverse_iter(k).map(|e| values[e]).sum())
                .collect();
            for (a, b) in t_fast.iter().zip(&t_slow) {
                assert!((a - b).abs() <= 1e-13);
            }
        }
    }

    #[test]
    fn combine() {
        assert_eq!(combine_directions(&[vec![0.3, 0.7]]).unwrap(), vec![0.3, 0.7]);
        assert_eq!(
            combine_directions(&[vec![1.0, 1.0], vec![1.0, 0.0]]).unwrap(),
            vec![1.0, 0.0]
        );
        let c = 0.9975;
        let six = vec![vec![c; 3]; 6];
        for v in combine_directions(&six).unwrap() {
            assert!((v - c.powi(6)).abs() < 1e-15);
        }
        assert!(combine_directions(&[]).is_err());
        assert!(combine_directions(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn zero_seed_gives_zero_gradient() {
        let g = StructuredGrid::new(&[3, 3]).unwrap();
        let dirs = vec![
            MillingDirection::new(&g, &[1.0, 0.0], 0.5).unwrap(),
            MillingDirection::new(&g, &[0.0, 1.0], 0.5).unwrap(),
        ];
        let proj = MachiningProjection::new(dirs, HeavisideParams::default()).unwrap();
        let rho_f = vec![0.4; 9];
        let state = proj.forward(&rho_f).unwrap();
        assert!(proj.backprop(&rho_f, &state, &[0.0; 9]).unwrap().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn excluded_products() {
        let p = products_excluding(&[vec![2.0], vec![3.0], vec![5.0]]);
        assert_eq!(p, vec![vec![15.0], vec![10.0], vec![6.0]]);
    }
}
