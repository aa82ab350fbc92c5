//! Preconditioned conjugate gradients.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct CgOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` starting from the contents of `x`.
///
/// Stops once `||b - A x|| <= tol * ||b||`. `precondition(r, z)` must apply a
/// symmetric positive definite approximation of `A^-1`.
pub fn pcg<A, M>(
    mut apply: A,
    mut precondition: M,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iterations: usize,
) -> Result<CgOutcome>
where
    A: FnMut(&[f64], &mut [f64]),
    M: FnMut(&[f64], &mut [f64]),
{
    let n = b.len();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgOutcome {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    let mut rel = dot(&r, &r).sqrt() / b_norm;
    if rel <= tol {
        return Ok(CgOutcome {
            iterations: 0,
            relative_residual: rel,
        });
    }
    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for it in 1..=max_iterations {
        apply(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(Error::SolverDidNotConverge {
                iterations: it,
                residual: rel,
            });
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        rel = dot(&r, &r).sqrt() / b_norm;
        if rel <= tol {
            return Ok(CgOutcome {
                iterations: it,
                relative_residual: rel,
            });
        }
        precondition(&r, &mut z);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::SolverDidNotConverge {
        iterations: max_iterations,
        residual: rel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_spd_system() {
        // 1D Laplacian with Dirichlet ends
        let n = 50;
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                let l = if i > 0 { x[i - 1] } else { 0.0 };
                let r = if i + 1 < n { x[i + 1] } else { 0.0 };
                y[i] = 2.0 * x[i] - l - r;
            }
        };
        let b = vec![1.0; n];
        let mut x = vec![0.0; n];
        let out = pcg(apply, |r, z| z.copy_from_slice(r), &b, &mut x, 1e-12, 200).unwrap();
        assert!(out.relative_residual <= 1e-12);
        // exact solution x_i = (i + 1)(n - i) / 2
        for (i, v) in x.iter().enumerate() {
            let exact = ((i + 1) * (n - i)) as f64 / 2.0;
            assert!((v - exact).abs() < 1e-8 * exact);
        }
    }

    #[test]
    fn reports_non_convergence() {
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..x.len() {
                y[i] = (i + 1) as f64 * x[i];
            }
        };
        let b = vec![1.0; 30];
        let mut x = vec![0.0; 30];
        let err = pcg(apply, |r, z| z.copy_from_slice(r), &b, &mut x, 1e-14, 3).unwrap_err();
        assert!(matches!(err, Error::SolverDidNotConverge { iterations: 3, .. }));
    }

    #[test]
    fn zero_rhs() {
        let mut x = vec![1.0; 4];
        let out = pcg(|x, y| y.copy_from_slice(x), |r, z| z.copy_from_slice(r), &[0.0; 4], &mut x, 1e-8, 10).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(x, vec![0.0; 4]);
    }
}
