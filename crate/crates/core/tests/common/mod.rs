//! Independent dense oracles shared by the integration tests.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use topomill_core::{FeaProblem, StructuredGrid};

/// Unit-modulus element stiffness by 2-point Gauss quadrature on the unit square or cube.
pub fn quadrature_stiffness(nu: f64, dim: usize) -> DMatrix<f64> {
    let corners = 1 << dim;
    let n = corners * dim;
    let d = if dim == 2 {
        let c = 1.0 / (1.0 - nu * nu);
        DMatrix::from_row_slice(3, 3, &[c, c * nu, 0.0, c * nu, c, 0.0, 0.0, 0.0, c * (1.0 - nu) / 2.0])
    } else {
        let c = 1.0 / ((1.0 + nu) * (1.0 - 2.0 * nu));
        let mut m = DMatrix::zeros(6, 6);
        for i in 0..3 {
            for j in 0..3 {
                m[(i, j)] = c * if i == j { 1.0 - nu } else { nu };
            }
            m[(i + 3, i + 3)] = c * (1.0 - 2.0 * nu) / 2.0;
        }
        m
    };
    let g = [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()];
    let weight = 1.0 / corners as f64;
    let mut k = DMatrix::zeros(n, n);
    for q in 0..corners {
        let x = [g[q & 1], g[(q >> 1) & 1], g[(q >> 2) & 1]];
        // shape-function gradients of the multilinear basis at x
        let grads: Vec<[f64; 3]> = (0..corners)
            .map(|a| {
                let s = [a & 1, (a >> 1) & 1, (a >> 2) & 1];
                let f = |ax: usize| if s[ax] == 1 { x[ax] } else { 1.0 - x[ax] };
                let df = |ax: usize| if s[ax] == 1 { 1.0 } else { -1.0 };
                let mut out = [0.0; 3];
                for ax in 0..dim {
                    out[ax] = (0..dim).map(|b| if b == ax { df(b) } else { f(b) }).product();
                }
                out
            })
            .collect();
        let strains = if dim == 2 { 3 } else { 6 };
        let mut b = DMatrix::zeros(strains, n);
        for (a, gr) in grads.iter().enumerate() {
            let col = a * dim;
            for ax in 0..dim {
                b[(ax, col + ax)] = gr[ax];
            }
            if dim == 2 {
                b[(2, col)] = gr[1];
                b[(2, col + 1)] = gr[0];
            } else {
                b[(3, col)] = gr[1];
                b[(3, col + 1)] = gr[0];
                b[(4, col + 1)] = gr[2];
                b[(4, col + 2)] = gr[1];
                b[(5, col)] = gr[2];
                b[(5, col + 2)] = gr[0];
            }
        }
        k += b.transpose() * &d * b * weight;
    }
    k
}

pub struct Dense {
    pub compliance: f64,
    pub displacement: DVector<f64>,
    pub element_energy: Vec<f64>,
}

pub fn dense_solve(problem: &FeaProblem, rho: &[f64]) -> Dense {
    let grid = problem.grid();
    let dim = grid.dimension();
    let ke = quadrature_stiffness(problem.material().nu, dim);
    let ndof = grid.dof_count();
    let mut k = DMatrix::zeros(ndof, ndof);
    for e in 0..grid.len() {
        let nodes = grid.element_nodes(e);
        let dofs: Vec<usize> = (0..1 << dim).flat_map(|a| (0..dim).map(move |c| nodes[a] * dim + c)).collect();
        let scale = problem.material().modulus(rho[e]);
        for (p, &i) in dofs.iter().enumerate() {
            for (q, &j) in dofs.iter().enumerate() {
                k[(i, j)] += scale * ke[(p, q)];
            }
        }
    }
    let free: Vec<usize> = (0..ndof).filter(|&i| !problem.fixed()[i]).collect();
    let kf = DMatrix::from_fn(free.len(), free.len(), |a, b| k[(free[a], free[b])]);
    let ff = DVector::from_fn(free.len(), |a, _| problem.loads()[free[a]]);
    let uf = kf.cholesky().expect("positive definite").solve(&ff);
    let mut u = DVector::zeros(ndof);
    for (a, &i) in free.iter().enumerate() {
        u[i] = uf[a];
    }
    let element_energy = (0..grid.len())
        .map(|e| {
            let nodes = grid.element_nodes(e);
            let ue = DVector::from_fn(ke.nrows(), |p, _| u[nodes[p / dim] * dim + p % dim]);
            ue.dot(&(&ke * &ue))
        })
        .collect();
    Dense {
        compliance: ff.dot(&uf),
        displacement: u,
        element_energy,
    }
}

/// Normalized cone weights by a direct scan of all element pairs.
pub fn dense_filter(grid: &StructuredGrid, r: f64) -> DMatrix<f64> {
    let n = grid.len();
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        let a = grid.center(i);
        for j in 0..n {
            let b = grid.center(j);
            let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
            w[(i, j)] = (r - d).max(0.0);
        }
        let s: f64 = w.row(i).sum();
        w.row_mut(i).iter_mut().for_each(|v| *v /= s);
    }
    w
}
