//! Element-by-element operators on a hierarchy of nested structured grids.
//!
//! Coarse operators are exact Galerkin products `P^T A P` with trilinear
//! prolongation, formed per coarse element from its `2^d` children. Fixed
//! DOFs are identity rows; a coarse DOF is fixed when the fine node it
//! coincides with is fixed.

use super::banded::{BandedCholesky, BandedMatrix};
use crate::error::Result;
use crate::grid::StructuredGrid;

/// Stop coarsening once a level has at most this many DOFs.
const COARSE_DOFS: usize = 2500;

#[derive(Debug, Clone)]
enum Matrices {
    /// One shared matrix scaled per element.
    Scaled { k0: Vec<f64>, scale: Vec<f64> },
    /// A dense matrix per element.
    Dense(Vec<f64>),
}

#[derive(Debug, Clone)]
pub(crate) struct Level {
    grid: StructuredGrid,
    ne: usize,
    edofs: Vec<u32>,
    fixed: Vec<bool>,
    matrices: Matrices,
}

fn element_dofs(grid: &StructuredGrid) -> Vec<u32> {
    let dim = grid.dimension();
    let corners = 1 << dim;
    let mut out = Vec::with_capacity(grid.len() * corners * dim);
    for e in 0..grid.len() {
        let nodes = grid.element_nodes(e);
        for &n in &nodes[..corners] {
            for c in 0..dim {
                out.push((n * dim + c) as u32);
            }
        }
    }
    out
}

impl Level {
    pub fn fine(grid: &StructuredGrid, fixed: &[bool], k0: &[f64], modulus: Vec<f64>) -> Self {
        let ne = (1 << grid.dimension()) * grid.dimension();
        debug_assert_eq!(k0.len(), ne * ne);
        Self {
            grid: grid.clone(),
            ne,
            edofs: element_dofs(grid),
            fixed: fixed.to_vec(),
            matrices: Matrices::Scaled {
                k0: k0.to_vec(),
                scale: modulus,
            },
        }
    }

    pub fn ndof(&self) -> usize {
        self.fixed.len()
    }

    pub fn grid(&self) -> &StructuredGrid {
        &self.grid
    }

    #[inline]
    fn element(&self, e: usize) -> (&[f64], f64) {
        let nn = self.ne * self.ne;
        match &self.matrices {
            Matrices::Scaled { k0, scale } => (k0.as_slice(), scale[e]),
            Matrices::Dense(all) => (&all[e * nn..(e + 1) * nn], 1.0),
        }
    }

    #[inline]
    pub fn edofs(&self, e: usize) -> &[u32] {
        &self.edofs[e * self.ne..(e + 1) * self.ne]
    }

    /// `y = A x`, identity on fixed DOFs.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        match self.ne {
            8 => self.apply_n::<8>(x, y),
            24 => self.apply_n::<24>(x, y),
            _ => unreachable!("unsupported element size"),
        }
    }

    fn apply_n<const NE: usize>(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        let xm: Vec<f64> = x
            .iter()
            .zip(&self.fixed)
            .map(|(&v, &f)| if f { 0.0 } else { v })
            .collect();
        let mut xl = [0.0; NE];
        for e in 0..self.grid.len() {
            let dofs = self.edofs(e);
            for (l, &d) in xl.iter_mut().zip(dofs) {
                *l = xm[d as usize];
            }
            let (m, s) = self.element(e);
            for (r, &d) in dofs.iter().enumerate() {
                let row = &m[r * NE..(r + 1) * NE];
                let mut acc = 0.0;
                for c in 0..NE {
                    acc += row[c] * xl[c];
                }
                y[d as usize] += s * acc;
            }
        }
        for (i, &f) in self.fixed.iter().enumerate() {
            if f {
                y[i] = x[i];
            }
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut diag = vec![0.0; self.ndof()];
        for e in 0..self.grid.len() {
            let (m, s) = self.element(e);
            for (r, &d) in self.edofs(e).iter().enumerate() {
                diag[d as usize] += s * m[r * self.ne + r];
            }
        }
        for (d, &f) in diag.iter_mut().zip(&self.fixed) {
            if f {
                *d = 1.0;
            }
        }
        diag
    }

    /// Whether another level can be formed below this one.
    pub fn can_coarsen(&self) -> bool {
        self.ndof() > COARSE_DOFS && self.grid.extents().iter().all(|&n| n % 2 == 0)
    }

    pub fn coarsen(&self) -> Level {
        let dim = self.grid.dimension();
        let corners = 1 << dim;
        let ne = self.ne;
        let coarse_extents: Vec<usize> = self.grid.extents().iter().map(|n| n / 2).collect();
        let cgrid = StructuredGrid::new(&coarse_extents).expect("halved extents are positive");

        let mut fixed = vec![false; cgrid.dof_count()];
        for n in 0..cgrid.node_count() {
            let [i, j, k] = cgrid.node_coords(n);
            let fine = self.grid.node_index(2 * i, 2 * j, 2 * k);
            for c in 0..dim {
                fixed[n * dim + c] = self.fixed[fine * dim + c];
            }
        }

        let weights = child_weights(dim);
        let nn = ne * ne;
        let mut dense = vec![0.0; cgrid.len() * nn];
        let mut local = vec![0.0; nn];
        for ce in 0..cgrid.len() {
            let [ci, cj, ck] = cgrid.coords(ce);
            let out = &mut dense[ce * nn..(ce + 1) * nn];
            for (child, wts) in weights.iter().enumerate() {
                let fe = self.grid.index(
                    2 * ci + (child & 1),
                    2 * cj + ((child >> 1) & 1),
                    2 * ck + ((child >> 2) & 1),
                );
                let (m, s) = self.element(fe);
                let dofs = self.edofs(fe);
                for r in 0..ne {
                    let fr = self.fixed[dofs[r] as usize];
                    for c in 0..ne {
                        let fc = self.fixed[dofs[c] as usize];
                        local[r * ne + c] = if fr || fc { 0.0 } else { s * m[r * ne + c] };
                    }
                }
                for a in 0..corners {
                    for b in 0..corners {
                        for &(ca, wa) in &wts[a] {
                            for &(cb, wb) in &wts[b] {
                                let w = wa * wb;
                                for i in 0..dim {
                                    let src = (a * dim + i) * ne + b * dim;
                                    let dst = (ca * dim + i) * ne + cb * dim;
                                    for j in 0..dim {
                                        out[dst + j] += w * local[src + j];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Level {
            edofs: element_dofs(&cgrid),
            grid: cgrid,
            ne,
            fixed,
            matrices: Matrices::Dense(dense),
        }
    }

    /// `fine = P coarse`, zero on fixed DOFs of both levels.
    pub fn prolong(&self, coarse: &Level, xc: &[f64], xf: &mut [f64]) {
        let dim = self.grid.dimension();
        for n in 0..self.grid.node_count() {
            let [i, j, k] = self.grid.node_coords(n);
            let stencil = |v: usize| -> [(usize, f64); 2] {
                if v % 2 == 0 {
                    [(v / 2, 1.0), (v / 2, 0.0)]
                } else {
                    [((v - 1) / 2, 0.5), ((v + 1) / 2, 0.5)]
                }
            };
            let (sx, sy) = (stencil(i), stencil(j));
            let sz = if dim == 3 { stencil(k) } else { [(0, 1.0), (0, 0.0)] };
            for c in 0..dim {
                let d = n * dim + c;
                if self.fixed[d] {
                    xf[d] = 0.0;
                    continue;
                }
                let mut acc = 0.0;
                for &(ck, wz) in &sz {
                    for &(cj, wy) in &sy {
                        for &(ci, wx) in &sx {
                            let w = wx * wy * wz;
                            if w != 0.0 {
                                let cd = coarse.grid.node_index(ci, cj, ck) * dim + c;
                                if !coarse.fixed[cd] {
                                    acc += w * xc[cd];
                                }
                            }
                        }
                    }
                }
                xf[d] = acc;
            }
        }
    }

    /// `coarse = P^T fine`, the transpose of [`prolong`](Self::prolong).
    pub fn restrict(&self, coarse: &Level, rf: &[f64], rc: &mut [f64]) {
        let dim = self.grid.dimension();
        rc.iter_mut().for_each(|v| *v = 0.0);
        for n in 0..self.grid.node_count() {
            let [i, j, k] = self.grid.node_coords(n);
            let stencil = |v: usize| -> [(usize, f64); 2] {
                if v % 2 == 0 {
                    [(v / 2, 1.0), (v / 2, 0.0)]
                } else {
                    [((v - 1) / 2, 0.5), ((v + 1) / 2, 0.5)]
                }
            };
            let (sx, sy) = (stencil(i), stencil(j));
            let sz = if dim == 3 { stencil(k) } else { [(0, 1.0), (0, 0.0)] };
            for c in 0..dim {
                let d = n * dim + c;
                if self.fixed[d] {
                    continue;
                }
                let r = rf[d];
                for &(ck, wz) in &sz {
                    for &(cj, wy) in &sy {
                        for &(ci, wx) in &sx {
                            let w = wx * wy * wz;
                            if w != 0.0 {
                                let cd = coarse.grid.node_index(ci, cj, ck) * dim + c;
                                rc[cd] += w * r;
                            }
                        }
                    }
                }
            }
        }
        for (v, &f) in rc.iter_mut().zip(&coarse.fixed) {
            if f {
                *v = 0.0;
            }
        }
    }
}

/// For each child element of a coarse element, and each of the child's local
/// corners, the coarse local corners it interpolates from with their weights.
fn child_weights(dim: usize) -> Vec<Vec<Vec<(usize, f64)>>> {
    let corners = 1 << dim;
    (0..corners)
        .map(|child| {
            (0..corners)
                .map(|a| {
                    (0..corners)
                        .filter_map(|big| {
                            let mut w = 1.0;
                            for ax in 0..dim {
                                // position inside the coarse element in half-units: 0, 1 or 2
                                let pos = ((child >> ax) & 1) + ((a >> ax) & 1);
                                let upper = (big >> ax) & 1 == 1;
                                w *= match (pos, upper) {
                                    (0, false) | (2, true) => 1.0,
                                    (1, _) => 0.5,
                                    _ => 0.0,
                                };
                            }
                            (w != 0.0).then_some((big, w))
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Direct banded Cholesky solve of one level, with nodes renumbered so the
/// longest axis varies slowest.
#[derive(Debug, Clone)]
pub(crate) struct DirectSolver {
    perm: Vec<usize>,
    factor: BandedCholesky,
}

impl DirectSolver {
    pub fn new(level: &Level) -> Result<Self> {
        let grid = level.grid();
        let dim = grid.dimension();
        let nd = grid.node_dims();
        let mut axes = [0usize, 1, 2];
        axes.sort_by_key(|&a| (nd[a], a));
        let strides = {
            let mut s = [0usize; 3];
            s[axes[0]] = 1;
            s[axes[1]] = nd[axes[0]];
            s[axes[2]] = nd[axes[0]] * nd[axes[1]];
            s
        };
        let mut perm = vec![0usize; level.ndof()];
        for n in 0..grid.node_count() {
            let c = grid.node_coords(n);
            let new_node = c[0] * strides[0] + c[1] * strides[1] + c[2] * strides[2];
            for k in 0..dim {
                perm[n * dim + k] = new_node * dim + k;
            }
        }

        let ne = level.ne;
        let mut bw = 0;
        for e in 0..grid.len() {
            let dofs = level.edofs(e);
            let (lo, hi) = dofs.iter().fold((usize::MAX, 0), |(lo, hi), &d| {
                let p = perm[d as usize];
                (lo.min(p), hi.max(p))
            });
            bw = bw.max(hi - lo);
        }
        let mut band = BandedMatrix::zeros(level.ndof(), bw);
        for e in 0..grid.len() {
            let dofs = level.edofs(e);
            let (m, s) = level.element(e);
            for r in 0..ne {
                let dr = dofs[r] as usize;
                if level.fixed[dr] {
                    continue;
                }
                for c in 0..ne {
                    let dc = dofs[c] as usize;
                    if level.fixed[dc] {
                        continue;
                    }
                    let (pr, pc) = (perm[dr], perm[dc]);
                    if pc <= pr {
                        band.add(pr, pc, s * m[r * ne + c]);
                    }
                }
            }
        }
        for (d, &f) in level.fixed.iter().enumerate() {
            if f {
                band.add(perm[d], perm[d], 1.0);
            }
        }
        Ok(Self {
            perm,
            factor: band.factor()?,
        })
    }

    pub fn solve(&self, b: &[f64], x: &mut [f64]) {
        let mut work = vec![0.0; b.len()];
        for (i, &p) in self.perm.iter().enumerate() {
            work[p] = b[i];
        }
        self.factor.solve_in_place(&mut work);
        for (i, &p) in self.perm.iter().enumerate() {
            x[i] = work[p];
        }
    }
}

/// Symmetric V-cycle preconditioner with damped Jacobi smoothing.
#[derive(Debug, Clone)]
pub(crate) struct Multigrid {
    levels: Vec<Level>,
    inv_diag: Vec<Vec<f64>>,
    coarse: DirectSolver,
    sweeps: usize,
    omega: f64,
}

impl Multigrid {
    pub fn new(fine: Level, sweeps: usize, omega: f64) -> Result<Self> {
        let mut levels = vec![fine];
        while levels.last().expect("non-empty").can_coarsen() {
            let next = levels.last().expect("non-empty").coarsen();
            levels.push(next);
        }
        let coarse = DirectSolver::new(levels.last().expect("non-empty"))?;
        let inv_diag = levels
            .iter()
            .map(|l| l.diagonal().iter().map(|d| 1.0 / d).collect())
            .collect();
        Ok(Self {
            levels,
            inv_diag,
            coarse,
            sweeps,
            omega,
        })
    }

    pub fn fine(&self) -> &Level {
        &self.levels[0]
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        self.cycle(0, r, z);
    }

    fn cycle(&self, l: usize, b: &[f64], x: &mut [f64]) {
        if l + 1 == self.levels.len() {
            self.coarse.solve(b, x);
            return;
        }
        let level = &self.levels[l];
        let inv = &self.inv_diag[l];
        let n = b.len();
        let mut ax = vec![0.0; n];
        for i in 0..n {
            x[i] = self.omega * inv[i] * b[i];
        }
        for _ in 1..self.sweeps {
            self.jacobi(level, inv, b, x, &mut ax);
        }
        level.apply(x, &mut ax);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let coarse = &self.levels[l + 1];
        let mut rc = vec![0.0; coarse.ndof()];
        level.restrict(coarse, &r, &mut rc);
        let mut xc = vec![0.0; coarse.ndof()];
        self.cycle(l + 1, &rc, &mut xc);
        level.prolong(coarse, &xc, &mut ax);
        for i in 0..n {
            x[i] += ax[i];
        }
        for _ in 0..self.sweeps {
            self.jacobi(level, inv, b, x, &mut ax);
        }
    }

    fn jacobi(&self, level: &Level, inv: &[f64], b: &[f64], x: &mut [f64], ax: &mut [f64]) {
        level.apply(x, ax);
        for i in 0..x.len() {
            x[i] += self.omega * inv[i] * (b[i] - ax[i]);
        }
    }
}
