//! Banded Cholesky factorization for symmetric positive definite systems.

use crate::error::{Error, Result};

/// Lower band of a symmetric matrix: entry `(i, j)` with `i - bw <= j <= i`
/// lives at `data[i * (bw + 1) + j + bw - i]`.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        Self {
            n,
            bw: bandwidth,
            data: vec![0.0; n * (bandwidth + 1)],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * (self.bw + 1) + j + self.bw - i
    }

    /// Adds `v` to entry `(i, j)`; only the lower triangle (`j <= i`) is kept.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j <= i && i - j <= self.bw);
        let idx = self.at(i, j);
        self.data[idx] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.at(i, j)]
        }
    }

    /// In-place `L L^T` factorization.
    pub fn factor(mut self) -> Result<BandedCholesky> {
        let bw = self.bw;
        for i in 0..self.n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let klo = lo.max(j.saturating_sub(bw));
                let row_i = i * (bw + 1) + bw - i;
                let row_j = j * (bw + 1) + bw - j;
                let mut s = self.data[row_i + j];
                for k in klo..j {
                    s -= self.data[row_i + k] * self.data[row_j + k];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::invalid(format!(
                            "stiffness matrix is not positive definite (pivot {s:e} at row {i})"
                        )));
                    }
                    self.data[row_i + i] = s.sqrt();
                } else {
                    self.data[row_i + j] = s / self.data[row_j + j];
                }
            }
        }
        Ok(BandedCholesky { l: self })
    }
}

#[derive(Debug, Clone)]
pub struct BandedCholesky {
    l: BandedMatrix,
}

impl BandedCholesky {
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let BandedMatrix { n, bw, ref data } = self.l;
        for i in 0..n {
            let row = i * (bw + 1) + bw - i;
            let mut s = x[i];
            for k in i.saturating_sub(bw)..i {
                s -= data[row + k] * x[k];
            }
            x[i] = s / data[row + i];
        }
        for i in (0..n).rev() {
            x[i] /= data[i * (bw + 1) + bw];
            let xi = x[i];
            let row = i * (bw + 1) + bw - i;
            for k in i.saturating_sub(bw)..i {
                x[k] -= data[row + k] * xi;
            }
        }
    }
}
