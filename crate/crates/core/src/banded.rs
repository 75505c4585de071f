//! Symmetric band matrices and their Cholesky factorization.

use crate::error::{Error, Result};

/// Symmetric matrix stored by its lower band: row `i` holds the entries
/// `(i, i - bw) ..= (i, i)`, entries left of column 0 are padding.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBand {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SymBand {
    pub fn zeros(n: usize, bw: usize) -> Self {
        SymBand { n, bw, data: vec![0.0; n * (bw + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (self.bw - (i - j))
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    /// Adds `v` to entries `(i, j)` and `(j, i)`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(i - j <= self.bw, "entry ({i}, {j}) outside bandwidth {}", self.bw);
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.data[self.slot(i, i)]).collect()
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.iter_mut().for_each(|v| *v = 0.0);
        let w = self.bw + 1;
        for i in 0..self.n {
            let row = &self.data[i * w..(i + 1) * w];
            let j0 = i.saturating_sub(self.bw);
            let off = self.bw - (i - j0);
            let mut acc = row[self.bw] * x[i];
            for (k, j) in (j0..i).enumerate() {
                let a = row[off + k];
                acc += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += acc;
        }
    }

    /// `x^T A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut y = vec![0.0; self.n];
        self.mul_vec(x, &mut y);
        x.iter().zip(&y).map(|(a, b)| a * b).sum()
    }

    /// Returns `D A D` for the diagonal `D = diag(d)`.
    pub fn scaled(&self, d: &[f64]) -> SymBand {
        let mut out = self.clone();
        let w = self.bw + 1;
        for i in 0..self.n {
            for k in 0..w {
                if k + i < self.bw {
                    continue;
                }
                let j = i + k - self.bw;
                out.data[i * w + k] *= d[i] * d[j];
            }
        }
        out
    }

    /// Adds `diag[i]` to every diagonal entry.
    pub fn add_diagonal(&mut self, diag: &[f64]) {
        for (i, d) in diag.iter().enumerate() {
            let s = self.slot(i, i);
            self.data[s] += d;
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).collect()).collect()
    }

    /// Cholesky factor `L` with `A = L L^T`; fails on a non-positive pivot.
    pub fn cholesky(&self) -> Result<BandCholesky> {
        let n = self.n;
        let bw = self.bw;
        let w = bw + 1;
        let mut l = self.data.clone();
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                // Columns k < j shared by rows i and j.
                let k0 = j0.max(j.saturating_sub(bw));
                let ri = i * w + bw - (i - k0);
                let rj = j * w + bw - (j - k0);
                let len = j - k0;
                let dot: f64 = l[ri..ri + len].iter().zip(&l[rj..rj + len]).map(|(a, b)| a * b).sum();
                let s = l[i * w + bw - (i - j)] - dot;
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::Solver(format!("matrix not positive definite (pivot {s:e} at row {i})")));
                    }
                    l[i * w + bw] = s.sqrt();
                } else {
                    l[i * w + bw - (i - j)] = s / l[j * w + bw];
                }
            }
        }
        Ok(BandCholesky { n, bw, l })
    }
}

#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        let w = self.bw + 1;
        let bw = self.bw;
        for i in 0..self.n {
            let j0 = i.saturating_sub(bw);
            let row = &self.l[i * w..(i + 1) * w];
            let off = bw - (i - j0);
            let dot: f64 = row[off..bw].iter().zip(&x[j0..i]).map(|(a, b)| a * b).sum();
            x[i] = (x[i] - dot) / row[bw];
        }
        for i in (0..self.n).rev() {
            let xi = x[i] / self.l[i * w + bw];
            x[i] = xi;
            let j0 = i.saturating_sub(bw);
            let row = &self.l[i * w..(i + 1) * w];
            let off = bw - (i - j0);
            for (a, xj) in row[off..bw].iter().zip(x[j0..i].iter_mut()) {
                *xj -= a * xi;
            }
        }
    }
}
