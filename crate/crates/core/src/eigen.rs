//! Dirichlet operator `-Δ - V` on the grids and its lowest eigenpairs.
//!
//! Each geometry is discretized as a finite-volume (equivalently, mass-lumped
//! P1) scheme: a symmetric stiffness matrix `K` assembled from face
//! conductances and the diagonal mass `M = diag(w)` of the grid weights. The
//! operator is `A = M⁻¹K - V`; it is similar to the symmetric
//! `S = M^{-1/2} K M^{-1/2} - V`, on which all solvers work.
//!
//! On radial grids the face at `r = h/2` carries no flux (the reflection
//! `u_0 = u_1`), which imposes `u'(0) = 0` without a node at the origin. The
//! polar grid uses the same convention on its first ring, so a potential
//! constant on rings has the same principal eigenvalue on both grids.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::banded::SymBand;
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Potential samples with values in `[0, 1]` on a fixed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    grid: Arc<Grid>,
    values: Vec<f64>,
    mass: f64,
}

impl PotentialField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Sizing(format!(
                "potential has {} samples, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain(format!("potential value {v} at node {i} outside [0, 1]")));
        }
        let mass = grid.integrate(&values)?;
        Ok(PotentialField { grid, values, mass })
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, vec![c; n])
    }

    /// The optimal potential `V*`: indicator of the centered ball (interval:
    /// centered segment) of measure `v0·|Ω|`.
    pub fn ball(grid: Arc<Grid>, v0: f64) -> Result<Self> {
        check_fraction(v0)?;
        let r = grid.ball_radius(v0 * grid.domain_measure());
        let values = grid.sample_radial_set(&[(0.0, r)]);
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn same_grid(&self, other: &PotentialField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }
}

pub(crate) fn check_fraction(v0: f64) -> Result<()> {
    if v0 > 0.0 && v0 < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("mean fraction v0 must lie in (0, 1), got {v0}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub lambda: f64,
    /// Nodal values, `∫u² = 1`, sign fixed so that `∫u > 0`.
    pub u: Vec<f64>,
    /// `‖(A - λ)u‖` in the grid's weighted L² norm.
    pub residual: f64,
    /// 1 for the principal pair, 2 for the second.
    pub which: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Shift used for the inverse iteration; must lie below the wanted
    /// eigenvalue. Falls back to `-max V` when it does not.
    pub shift_guess: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-10, max_iter: 2000, shift_guess: None }
    }
}

impl SolveOptions {
    fn validate(&self) -> Result<()> {
        if self.tol > 0.0 && self.max_iter > 0 {
            Ok(())
        } else {
            Err(Error::Domain("solve options need tol > 0 and max_iter > 0".into()))
        }
    }
}

/// Face-based stiffness: `uᵀKu = Σ c_e (u_a - u_b)² + Σ d_i u_i²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stiffness {
    pub edges: Vec<(usize, usize, f64)>,
    /// Conductance from each node to the Dirichlet boundary.
    pub boundary: Vec<f64>,
    pub bandwidth: usize,
}

impl Stiffness {
    pub fn assemble(grid: &Grid) -> Stiffness {
        match grid {
            Grid::Interval(g) => {
                let c = 1.0 / g.h;
                let edges = (0..g.n - 1).map(|i| (i, i + 1, c)).collect();
                let mut boundary = vec![0.0; g.n];
                boundary[0] = c;
                boundary[g.n - 1] = c;
                Stiffness { edges, boundary, bandwidth: 1 }
            }
            Grid::Radial(g) => {
                let two_pi = 2.0 * std::f64::consts::PI;
                let face = |k: usize| (k as f64 + 1.5) * g.h; // between node k and k+1
                let edges = (0..g.n - 1).map(|k| (k, k + 1, two_pi * face(k) / g.h)).collect();
                let mut boundary = vec![0.0; g.n];
                boundary[g.n - 1] = two_pi * face(g.n - 1) / g.h;
                Stiffness { edges, boundary, bandwidth: 1 }
            }
            Grid::Polar(g) => {
                let nt = g.ntheta;
                let mut edges = Vec::with_capacity(2 * g.nr * nt);
                let mut boundary = vec![0.0; g.nr * nt];
                for i in 0..g.nr {
                    let r = g.radii[i];
                    let face = (i as f64 + 1.5) * g.dr;
                    let radial = face * g.dtheta / g.dr;
                    let angular = g.dr / (r * g.dtheta);
                    for j in 0..nt {
                        let k = g.index(i, j);
                        edges.push((k, g.index(i, (j + 1) % nt), angular));
                        if i + 1 < g.nr {
                            edges.push((k, g.index(i + 1, j), radial));
                        } else {
                            boundary[k] = radial;
                        }
                    }
                }
                Stiffness { edges, boundary, bandwidth: nt }
            }
        }
    }

    pub fn to_band(&self) -> SymBand {
        let mut a = SymBand::zeros(self.boundary.len(), self.bandwidth);
        a.add_diagonal(&self.boundary);
        for &(p, q, c) in &self.edges {
            a.add(p, p, c);
            a.add(q, q, c);
            a.add(p, q, -c);
        }
        a
    }

    /// `uᵀKu` as a sum of non-negative terms.
    pub fn energy(&self, u: &[f64]) -> f64 {
        let e: f64 = self.edges.iter().map(|&(p, q, c)| c * (u[p] - u[q]).powi(2)).sum();
        e + self.boundary.iter().zip(u).map(|(d, x)| d * x * x).sum::<f64>()
    }
}

/// Assembled `-Δ - V` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    pub stiffness: Stiffness,
    pub weights: Vec<f64>,
    pub potential: Vec<f64>,
}

impl Operator {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// `(M⁻¹K - V) u`.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; u.len()];
        self.stiffness.to_band().mul_vec(u, &mut y);
        for ((y, w), (v, x)) in y.iter_mut().zip(&self.weights).zip(self.potential.iter().zip(u)) {
            *y = *y / w - v * x;
        }
        y
    }

    /// Dense matrix of `M⁻¹K - V`.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut a = self.stiffness.to_band().to_dense();
        for (i, row) in a.iter_mut().enumerate() {
            for x in row.iter_mut() {
                *x /= self.weights[i];
            }
            row[i] -= self.potential[i];
        }
        a
    }

    /// `M^{-1/2} K M^{-1/2} - V`.
    pub fn symmetric(&self) -> SymBand {
        let d: Vec<f64> = self.weights.iter().map(|w| 1.0 / w.sqrt()).collect();
        let mut s = self.stiffness.to_band().scaled(&d);
        let neg: Vec<f64> = self.potential.iter().map(|v| -v).collect();
        s.add_diagonal(&neg);
        s
    }
}

pub fn assemble(grid: &Grid, v: &PotentialField) -> Result<Operator> {
    if *v.grid().as_ref() != *grid {
        return Err(Error::Sizing("potential lives on a different grid".into()));
    }
    assemble_values(grid, v.values())
}

/// Assembly from raw samples; no range check, so perturbed fields used in
/// finite differences can be passed directly.
pub fn assemble_values(grid: &Grid, v: &[f64]) -> Result<Operator> {
    if v.len() != grid.len() {
        return Err(Error::Sizing(format!("potential has {} samples, grid has {} nodes", v.len(), grid.len())));
    }
    Ok(Operator { stiffness: Stiffness::assemble(grid), weights: grid.weights().into_owned(), potential: v.to_vec() })
}

pub fn principal_eigenpair(grid: &Grid, v: &PotentialField, opts: &SolveOptions) -> Result<EigenPair> {
    let op = assemble(grid, v)?;
    Solver::new(&op, opts)?.principal()
}

pub fn second_eigenvalue(grid: &Grid, v: &PotentialField, opts: &SolveOptions) -> Result<f64> {
    let op = assemble(grid, v)?;
    let solver = Solver::new(&op, opts)?;
    let first = solver.principal()?;
    Ok(solver.second(&first)?.lambda)
}

/// Principal and second eigenpairs from a single factorization.
pub fn lowest_two(grid: &Grid, v: &PotentialField, opts: &SolveOptions) -> Result<(EigenPair, EigenPair)> {
    let op = assemble(grid, v)?;
    let solver = Solver::new(&op, opts)?;
    let first = solver.principal()?;
    let second = solver.second(&first)?;
    Ok((first, second))
}

/// Principal eigenpair for raw potential samples (not range checked).
pub fn principal_for_values(grid: &Grid, v: &[f64], opts: &SolveOptions) -> Result<EigenPair> {
    let op = assemble_values(grid, v)?;
    Solver::new(&op, opts)?.principal()
}

/// `(∫|∇w|² - ∫V w²) / ∫w²` with the discrete energy of the assembled
/// operator.
pub fn rayleigh_quotient(grid: &Grid, v: &PotentialField, w: &[f64]) -> Result<f64> {
    let op = assemble(grid, v)?;
    rayleigh_with(&op, w)
}

pub(crate) fn rayleigh_with(op: &Operator, w: &[f64]) -> Result<f64> {
    if w.len() != op.dim() {
        return Err(Error::Sizing(format!("field has {} samples, operator {}", w.len(), op.dim())));
    }
    let norm: f64 = op.weights.iter().zip(w).map(|(m, x)| m * x * x).sum();
    if !(norm > 0.0) {
        return Err(Error::Degenerate("test field has zero L² norm".into()));
    }
    let pot: f64 = op.weights.iter().zip(&op.potential).zip(w).map(|((m, v), x)| m * v * x * x).sum();
    Ok((op.stiffness.energy(w) - pot) / norm)
}

/// Shifted inverse iteration on the symmetrized operator.
struct Solver<'a> {
    op: &'a Operator,
    sym: SymBand,
    factor: crate::banded::BandCholesky,
    sqrt_w: Vec<f64>,
    opts: SolveOptions,
    floor: f64,
}

impl<'a> Solver<'a> {
    fn new(op: &'a Operator, opts: &SolveOptions) -> Result<Self> {
        opts.validate()?;
        let sym = op.symmetric();
        let vmax = op.potential.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let fallback = -vmax;
        let factor_at = |sigma: f64| {
            let mut b = sym.clone();
            b.add_diagonal(&vec![-sigma; op.dim()]);
            b.cholesky()
        };
        let factor = match opts.shift_guess {
            Some(s) => factor_at(s).or_else(|_| factor_at(fallback))?,
            None => factor_at(fallback)?,
        };
        // Residuals cannot drop below the rounding level of S·y.
        let diag_max = sym.diagonal().iter().fold(0.0f64, |a, d| a.max(d.abs()));
        let floor = 64.0 * f64::EPSILON * diag_max;
        let sqrt_w = op.weights.iter().map(|w| w.sqrt()).collect();
        Ok(Solver { op, sym, factor, sqrt_w, opts: *opts, floor })
    }

    fn apply_sym(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; y.len()];
        self.sym.mul_vec(y, &mut out);
        out
    }

    /// Rayleigh quotient through the face energy, which avoids the
    /// cancellation of `yᵀSy` on fine polar grids.
    fn rayleigh(&self, y: &[f64]) -> f64 {
        let u: Vec<f64> = y.iter().zip(&self.sqrt_w).map(|(a, s)| a / s).collect();
        rayleigh_with(self.op, &u).unwrap_or(f64::NAN)
    }

    fn converged(&self, res: f64, lambda: f64, stalled: bool) -> bool {
        res <= self.opts.tol * (1.0 + lambda.abs()) || (stalled && res <= self.floor)
    }

    fn finish(&self, y: Vec<f64>, lambda: f64, residual: f64, which: usize) -> EigenPair {
        let mut u: Vec<f64> = y.iter().zip(&self.sqrt_w).map(|(a, s)| a / s).collect();
        let s: f64 = u.iter().zip(&self.op.weights).map(|(x, w)| x * w).sum();
        if s < 0.0 {
            u.iter_mut().for_each(|x| *x = -*x);
        }
        EigenPair { lambda, u, residual, which }
    }

    fn principal(&self) -> Result<EigenPair> {
        let mut y = self.sqrt_w.clone();
        normalize(&mut y);
        let mut best = f64::INFINITY;
        let mut since_best = 0;
        let mut res = f64::INFINITY;
        for _ in 0..self.opts.max_iter {
            self.factor.solve_in_place(&mut y);
            normalize(&mut y);
            let sy = self.apply_sym(&y);
            let rho: f64 = dot(&y, &sy);
            res = sy.iter().zip(&y).map(|(a, b)| (a - rho * b).powi(2)).sum::<f64>().sqrt();
            if res < 0.5 * best {
                best = res;
                since_best = 0;
            } else {
                since_best += 1;
            }
            if self.converged(res, rho, since_best > 10) {
                let lambda = self.rayleigh(&y);
                return Ok(self.finish(y, lambda, res, 1));
            }
        }
        Err(Error::IterationLimit { iterations: self.opts.max_iter, residual: res })
    }

    /// Block inverse iteration orthogonal to `first`, with Rayleigh-Ritz on
    /// the block.
    fn second(&self, first: &EigenPair) -> Result<EigenPair> {
        let n = self.op.dim();
        if n < 2 {
            return Err(Error::Degenerate("second eigenvalue needs at least two nodes".into()));
        }
        let mut y1: Vec<f64> = first.u.iter().zip(&self.sqrt_w).map(|(a, s)| a * s).collect();
        normalize(&mut y1);
        let p = 3.min(n - 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0x5_eed2);
        let mut block: Vec<Vec<f64>> = (0..p).map(|_| (0..n).map(|_| rng.gen::<f64>() - 0.5).collect()).collect();
        orthonormalize(&mut block, &y1);
        let mut best = f64::INFINITY;
        let mut since_best = 0;
        let mut res = f64::INFINITY;
        for _ in 0..self.opts.max_iter {
            for b in block.iter_mut() {
                self.factor.solve_in_place(b);
            }
            orthonormalize(&mut block, &y1);
            let images: Vec<Vec<f64>> = block.iter().map(|b| self.apply_sym(b)).collect();
            let k = block.len();
            let mut h = vec![vec![0.0; k]; k];
            for a in 0..k {
                for b in 0..k {
                    h[a][b] = 0.5 * (dot(&block[a], &images[b]) + dot(&block[b], &images[a]));
                }
            }
            let (vals, vecs) = jacobi_eigen(h);
            let mut order: Vec<usize> = (0..k).collect();
            order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
            let rotate = |src: &[Vec<f64>], col: usize| -> Vec<f64> {
                let mut out = vec![0.0; n];
                for (a, s) in src.iter().enumerate() {
                    let c = vecs[a][col];
                    out.iter_mut().zip(s).for_each(|(o, x)| *o += c * x);
                }
                out
            };
            let new_block: Vec<Vec<f64>> = order.iter().map(|&c| rotate(&block, c)).collect();
            let new_images: Vec<Vec<f64>> = order.iter().map(|&c| rotate(&images, c)).collect();
            block = new_block;
            let theta = vals[order[0]];
            res = new_images[0].iter().zip(&block[0]).map(|(a, b)| (a - theta * b).powi(2)).sum::<f64>().sqrt();
            if res < 0.5 * best {
                best = res;
                since_best = 0;
            } else {
                since_best += 1;
            }
            if self.converged(res, theta, since_best > 10) {
                let y = block.swap_remove(0);
                let lambda = self.rayleigh(&y);
                return Ok(self.finish(y, lambda, res, 2));
            }
        }
        Err(Error::IterationLimit { iterations: self.opts.max_iter, residual: res })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(y: &mut [f64]) {
    let n = dot(y, y).sqrt();
    y.iter_mut().for_each(|x| *x /= n);
}

/// Modified Gram-Schmidt (two passes) against `fixed` and within `block`.
fn orthonormalize(block: &mut [Vec<f64>], fixed: &[f64]) {
    for _ in 0..2 {
        for i in 0..block.len() {
            let (done, rest) = block.split_at_mut(i);
            let v = &mut rest[0];
            let c = dot(v, fixed);
            v.iter_mut().zip(fixed).for_each(|(x, f)| *x -= c * f);
            for q in done.iter() {
                let c = dot(v, q);
                v.iter_mut().zip(q).for_each(|(x, f)| *x -= c * f);
            }
            normalize(v);
        }
    }
}

/// Cyclic Jacobi for a small symmetric matrix. Returns eigenvalues and the
/// eigenvectors as columns.
fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}
