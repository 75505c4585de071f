//! Shape calculus at the optimal ball `B* = B(0, r*)`.
//!
//! Normal deformations `r = r* + t g(θ)` of the ball are described by the
//! boundary trace `g` only. For the Fourier mode `cos kθ` the shape
//! derivative of the eigenfunction is `ψ_k(r) cos kθ`, where `ψ_k` solves
//!
//! ```text
//! -(1/r)(r ψ')' - (λ* + V* - k²/r²) ψ = 0   on (0, R) \ {r*}
//! [ψ'](r*) = -u*(r*),   ψ(0) = ψ(R) = 0
//! ```
//!
//! and the coercivity coefficient of the mode is `ω_k = -u*'(r*) - ψ_k(r*)`.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::banded::SymBand;
use crate::eigen::{check_fraction, principal_eigenpair, EigenPair, PotentialField, SolveOptions};
use crate::error::{Error, Result};
use crate::grid::{Grid, PolarGrid, RadialGrid};

/// Radial ground state at the optimal ball and the quantities derived from
/// its boundary trace.
#[derive(Debug, Clone)]
pub struct BallContext {
    pub r_star: f64,
    pub lambda_star: f64,
    pub u_star: Vec<f64>,
    /// `u*(r*)`.
    pub u_star_boundary: f64,
    /// `u*'(r*)`, negative.
    pub du_star_boundary: f64,
    /// Lagrange multiplier of the volume constraint, `-u*(r*)²`.
    pub tau: f64,
    /// Mean curvature of the boundary circle, `1/r*`.
    pub h_star: f64,
    pub v_star: PotentialField,
    pub eigen: EigenPair,
}

/// Zero-mean boundary perturbation `g(θ) = Σ α_k cos kθ + β_k sin kθ`,
/// `k >= 1`. Index 0 of each vector is mode 1.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FourierPerturbation {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl FourierPerturbation {
    pub fn cos(k: usize) -> Self {
        Self::single(k, 1.0, 0.0)
    }

    pub fn sin(k: usize) -> Self {
        Self::single(k, 0.0, 1.0)
    }

    fn single(k: usize, a: f64, b: f64) -> Self {
        assert!(k >= 1, "mode index starts at 1");
        let mut alpha = vec![0.0; k];
        let mut beta = vec![0.0; k];
        alpha[k - 1] = a;
        beta[k - 1] = b;
        FourierPerturbation { alpha, beta }
    }

    pub fn max_mode(&self) -> usize {
        self.alpha.len().max(self.beta.len())
    }

    pub fn coefficient(&self, k: usize) -> (f64, f64) {
        let a = self.alpha.get(k - 1).copied().unwrap_or(0.0);
        let b = self.beta.get(k - 1).copied().unwrap_or(0.0);
        (a, b)
    }

    /// Modes with a nonzero coefficient.
    pub fn active_modes(&self) -> Vec<usize> {
        (1..=self.max_mode())
            .filter(|&k| {
                let (a, b) = self.coefficient(k);
                a != 0.0 || b != 0.0
            })
            .collect()
    }

    pub fn eval(&self, theta: f64) -> f64 {
        (1..=self.max_mode())
            .map(|k| {
                let (a, b) = self.coefficient(k);
                let kt = k as f64 * theta;
                a * kt.cos() + b * kt.sin()
            })
            .sum()
    }

    /// Upper bound of `|g|`.
    pub fn sup_bound(&self) -> f64 {
        (1..=self.max_mode())
            .map(|k| {
                let (a, b) = self.coefficient(k);
                a.abs() + b.abs()
            })
            .sum()
    }

    pub fn sum_of_squares(&self) -> f64 {
        (1..=self.max_mode())
            .map(|k| {
                let (a, b) = self.coefficient(k);
                a * a + b * b
            })
            .sum()
    }

    /// `‖g‖²` in `L²` of the circle of radius `r`: `π r Σ (α_k² + β_k²)`.
    pub fn l2_norm_sq(&self, r: f64) -> f64 {
        PI * r * self.sum_of_squares()
    }

    /// `∫_0^{2π} g² dθ`.
    pub fn angular_norm_sq(&self) -> f64 {
        PI * self.sum_of_squares()
    }
}

/// Solution of the mode problem for one `k`.
#[derive(Debug, Clone)]
pub struct ModeSolution {
    pub k: usize,
    pub psi: Vec<f64>,
    pub psi_at_rstar: f64,
    pub omega: f64,
}

/// One-sided quadratic through three nodes, evaluated (value, slope) at `x`.
fn quadratic_at(xs: [f64; 3], ys: [f64; 3], x: f64) -> (f64, f64) {
    let [x0, x1, x2] = xs;
    let [y0, y1, y2] = ys;
    let l0 = (x - x1) * (x - x2) / ((x0 - x1) * (x0 - x2));
    let l1 = (x - x0) * (x - x2) / ((x1 - x0) * (x1 - x2));
    let l2 = (x - x0) * (x - x1) / ((x2 - x0) * (x2 - x1));
    let d0 = ((x - x1) + (x - x2)) / ((x0 - x1) * (x0 - x2));
    let d1 = ((x - x0) + (x - x2)) / ((x1 - x0) * (x1 - x2));
    let d2 = ((x - x0) + (x - x1)) / ((x2 - x0) * (x2 - x1));
    (y0 * l0 + y1 * l1 + y2 * l2, y0 * d0 + y1 * d1 + y2 * d2)
}

/// Index of the last node strictly inside `B*`.
fn last_inside(grid: &RadialGrid, r_star: f64) -> usize {
    grid.nodes.iter().rposition(|r| *r < r_star).unwrap_or(0)
}

pub fn ball_context(grid: &RadialGrid, v0: f64) -> Result<BallContext> {
    ball_context_with(grid, v0, &SolveOptions::default())
}

pub fn ball_context_with(grid: &RadialGrid, v0: f64, opts: &SolveOptions) -> Result<BallContext> {
    check_fraction(v0)?;
    let g = Arc::new(Grid::Radial(grid.clone()));
    let r_star = g.ball_radius(v0 * g.domain_measure());
    let a = last_inside(grid, r_star);
    if a < 2 || a + 1 >= grid.n {
        return Err(Error::Domain(format!("r* = {r_star} is not resolved by the radial grid")));
    }
    let v_star = PotentialField::ball(g.clone(), v0)?;
    let eigen = principal_eigenpair(&g, &v_star, opts)?;
    let xs = [grid.nodes[a - 2], grid.nodes[a - 1], grid.nodes[a]];
    let ys = [eigen.u[a - 2], eigen.u[a - 1], eigen.u[a]];
    let (ub, dub) = quadratic_at(xs, ys, r_star);
    Ok(BallContext {
        r_star,
        lambda_star: eigen.lambda,
        u_star: eigen.u.clone(),
        u_star_boundary: ub,
        du_star_boundary: dub,
        tau: -ub * ub,
        h_star: 1.0 / r_star,
        v_star,
        eigen,
    })
}

/// Solves the mode-`k` problem on the radial grid the context was built on.
///
/// The derivative jump is a point load `r* u*(r*)` at `r*` in the weak form
/// `∫ r ψ'φ' - ∫ r (λ* + V* - k²/r²) ψ φ = r* u*(r*) φ(r*)`, distributed to
/// the two nodes around `r*` by linear interpolation.
pub fn solve_mode(ctx: &BallContext, grid: &RadialGrid, k: usize) -> Result<ModeSolution> {
    if k == 0 {
        return Err(Error::Domain("mode index must be >= 1".into()));
    }
    if ctx.u_star.len() != grid.n {
        return Err(Error::Sizing("context was built on a different radial grid".into()));
    }
    let n = grid.n;
    let h = grid.h;
    let kk = (k * k) as f64;
    let mut a = SymBand::zeros(n, 1);
    let v = ctx.v_star.values();
    for i in 0..n {
        let r = grid.nodes[i];
        // Face conductances r_{i∓1/2} / h; at i = 0 the inner face couples to ψ(0) = 0.
        let inner = i as f64 + 0.5;
        let outer = i as f64 + 1.5;
        let diag = inner + outer - r * h * (ctx.lambda_star + v[i]) + kk * h / r;
        a.add(i, i, diag);
        if i + 1 < n {
            a.add(i + 1, i, -outer);
        }
    }
    let factor = a.cholesky().map_err(|e| Error::Solver(format!("mode {k}: {e}")))?;
    let mut rhs = vec![0.0; n];
    let j = last_inside(grid, ctx.r_star + 1e-14 * grid.radius);
    let r_j = grid.nodes[j];
    let s = (ctx.r_star - r_j) / h;
    let load = ctx.r_star * ctx.u_star_boundary;
    rhs[j] += load * (1.0 - s);
    if j + 1 < n {
        rhs[j + 1] += load * s;
    }
    factor.solve_in_place(&mut rhs);
    let psi = rhs;
    let psi_at_rstar = psi[j] * (1.0 - s) + if j + 1 < n { psi[j + 1] * s } else { 0.0 };
    Ok(ModeSolution { k, psi, psi_at_rstar, omega: -ctx.du_star_boundary - psi_at_rstar })
}

/// Mode solutions for `k = 1..=k_max`, solved in parallel.
pub fn solve_modes(ctx: &BallContext, grid: &RadialGrid, k_max: usize) -> Result<Vec<ModeSolution>> {
    (1..=k_max).into_par_iter().map(|k| solve_mode(ctx, grid, k)).collect()
}

/// One-sided slopes of `ψ` at `r*` from inside and outside, by quadratic
/// extrapolation; their difference realizes the jump `[ψ'](r*)`.
pub fn derivative_jump(mode: &ModeSolution, ctx: &BallContext, grid: &RadialGrid) -> f64 {
    let a = last_inside(grid, ctx.r_star + 1e-14 * grid.radius);
    let x = &grid.nodes;
    let p = &mode.psi;
    let (_, left) = quadratic_at([x[a - 2], x[a - 1], x[a]], [p[a - 2], p[a - 1], p[a]], ctx.r_star);
    let (_, right) = quadratic_at([x[a + 1], x[a + 2], x[a + 3]], [p[a + 1], p[a + 2], p[a + 3]], ctx.r_star);
    right - left
}

/// `u*(r*) Σ ω_k (α_k² + β_k²)`: the second shape derivative of the
/// Lagrangian in the Fourier coefficients of `g`, with the boundary measure
/// normalized out (see [`second_shape_derivative`]).
pub fn hessian_quadratic_form(ctx: &BallContext, modes: &[ModeSolution], g: &FourierPerturbation) -> Result<f64> {
    let mut sum = 0.0;
    for k in g.active_modes() {
        let mode =
            modes.iter().find(|m| m.k == k).ok_or_else(|| Error::State(format!("no mode solution for k = {k}")))?;
        let (a, b) = g.coefficient(k);
        sum += mode.omega * (a * a + b * b);
    }
    Ok(ctx.u_star_boundary * sum)
}

/// `d²/dt² L_τ(B_{t,g})` at `t = 0` for the deformation `r = r* + t g(θ)`:
/// `2 ∫_{∂B*} u*(-∂_ν u*) g² - u* u'_g g dσ = 2π r* · hessian_quadratic_form`.
pub fn second_shape_derivative(ctx: &BallContext, modes: &[ModeSolution], g: &FourierPerturbation) -> Result<f64> {
    Ok(2.0 * PI * ctx.r_star * hessian_quadratic_form(ctx, modes, g)?)
}

/// Hat-sampled indicator of `{r <= r* + t g(θ)}` on the polar grid.
pub fn perturbed_ball_potential(
    grid: &Arc<Grid>,
    r_star: f64,
    g: &FourierPerturbation,
    t: f64,
) -> Result<PotentialField> {
    let polar = polar_of(grid)?;
    let amp = t.abs() * g.sup_bound();
    if !(amp < r_star && r_star + amp < polar.radius) {
        return Err(Error::Domain(format!(
            "deformation amplitude {amp} does not keep r* = {r_star} inside (0, {})",
            polar.radius
        )));
    }
    let values = polar.sample_region(|theta| vec![(0.0, r_star + t * g.eval(theta))]);
    PotentialField::new(grid.clone(), values)
}

pub(crate) fn polar_of(grid: &Grid) -> Result<&PolarGrid> {
    match grid {
        Grid::Polar(p) => Ok(p),
        other => Err(Error::Domain(format!("operation needs a polar grid, got {}", other.kind()))),
    }
}

/// Finite-difference estimates at one step size.
#[derive(Debug, Clone, PartialEq)]
pub struct FdEstimate {
    pub t: f64,
    pub l_plus: f64,
    pub l_minus: f64,
    /// `(L(t) - L(-t)) / 2t`.
    pub first: f64,
    /// `(L(t) + L(-t) - 2L(0)) / t²`.
    pub second: f64,
    /// Second difference of the sampled mass.
    pub mass_second: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdShapeReport {
    pub l0: f64,
    pub estimates: Vec<FdEstimate>,
    /// Set when the second-derivative estimates vary by more than 20%
    /// between consecutive step sizes.
    pub noisy: bool,
}

impl FdShapeReport {
    pub fn first_derivative_estimates(&self) -> Vec<f64> {
        self.estimates.iter().map(|e| e.first).collect()
    }

    pub fn second_derivative_estimates(&self) -> Vec<f64> {
        self.estimates.iter().map(|e| e.second).collect()
    }
}

/// `L(t) = λ(B_{t,g}) - τ |B_{t,g}|` by eigen solves on the polar grid, and
/// its central differences for each step in `ts`.
pub fn fd_shape_check(
    ctx: &BallContext,
    polar: &Arc<Grid>,
    g: &FourierPerturbation,
    ts: &[f64],
    opts: &SolveOptions,
) -> Result<FdShapeReport> {
    if g.active_modes().is_empty() {
        return Err(Error::Degenerate("perturbation has no active mode".into()));
    }
    if ts.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::Domain("step sizes must be positive".into()));
    }
    let mut steps = vec![0.0];
    for &t in ts {
        steps.push(t);
        steps.push(-t);
    }
    let evals: Vec<(f64, f64)> = steps
        .par_iter()
        .map(|&t| {
            let v = perturbed_ball_potential(polar, ctx.r_star, g, t)?;
            let e = principal_eigenpair(polar, &v, opts)?;
            Ok((e.lambda - ctx.tau * v.mass(), v.mass()))
        })
        .collect::<Result<_>>()?;
    let (l0, m0) = evals[0];
    let estimates: Vec<FdEstimate> = ts
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let (lp, mp) = evals[1 + 2 * i];
            let (lm, mm) = evals[2 + 2 * i];
            FdEstimate {
                t,
                l_plus: lp,
                l_minus: lm,
                first: (lp - lm) / (2.0 * t),
                second: (lp + lm - 2.0 * l0) / (t * t),
                mass_second: (mp + mm - 2.0 * m0) / (t * t),
            }
        })
        .collect();
    let noisy = estimates
        .windows(2)
        .any(|w| (w[1].second - w[0].second).abs() > 0.2 * w[0].second.abs().max(w[1].second.abs()));
    Ok(FdShapeReport { l0, estimates, noisy })
}
