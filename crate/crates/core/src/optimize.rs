//! Bathtub fixed-point optimizers for the global and the `δ`-constrained
//! problems, and the annulus competitor `𝔸_δ`.
//!
//! The `δ`-problem keeps `‖V - V*‖₁ = δ` by splitting the mass: `M - δ/2`
//! inside `B*` and `δ/2` outside. Each step selects the super-level sets of
//! the current eigenfunction inside both masks.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::eigen::{check_fraction, principal_eigenpair, EigenPair, PotentialField, SolveOptions};
use crate::error::{Error, Result};
use crate::grid::{Grid, IntervalGrid};
use crate::rearrange::{bathtub_select, centered_mask, complement, l1_distance};

#[derive(Debug, Clone)]
pub struct AnnulusCompetitor {
    pub r_star: f64,
    /// Inner retreat: the ball keeps radius `r* - r_delta`.
    pub r_delta: f64,
    /// Outer advance: the shell is `[r*, r* + r_delta_prime]`.
    pub r_delta_prime: f64,
    pub delta: f64,
    pub field: PotentialField,
}

/// `𝔸_δ = χ{|x| <= r* - r_δ} + χ{r* <= |x| <= r* + r'_δ}`, each annulus of
/// measure `δ/2`.
pub fn annulus_competitor(grid: &Arc<Grid>, v0: f64, delta: f64) -> Result<AnnulusCompetitor> {
    check_fraction(v0)?;
    let omega = grid.domain_measure();
    let mass = v0 * omega;
    let limit = 2.0 * mass.min(omega - mass);
    if !(delta > 0.0 && delta < limit) {
        return Err(Error::Infeasible(format!("delta = {delta} must lie in (0, {limit}) for v0 = {v0}")));
    }
    let r_star = grid.ball_radius(mass);
    let (r_delta, r_delta_prime) = match **grid {
        Grid::Interval(_) => (0.25 * delta, 0.25 * delta),
        _ => {
            let a = delta / (2.0 * PI);
            (r_star - (r_star * r_star - a).sqrt(), (r_star * r_star + a).sqrt() - r_star)
        }
    };
    let values = grid.sample_radial_set(&[(0.0, r_star - r_delta), (r_star, r_star + r_delta_prime)]);
    let field = PotentialField::new(grid.clone(), values)?;
    Ok(AnnulusCompetitor { r_star, r_delta, r_delta_prime, delta, field })
}

#[derive(Debug, Clone)]
pub struct OptimizeOptions {
    pub max_iter: usize,
    pub solve: SolveOptions,
    /// Starting potential; `V*` when absent.
    pub initial: Option<PotentialField>,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions { max_iter: 200, solve: SolveOptions::default(), initial: None }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerReport {
    pub potential: PotentialField,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    pub delta: f64,
    pub r_star: f64,
    /// Threshold of the selection inside `B*`.
    pub mu_delta: Option<f64>,
    /// Threshold of the selection outside `B*`.
    pub eta_delta: Option<f64>,
    /// Level with `|{u > ζ}| = M`.
    pub zeta_delta: Option<f64>,
    pub f_delta: Option<f64>,
    /// `λ` of every iterate produced by a selection step.
    pub history: Vec<f64>,
    pub eigenfunction: Vec<f64>,
    /// Node mask of `B*`.
    pub ball_mask: Vec<bool>,
}

/// Fixed point of `V ← bathtub(u_V, M)` over the whole domain.
pub fn minimize_global(grid: &Arc<Grid>, v0: f64, opts: &OptimizeOptions) -> Result<OptimizerReport> {
    let v_star = PotentialField::ball(grid.clone(), v0)?;
    let mass = v_star.mass();
    let all = vec![true; grid.len()];
    let mask = centered_mask(grid, mass);
    let step = |u: &[f64]| -> Result<Vec<f64>> { Ok(bathtub_select(grid, u, mass, &all)?.chi) };
    let mut report = fixed_point(grid, &v_star, step, opts)?;
    report.ball_mask = mask;
    report.zeta_delta = Some(zeta(grid, &report.eigenfunction, mass)?);
    report.mu_delta = report.zeta_delta;
    Ok(report)
}

/// `δ`-constrained problem on radially symmetric grids.
pub fn minimize_delta_radial(grid: &Arc<Grid>, v0: f64, delta: f64, opts: &OptimizeOptions) -> Result<OptimizerReport> {
    if let Grid::Polar(_) = **grid {
        return Err(Error::Domain("minimize_delta_radial needs an interval or radial grid".into()));
    }
    minimize_delta(grid, v0, delta, opts)
}

/// `δ`-constrained problem on the polar grid, without imposing symmetry.
pub fn minimize_delta_2d(grid: &Arc<Grid>, v0: f64, delta: f64, opts: &OptimizeOptions) -> Result<OptimizerReport> {
    if !matches!(**grid, Grid::Polar(_)) {
        return Err(Error::Domain("minimize_delta_2d needs a polar grid".into()));
    }
    minimize_delta(grid, v0, delta, opts)
}

fn minimize_delta(grid: &Arc<Grid>, v0: f64, delta: f64, opts: &OptimizeOptions) -> Result<OptimizerReport> {
    let v_star = PotentialField::ball(grid.clone(), v0)?;
    let mass = v_star.mass();
    let inner = centered_mask(grid, mass);
    let outer = complement(&inner);
    if delta == 0.0 {
        let e = principal_eigenpair(grid, &v_star, &opts.solve)?;
        let z = zeta(grid, &e.u, mass)?;
        let mut report = single_report(v_star, e, 0.0, inner);
        report.zeta_delta = Some(z);
        report.mu_delta = Some(z);
        report.converged = true;
        report.f_delta = Some(0.0);
        return Ok(report);
    }
    annulus_competitor(grid, v0, delta)?;
    let outer_measure: f64 = (0..grid.len()).filter(|&i| outer[i]).map(|i| grid.weight(i)).sum();
    if 0.5 * delta > outer_measure || 0.5 * delta > mass {
        return Err(Error::Infeasible(format!("delta = {delta} does not fit the grid masks")));
    }
    let (m_in, m_out) = (mass - 0.5 * delta, 0.5 * delta);
    let step = |u: &[f64]| -> Result<Vec<f64>> {
        let a = bathtub_select(grid, u, m_in, &inner)?;
        let b = bathtub_select(grid, u, m_out, &outer)?;
        Ok(a.chi.iter().zip(&b.chi).map(|(x, y)| x + y).collect())
    };
    let mut report = fixed_point(grid, &v_star, step, opts)?;
    report.delta = delta;
    let u = &report.eigenfunction;
    report.mu_delta = Some(bathtub_select(grid, u, m_in, &inner)?.mu);
    report.eta_delta = Some(bathtub_select(grid, u, m_out, &outer)?.mu);
    report.zeta_delta = Some(zeta(grid, u, mass)?);
    report.ball_mask = inner;
    report.f_delta = Some(dichotomy_diagnostic(grid, &report)?);
    Ok(report)
}

/// Runs the `δ`-problem for every `δ` concurrently; reports follow the
/// order of `deltas`.
pub fn delta_sweep(grid: &Arc<Grid>, v0: f64, deltas: &[f64], opts: &OptimizeOptions) -> Result<Vec<OptimizerReport>> {
    deltas
        .par_iter()
        .map(|&d| match **grid {
            Grid::Polar(_) => minimize_delta_2d(grid, v0, d, opts),
            _ => minimize_delta_radial(grid, v0, d, opts),
        })
        .collect()
}

/// Mean fraction of the interval experiment with `Ω = (-1, 1)`.
pub const REMARK3_V0: f64 = 0.6;
pub const REMARK3_DELTAS: [f64; 4] = [0.1, 0.2, 0.4, 0.8];

/// The interval sweep `v0 = 0.6`, `δ ∈ {0.1, 0.2, 0.4, 0.8}` on `n` nodes.
pub fn remark3_sweep(n: usize, opts: &OptimizeOptions) -> Result<(Arc<Grid>, Vec<OptimizerReport>)> {
    let grid: Arc<Grid> = Arc::new(IntervalGrid::new(-1.0, 1.0, n)?.into());
    let reports = delta_sweep(&grid, REMARK3_V0, &REMARK3_DELTAS, opts)?;
    Ok((grid, reports))
}

fn zeta(grid: &Grid, u: &[f64], mass: f64) -> Result<f64> {
    Ok(bathtub_select(grid, u, mass, &vec![true; grid.len()])?.mu)
}

fn single_report(v: PotentialField, e: EigenPair, delta: f64, ball_mask: Vec<bool>) -> OptimizerReport {
    let r_star = v.grid().ball_radius(v.mass());
    OptimizerReport {
        lambda: e.lambda,
        potential: v,
        iterations: 0,
        converged: false,
        delta,
        r_star,
        mu_delta: None,
        eta_delta: None,
        zeta_delta: None,
        f_delta: None,
        history: Vec::new(),
        eigenfunction: e.u,
        ball_mask,
    }
}

fn fixed_point<F>(grid: &Arc<Grid>, v_star: &PotentialField, step: F, opts: &OptimizeOptions) -> Result<OptimizerReport>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mass = v_star.mass();
    let r_star = grid.ball_radius(mass);
    let tol_v = (1e-3 * mass).max(2.0 * grid.cell_measure_at(r_star));
    let mut v = match &opts.initial {
        Some(init) if !init.same_grid(v_star) => {
            return Err(Error::Domain("initial potential lives on a different grid".into()))
        }
        Some(init) => init.clone(),
        None => v_star.clone(),
    };
    let mut e = principal_eigenpair(grid, &v, &opts.solve)?;
    let mut previous: Option<(PotentialField, EigenPair)> = None;
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let values: Vec<f64> = step(&e.u)?.into_iter().map(|x| x.clamp(0.0, 1.0)).collect();
        let next = PotentialField::new(grid.clone(), values)?;
        let en = principal_eigenpair(grid, &next, &opts.solve)?;
        history.push(en.lambda);
        if let Some((pv, pe)) = &previous {
            let back = pv.values().iter().zip(next.values()).all(|(a, b)| (a - b).abs() < 1e-12);
            let moved = l1_distance(&next, &v)? > 0.0;
            if back && moved {
                // 2-cycle: keep the better of the two states.
                if pe.lambda < e.lambda {
                    v = pv.clone();
                    e = pe.clone();
                }
                let mut report = single_report(v, e, 0.0, Vec::new());
                report.iterations = iterations;
                report.history = history;
                return Ok(report);
            }
        }
        let dv = l1_distance(&next, &v)?;
        let dl = (en.lambda - e.lambda).abs();
        previous = Some((std::mem::replace(&mut v, next), std::mem::replace(&mut e, en)));
        if iterations > 1 && dv < tol_v && dl < 1e-9 {
            converged = true;
            break;
        }
    }
    let mut report = single_report(v, e, 0.0, Vec::new());
    report.iterations = iterations;
    report.converged = converged;
    report.history = history;
    report.r_star = r_star;
    Ok(report)
}

/// `f(δ) = |{u ≥ ζ_δ} ∩ {u ≥ η_δ} ∩ (B*)^c|`: the part of the outer selection
/// lying in the super-level set of mass `M`.
pub fn dichotomy_diagnostic(grid: &Grid, report: &OptimizerReport) -> Result<f64> {
    if report.delta == 0.0 {
        return Ok(0.0);
    }
    let (Some(zeta), Some(eta)) = (report.zeta_delta, report.eta_delta) else {
        return Err(Error::State("report carries no thresholds zeta/eta".into()));
    };
    let u = &report.eigenfunction;
    if u.len() != grid.len() || report.ball_mask.len() != grid.len() {
        return Err(Error::State("report does not match the grid".into()));
    }
    Ok((0..grid.len())
        .filter(|&i| !report.ball_mask[i] && u[i] >= zeta && u[i] >= eta)
        .fold(0.0, |acc, i| acc + grid.weight(i)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{PolarGrid, RadialGrid};

    fn disk(n: usize) -> Arc<Grid> {
        Arc::new(RadialGrid::new(1.0, n).unwrap().into())
    }

    fn interval(n: usize) -> Arc<Grid> {
        Arc::new(IntervalGrid::new(-1.0, 1.0, n).unwrap().into())
    }

    #[test]
    fn annulus_closed_form() {
        let g = disk(1024);
        let a = annulus_competitor(&g, 0.25, 0.01).unwrap();
        assert!((a.r_delta - 0.0015944).abs() < 5e-7);
        assert!((a.r_delta_prime - 0.0015893).abs() < 5e-7);
        let v_star = PotentialField::ball(g.clone(), 0.25).unwrap();
        assert!((a.field.mass() - v_star.mass()).abs() < 1e-12);
        let d = l1_distance(&a.field, &v_star).unwrap();
        assert!((d - 0.01).abs() < 4.0 * g.cell_measure_at(0.5));
    }

    #[test]
    fn annulus_asymptotics() {
        let g = disk(256);
        let c = 1.0 / (4.0 * PI * 0.5);
        let ratios: Vec<f64> =
            [1e-3, 3e-3, 1e-2].iter().map(|&d| annulus_competitor(&g, 0.25, d).unwrap().r_delta / d).collect();
        for r in &ratios {
            assert!((r / ratios[0] - 1.0).abs() < 0.01);
            assert!((r / c - 1.0).abs() < 0.01);
        }
        let small = annulus_competitor(&g, 0.25, 1e-6).unwrap();
        assert!((small.r_delta_prime / 1e-6 / c - 1.0).abs() < 1e-4);
    }

    #[test]
    fn annulus_interval_layout() {
        let g = interval(1999);
        let a = annulus_competitor(&g, 0.6, 0.2).unwrap();
        assert!((a.r_delta - 0.05).abs() < 1e-15 && a.r_delta == a.r_delta_prime);
        let expect = g.sample_radial_set(&[(0.0, 0.6 - a.r_delta), (0.6, 0.6 + a.r_delta)]);
        assert_eq!(a.field.values(), &expect[..]);
        assert!(matches!(annulus_competitor(&g, 0.6, 1.7), Err(Error::Infeasible(_))));
        assert!(matches!(annulus_competitor(&g, 0.6, 0.0), Err(Error::Infeasible(_))));
    }

    #[test]
    fn global_interval_converges_to_centered_segment() {
        let g = interval(999);
        let rep = minimize_global(&g, 0.6, &OptimizeOptions::default()).unwrap();
        assert!(rep.converged);
        let v_star = PotentialField::ball(g.clone(), 0.6).unwrap();
        assert!(l1_distance(&rep.potential, &v_star).unwrap() <= 4.0 * g.spacing());
        let direct = principal_eigenpair(&g, &v_star, &SolveOptions::default()).unwrap().lambda;
        assert!((rep.lambda - direct).abs() < 1e-2);
        assert!(rep.history.windows(2).all(|w| w[1] <= w[0] + 1e-10));
    }

    #[test]
    fn delta_zero_returns_v_star() {
        let g = disk(512);
        let rep = minimize_delta_radial(&g, 0.25, 0.0, &OptimizeOptions::default()).unwrap();
        let v_star = PotentialField::ball(g.clone(), 0.25).unwrap();
        assert_eq!(rep.potential, v_star);
        assert_eq!(rep.f_delta, Some(0.0));
    }

    #[test]
    fn delta_interval_reproduces_annulus() {
        let g = interval(1999);
        for delta in [0.1, 0.2, 0.4] {
            let rep = minimize_delta_radial(&g, 0.6, delta, &OptimizeOptions::default()).unwrap();
            assert!(rep.converged);
            let a = annulus_competitor(&g, 0.6, delta).unwrap();
            assert!(l1_distance(&rep.potential, &a.field).unwrap() <= 6.0 * g.spacing());
            let (mu, zeta, eta) = (rep.mu_delta.unwrap(), rep.zeta_delta.unwrap(), rep.eta_delta.unwrap());
            assert!(mu > zeta && zeta > eta, "{mu} {zeta} {eta}");
            assert!(rep.f_delta.unwrap() <= 4.0 * g.spacing());
        }
    }

    #[test]
    fn constraint_masses_are_exact() {
        let g = disk(512);
        let delta = 0.03;
        let rep = minimize_delta_radial(&g, 0.25, delta, &OptimizeOptions::default()).unwrap();
        let v_star = PotentialField::ball(g.clone(), 0.25).unwrap();
        let v = rep.potential.values();
        let m_in: f64 = (0..g.len()).filter(|&i| rep.ball_mask[i]).map(|i| g.weight(i) * v[i]).sum();
        let m_out: f64 = (0..g.len()).filter(|&i| !rep.ball_mask[i]).map(|i| g.weight(i) * v[i]).sum();
        assert!((m_in - (v_star.mass() - 0.5 * delta)).abs() < 1e-12);
        assert!((m_out - 0.5 * delta).abs() < 1e-12);
    }

    #[test]
    fn remark3_supports() {
        let (g, reps) = remark3_sweep(1999, &OptimizeOptions::default()).unwrap();
        let h = g.spacing();
        for (rep, delta) in reps.iter().zip(REMARK3_DELTAS) {
            let v = rep.potential.values();
            for i in 0..g.len() {
                let x = g.distance_from_center(i);
                let inside = x <= 0.6 - delta / 4.0 || (x >= 0.6 && x <= 0.6 + delta / 4.0);
                let far = [0.6 - delta / 4.0, 0.6, 0.6 + delta / 4.0].iter().all(|e| (x - e).abs() > 2.0 * h);
                if far {
                    assert_eq!(v[i], if inside { 1.0 } else { 0.0 }, "delta {delta}, x {x}");
                }
            }
        }
    }

    #[test]
    fn wrong_geometry_rejected() {
        let p: Arc<Grid> = Arc::new(PolarGrid::new(1.0, 16, 16).unwrap().into());
        assert!(minimize_delta_radial(&p, 0.25, 0.01, &OptimizeOptions::default()).is_err());
        assert!(minimize_delta_2d(&disk(64), 0.25, 0.01, &OptimizeOptions::default()).is_err());
    }

    #[test]
    fn dichotomy_needs_thresholds() {
        let g = interval(199);
        let mut rep = minimize_delta_radial(&g, 0.6, 0.2, &OptimizeOptions::default()).unwrap();
        rep.eta_delta = None;
        assert!(matches!(dichotomy_diagnostic(&g, &rep), Err(Error::State(_))));
    }

    #[test]
    fn dichotomy_brute_force() {
        let g = interval(199);
        let mut rep = minimize_delta_radial(&g, 0.6, 0.2, &OptimizeOptions::default()).unwrap();
        // Push η above every value: the outer super-level set is empty.
        rep.eta_delta = Some(f64::INFINITY);
        assert_eq!(dichotomy_diagnostic(&g, &rep).unwrap(), 0.0);
        // With η = ζ = -∞ every node outside B* counts.
        rep.eta_delta = Some(f64::NEG_INFINITY);
        rep.zeta_delta = Some(f64::NEG_INFINITY);
        let outside: f64 = (0..g.len()).filter(|&i| !rep.ball_mask[i]).map(|i| g.weight(i)).sum();
        assert!((dichotomy_diagnostic(&g, &rep).unwrap() - outside).abs() < 1e-14);
    }
}
