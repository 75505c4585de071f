//! Reference values computed without the library's solvers.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spl_core::{Grid, PotentialField};

/// Bessel function of the first kind of integer order by its power series.
pub fn bessel_j(order: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = half.powi(order as i32) / (1..=order).map(f64::from).product::<f64>();
    let mut sum = term;
    let q = -half * half;
    for m in 1..200 {
        term *= q / (m as f64 * (m + order) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Root of `f` in `[a, b]` by bisection; `f(a)` and `f(b)` differ in sign.
pub fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a);
    assert!(fa * f(b) <= 0.0, "no sign change on [{a}, {b}]");
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (f(m) > 0.0) == (fa > 0.0) {
            a = m;
        } else {
            b = m;
        }
        if b - a < 1e-15 * b.abs().max(1.0) {
            break;
        }
    }
    0.5 * (a + b)
}

/// `s`-th positive zero of `J_order`, scanning with step 0.05.
pub fn bessel_zero(order: u32, s: usize) -> f64 {
    let f = |x: f64| bessel_j(order, x);
    let mut count = 0;
    let mut x = 0.5;
    loop {
        if f(x) * f(x + 0.05) <= 0.0 {
            count += 1;
            if count == s {
                return bisect(f, x, x + 0.05);
            }
        }
        x += 0.05;
    }
}

/// Ground state of `-u'' - χ_{|x|<a} u` on `(-1, 1)`: the first root of the
/// matching of `cos(kx)` inside and `sin(q(1 - |x|))` outside, `λ > 0`.
pub fn interval_ball_lambda(a: f64) -> f64 {
    let g = |lam: f64| {
        let k = (lam + 1.0).sqrt();
        let q = lam.sqrt();
        k * (k * a).sin() * (q * (1.0 - a)).sin() - q * (k * a).cos() * (q * (1.0 - a)).cos()
    };
    let mut lo = 1e-9;
    let step = 1e-3;
    while g(lo) * g(lo + step) > 0.0 {
        lo += step;
        assert!(lo < PI * PI, "no ground state found");
    }
    bisect(g, lo, lo + step)
}

/// Dense `-Δ - V` from the textbook stencils, symmetrized by the square
/// root of the quadrature weights; eigenvalues in ascending order.
pub fn dense_spectrum(grid: &Grid, v: &[f64]) -> Vec<f64> {
    let n = grid.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    match grid {
        Grid::Interval(g) => {
            let c = 1.0 / (g.h * g.h);
            for i in 0..n {
                a[(i, i)] = 2.0 * c;
                if i + 1 < n {
                    a[(i, i + 1)] = -c;
                    a[(i + 1, i)] = -c;
                }
            }
        }
        Grid::Radial(g) => {
            let h = g.h;
            for i in 0..n {
                let r = g.nodes[i];
                let (ri, ro) = (r - 0.5 * h, r + 0.5 * h);
                // u_0 = u_1 reflection: no flux through the inner face of the first node.
                let inner = if i == 0 { 0.0 } else { ri / (r * h * h) };
                let outer = ro / (r * h * h);
                a[(i, i)] = inner + outer;
                if i > 0 {
                    a[(i, i - 1)] = -inner;
                }
                if i + 1 < n {
                    a[(i, i + 1)] = -outer;
                }
            }
        }
        Grid::Polar(g) => {
            let (dr, dt, nt) = (g.dr, g.dtheta, g.ntheta);
            for i in 0..g.nr {
                let r = g.radii[i];
                let inner = if i == 0 { 0.0 } else { (r - 0.5 * dr) / (r * dr * dr) };
                let outer = (r + 0.5 * dr) / (r * dr * dr);
                let ang = 1.0 / (r * r * dt * dt);
                for j in 0..nt {
                    let p = i * nt + j;
                    a[(p, p)] = inner + outer + 2.0 * ang;
                    if i > 0 {
                        a[(p, p - nt)] = -inner;
                    }
                    if i + 1 < g.nr {
                        a[(p, p + nt)] = -outer;
                    }
                    a[(p, i * nt + (j + 1) % nt)] -= ang;
                    a[(p, i * nt + (j + nt - 1) % nt)] -= ang;
                }
            }
        }
    }
    let w = grid.weights();
    for i in 0..n {
        a[(i, i)] -= v[i];
    }
    let s = DMatrix::from_fn(n, n, |i, j| (w[i] / w[j]).sqrt() * a[(i, j)]);
    let sym = 0.5 * (&s + s.transpose());
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Random admissible potential with the mass of `V*`: a random base field
/// lifted by the constant that matches the mass after clipping to `[0, 1]`.
pub fn random_admissible(grid: &Arc<Grid>, v0: f64, rng: &mut ChaCha8Rng) -> PotentialField {
    let target = PotentialField::ball(grid.clone(), v0).unwrap().mass();
    let n = grid.len();
    let base: Vec<f64> = match rng.gen_range(0..3) {
        0 => (0..n).map(|_| rng.gen::<f64>()).collect(),
        1 => {
            // Off-center blob.
            let cx: f64 = rng.gen_range(-0.3..0.3);
            let cy: f64 = rng.gen_range(-0.3..0.3);
            let s: f64 = rng.gen_range(0.05..0.3);
            (0..n)
                .map(|i| {
                    let c = grid.coordinates(i);
                    let (x, y) = match grid.as_ref() {
                        Grid::Polar(_) => (c[0] * c[1].cos(), c[0] * c[1].sin()),
                        _ => (c[0], 0.0),
                    };
                    let d2 = (x - cx).powi(2) + (y - cy).powi(2);
                    (-d2 / (s * s)).exp() * 4.0
                })
                .collect()
        }
        _ => {
            // Smooth random profile in the distance to the center.
            let k: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            (0..n)
                .map(|i| {
                    let r = grid.distance_from_center(i) / grid.outer_radius();
                    k.iter().enumerate().map(|(m, a)| a * (PI * (m + 1) as f64 * r).cos()).sum::<f64>()
                })
                .collect()
        }
    };
    let mass_of = |c: f64| {
        let v: Vec<f64> = base.iter().map(|b| (b + c).clamp(0.0, 1.0)).collect();
        grid.integrate(&v).unwrap()
    };
    let (mut lo, mut hi) = (-10.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass_of(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    PotentialField::new(grid.clone(), base.iter().map(|b| (b + c).clamp(0.0, 1.0)).collect()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
