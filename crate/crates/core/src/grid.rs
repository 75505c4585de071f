//! Uniform discretizations of the three supported geometries.
//!
//! * [`IntervalGrid`]: interior nodes of `(a, b)`, Dirichlet at both ends.
//! * [`RadialGrid`]: radial section of the disk `B(0, R)`, nodes `r_i = i h`,
//!   Dirichlet at `r = R`. The center is not a node.
//! * [`PolarGrid`]: tensor grid in `(r, θ)` on the same disk, periodic in `θ`.
//!
//! Every grid carries a positive quadrature weight per node. The weights are
//! the integrals of the piecewise-linear hat functions attached to the nodes,
//! which is also the normalization used by [`Grid::sample_radial_set`] and
//! [`PolarGrid::sample_region`] when turning a set into nodal values.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalGrid {
    pub a: f64,
    pub b: f64,
    pub n: usize,
    pub h: f64,
    pub nodes: Vec<f64>,
}

impl IntervalGrid {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(b > a) || !a.is_finite() || !b.is_finite() {
            return Err(Error::Domain(format!("interval requires a < b, got ({a}, {b})")));
        }
        if n < 3 {
            return Err(Error::Domain(format!("interval grid needs n >= 3, got {n}")));
        }
        let h = (b - a) / (n + 1) as f64;
        let nodes = (1..=n).map(|i| a + i as f64 * h).collect();
        Ok(IntervalGrid { a, b, n, h, nodes })
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.a + self.b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    pub radius: f64,
    pub n: usize,
    pub h: f64,
    pub nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl RadialGrid {
    /// Spatial dimension of the disk this grid is a section of.
    pub const DIM: usize = 2;

    pub fn new(radius: f64, n: usize) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::Domain(format!("radius must be positive, got {radius}")));
        }
        if n < 3 {
            return Err(Error::Domain(format!("radial grid needs n >= 3, got {n}")));
        }
        let h = radius / (n + 1) as f64;
        let nodes: Vec<f64> = (1..=n).map(|i| i as f64 * h).collect();
        let weights = nodes.iter().map(|r| 2.0 * PI * r * h).collect();
        Ok(RadialGrid { radius, n, h, nodes, weights })
    }

    /// `2π·radius·g`: integral over the circle of radius `radius` of a
    /// value that is constant on it.
    pub fn circle_integral(&self, radius: f64, g: f64) -> Result<f64> {
        check_circle(radius, self.radius)?;
        Ok(2.0 * PI * radius * g)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarGrid {
    pub radius: f64,
    pub nr: usize,
    pub ntheta: usize,
    pub dr: f64,
    pub dtheta: f64,
    pub radii: Vec<f64>,
    pub angles: Vec<f64>,
    weights: Vec<f64>,
}

impl PolarGrid {
    /// Sub-slices per angular cell used when sampling regions.
    const ANGULAR_SUBSLICES: usize = 8;

    pub fn new(radius: f64, nr: usize, ntheta: usize) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::Domain(format!("radius must be positive, got {radius}")));
        }
        if nr < 2 {
            return Err(Error::Domain(format!("polar grid needs nr >= 2, got {nr}")));
        }
        if ntheta < 4 || ntheta % 2 != 0 {
            return Err(Error::Domain(format!("ntheta must be even and >= 4, got {ntheta}")));
        }
        let dr = radius / (nr + 1) as f64;
        let dtheta = 2.0 * PI / ntheta as f64;
        let radii: Vec<f64> = (1..=nr).map(|i| i as f64 * dr).collect();
        let angles: Vec<f64> = (0..ntheta).map(|j| j as f64 * dtheta).collect();
        let mut weights = Vec::with_capacity(nr * ntheta);
        for r in &radii {
            weights.extend(std::iter::repeat_n(r * dr * dtheta, ntheta));
        }
        Ok(PolarGrid { radius, nr, ntheta, dr, dtheta, radii, angles, weights })
    }

    /// Flat index of ring `i` (0-based), angle `j`.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.ntheta + j
    }

    /// Highest Fourier mode representable on the angular grid.
    pub fn max_mode(&self) -> usize {
        self.ntheta / 2 - 1
    }

    /// Trapezoid rule on the circle of radius `radius` for uniformly spaced
    /// samples `g` (any count).
    pub fn circle_integral(&self, radius: f64, g: &[f64]) -> Result<f64> {
        check_circle(radius, self.radius)?;
        if g.is_empty() {
            return Err(Error::Sizing("no angular samples".into()));
        }
        let dtheta = 2.0 * PI / g.len() as f64;
        Ok(radius * g.iter().sum::<f64>() * dtheta)
    }

    /// Nodal values of the region `{(r, θ) : r ∈ ∪ intervals(θ)}`.
    ///
    /// Each value is `∫_region φ_ij / ∫ φ_ij` with `φ_ij` the bilinear hat
    /// function of the node, so it lies in `[0, 1]` and depends smoothly on
    /// the region boundary. The radial integral is exact; the angular one
    /// uses midpoint sub-slices aligned with the angular cell faces, which is
    /// exact when the intervals are constant on each angular cell.
    pub fn sample_region<F>(&self, mut intervals: F) -> Vec<f64>
    where
        F: FnMut(f64) -> Vec<(f64, f64)>,
    {
        let m = Self::ANGULAR_SUBSLICES;
        let nt = self.ntheta;
        let mut acc = vec![0.0; self.nr * nt];
        let mut column = vec![0.0; self.nr];
        for j in 0..nt {
            let jn = (j + 1) % nt;
            for s in 0..m {
                let frac = (s as f64 + 0.5) / m as f64;
                let theta = self.angles[j] + frac * self.dtheta;
                column.iter_mut().for_each(|c| *c = 0.0);
                for (lo, hi) in intervals(theta) {
                    radial_tent_integrals(lo, hi, self.dr, self.nr, |i, v| column[i] += v);
                }
                let slice = self.dtheta / m as f64;
                for (i, c) in column.iter().enumerate() {
                    if *c != 0.0 {
                        acc[i * nt + j] += slice * (1.0 - frac) * c;
                        acc[i * nt + jn] += slice * frac * c;
                    }
                }
            }
        }
        for (a, w) in acc.iter_mut().zip(&self.weights) {
            *a = snap_fraction(*a / w);
        }
        acc
    }
}

/// Clamps to `[0, 1]` and removes quadrature round-off at the ends.
fn snap_fraction(x: f64) -> f64 {
    if x > 1.0 - 1e-12 {
        1.0
    } else if x < 1e-12 {
        0.0
    } else {
        x
    }
}

fn check_circle(radius: f64, outer: f64) -> Result<()> {
    if radius > 0.0 && radius < outer {
        Ok(())
    } else {
        Err(Error::Domain(format!("circle radius {radius} outside (0, {outer})")))
    }
}

/// One of the supported geometries.
#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    Interval(IntervalGrid),
    Radial(RadialGrid),
    Polar(PolarGrid),
}

impl From<IntervalGrid> for Grid {
    fn from(g: IntervalGrid) -> Self {
        Grid::Interval(g)
    }
}

impl From<RadialGrid> for Grid {
    fn from(g: RadialGrid) -> Self {
        Grid::Radial(g)
    }
}

impl From<PolarGrid> for Grid {
    fn from(g: PolarGrid) -> Self {
        Grid::Polar(g)
    }
}

impl Grid {
    pub fn len(&self) -> usize {
        match self {
            Grid::Interval(g) => g.n,
            Grid::Radial(g) => g.n,
            Grid::Polar(g) => g.nr * g.ntheta,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Grid::Interval(_) => "interval",
            Grid::Radial(_) => "disk",
            Grid::Polar(_) => "polar",
        }
    }

    /// Quadrature weight of every node.
    pub fn weights(&self) -> std::borrow::Cow<'_, [f64]> {
        match self {
            Grid::Interval(g) => std::borrow::Cow::Owned(vec![g.h; g.n]),
            Grid::Radial(g) => std::borrow::Cow::Borrowed(&g.weights),
            Grid::Polar(g) => std::borrow::Cow::Borrowed(&g.weights),
        }
    }

    pub fn weight(&self, idx: usize) -> f64 {
        match self {
            Grid::Interval(g) => g.h,
            Grid::Radial(g) => g.weights[idx],
            Grid::Polar(g) => g.weights[idx],
        }
    }

    /// `Σ w_i f_i`.
    pub fn integrate(&self, f: &[f64]) -> Result<f64> {
        if f.len() != self.len() {
            return Err(Error::Sizing(format!("field has {} samples, grid has {} nodes", f.len(), self.len())));
        }
        Ok(match self {
            Grid::Interval(g) => g.h * f.iter().sum::<f64>(),
            _ => self.weights().iter().zip(f).map(|(w, v)| w * v).sum(),
        })
    }

    /// Measure of the continuous domain.
    pub fn domain_measure(&self) -> f64 {
        match self {
            Grid::Interval(g) => g.b - g.a,
            Grid::Radial(g) => PI * g.radius * g.radius,
            Grid::Polar(g) => PI * g.radius * g.radius,
        }
    }

    /// Largest distance from the center that stays inside the domain.
    pub fn outer_radius(&self) -> f64 {
        match self {
            Grid::Interval(g) => 0.5 * (g.b - g.a),
            Grid::Radial(g) => g.radius,
            Grid::Polar(g) => g.radius,
        }
    }

    /// Radius of the centered ball (interval: half-length) of measure `mass`.
    pub fn ball_radius(&self, mass: f64) -> f64 {
        match self {
            Grid::Interval(_) => 0.5 * mass,
            _ => (mass / PI).sqrt(),
        }
    }

    /// Measure of the centered shell `{lo <= |x - c| <= hi}`.
    pub fn shell_measure(&self, lo: f64, hi: f64) -> f64 {
        match self {
            Grid::Interval(_) => 2.0 * (hi - lo),
            _ => PI * (hi * hi - lo * lo),
        }
    }

    /// Distance of a node from the center of the domain.
    pub fn distance_from_center(&self, idx: usize) -> f64 {
        match self {
            Grid::Interval(g) => (g.nodes[idx] - g.center()).abs(),
            Grid::Radial(g) => g.nodes[idx],
            Grid::Polar(g) => g.radii[idx / g.ntheta],
        }
    }

    /// Grid spacing in the radial (or only) direction.
    pub fn spacing(&self) -> f64 {
        match self {
            Grid::Interval(g) => g.h,
            Grid::Radial(g) => g.h,
            Grid::Polar(g) => g.dr,
        }
    }

    /// Quadrature weight of a node at distance `r` from the center; the unit
    /// in which resolution-limited tolerances are expressed.
    pub fn cell_measure_at(&self, r: f64) -> f64 {
        match self {
            Grid::Interval(g) => g.h,
            Grid::Radial(g) => 2.0 * PI * r.max(g.h) * g.h,
            Grid::Polar(g) => r.max(g.dr) * g.dr * g.dtheta,
        }
    }

    /// Coordinates of a node: `[x]`, `[r]` or `[r, θ]`.
    pub fn coordinates(&self, idx: usize) -> Vec<f64> {
        match self {
            Grid::Interval(g) => vec![g.nodes[idx]],
            Grid::Radial(g) => vec![g.nodes[idx]],
            Grid::Polar(g) => vec![g.radii[idx / g.ntheta], g.angles[idx % g.ntheta]],
        }
    }

    pub fn coordinate_names(&self) -> &'static [&'static str] {
        match self {
            Grid::Interval(_) => &["x"],
            Grid::Radial(_) => &["r"],
            Grid::Polar(_) => &["r", "theta"],
        }
    }

    /// Nodal hat-weighted samples of the centered set
    /// `{x : |x - c| ∈ ∪ [lo, hi]}`.
    pub fn sample_radial_set(&self, shells: &[(f64, f64)]) -> Vec<f64> {
        match self {
            Grid::Interval(g) => {
                let c = g.center();
                let mut segments = Vec::with_capacity(2 * shells.len());
                for &(lo, hi) in shells {
                    if lo <= 0.0 {
                        segments.push((c - hi, c + hi));
                    } else {
                        segments.push((c - hi, c - lo));
                        segments.push((c + lo, c + hi));
                    }
                }
                sample_segments(g, &segments)
            }
            Grid::Radial(g) => {
                let mut acc = vec![0.0; g.n];
                for &(lo, hi) in shells {
                    radial_tent_integrals(lo, hi, g.h, g.n, |i, v| acc[i] += v);
                }
                for (a, r) in acc.iter_mut().zip(&g.nodes) {
                    *a = snap_fraction(*a / (r * g.h));
                }
                acc
            }
            Grid::Polar(g) => {
                let shells = shells.to_vec();
                g.sample_region(|_| shells.clone())
            }
        }
    }
}

/// Hat-weighted samples of a union of segments of the real line.
pub fn sample_segments(g: &IntervalGrid, segments: &[(f64, f64)]) -> Vec<f64> {
    let mut acc = vec![0.0; g.n];
    for &(lo, hi) in segments {
        let lo = lo.max(g.a);
        let hi = hi.min(g.b);
        if hi <= lo {
            continue;
        }
        let first = (((lo - g.a) / g.h).floor() as i64 - 1).max(1) as usize;
        let last = ((((hi - g.a) / g.h).ceil() as i64) + 1).min(g.n as i64) as usize;
        for i in first..=last {
            let c = g.nodes[i - 1];
            acc[i - 1] += tent_moment(c, g.h, lo, hi, false);
        }
    }
    acc.iter_mut().for_each(|a| *a = snap_fraction(*a / g.h));
    acc
}

/// Calls `add(i, ∫_lo^hi φ_i(r) r dr)` for every radial node `i` (0-based,
/// at `r = (i + 1) h`) whose hat overlaps `[lo, hi]`.
fn radial_tent_integrals<F: FnMut(usize, f64)>(lo: f64, hi: f64, h: f64, n: usize, mut add: F) {
    let lo = lo.max(0.0);
    let hi = hi.min((n + 1) as f64 * h);
    if hi <= lo {
        return;
    }
    let first = ((lo / h).floor() as i64).max(1) as usize;
    let last = (((hi / h).ceil() as i64) + 1).min(n as i64);
    if last < first as i64 {
        return;
    }
    for k in first..=last as usize {
        let c = k as f64 * h;
        let v = if c - h >= lo && c + h <= hi { c * h } else { tent_moment(c, h, lo, hi, true) };
        if v != 0.0 {
            add(k - 1, v);
        }
    }
}

/// `∫_{[lo,hi]} φ(x) x^p dx` for the hat `φ` of half-width `h` centered at
/// `c`, with `p = 1` when `radial` and `p = 0` otherwise.
fn tent_moment(c: f64, h: f64, lo: f64, hi: f64, radial: bool) -> f64 {
    // Local coordinate s = x - c; φ = 1 + s/h on [-h, 0], 1 - s/h on [0, h].
    let piece = |s0: f64, s1: f64, slope: f64| -> f64 {
        if s1 <= s0 {
            return 0.0;
        }
        // ∫ (1 + slope s)(c + s)^p ds
        let prim = |s: f64| {
            if radial {
                c * s + (1.0 + slope * c) * s * s / 2.0 + slope * s * s * s / 3.0
            } else {
                s + slope * s * s / 2.0
            }
        };
        prim(s1) - prim(s0)
    };
    let a = lo - c;
    let b = hi - c;
    piece(a.max(-h), b.min(0.0), 1.0 / h) + piece(a.max(0.0), b.min(h), -1.0 / h)
}
