//! Quantitative deficit `λ(V) - λ(V*)` over sampled competitor families,
//! the parametric derivative, and the spectral gap.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::eigen::{check_fraction, lowest_two, principal_eigenpair, EigenPair, PotentialField, SolveOptions};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::optimize::annulus_competitor;
use crate::rearrange::l1_distance;
use crate::shape::{polar_of, FourierPerturbation};

/// Competitor families of the survey.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FamilyKind {
    Annulus,
    RadialRandom,
    PolarRandom,
    NormalDeformation,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 4] =
        [FamilyKind::Annulus, FamilyKind::RadialRandom, FamilyKind::PolarRandom, FamilyKind::NormalDeformation];

    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Annulus => "annulus",
            FamilyKind::RadialRandom => "radial-random",
            FamilyKind::PolarRandom => "polar-random",
            FamilyKind::NormalDeformation => "normal-deformation",
        }
    }

    pub fn valid_names() -> String {
        Self::ALL.iter().map(|f| f.name()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown family '{s}'; valid families: {}", Self::valid_names())))
    }
}

/// A fully specified competitor.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Annulus {
        delta: f64,
    },
    /// `V*` with random inner shells removed and outer shells added, each
    /// side of measure `δ/2`.
    RadialRandom {
        delta: f64,
    },
    /// `V*` with random angular bites removed and bumps added (polar grid).
    PolarRandom {
        delta: f64,
    },
    /// The ball deformed to `r = r* + c + t g(θ)`, `c` fixing the mass.
    NormalDeformation {
        g: FourierPerturbation,
        t: f64,
    },
}

impl Family {
    pub fn kind(&self) -> FamilyKind {
        match self {
            Family::Annulus { .. } => FamilyKind::Annulus,
            Family::RadialRandom { .. } => FamilyKind::RadialRandom,
            Family::PolarRandom { .. } => FamilyKind::PolarRandom,
            Family::NormalDeformation { .. } => FamilyKind::NormalDeformation,
        }
    }
}

/// `V*` and `λ(V*)` on one grid: the reference of every deficit.
#[derive(Debug, Clone)]
pub struct DeficitBaseline {
    pub grid: Arc<Grid>,
    pub v0: f64,
    pub v_star: PotentialField,
    pub lambda_star: f64,
    pub u_star: Vec<f64>,
    pub solve: SolveOptions,
}

impl DeficitBaseline {
    pub fn new(grid: Arc<Grid>, v0: f64, solve: &SolveOptions) -> Result<Self> {
        let v_star = PotentialField::ball(grid.clone(), v0)?;
        let e = principal_eigenpair(&grid, &v_star, solve)?;
        Ok(DeficitBaseline { grid, v0, v_star, lambda_star: e.lambda, u_star: e.u, solve: *solve })
    }

    pub fn r_star(&self) -> f64 {
        self.grid.ball_radius(self.v0 * self.grid.domain_measure())
    }

    /// Distances below this are flagged as unresolved.
    pub fn resolution_floor(&self) -> f64 {
        4.0 * self.grid.cell_measure_at(self.r_star())
    }
}

#[derive(Debug, Clone)]
pub struct DeficitSample {
    pub index: usize,
    pub family: FamilyKind,
    pub potential: PotentialField,
    pub lambda: f64,
    pub delta: f64,
    pub deficit: f64,
    pub ratio: f64,
    /// `δ` below four cell measures: reported, never asserted on.
    pub flagged: bool,
}

/// Minimum and median ratio of one family, over unflagged samples.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyStats {
    pub family: FamilyKind,
    pub count: usize,
    pub flagged: usize,
    pub min_ratio: f64,
    pub median_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct DeficitReport {
    pub samples: Vec<DeficitSample>,
    /// Minimum of `G` over unflagged samples.
    pub min_ratio: f64,
    pub families: Vec<FamilyStats>,
    pub grid_kind: &'static str,
    pub grid_nodes: usize,
    pub lambda_star: f64,
    pub seed: u64,
}

/// One entry of a survey plan: `count` samples of a family with `δ` drawn
/// log-uniformly from `[delta_min, delta_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanEntry {
    pub family: FamilyKind,
    pub count: usize,
    pub delta_min: f64,
    pub delta_max: f64,
}

/// Parametric derivative `-∫h u²` of `λ` at `V` in the direction `h`.
pub fn parametric_derivative(v: &PotentialField, h: &[f64], eig: &EigenPair) -> Result<f64> {
    let grid = v.grid();
    if h.len() != grid.len() || eig.u.len() != grid.len() {
        return Err(Error::Sizing("direction or eigenfunction does not match the grid".into()));
    }
    let tol = 1e-12;
    if let Some(i) = (0..h.len()).find(|&i| v.values()[i] >= 1.0 - tol && h[i] > tol) {
        return Err(Error::Domain(format!("direction increases V where V = 1 (node {i})")));
    }
    if let Some(i) = (0..h.len()).find(|&i| v.values()[i] <= tol && h[i] < -tol) {
        return Err(Error::Domain(format!("direction decreases V where V = 0 (node {i})")));
    }
    let mean = grid.integrate(h)?;
    if mean.abs() > 1e-8 {
        return Err(Error::Domain(format!("direction changes the mass: ∫h = {mean:e}")));
    }
    let hu2: Vec<f64> = h.iter().zip(&eig.u).map(|(a, u)| a * u * u).collect();
    Ok(-grid.integrate(&hu2)?)
}

/// `G(V) = (λ(V) - λ(V*)) / ‖V - V*‖₁²`.
pub fn deficit_ratio(v: &PotentialField, baseline: &DeficitBaseline) -> Result<DeficitSample> {
    let delta = l1_distance(v, &baseline.v_star)?;
    if delta == 0.0 {
        return Err(Error::Degenerate("V coincides with V*".into()));
    }
    let e = principal_eigenpair(v.grid(), v, &baseline.solve)?;
    let deficit = e.lambda - baseline.lambda_star;
    Ok(DeficitSample {
        index: 0,
        family: FamilyKind::RadialRandom,
        potential: v.clone(),
        lambda: e.lambda,
        delta,
        deficit,
        ratio: deficit / (delta * delta),
        flagged: delta < baseline.resolution_floor(),
    })
}

/// `λ₂(V) - λ₁(V)`.
pub fn spectral_gap(grid: &Grid, v: &PotentialField, opts: &SolveOptions) -> Result<f64> {
    let (a, b) = lowest_two(grid, v, opts)?;
    Ok(b.lambda - a.lambda)
}

/// Random split of `total` into `k` positive parts.
fn split(rng: &mut ChaCha8Rng, total: f64, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| 0.2 + rng.gen::<f64>()).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|x| total * x / s).collect()
}

/// `k` disjoint intervals of total length `len` at random positions in
/// `[lo, hi]`.
fn random_segments(rng: &mut ChaCha8Rng, lo: f64, hi: f64, len: f64, k: usize) -> Vec<(f64, f64)> {
    let lengths = split(rng, len, k);
    let gaps = split(rng, hi - lo - len, k + 1);
    let mut out = Vec::with_capacity(k);
    let mut x = lo;
    for (l, g) in lengths.iter().zip(&gaps) {
        x += g;
        out.push((x, x + l));
        x += l;
    }
    out
}

/// Builds the competitor on the grid. Randomized families draw from a
/// ChaCha8 stream fixed by `seed`.
pub fn sample_admissible(grid: &Arc<Grid>, v0: f64, family: &Family, seed: u64) -> Result<PotentialField> {
    check_fraction(v0)?;
    let omega = grid.domain_measure();
    let mass = v0 * omega;
    let r_star = grid.ball_radius(mass);
    let outer = grid.outer_radius();
    let h = grid.spacing();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let feasible = |delta: f64| -> Result<()> {
        if delta > 0.0
            && 0.5 * delta
                < (mass - grid.shell_measure(0.0, 2.0 * h))
                    .min(omega - mass - grid.shell_measure(outer - 2.0 * h, outer))
        {
            Ok(())
        } else {
            Err(Error::Infeasible(format!("delta = {delta} does not fit inside and outside B* for v0 = {v0}")))
        }
    };
    match family {
        Family::Annulus { delta } => Ok(annulus_competitor(grid, v0, *delta)?.field),
        Family::RadialRandom { delta } => {
            feasible(*delta)?;
            // Lay the shells out in the measure coordinate s = |B(0, r)|.
            let to_r = |s: f64| match **grid {
                Grid::Interval(_) => 0.5 * s,
                _ => (s / PI).sqrt(),
            };
            let s_min = grid.shell_measure(0.0, 2.0 * h);
            let s_max = grid.shell_measure(0.0, outer - 2.0 * h);
            let k_in = rng.gen_range(1..=3);
            let k_out = rng.gen_range(1..=3);
            let inner = random_segments(&mut rng, s_min, mass, 0.5 * delta, k_in);
            let bumps = random_segments(&mut rng, mass, s_max, 0.5 * delta, k_out);
            let mut shells = Vec::new();
            let mut start = 0.0;
            for (a, b) in inner {
                shells.push((to_r(start), to_r(a)));
                start = b;
            }
            shells.push((to_r(start), r_star));
            shells.extend(bumps.into_iter().map(|(a, b)| (to_r(a), to_r(b))));
            PotentialField::new(grid.clone(), grid.sample_radial_set(&shells))
        }
        Family::PolarRandom { delta } => {
            feasible(*delta)?;
            let polar = polar_of(grid)?;
            let nt = polar.ntheta;
            let dt = polar.dtheta;
            let r_min = 2.0 * polar.dr;
            let r_max = polar.radius - 2.0 * polar.dr;
            // Sector `[first, first + width)` in angular cells with its new
            // radius, for `k` disjoint arcs of the circle.
            let sectors =
                |rng: &mut ChaCha8Rng, k: usize, masses: &[f64], inward: bool| -> Result<Vec<(usize, usize, f64)>> {
                    let arc = nt / k;
                    let mut out = Vec::with_capacity(k);
                    for (j, &m) in masses.iter().enumerate() {
                        let room =
                            if inward { r_star * r_star - r_min * r_min } else { r_max * r_max - r_star * r_star };
                        // Smallest width whose sector can hold the mass.
                        let need = (2.0 * m / (room * dt)).ceil() as usize;
                        let need = need.max(1);
                        if need > arc {
                            return Err(Error::Infeasible(format!("delta = {delta} too large for angular sectors")));
                        }
                        let width = rng.gen_range(need..=arc);
                        let first = j * arc + rng.gen_range(0..=arc - width);
                        let a = 2.0 * m / (width as f64 * dt);
                        let rho = if inward { (r_star * r_star - a).sqrt() } else { (r_star * r_star + a).sqrt() };
                        out.push((first, width, rho));
                    }
                    Ok(out)
                };
            let k_in = rng.gen_range(1..=3);
            let k_out = rng.gen_range(1..=3);
            let m_in = split(&mut rng, 0.5 * delta, k_in);
            let m_out = split(&mut rng, 0.5 * delta, k_out);
            let bites = sectors(&mut rng, k_in, &m_in, true)?;
            let bumps = sectors(&mut rng, k_out, &m_out, false)?;
            let offset = rng.gen_range(0..nt);
            let lookup = |list: &[(usize, usize, f64)], cell: usize| {
                list.iter().find(|(first, width, _)| (cell + nt - (first + offset) % nt) % nt < *width).map(|s| s.2)
            };
            let values = polar.sample_region(|theta| {
                let cell = ((theta / dt).floor() as usize).min(nt - 1);
                let inner = lookup(&bites, cell).unwrap_or(r_star);
                match lookup(&bumps, cell) {
                    Some(rho) if inner < r_star => vec![(0.0, inner), (r_star, rho)],
                    Some(rho) => vec![(0.0, rho)],
                    None => vec![(0.0, inner)],
                }
            });
            PotentialField::new(grid.clone(), values)
        }
        Family::NormalDeformation { g, t } => normal_deformation(grid, r_star, mass, g, *t),
    }
}

/// Mass-matched deformed ball `{r <= r* + c + t g(θ)}`.
fn normal_deformation(
    grid: &Arc<Grid>,
    r_star: f64,
    mass: f64,
    g: &FourierPerturbation,
    t: f64,
) -> Result<PotentialField> {
    let polar = polar_of(grid)?;
    let amp = t.abs() * g.sup_bound();
    let lo = 2.0 * polar.dr;
    let hi = polar.radius - 2.0 * polar.dr;
    let c0 = (r_star * r_star - t * t * g.angular_norm_sq() / (2.0 * PI)).max(0.0).sqrt() - r_star;
    if r_star + c0 - amp < lo || r_star + c0 + amp > hi {
        return Err(Error::Infeasible(format!("deformation amplitude {amp} leaves the grid")));
    }
    let sample = |c: f64| polar.sample_region(|theta| vec![(0.0, r_star + c + t * g.eval(theta))]);
    let target = PotentialField::ball(grid.clone(), mass / grid.domain_measure())?.mass();
    let mut c = c0;
    let mut values = sample(c);
    for _ in 0..8 {
        let m = grid.integrate(&values)?;
        let err = m - target;
        if err.abs() <= 1e-13 * target {
            break;
        }
        c -= err / (2.0 * PI * (r_star + c));
        values = sample(c);
    }
    PotentialField::new(grid.clone(), values)
}

/// Draws the concrete competitor of sample `index`.
pub fn draw_family(kind: FamilyKind, delta_min: f64, delta_max: f64, r_star: f64, seed: u64, index: usize) -> Family {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let delta = if delta_max > delta_min {
        (delta_min.ln() + rng.gen::<f64>() * (delta_max.ln() - delta_min.ln())).exp()
    } else {
        delta_min
    };
    match kind {
        FamilyKind::Annulus => Family::Annulus { delta },
        FamilyKind::RadialRandom => Family::RadialRandom { delta },
        FamilyKind::PolarRandom => Family::PolarRandom { delta },
        FamilyKind::NormalDeformation => {
            let k_max = rng.gen_range(1..=6usize);
            let alpha: Vec<f64> = (1..=k_max).map(|k| rng.gen_range(-1.0..1.0) / k as f64).collect();
            let beta: Vec<f64> = (1..=k_max).map(|k| rng.gen_range(-1.0..1.0) / k as f64).collect();
            let g = FourierPerturbation { alpha, beta };
            // ‖V - V*‖₁ ≈ t r* ∫|g| dθ for small t.
            let n = 720;
            let abs_int: f64 =
                (0..n).map(|j| g.eval(2.0 * PI * j as f64 / n as f64).abs()).sum::<f64>() * 2.0 * PI / n as f64;
            let t = delta / (r_star * abs_int.max(1e-12));
            Family::NormalDeformation { g, t }
        }
    }
}

/// `per_family` samples of every family over the same `δ` range.
pub fn mixed_plan(per_family: usize, delta_min: f64, delta_max: f64) -> Vec<PlanEntry> {
    FamilyKind::ALL.iter().map(|&family| PlanEntry { family, count: per_family, delta_min, delta_max }).collect()
}

/// Evaluates every planned sample in parallel; results are ordered by
/// sample index, so the report does not depend on scheduling.
pub fn deficit_survey(baseline: &DeficitBaseline, plan: &[PlanEntry], seed: u64) -> Result<DeficitReport> {
    if plan.is_empty() || plan.iter().all(|p| p.count == 0) {
        return Err(Error::Domain("survey plan is empty".into()));
    }
    for p in plan {
        if !(p.delta_min > 0.0 && p.delta_max >= p.delta_min) {
            return Err(Error::Domain(format!(
                "invalid delta range [{}, {}] for {}",
                p.delta_min, p.delta_max, p.family
            )));
        }
    }
    let jobs: Vec<(usize, &PlanEntry)> =
        plan.iter().flat_map(|p| std::iter::repeat_n(p, p.count)).enumerate().collect();
    let r_star = baseline.r_star();
    let samples: Vec<DeficitSample> = jobs
        .par_iter()
        .map(|&(index, entry)| {
            let family = draw_family(entry.family, entry.delta_min, entry.delta_max, r_star, seed, index);
            let sample_seed = seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let v = sample_admissible(&baseline.grid, baseline.v0, &family, sample_seed)
                .map_err(|e| annotate(e, index, &family))?;
            let mut s = deficit_ratio(&v, baseline).map_err(|e| annotate(e, index, &family))?;
            s.index = index;
            s.family = entry.family;
            Ok(s)
        })
        .collect::<Result<_>>()?;
    let min_ratio = samples.iter().filter(|s| !s.flagged).map(|s| s.ratio).fold(f64::INFINITY, f64::min);
    let mut families = Vec::new();
    for kind in FamilyKind::ALL {
        let of_kind: Vec<&DeficitSample> = samples.iter().filter(|s| s.family == kind).collect();
        if of_kind.is_empty() {
            continue;
        }
        let mut ratios: Vec<f64> = of_kind.iter().filter(|s| !s.flagged).map(|s| s.ratio).collect();
        ratios.sort_by(|a, b| a.total_cmp(b));
        let (min_ratio, median_ratio) = if ratios.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            let m = ratios.len();
            let med = if m % 2 == 1 { ratios[m / 2] } else { 0.5 * (ratios[m / 2 - 1] + ratios[m / 2]) };
            (ratios[0], med)
        };
        families.push(FamilyStats {
            family: kind,
            count: of_kind.len(),
            flagged: of_kind.len() - ratios.len(),
            min_ratio,
            median_ratio,
        });
    }
    Ok(DeficitReport {
        samples,
        min_ratio,
        families,
        grid_kind: baseline.grid.kind(),
        grid_nodes: baseline.grid.len(),
        lambda_star: baseline.lambda_star,
        seed,
    })
}

fn annotate(e: Error, index: usize, family: &Family) -> Error {
    let ctx = format!("sample {index} ({family:?})");
    match e {
        Error::Infeasible(m) => Error::Infeasible(format!("{ctx}: {m}")),
        Error::Solver(m) => Error::Solver(format!("{ctx}: {m}")),
        Error::IterationLimit { iterations, residual } => {
            Error::Solver(format!("{ctx}: no convergence after {iterations} iterations, residual {residual:e}"))
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{IntervalGrid, PolarGrid, RadialGrid};

    fn polar(n: usize) -> Arc<Grid> {
        Arc::new(PolarGrid::new(1.0, n, n).unwrap().into())
    }

    #[test]
    fn family_names_round_trip() {
        for f in FamilyKind::ALL {
            assert_eq!(f.name().parse::<FamilyKind>().unwrap(), f);
        }
        let err = "spiral".parse::<FamilyKind>().unwrap_err();
        assert!(err.to_string().contains("polar-random"));
    }

    #[test]
    fn parametric_derivative_checks() {
        let g: Arc<Grid> = Arc::new(IntervalGrid::new(-1.0, 1.0, 99).unwrap().into());
        let v = PotentialField::ball(g.clone(), 0.5).unwrap();
        let e = principal_eigenpair(&g, &v, &SolveOptions::default()).unwrap();
        assert_eq!(parametric_derivative(&v, &vec![0.0; 99], &e).unwrap(), 0.0);
        let mut up = vec![0.0; 99];
        up[49] = 1.0;
        up[0] = -1.0;
        let msg = parametric_derivative(&v, &up, &e).unwrap_err().to_string();
        assert!(msg.contains("V = 1"), "{msg}");
        let mut down = vec![0.0; 99];
        down[0] = -1.0;
        down[1] = 1.0;
        let msg = parametric_derivative(&v, &down, &e).unwrap_err().to_string();
        assert!(msg.contains("V = 0"), "{msg}");
        let mut unbalanced = vec![0.0; 99];
        unbalanced[0] = 1.0;
        let msg = parametric_derivative(&v, &unbalanced, &e).unwrap_err().to_string();
        assert!(msg.contains("mass"), "{msg}");
    }

    #[test]
    fn annulus_direction_is_positive() {
        let g: Arc<Grid> = Arc::new(RadialGrid::new(1.0, 1024).unwrap().into());
        let base = DeficitBaseline::new(g.clone(), 0.25, &SolveOptions::default()).unwrap();
        let e = principal_eigenpair(&g, &base.v_star, &SolveOptions::default()).unwrap();
        let mut ratios = Vec::new();
        for delta in [0.01, 0.02, 0.05] {
            let a = annulus_competitor(&g, 0.25, delta).unwrap();
            let h: Vec<f64> = a.field.values().iter().zip(base.v_star.values()).map(|(x, y)| x - y).collect();
            let d = parametric_derivative(&base.v_star, &h, &e).unwrap();
            assert!(d > 0.0);
            ratios.push(d / (delta * delta));
        }
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(lo > 0.0);
    }

    #[test]
    fn annulus_family_delegates() {
        let g = polar(32);
        let f = sample_admissible(&g, 0.25, &Family::Annulus { delta: 0.05 }, 1).unwrap();
        assert_eq!(f, annulus_competitor(&g, 0.25, 0.05).unwrap().field);
    }

    #[test]
    fn random_families_are_deterministic_and_mass_exact() {
        let g = polar(64);
        let target = PotentialField::ball(g.clone(), 0.25).unwrap().mass();
        for seed in 0..20 {
            for kind in [FamilyKind::RadialRandom, FamilyKind::PolarRandom, FamilyKind::NormalDeformation] {
                let fam = draw_family(kind, 0.01, 0.1, 0.5, 7, seed);
                let a = sample_admissible(&g, 0.25, &fam, seed as u64).unwrap();
                let b = sample_admissible(&g, 0.25, &fam, seed as u64).unwrap();
                assert_eq!(a, b);
                assert!((a.mass() - target).abs() < 1e-12, "{kind}: {} vs {target}", a.mass());
            }
        }
    }

    #[test]
    fn radial_random_on_disk_has_requested_distance() {
        let g: Arc<Grid> = Arc::new(RadialGrid::new(1.0, 1024).unwrap().into());
        let v_star = PotentialField::ball(g.clone(), 0.25).unwrap();
        for seed in 0..10 {
            let v = sample_admissible(&g, 0.25, &Family::RadialRandom { delta: 0.04 }, seed).unwrap();
            assert!((v.mass() - v_star.mass()).abs() < 1e-12);
            let d = l1_distance(&v, &v_star).unwrap();
            assert!((d - 0.04).abs() < 4.0 * g.cell_measure_at(0.5), "seed {seed}: {d}");
        }
    }

    #[test]
    fn polar_family_needs_polar_grid() {
        let g: Arc<Grid> = Arc::new(RadialGrid::new(1.0, 64).unwrap().into());
        assert!(sample_admissible(&g, 0.25, &Family::PolarRandom { delta: 0.02 }, 0).is_err());
        assert!(matches!(
            sample_admissible(&g, 0.25, &Family::RadialRandom { delta: 2.0 }, 0),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn deficit_examples() {
        let g: Arc<Grid> = Arc::new(RadialGrid::new(1.0, 512).unwrap().into());
        let base = DeficitBaseline::new(g.clone(), 0.25, &SolveOptions::default()).unwrap();
        let a = annulus_competitor(&g, 0.25, 0.05).unwrap();
        let s = deficit_ratio(&a.field, &base).unwrap();
        assert!(s.ratio > 0.0 && !s.flagged);
        // One ring outward: resolution warning path.
        let h = g.spacing();
        let shifted =
            PotentialField::new(g.clone(), g.sample_radial_set(&[(0.0, 0.5 - h / 2.0), (0.5, 0.5 + h / 2.0)])).unwrap();
        let s = deficit_ratio(&shifted, &base).unwrap();
        assert!(s.flagged);
        assert!(s.deficit >= -1e-8);
        assert!(matches!(deficit_ratio(&base.v_star, &base), Err(Error::Degenerate(_))));
    }

    #[test]
    fn gap_examples() {
        let g: Arc<Grid> = Arc::new(IntervalGrid::new(-1.0, 1.0, 2047).unwrap().into());
        let zero = PotentialField::constant(g.clone(), 0.0).unwrap();
        let gap = spectral_gap(&g, &zero, &SolveOptions::default()).unwrap();
        assert!((gap - 0.75 * PI * PI).abs() < 1e-3);
        let small: Arc<Grid> = Arc::new(IntervalGrid::new(-1.0, 1.0, 201).unwrap().into());
        let v = PotentialField::ball(small.clone(), 0.4).unwrap();
        let shifted = PotentialField::new(small.clone(), v.values().iter().map(|x| x * 0.5 + 0.25).collect()).unwrap();
        let half = PotentialField::new(small.clone(), v.values().iter().map(|x| x * 0.5).collect()).unwrap();
        let a = spectral_gap(&small, &half, &SolveOptions::default()).unwrap();
        let b = spectral_gap(&small, &shifted, &SolveOptions::default()).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn empty_plan_rejected() {
        let g: Arc<Grid> = Arc::new(RadialGrid::new(1.0, 64).unwrap().into());
        let base = DeficitBaseline::new(g, 0.25, &SolveOptions::default()).unwrap();
        assert!(deficit_survey(&base, &[], 1).is_err());
    }

    #[test]
    fn small_survey_is_deterministic() {
        let g = polar(48);
        let base = DeficitBaseline::new(g, 0.25, &SolveOptions::default()).unwrap();
        let plan: Vec<PlanEntry> = FamilyKind::ALL
            .iter()
            .map(|&family| PlanEntry { family, count: 3, delta_min: 0.02, delta_max: 0.08 })
            .collect();
        let a = deficit_survey(&base, &plan, 11).unwrap();
        let b = deficit_survey(&base, &plan, 11).unwrap();
        assert_eq!(a.samples.len(), 12);
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_eq!(x.index, y.index);
            assert_eq!(x.lambda.to_bits(), y.lambda.to_bits());
        }
        assert!(a.min_ratio > 0.0);
        assert_eq!(a.families.len(), 4);
    }
}
