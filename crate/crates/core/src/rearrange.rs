//! Schwarz rearrangement and bathtub selection on the grids.

use std::cmp::Ordering;

use crate::eigen::PotentialField;
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Indicator of a super-level set of `u` with prescribed mass, restricted to
/// a mask.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetSelection {
    /// Values in `{0, 1}` except at most one node with a fractional value.
    pub chi: Vec<f64>,
    /// Threshold: `chi = 1` where `u > mu`, `chi = 0` where `u < mu`.
    pub mu: f64,
    pub mass: f64,
}

/// Node-based mask of the centered open ball `{|x - c| < r}`.
pub fn ball_mask(grid: &Grid, r: f64) -> Vec<bool> {
    (0..grid.len()).map(|i| grid.distance_from_center(i) < r).collect()
}

/// Smallest node-based centered ball whose measure reaches `mass`; whole
/// rings are added in order of distance from the center.
pub fn centered_mask(grid: &Grid, mass: f64) -> Vec<bool> {
    let n = grid.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        grid.distance_from_center(a)
            .partial_cmp(&grid.distance_from_center(b))
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let tol = 1e-12 * grid.outer_radius();
    let mut mask = vec![false; n];
    let mut acc = 0.0;
    let mut k = 0;
    while k < n && acc < mass * (1.0 - 1e-12) {
        let d = grid.distance_from_center(order[k]);
        while k < n && (grid.distance_from_center(order[k]) - d).abs() <= tol {
            mask[order[k]] = true;
            acc += grid.weight(order[k]);
            k += 1;
        }
    }
    mask
}

pub fn complement(mask: &[bool]) -> Vec<bool> {
    mask.iter().map(|m| !m).collect()
}

fn check_field(grid: &Grid, f: &[f64]) -> Result<()> {
    if f.len() != grid.len() {
        return Err(Error::Sizing(format!("field has {} samples, grid has {} nodes", f.len(), grid.len())));
    }
    Ok(())
}

/// Nodes sorted by decreasing value, ties by index.
fn descending_order(values: &[f64], nodes: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut idx: Vec<usize> = nodes.collect();
    idx.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    idx
}

/// Radially symmetric nonincreasing rearrangement of `f >= 0`.
///
/// On the interval the values are permuted onto nodes sorted by `|x - c|`.
/// On the disk grids a node (radial) or ring (polar) receives the mean of
/// the decreasing rearrangement over the measure it occupies, which keeps
/// `∫f` and the distribution function up to one ring, and does not increase
/// `∫f²`.
pub fn schwarz_rearrangement(grid: &Grid, f: &[f64]) -> Result<Vec<f64>> {
    check_field(grid, f)?;
    if let Some((i, v)) = f.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::Domain(format!("rearrangement needs a nonnegative field, got {v} at node {i}")));
    }
    let sorted = descending_order(f, 0..f.len());
    let n = grid.len();
    let mut by_distance: Vec<usize> = (0..n).collect();
    by_distance.sort_by(|&a, &b| {
        grid.distance_from_center(a)
            .partial_cmp(&grid.distance_from_center(b))
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut out = vec![0.0; n];
    if let Grid::Interval(_) = grid {
        for (&dst, &src) in by_distance.iter().zip(&sorted) {
            out[dst] = f[src];
        }
        return Ok(out);
    }

    // Rings: runs of nodes at the same distance.
    let tol = 1e-12 * grid.outer_radius();
    let weights = grid.weights();
    let mut src = sorted.iter().map(|&i| (weights[i], f[i])).peekable();
    let mut carry: Option<(f64, f64)> = None;
    let mut start = 0;
    while start < n {
        let d = grid.distance_from_center(by_distance[start]);
        let mut end = start;
        while end < n && (grid.distance_from_center(by_distance[end]) - d).abs() <= tol {
            end += 1;
        }
        let ring = &by_distance[start..end];
        let need: f64 = ring.iter().map(|&i| weights[i]).sum();
        let mut left = need;
        let mut acc = 0.0;
        while left > 0.0 {
            let (w, v) = match carry.take().or_else(|| src.next()) {
                Some(p) => p,
                None => break,
            };
            if w <= left {
                acc += w * v;
                left -= w;
            } else {
                acc += left * v;
                carry = Some((w - left, v));
                left = 0.0;
            }
            if left <= 1e-15 * need {
                break;
            }
        }
        let mean = acc / need;
        for &i in ring {
            out[i] = mean;
        }
        start = end;
    }
    Ok(out)
}

/// Schwarz rearrangement of a potential; the result is again admissible.
pub fn schwarz_potential(v: &PotentialField) -> Result<PotentialField> {
    let grid = v.grid().clone();
    let values = schwarz_rearrangement(&grid, v.values())?;
    let values = values.into_iter().map(|x| x.clamp(0.0, 1.0)).collect();
    PotentialField::new(grid, values)
}

/// Bathtub principle: the indicator supported in `mask` with the given mass
/// that maximizes `∫χu²` for `u >= 0`, i.e. the super-level set of `u`.
pub fn bathtub_select(grid: &Grid, u: &[f64], mass: f64, mask: &[bool]) -> Result<LevelSetSelection> {
    check_field(grid, u)?;
    if mask.len() != grid.len() {
        return Err(Error::Sizing("mask does not match the grid".into()));
    }
    if !(mass >= 0.0) {
        return Err(Error::Domain(format!("mass must be nonnegative, got {mass}")));
    }
    let weights = grid.weights();
    let available: f64 = (0..u.len()).filter(|&i| mask[i]).map(|i| weights[i]).sum();
    if mass > available * (1.0 + 1e-12) + 1e-15 {
        return Err(Error::Infeasible(format!("mass {mass} exceeds the mask measure {available}")));
    }
    let order = descending_order(u, (0..u.len()).filter(|&i| mask[i]));
    let mut chi = vec![0.0; u.len()];
    let mut mu = order.first().map(|&i| u[i]).unwrap_or(f64::NAN);
    let mut left = mass;
    let mut achieved = 0.0;
    for &i in &order {
        if left <= 1e-15 * mass {
            break;
        }
        let w = weights[i];
        let take = if left >= w * (1.0 - 1e-12) { 1.0 } else { left / w };
        chi[i] = take;
        achieved += take * w;
        left -= take * w;
        mu = u[i];
    }
    Ok(LevelSetSelection { chi, mu, mass: achieved })
}

/// `∫|V1 - V2|`.
pub fn l1_distance(a: &PotentialField, b: &PotentialField) -> Result<f64> {
    if !a.same_grid(b) {
        return Err(Error::Domain("potentials live on different grids".into()));
    }
    let diff: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).collect();
    a.grid().integrate(&diff)
}
