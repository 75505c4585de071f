use std::path::Path;
use std::sync::Arc;

use spl_core::deficit::{deficit_survey, mixed_plan, DeficitBaseline, FamilyKind, PlanEntry};
use spl_core::eigen::lowest_two;
use spl_core::optimize::{annulus_competitor, delta_sweep, OptimizeOptions};
use spl_core::rearrange::l1_distance;
use spl_core::shape::{ball_context_with, fd_shape_check, second_shape_derivative, solve_modes, FourierPerturbation};
use spl_core::{Error, Grid, PotentialField, RadialGrid};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{coords, field_plot, gnuplot_prelude, num, opt, Outputs};

pub fn run(cfg: &RunConfig) -> Result<Outputs, CliError> {
    use crate::config::Command::*;
    let mut out = Outputs::new(&cfg.out_dir())?;
    match cfg.command {
        Eig => eig(cfg, &mut out)?,
        Modes => modes(cfg, &mut out)?,
        HessianCheck => hessian_check(cfg, &mut out)?,
        Optimize => optimize(cfg, &mut out)?,
        Deficit => deficit(cfg, &mut out)?,
    }
    out.write("config.resolved", &cfg.to_text())?;
    Ok(out)
}

fn coord_header(grid: &Grid) -> Vec<&'static str> {
    grid.coordinate_names().to_vec()
}

/// Reads nodal values: either one number per line, or a CSV whose header
/// has a `V` column (such as an `eig.csv`). `#` lines are skipped.
pub fn load_potential(path: &Path, grid: &Arc<Grid>) -> Result<PotentialField, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read potential file {}: {e}", path.display())))?;
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).peekable();
    let bad = |l: &str| CliError::Config(format!("potential file {}: cannot parse '{l}'", path.display()));
    let mut column = None;
    if let Some(first) = lines.peek() {
        if first.split(',').any(|f| f.trim().parse::<f64>().is_err()) {
            let idx = first.split(',').position(|f| f.trim() == "V").ok_or_else(|| {
                CliError::Config(format!("potential file {}: header has no V column", path.display()))
            })?;
            column = Some(idx);
            lines.next();
        }
    }
    let values = lines
        .map(|l| {
            let fields: Vec<&str> = l.split(',').collect();
            let f = match column {
                Some(i) => fields.get(i).copied(),
                None if fields.len() == 1 => Some(fields[0]),
                None => None,
            };
            f.and_then(|s| s.trim().parse::<f64>().ok()).ok_or_else(|| bad(l))
        })
        .collect::<Result<Vec<f64>, _>>()?;
    if values.len() != grid.len() {
        return Err(CliError::Config(format!(
            "potential file {} has {} values, the grid has {} nodes",
            path.display(),
            values.len(),
            grid.len()
        )));
    }
    Ok(PotentialField::new(grid.clone(), values)?)
}

fn eig(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let grid = cfg.grid()?;
    let v0 = cfg.f64("v0")?;
    let v = match cfg.str("potential") {
        "ball" => PotentialField::ball(grid.clone(), v0)?,
        "annulus" => annulus_competitor(&grid, v0, cfg.f64("delta")?)?.field,
        "file" => {
            let p = cfg.str("potential_file");
            if p.is_empty() {
                return Err(CliError::Config("potential = file needs potential_file".into()));
            }
            load_potential(Path::new(p), &grid)?
        }
        other => {
            return Err(CliError::Config(format!(
                "config key 'potential': unknown potential '{other}' (ball, annulus, file)"
            )))
        }
    };
    let (first, second) = lowest_two(&grid, &v, &cfg.solve_options()?)?;
    let mut header = coord_header(&grid);
    header.extend(["u", "V"]);
    let rows: Vec<Vec<String>> = (0..grid.len())
        .map(|i| {
            let mut r = coords(&grid, i);
            r.push(num(first.u[i]));
            r.push(num(v.values()[i]));
            r
        })
        .collect();
    out.csv("eig.csv", &header, &rows)?;
    out.csv(
        "summary.csv",
        &["lambda", "lambda2", "residual", "mass"],
        &[vec![num(first.lambda), num(second.lambda), num(first.residual), num(v.mass())]],
    )?;
    let nc = grid.coordinate_names().len();
    let script =
        gnuplot_prelude("principal eigenfunction") + &field_plot(&grid, "eig.csv", &[(nc + 1, "u"), (nc + 2, "V")]);
    out.write("eig.gp", &script)?;
    println!("lambda = {}  lambda2 = {}  mass = {}", first.lambda, second.lambda, v.mass());
    Ok(())
}

fn modes(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let rg = RadialGrid::new(cfg.f64("radius")?, cfg.usize("n")?)?;
    let k_max = cfg.usize("k_max")?;
    if k_max == 0 {
        return Err(CliError::Config("config key 'k_max' must be at least 1".into()));
    }
    let ctx = ball_context_with(&rg, cfg.f64("v0")?, &cfg.solve_options()?)?;
    let modes = solve_modes(&ctx, &rg, k_max)?;
    let rows: Vec<Vec<String>> =
        modes.iter().map(|m| vec![m.k.to_string(), num(m.omega), num(m.psi_at_rstar)]).collect();
    out.csv("omega.csv", &["k", "omega_k", "psi_at_rstar"], &rows)?;
    out.csv(
        "summary.csv",
        &["r_star", "lambda_star", "u_star_boundary", "du_star_boundary", "tau"],
        &[vec![
            num(ctx.r_star),
            num(ctx.lambda_star),
            num(ctx.u_star_boundary),
            num(ctx.du_star_boundary),
            num(ctx.tau),
        ]],
    )?;
    let limit = -ctx.du_star_boundary;
    let script = gnuplot_prelude("mode coefficients")
        + &format!(
            "set xlabel \"k\"\nset ylabel \"omega_k\"\nplot 'omega.csv' using 1:2 with linespoints title \"omega_k\", \\\n     {limit} with lines dashtype 2 title \"-u*'(r*)\"\n"
        );
    out.write("modes.gp", &script)?;
    println!("omega_1 = {}  omega_{k_max} = {}  -u*'(r*) = {limit}", modes[0].omega, modes[modes.len() - 1].omega);
    Ok(())
}

/// Parses `cos2`, `0.5*sin3` and sums of such terms joined by `+`.
pub fn parse_perturbation(spec: &str) -> Result<FourierPerturbation, CliError> {
    let bad = || CliError::Config(format!("cannot parse perturbation '{spec}' (expected terms like 0.5*cos2+sin3)"));
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    for term in spec.split('+') {
        let term = term.trim();
        let (coef, basis) = match term.split_once('*') {
            Some((c, b)) => (c.trim().parse::<f64>().map_err(|_| bad())?, b.trim()),
            None => (1.0, term),
        };
        let (is_cos, k) = if let Some(k) = basis.strip_prefix("cos") {
            (true, k)
        } else if let Some(k) = basis.strip_prefix("sin") {
            (false, k)
        } else {
            return Err(bad());
        };
        let k: usize = k.parse().map_err(|_| bad())?;
        if k == 0 || !coef.is_finite() {
            return Err(bad());
        }
        if alpha.len() < k {
            alpha.resize(k, 0.0);
            beta.resize(k, 0.0);
        }
        if is_cos {
            alpha[k - 1] += coef;
        } else {
            beta[k - 1] += coef;
        }
    }
    Ok(FourierPerturbation { alpha, beta })
}

fn hessian_check(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let specs = cfg.list("perturbations");
    if specs.is_empty() {
        return Err(CliError::Config("config key 'perturbations' is empty".into()));
    }
    let gs = specs.iter().map(|s| parse_perturbation(s)).collect::<Result<Vec<_>, _>>()?;
    let steps = cfg.f64_list("steps")?;
    let solve = cfg.solve_options()?;
    let polar = cfg.grid()?;
    let rg = RadialGrid::new(cfg.f64("radius")?, cfg.usize("radial_n")?)?;
    let ctx = ball_context_with(&rg, cfg.f64("v0")?, &solve)?;
    let k_max = gs.iter().map(|g| g.max_mode()).max().unwrap_or(0);
    let modes = solve_modes(&ctx, &rg, k_max)?;
    let mut rows = Vec::new();
    for (spec, g) in specs.iter().zip(&gs) {
        let rep = fd_shape_check(&ctx, &polar, g, &steps, &solve)?;
        let form = second_shape_derivative(&ctx, &modes, g)?;
        for e in &rep.estimates {
            let rel = ((e.second - form) / form).abs();
            rows.push(vec![spec.clone(), num(e.t), num(e.l_plus), num(e.first), num(e.second), num(form), num(rel)]);
            println!(
                "{spec}  t = {}  FD1 = {:e}  FD2 = {}  fourier = {form}  rel_err = {rel:.3e}",
                e.t, e.first, e.second
            );
        }
        if rep.noisy {
            eprintln!("warning: second differences for {spec} vary by more than 20% across steps");
        }
    }
    out.csv("hessian.csv", &["g", "t", "L", "FD1", "FD2", "fourier_form", "rel_err"], &rows)?;
    let plots: Vec<String> = specs
        .iter()
        .map(|s| format!("'hessian.csv' using 2:(strcol(1) eq \"{s}\" ? $7 : NaN) with linespoints title \"{s}\""))
        .collect();
    let script = gnuplot_prelude("second-difference error")
        + &format!("set logscale xy\nset xlabel \"t\"\nset ylabel \"rel_err\"\nplot {}\n", plots.join(", \\\n     "));
    out.write("hessian.gp", &script)?;
    Ok(())
}

fn optimize(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let grid = cfg.grid()?;
    let v0 = cfg.f64("v0")?;
    let deltas = cfg.f64_list("deltas")?;
    let opts = OptimizeOptions { max_iter: cfg.usize("max_iter")?, solve: cfg.solve_options()?, initial: None };
    let reports = delta_sweep(&grid, v0, &deltas, &opts)?;
    let v_star = PotentialField::ball(grid.clone(), v0)?;
    let mut header = coord_header(&grid);
    header.extend(["V_delta", "V_star_minus_V_delta", "u"]);
    let nc = grid.coordinate_names().len();
    let mut report_rows = Vec::new();
    let mut files = Vec::new();
    for (d, rep) in deltas.iter().zip(&reports) {
        let name = format!("potential_delta_{d}.csv");
        let rows: Vec<Vec<String>> = (0..grid.len())
            .map(|i| {
                let mut r = coords(&grid, i);
                let v = rep.potential.values()[i];
                r.push(num(v));
                r.push(num(v_star.values()[i] - v));
                r.push(num(rep.eigenfunction[i]));
                r
            })
            .collect();
        out.csv(&name, &header, &rows)?;
        let l1_annulus = match annulus_competitor(&grid, v0, *d) {
            Ok(a) => Some(l1_distance(&rep.potential, &a.field)?),
            Err(Error::Infeasible(_)) if *d == 0.0 => Some(l1_distance(&rep.potential, &v_star)?),
            Err(Error::Infeasible(_)) => None,
            Err(e) => return Err(e.into()),
        };
        if !rep.converged {
            eprintln!("warning: delta = {d} did not converge in {} iterations; best iterate kept", rep.iterations);
        }
        println!(
            "delta = {d}  lambda = {}  iterations = {}  converged = {}",
            rep.lambda, rep.iterations, rep.converged
        );
        report_rows.push(vec![
            num(*d),
            num(rep.lambda),
            rep.iterations.to_string(),
            rep.converged.to_string(),
            opt(rep.mu_delta),
            opt(rep.eta_delta),
            opt(rep.zeta_delta),
            opt(rep.f_delta),
            opt(l1_annulus),
        ]);
        files.push(name);
    }
    out.csv(
        "report.csv",
        &["delta", "lambda", "iterations", "converged", "mu", "eta", "zeta", "f_delta", "l1_to_annulus"],
        &report_rows,
    )?;
    let mut script = gnuplot_prelude("optimal potentials");
    for f in &files {
        script.push_str(&format!("set title \"{f}\"\n"));
        script.push_str(&field_plot(&grid, f, &[(nc + 1, "V_delta"), (nc + 2, "V* - V_delta")]));
        if !matches!(*grid, Grid::Polar(_)) {
            script.push_str("pause -1\n");
        }
    }
    out.write("optimize.gp", &script)?;
    Ok(())
}

fn deficit(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let families = cfg
        .list("families")
        .iter()
        .map(|s| s.parse::<FamilyKind>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Config(e.to_string()))?;
    if families.is_empty() {
        return Err(CliError::Config(format!(
            "config key 'families' is empty; valid families: {}",
            FamilyKind::valid_names()
        )));
    }
    let (dmin, dmax) = (cfg.f64("delta_min")?, cfg.f64("delta_max")?);
    let samples = cfg.usize("samples")?;
    let plan: Vec<PlanEntry> =
        mixed_plan(samples, dmin, dmax).into_iter().filter(|p| families.contains(&p.family)).collect();
    let seed = cfg.u64("seed")?;
    let base = DeficitBaseline::new(cfg.grid()?, cfg.f64("v0")?, &cfg.solve_options()?)?;
    let rep = deficit_survey(&base, &plan, seed)?;
    let rows: Vec<Vec<String>> = rep
        .samples
        .iter()
        .map(|s| {
            vec![
                s.index.to_string(),
                s.family.to_string(),
                num(s.delta),
                num(s.lambda),
                num(s.deficit),
                num(s.ratio),
                s.flagged.to_string(),
            ]
        })
        .collect();
    out.csv("samples.csv", &["index", "family", "delta", "lambda", "deficit", "ratio", "flagged"], &rows)?;
    let flagged = rep.samples.iter().filter(|s| s.flagged).count();
    let common = |scope: &str, count: usize, flagged: usize, min: f64, median: String| {
        vec![
            scope.to_string(),
            count.to_string(),
            flagged.to_string(),
            num(min),
            median,
            rep.seed.to_string(),
            num(rep.lambda_star),
            rep.grid_kind.to_string(),
            rep.grid_nodes.to_string(),
        ]
    };
    let mut kept: Vec<f64> = rep.samples.iter().filter(|s| !s.flagged).map(|s| s.ratio).collect();
    kept.sort_by(|a, b| a.total_cmp(b));
    let median = match kept.len() {
        0 => String::new(),
        m if m % 2 == 1 => num(kept[m / 2]),
        m => num(0.5 * (kept[m / 2 - 1] + kept[m / 2])),
    };
    let mut report = vec![common("all", rep.samples.len(), flagged, rep.min_ratio, median)];
    for f in &rep.families {
        report.push(common(f.family.name(), f.count, f.flagged, f.min_ratio, num(f.median_ratio)));
    }
    out.csv(
        "report.csv",
        &["scope", "count", "flagged", "min_ratio", "median_ratio", "seed", "lambda_star", "grid", "nodes"],
        &report,
    )?;
    let plots: Vec<String> = families
        .iter()
        .map(|f| format!("'samples.csv' using 3:(strcol(2) eq \"{f}\" ? $6 : NaN) with points title \"{f}\""))
        .collect();
    let script = gnuplot_prelude("deficit ratio G(V)")
        + &format!(
            "set logscale x\nset xlabel \"||V - V*||_1\"\nset ylabel \"G\"\nplot {}\n",
            plots.join(", \\\n     ")
        );
    out.write("deficit.gp", &script)?;
    println!("{} samples, {flagged} flagged, min ratio = {}", rep.samples.len(), rep.min_ratio);
    Ok(())
}
