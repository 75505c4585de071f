mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Command, RunConfig};
use error::CliError;

/// Principal eigenvalue of -Δ-V over bounded potentials of fixed mass.
#[derive(Parser)]
#[command(name = "spl", version, about)]
struct Cli {
    /// key = value configuration file; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<String>,

    /// Extra key=value overrides, applied after the named flags.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Default)]
struct GridArgs {
    /// interval, disk or polar.
    #[arg(long)]
    geometry: Option<String>,
    /// Radius of the disk.
    #[arg(long)]
    radius: Option<String>,
    /// Left end of the interval.
    #[arg(long, allow_hyphen_values = true)]
    a: Option<String>,
    /// Right end of the interval.
    #[arg(long, allow_hyphen_values = true)]
    b: Option<String>,
    /// Interior nodes of the interval or radial grid.
    #[arg(long)]
    n: Option<String>,
    /// Radial rings of the polar grid.
    #[arg(long)]
    nr: Option<String>,
    /// Angular cells of the polar grid.
    #[arg(long)]
    ntheta: Option<String>,
    /// Mean fraction of V over the domain.
    #[arg(long)]
    v0: Option<String>,
    /// Eigensolver tolerance.
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    solver_max_iter: Option<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Principal and second eigenvalue for a given potential.
    Eig {
        #[command(flatten)]
        grid: GridArgs,
        /// ball, annulus or file.
        #[arg(long)]
        potential: Option<String>,
        /// L1 distance of the annulus competitor.
        #[arg(long)]
        delta: Option<String>,
        /// Nodal values for potential = file.
        #[arg(long)]
        potential_file: Option<String>,
    },
    /// Mode coefficients omega_k of the ball.
    Modes {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        k_max: Option<String>,
    },
    /// Finite-difference check of the second shape derivative.
    HessianCheck {
        #[command(flatten)]
        grid: GridArgs,
        /// Comma-separated list such as cos1,cos2,0.5*sin3+cos1.
        #[arg(long)]
        perturbations: Option<String>,
        /// Comma-separated step sizes t.
        #[arg(long)]
        steps: Option<String>,
        /// Radial nodes of the mode solves.
        #[arg(long)]
        radial_n: Option<String>,
    },
    /// Bathtub fixed point of the delta-constrained problem.
    Optimize {
        #[command(flatten)]
        grid: GridArgs,
        /// Comma-separated L1 distances from V*.
        #[arg(long)]
        deltas: Option<String>,
        #[arg(long)]
        max_iter: Option<String>,
        /// Interval preset: v0 = 0.6, deltas 0.1, 0.2, 0.4, 0.8.
        #[arg(long)]
        remark3: bool,
    },
    /// Survey of the deficit ratio over competitor families.
    Deficit {
        #[command(flatten)]
        grid: GridArgs,
        /// Comma-separated family names.
        #[arg(long)]
        families: Option<String>,
        /// Samples per family.
        #[arg(long)]
        samples: Option<String>,
        #[arg(long)]
        delta_min: Option<String>,
        #[arg(long)]
        delta_max: Option<String>,
        #[arg(long)]
        seed: Option<String>,
    },
}

type Overrides = Vec<(String, String)>;

fn push(o: &mut Overrides, key: &str, value: &Option<String>) {
    if let Some(v) = value {
        o.push((key.to_string(), v.clone()));
    }
}

impl GridArgs {
    fn push_into(&self, o: &mut Overrides) {
        push(o, "geometry", &self.geometry);
        push(o, "radius", &self.radius);
        push(o, "a", &self.a);
        push(o, "b", &self.b);
        push(o, "n", &self.n);
        push(o, "nr", &self.nr);
        push(o, "ntheta", &self.ntheta);
        push(o, "v0", &self.v0);
        push(o, "tol", &self.tol);
        push(o, "solver_max_iter", &self.solver_max_iter);
    }
}

impl Cmd {
    fn resolve(&self) -> (Command, Overrides) {
        let mut o = Overrides::new();
        let command = match self {
            Cmd::Eig { grid, potential, delta, potential_file } => {
                grid.push_into(&mut o);
                push(&mut o, "potential", potential);
                push(&mut o, "delta", delta);
                push(&mut o, "potential_file", potential_file);
                Command::Eig
            }
            Cmd::Modes { grid, k_max } => {
                grid.push_into(&mut o);
                push(&mut o, "k_max", k_max);
                Command::Modes
            }
            Cmd::HessianCheck { grid, perturbations, steps, radial_n } => {
                grid.push_into(&mut o);
                push(&mut o, "perturbations", perturbations);
                push(&mut o, "steps", steps);
                push(&mut o, "radial_n", radial_n);
                Command::HessianCheck
            }
            Cmd::Optimize { grid, deltas, max_iter, remark3 } => {
                grid.push_into(&mut o);
                push(&mut o, "deltas", deltas);
                push(&mut o, "max_iter", max_iter);
                if *remark3 {
                    o.push(("remark3".into(), "true".into()));
                }
                Command::Optimize
            }
            Cmd::Deficit { grid, families, samples, delta_min, delta_max, seed } => {
                grid.push_into(&mut o);
                push(&mut o, "families", families);
                push(&mut o, "samples", samples);
                push(&mut o, "delta_min", delta_min);
                push(&mut o, "delta_max", delta_max);
                push(&mut o, "seed", seed);
                Command::Deficit
            }
        };
        (command, o)
    }
}

/// Applies `SPL_THREADS` (unset or 0: one thread per core).
fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("SPL_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("SPL_THREADS must be a nonnegative integer, got '{raw}'")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot size the thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let (command, mut overrides) = cli.command.resolve();
    push(&mut overrides, "out", &cli.out);
    for kv in &cli.set {
        let (k, v) =
            kv.split_once('=').ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        overrides.push((k.trim().to_string(), v.trim().to_string()));
    }
    let cfg = RunConfig::resolve(command, cli.config.as_deref(), &overrides)?;
    let outputs = commands::run(&cfg)?;
    for f in &outputs.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spl: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
