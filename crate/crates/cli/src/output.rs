//! CSV and gnuplot emission.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use spl_core::Grid;

pub const SCHEMA_LINE: &str = "# spectral-potential-lab schema v1";

/// Collects the paths written by a command.
#[derive(Debug, Default)]
pub struct Outputs {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(dir: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Outputs { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> std::io::Result<()> {
        let mut s = String::new();
        writeln!(s, "{SCHEMA_LINE}").unwrap();
        writeln!(s, "{}", header.join(",")).unwrap();
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            writeln!(s, "{}", row.join(",")).unwrap();
        }
        self.write(name, &s)
    }

    pub fn write(&mut self, name: &str, contents: &str) -> std::io::Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents)?;
        self.files.push(path);
        Ok(())
    }
}

/// Shortest round-trip form; exponent notation outside `[1e-4, 1e15)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Node coordinates as CSV fields.
pub fn coords(grid: &Grid, i: usize) -> Vec<String> {
    grid.coordinates(i).into_iter().map(num).collect()
}

/// Script prelude for comma-separated files with a header row.
pub fn gnuplot_prelude(title: &str) -> String {
    format!(
        "# gnuplot script; run with `gnuplot -p <this file>` from the output directory\n\
         set datafile separator ','\n\
         set key autotitle columnhead\n\
         set title \"{title}\"\n\
         set grid\n"
    )
}

/// Plot commands for a nodal field stored in column `col` of `file`:
/// a line plot over `x` or `r`, or a surface over the disk.
pub fn field_plot(grid: &Grid, file: &str, cols: &[(usize, &str)]) -> String {
    match grid {
        Grid::Polar(_) => {
            let mut s = String::from("set view map\nset size ratio -1\nset pm3d at b\nunset surface\n");
            for (col, label) in cols {
                s.push_str(&format!(
                    "set title \"{label}\"\nsplot '{file}' using ($1*cos($2)):($1*sin($2)):{col} with points palette pt 5 ps 0.3 notitle\npause -1\n"
                ));
            }
            s
        }
        _ => {
            let x = if matches!(grid, Grid::Interval(_)) { "x" } else { "r" };
            let items: Vec<String> = cols
                .iter()
                .map(|(col, label)| format!("'{file}' using 1:{col} with lines title \"{label}\""))
                .collect();
            format!("set xlabel \"{x}\"\nplot {}\n", items.join(", \\\n     "))
        }
    }
}
