use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use tailsep::critical_values::{
    generate_table, TableMetadata, DEFAULT_SEED, TABLE_P_GRID, TABLE_XI_GRID,
};
use tailsep::{builtin_table, CriticalValueTable, GofStat, McConfig};

use crate::output::{sibling, to_json, write_text};
use crate::CliError;

/// Relative tolerance for cells with `p >= 0.01` in `--verify`.
const CENTRAL_TOL: f64 = 0.025;
/// Relative tolerance for the extreme cells `p < 0.01`.
const EXTREME_TOL: f64 = 0.06;

#[derive(Debug, Args)]
pub struct CritTableArgs {
    /// Replications per shape; at least 10000.
    #[arg(long, default_value_t = 200_000)]
    reps: usize,
    /// Simulated sample size.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Shape grid, ascending.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = TABLE_XI_GRID)]
    xi_grid: Vec<f64>,
    /// Significance levels, descending.
    #[arg(long, value_delimiter = ',', default_values_t = TABLE_P_GRID)]
    p_grid: Vec<f64>,
    /// Table CSV path; the metadata goes to the same stem with `.json`.
    #[arg(long, default_value = "crit_table.csv")]
    output: PathBuf,
    /// Compare with the embedded table and print the relative deviations.
    #[arg(long)]
    verify: bool,
    /// Write the embedded table instead of simulating one.
    #[arg(long, conflicts_with = "verify")]
    embedded: bool,
}

pub fn run(args: CritTableArgs) -> Result<(), CliError> {
    let table = if args.embedded {
        builtin_table()
    } else {
        let config = McConfig { replications: args.reps, sample_size: args.n, seed: args.seed };
        config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        generate_table(config, &args.xi_grid, &args.p_grid).map_err(|e| match e {
            tailsep::Error::Domain(msg) => CliError::Usage(msg),
            other => other.into(),
        })?
    };

    let mut csv = Vec::new();
    table.write_csv(&mut csv)?;
    let csv = String::from_utf8(csv).map_err(|e| CliError::Numerical(e.to_string()))?;
    write_text(Some(&args.output), &csv)?;
    write_text(Some(&sibling(&args.output, "json")), &to_json(&table.metadata())?)?;

    if args.verify {
        print!("{}", verify_report(&table, &builtin_table()));
    }
    Ok(())
}

/// Reads a table CSV and its `.json` metadata sidecar.
pub fn load_table(path: &Path) -> Result<CriticalValueTable, CliError> {
    let meta_path = sibling(path, "json");
    let meta = std::fs::read_to_string(&meta_path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", meta_path.display())))?;
    let meta: TableMetadata = serde_json::from_str(&meta)
        .map_err(|e| CliError::Data(format!("{}: {e}", meta_path.display())))?;
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    Ok(CriticalValueTable::read_csv(file, meta)?)
}

/// Largest relative deviation among one class of cells.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Deviation {
    pub max: f64,
    pub xi: f64,
    pub p: f64,
    pub cells: usize,
    pub over_tolerance: usize,
}

impl Deviation {
    fn add(&mut self, rel: f64, xi: f64, p: f64, tol: f64) {
        self.cells += 1;
        if rel > tol {
            self.over_tolerance += 1;
        }
        if rel > self.max {
            *self = Deviation { max: rel, xi, p, ..*self };
        }
    }
}

/// Deviations of `table` from `reference` on their common grid points,
/// split into central (`p >= 0.01`) and extreme cells.
pub fn deviations(table: &CriticalValueTable, reference: &CriticalValueTable, stat: GofStat) -> (Deviation, Deviation) {
    let mut central = Deviation::default();
    let mut extreme = Deviation::default();
    for &xi in table.xi_grid() {
        for &p in table.p_grid() {
            let (Some(v), Some(r)) = (table.lookup(stat, xi, p), reference.lookup(stat, xi, p)) else {
                continue;
            };
            let rel = (v - r).abs() / r.abs();
            if p >= 0.01 {
                central.add(rel, xi, p, CENTRAL_TOL);
            } else {
                extreme.add(rel, xi, p, EXTREME_TOL);
            }
        }
    }
    (central, extreme)
}

fn verify_report(table: &CriticalValueTable, reference: &CriticalValueTable) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "stat,cells,max_rel_dev,at_xi,at_p,over_tol,tol");
    for stat in GofStat::ALL {
        let (central, extreme) = deviations(table, reference, stat);
        for (label, d, tol) in [("p>=0.01", central, CENTRAL_TOL), ("p<0.01", extreme, EXTREME_TOL)] {
            let _ = writeln!(
                out,
                "{} {label},{},{:.4},{},{},{},{tol}",
                stat.name(),
                d.cells,
                d.max,
                d.xi,
                d.p,
                d.over_tolerance,
            );
        }
    }
    out
}
