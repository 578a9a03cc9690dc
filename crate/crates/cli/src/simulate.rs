use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use tailsep::critical_values::DEFAULT_SEED;
use tailsep::tail_detect::{detect_with_scan, ideal_case_sample, mc_experiment, McExperiment};
use tailsep::{builtin_table, ParentDistribution, ParentKind, ScanOptions};

use crate::output::{csv_err, csv_writer, curve_csv, finish_csv, write_text};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Deterministic quantile samples.
    Ideal,
    /// Repeated random samples.
    Mc,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    mode: Mode,
    /// lognormal, normal, gev, gpd or exponential.
    #[arg(long)]
    parent: ParentKind,
    /// Location; 0 by default.
    #[arg(long, allow_negative_numbers = true)]
    mu: Option<f64>,
    /// Scale; 1 by default.
    #[arg(long)]
    sigma: Option<f64>,
    /// Shape for gev and gpd; 0.5 by default.
    #[arg(long, allow_negative_numbers = true)]
    xi: Option<f64>,
    /// Sample sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1000")]
    n: Vec<usize>,
    /// Replications per sample size in mc mode.
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Directory for the CSV outputs.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Also write each ideal-case sample.
    #[arg(long)]
    emit_sample: bool,
}

fn parent(args: &SimulateArgs) -> Result<ParentDistribution, CliError> {
    let r = ParentDistribution::reference(args.parent);
    Ok(ParentDistribution::new(
        args.parent,
        args.mu.unwrap_or(r.mu),
        args.sigma.unwrap_or(r.sigma),
        args.xi.unwrap_or(r.xi),
    )?)
}

pub fn run(args: SimulateArgs) -> Result<(), CliError> {
    let parent = parent(&args)?;
    if args.n.is_empty() {
        return Err(CliError::Usage("--n needs at least one sample size".into()));
    }
    match args.mode {
        Mode::Ideal => ideal(&args, &parent),
        Mode::Mc => mc(&args, &parent),
    }
}

/// Single-column sample CSV with header `x`.
pub fn sample_csv(x: &[f64]) -> Result<String, CliError> {
    let mut w = csv_writer();
    w.write_record(["x"]).map_err(csv_err)?;
    for v in x {
        w.write_record([v.to_string()]).map_err(csv_err)?;
    }
    finish_csv(w)
}

fn file(dir: &Path, name: String) -> PathBuf {
    dir.join(name)
}

fn ideal(args: &SimulateArgs, parent: &ParentDistribution) -> Result<(), CliError> {
    let name = args.parent.name();
    let table = builtin_table();
    let mut summary = csv_writer();
    summary
        .write_record(["n", "k_star", "tail_fraction", "u", "xi", "sigma", "au2_at_k_star", "terminal_au2"])
        .map_err(csv_err)?;
    for &n in &args.n {
        let x = ideal_case_sample(parent, n)?;
        if args.emit_sample {
            write_text(Some(&file(&args.out_dir, format!("ideal_{name}_n{n}.csv"))), &sample_csv(&x)?)?;
        }
        let d = detect_with_scan(&x, &table, &ScanOptions::default())?;
        write_text(
            Some(&file(&args.out_dir, format!("ideal_{name}_n{n}.curve.csv"))),
            &curve_csv(&d.rows)?,
        )?;
        let m = &d.model;
        let terminal = d.rows.last().map_or(f64::NAN, |r| r.au2);
        summary
            .write_record([
                n.to_string(),
                m.k_star.to_string(),
                m.tail_fraction().to_string(),
                m.u.to_string(),
                m.params.xi.to_string(),
                m.params.sigma.to_string(),
                m.gof.au2.value.to_string(),
                terminal.to_string(),
            ])
            .map_err(csv_err)?;
    }
    let summary = finish_csv(summary)?;
    write_text(Some(&file(&args.out_dir, format!("ideal_{name}_summary.csv"))), &summary)?;
    print!("{summary}");
    Ok(())
}

fn kstar_histogram(e: &McExperiment) -> Result<String, CliError> {
    let mut counts = BTreeMap::new();
    for &k in &e.k_star {
        *counts.entry(k).or_insert(0usize) += 1;
    }
    let mut w = csv_writer();
    w.write_record(["k_star", "count"]).map_err(csv_err)?;
    for (k, c) in counts {
        w.write_record([k.to_string(), c.to_string()]).map_err(csv_err)?;
    }
    finish_csv(w)
}

fn mc(args: &SimulateArgs, parent: &ParentDistribution) -> Result<(), CliError> {
    let name = args.parent.name();
    let mut summary = csv_writer();
    summary
        .write_record(["n", "reps", "seed", "mean_curve_argmin", "median_k_star", "mean_tail_fraction"])
        .map_err(csv_err)?;
    for &n in &args.n {
        let e = mc_experiment(parent, n, args.reps, args.seed)?;
        let stem = format!("mc_{name}_n{n}");

        let mut curve = csv_writer();
        curve.write_record(["k", "mean", "lo", "hi"]).map_err(csv_err)?;
        for p in &e.curve {
            curve
                .write_record([p.k.to_string(), p.mean.to_string(), p.lower.to_string(), p.upper.to_string()])
                .map_err(csv_err)?;
        }
        write_text(Some(&file(&args.out_dir, format!("{stem}.curve.csv"))), &finish_csv(curve)?)?;
        write_text(Some(&file(&args.out_dir, format!("{stem}.kstar.csv"))), &kstar_histogram(&e)?)?;

        let mut reps = csv_writer();
        reps.write_record(["rep", "k_star", "xi"]).map_err(csv_err)?;
        for (r, (k, xi)) in e.k_star.iter().zip(&e.xi_at_k_star).enumerate() {
            reps.write_record([r.to_string(), k.to_string(), xi.to_string()]).map_err(csv_err)?;
        }
        write_text(Some(&file(&args.out_dir, format!("{stem}.replications.csv"))), &finish_csv(reps)?)?;

        let mut sorted = e.k_star.clone();
        sorted.sort_unstable();
        let mean_fraction = e.k_star.iter().sum::<usize>() as f64 / (e.reps * n) as f64;
        summary
            .write_record([
                n.to_string(),
                e.reps.to_string(),
                e.seed.to_string(),
                e.mean_curve_argmin.to_string(),
                sorted[sorted.len() / 2].to_string(),
                mean_fraction.to_string(),
            ])
            .map_err(csv_err)?;
    }
    let summary = finish_csv(summary)?;
    write_text(Some(&file(&args.out_dir, format!("mc_{name}_summary.csv"))), &summary)?;
    print!("{summary}");
    Ok(())
}
