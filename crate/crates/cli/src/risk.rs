use std::path::PathBuf;

use clap::Args;
use tailsep::risk::risk_report;
use tailsep::{GpdParams, TailEstimate};

use crate::detect::{ConventionArg, DetectReport};
use crate::output::write_json;
use crate::CliError;

#[derive(Debug, Args)]
pub struct RiskArgs {
    /// JSON report written by `detect`.
    #[arg(long, conflicts_with_all = ["u", "xi", "sigma", "k_star", "n"])]
    report: Option<PathBuf>,
    /// Threshold.
    #[arg(long, allow_negative_numbers = true)]
    u: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    xi: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Number of tail points.
    #[arg(long)]
    k_star: Option<usize>,
    /// Sample size.
    #[arg(long)]
    n: Option<usize>,
    /// Confidence levels, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    levels: Vec<f64>,
    /// Initial price for the monetary loss of each VaR.
    #[arg(long)]
    s0: Option<f64>,
    #[arg(long, value_enum, default_value = "from-var")]
    cvar_convention: ConventionArg,
    /// JSON output path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn tail(args: &RiskArgs) -> Result<TailEstimate, CliError> {
    if let Some(path) = &args.report {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
        let report: DetectReport = serde_json::from_str(&text)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        return Ok(TailEstimate::from(&report.model));
    }
    match (args.u, args.xi, args.sigma, args.k_star, args.n) {
        (Some(u), Some(xi), Some(sigma), Some(k), Some(n)) => {
            Ok(TailEstimate::new(u, GpdParams::new(xi, sigma)?, k, n)?)
        }
        _ => Err(CliError::Usage(
            "give either --report or all of --u, --xi, --sigma, --k-star and --n".into(),
        )),
    }
}

pub fn run(args: RiskArgs) -> Result<(), CliError> {
    let tail = tail(&args)?;
    let report = risk_report(&tail, &args.levels, args.cvar_convention.into(), args.s0, None)?;
    for flag in report.entries.iter().filter_map(|e| e.flag.as_deref()) {
        eprintln!("warning: {flag}");
    }
    write_json(args.output.as_deref(), &report)
}
