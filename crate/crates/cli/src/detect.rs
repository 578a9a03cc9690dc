use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use tailsep::risk::{risk_report, RiskReport};
use tailsep::tail_detect::{
    detect_with_scan, origin_diagnostic, ExcessOrigin, OriginDiagnostic, PValueMode,
};
use tailsep::{
    builtin_table, to_losses, CvarConvention, ScanOptions, SeriesTransform, TailEstimate, TailModel,
    TailScanRow,
};

use crate::input::{read_column_from_path, ColumnSelector};
use crate::output::{curve_csv, sibling, to_json, write_text};
use crate::CliError;

pub const DEFAULT_SEED: u64 = tailsep::critical_values::DEFAULT_SEED;

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TransformArg {
    Identity,
    Negate,
    NegLogReturns,
}

impl From<TransformArg> for SeriesTransform {
    fn from(t: TransformArg) -> Self {
        match t {
            TransformArg::Identity => SeriesTransform::Identity,
            TransformArg::Negate => SeriesTransform::Negate,
            TransformArg::NegLogReturns => SeriesTransform::NegLogReturns,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ConventionArg {
    /// Mean excess measured with the VaR as location.
    FromVar,
    /// Mean excess measured from the threshold.
    FromThreshold,
}

impl From<ConventionArg> for CvarConvention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::FromVar => CvarConvention::FromVar,
            ConventionArg::FromThreshold => CvarConvention::FromThreshold,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OriginArg {
    Inclusive,
    NextOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PValueArg {
    /// Interpolate the critical value table.
    Table,
    /// Parametric bootstrap at the fitted shape.
    Mc,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Input CSV file.
    #[arg(long)]
    input: PathBuf,
    /// Column by 1-based index or header name.
    #[arg(long, default_value = "1")]
    column: ColumnSelector,
    #[arg(long, value_enum, default_value = "identity")]
    transform: TransformArg,
    /// Confidence levels for VaR/CVaR, comma separated.
    #[arg(long, value_delimiter = ',')]
    levels: Vec<f64>,
    /// Initial price for the monetary loss of each VaR.
    #[arg(long)]
    s0: Option<f64>,
    #[arg(long, value_enum, default_value = "from-var")]
    cvar_convention: ConventionArg,
    #[arg(long, value_enum, default_value = "inclusive")]
    excess_origin: OriginArg,
    /// Also select k* under the other excess origin and report the shift.
    #[arg(long)]
    origin_diagnostic: bool,
    /// Tail sizes below this are flagged.
    #[arg(long, default_value_t = 25)]
    k_min_warn: usize,
    #[arg(long, value_enum, default_value = "table")]
    p_values: PValueArg,
    /// Replications for bootstrap p-values.
    #[arg(long, default_value_t = 1000)]
    mc_reps: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Critical value table CSV written by `crit-table`; the embedded table
    /// is used otherwise.
    #[arg(long)]
    table: Option<PathBuf>,
    /// JSON report path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Scan curve CSV path; defaults to `<output stem>.curve.csv`.
    #[arg(long)]
    curve: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputMeta {
    pub path: String,
    pub column: ColumnSelector,
    pub header: Option<String>,
    pub transform: SeriesTransform,
    /// Number of losses after the transform.
    pub n: usize,
}

/// Moment-fitted normal of the losses, for comparison with the tail model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalFit {
    pub mean: f64,
    pub std_dev: f64,
}

impl NormalFit {
    fn of(x: &[f64]) -> Self {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let ss = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
        NormalFit { mean, std_dev: (ss / (n - 1.0)).sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectReport {
    pub tool_version: String,
    pub input: InputMeta,
    pub options: ScanOptions,
    /// Seed of the bootstrap p-values, when they were simulated.
    pub seed: Option<u64>,
    pub table: String,
    pub model: TailModel,
    pub risk: Option<RiskReport>,
    pub normal_fit: NormalFit,
    pub origin_diagnostic: Option<OriginDiagnostic>,
    pub warnings: Vec<String>,
    pub curve: Vec<TailScanRow>,
}

pub fn run(args: DetectArgs) -> Result<(), CliError> {
    let table = match &args.table {
        Some(path) => crate::crit_table::load_table(path)?,
        None => builtin_table(),
    };
    let column = read_column_from_path(&args.input, &args.column)?;
    let transform = SeriesTransform::from(args.transform);
    let losses = to_losses(&column.values, transform)?;

    let p_value_mode = match args.p_values {
        PValueArg::Table => PValueMode::TableInterpolation,
        PValueArg::Mc => PValueMode::MonteCarlo { reps: args.mc_reps, seed: args.seed },
    };
    let options = ScanOptions {
        k_min_warn: args.k_min_warn,
        parallel: true,
        p_value_mode,
        excess_origin: match args.excess_origin {
            OriginArg::Inclusive => ExcessOrigin::Inclusive,
            OriginArg::NextOrder => ExcessOrigin::NextOrder,
        },
    };
    let detection = detect_with_scan(&losses, &table, &options)?;
    let mut warnings = detection.model.warnings.clone();

    let risk = if args.levels.is_empty() {
        None
    } else {
        let tail = TailEstimate::from(&detection.model);
        let report =
            risk_report(&tail, &args.levels, args.cvar_convention.into(), args.s0, Some(&losses))?;
        warnings.extend(report.entries.iter().filter_map(|e| e.flag.clone()));
        Some(report)
    };

    let diagnostic = if args.origin_diagnostic {
        let d = origin_diagnostic(&losses, true)?;
        if d.shift() != 0 {
            warnings.push(format!(
                "k* depends on the excess origin: {} (inclusive) vs {} (next order)",
                d.k_star_inclusive, d.k_star_next_order
            ));
        }
        Some(d)
    } else {
        None
    };

    let report = DetectReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        input: InputMeta {
            path: args.input.display().to_string(),
            column: args.column.clone(),
            header: column.header,
            transform,
            n: losses.len(),
        },
        options,
        seed: matches!(p_value_mode, PValueMode::MonteCarlo { .. }).then_some(args.seed),
        table: match &args.table {
            Some(p) => p.display().to_string(),
            None => "embedded".to_string(),
        },
        model: detection.model,
        risk,
        normal_fit: NormalFit::of(&losses),
        origin_diagnostic: diagnostic,
        warnings,
        curve: detection.rows,
    };

    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let curve_path = args.curve.clone().or_else(|| {
        args.output.as_ref().filter(|p| p.as_os_str() != "-").map(|p| sibling(p, "curve.csv"))
    });
    if let Some(path) = &curve_path {
        write_text(Some(path), &curve_csv(&report.curve)?)?;
    }
    write_text(args.output.as_deref(), &to_json(&report)?)
}
