//! Threshold selection by scanning candidate tail sizes.
//!
//! For every `k = 2..=n` the `k` largest observations form the candidate
//! tail. A GPD is fitted to their excesses over the `k`-th largest value and
//! scored with `AU²`; the selected tail size `k*` minimizes `AU²`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::critical_values::{mc_p_value, CriticalValueTable, GofStat, PValue};
use crate::distributions::{stream_rng, GpdParams, ParentDistribution};
use crate::error::{domain, Error, Result};
use crate::gpd_fit::{fit_sorted, fitted_gof, FitMethod};
use crate::serde_util::{inf_as_null, nan_as_null};

/// Consecutive tail sizes fitted in one warm-started sweep. Fixed so that
/// results do not depend on the thread count.
const BLOCK: usize = 512;
/// Central probability mass of the Monte Carlo bands (one standard deviation
/// of a normal).
pub const BAND_MASS: f64 = 0.6827;
pub const MIN_EXPERIMENT_REPS: usize = 100;

/// Origin of the excesses for a tail of `k` points.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExcessOrigin {
    /// Excesses over the `k`-th largest value, which contributes a zero.
    #[default]
    Inclusive,
    /// Excesses over the `(k+1)`-th largest value; all `k` are positive.
    NextOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMode {
    TableInterpolation,
    MonteCarlo { reps: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    /// Tail sizes below this trigger a warning.
    pub k_min_warn: usize,
    pub parallel: bool,
    pub p_value_mode: PValueMode,
    pub excess_origin: ExcessOrigin,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            k_min_warn: 25,
            parallel: true,
            p_value_mode: PValueMode::TableInterpolation,
            excess_origin: ExcessOrigin::Inclusive,
        }
    }
}

/// Fit and statistics for one candidate tail size. Rows whose excesses are
/// all zero (tied top values) carry NaN parameters and infinite statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailScanRow {
    pub k: usize,
    #[serde(with = "nan_as_null")]
    pub xi: f64,
    #[serde(with = "nan_as_null")]
    pub sigma: f64,
    #[serde(with = "inf_as_null")]
    pub au2: f64,
    #[serde(with = "inf_as_null")]
    pub w2: f64,
    #[serde(with = "inf_as_null")]
    pub a2: f64,
    pub fit_converged: bool,
}

impl TailScanRow {
    fn degenerate(k: usize) -> Self {
        TailScanRow {
            k,
            xi: f64::NAN,
            sigma: f64::NAN,
            au2: f64::INFINITY,
            w2: f64::INFINITY,
            a2: f64::INFINITY,
            fit_converged: false,
        }
    }

    pub fn statistic(&self, stat: GofStat) -> f64 {
        match stat {
            GofStat::W2 => self.w2,
            GofStat::A2 => self.a2,
            GofStat::AU2 => self.au2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofEntry {
    pub value: f64,
    pub p_value: PValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailGof {
    pub w2: GofEntry,
    pub a2: GofEntry,
    pub au2: GofEntry,
}

/// The selected tail model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailModel {
    /// Threshold, the `k_star`-th largest observation.
    pub u: f64,
    pub k_star: usize,
    pub n: usize,
    pub params: GpdParams,
    pub fit_converged: bool,
    pub gof: TailGof,
    pub warnings: Vec<String>,
}

impl TailModel {
    pub fn tail_fraction(&self) -> f64 {
        self.k_star as f64 / self.n as f64
    }
}

/// Scan curve together with the model selected from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub rows: Vec<TailScanRow>,
    pub model: TailModel,
}

fn sorted_sample(sample: &[f64]) -> Result<Vec<f64>> {
    if sample.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: sample.len() });
    }
    if let Some(x) = sample.iter().find(|x| !x.is_finite()) {
        return Err(domain(format!("sample contains a non-finite value {x}")));
    }
    let mut z = sample.to_vec();
    z.sort_by(f64::total_cmp);
    if z[0] == z[z.len() - 1] {
        return Err(Error::DegenerateData("all sample values are equal".into()));
    }
    Ok(z)
}

/// One row per tail size `k = 2..=n` (`..=n-1` for [`ExcessOrigin::NextOrder`]).
pub fn scan(sample: &[f64], options: &ScanOptions) -> Result<Vec<TailScanRow>> {
    let z = sorted_sample(sample)?;
    Ok(scan_sorted(&z, options.excess_origin, options.parallel))
}

fn scan_sorted(z: &[f64], origin: ExcessOrigin, parallel: bool) -> Vec<TailScanRow> {
    let n = z.len();
    let k_max = match origin {
        ExcessOrigin::Inclusive => n,
        ExcessOrigin::NextOrder => n - 1,
    };
    let starts: Vec<usize> = (2..=k_max).step_by(BLOCK).collect();
    let run = |&start: &usize| scan_block(z, start, (start + BLOCK - 1).min(k_max), origin);
    let blocks: Vec<Vec<TailScanRow>> = if parallel {
        starts.par_iter().map(run).collect()
    } else {
        starts.iter().map(run).collect()
    };
    blocks.concat()
}

/// Rows `first..=last`, each fit warm-started from its predecessor.
fn scan_block(z: &[f64], first: usize, last: usize, origin: ExcessOrigin) -> Vec<TailScanRow> {
    let n = z.len();
    let mut rows = Vec::with_capacity(last + 1 - first);
    let mut excesses = Vec::with_capacity(last);
    let mut probs = Vec::with_capacity(last);
    let mut log_surv = Vec::with_capacity(last);
    // The two previous fits, most recent first.
    let mut prev: [Option<GpdParams>; 2] = [None, None];
    for k in first..=last {
        let u = match origin {
            ExcessOrigin::Inclusive => z[n - k],
            ExcessOrigin::NextOrder => z[n - k - 1],
        };
        excesses.clear();
        excesses.extend(z[n - k..].iter().map(|x| x - u));
        let Ok(fit) = fit_sorted(&excesses, extrapolate(prev)) else {
            rows.push(TailScanRow::degenerate(k));
            prev = [None, None];
            continue;
        };
        let stats = fitted_gof(&fit.params, &excesses, &mut probs, &mut log_surv);
        rows.push(TailScanRow {
            k,
            xi: fit.params.xi,
            sigma: fit.params.sigma,
            au2: stats.au2,
            w2: stats.w2,
            a2: stats.a2,
            fit_converged: fit.converged && fit.method == FitMethod::Mle,
        });
        prev = [Some(fit.params), prev[0]];
    }
    rows
}

/// Linear extrapolation of the fitted parameters to the next tail size.
fn extrapolate(prev: [Option<GpdParams>; 2]) -> Option<GpdParams> {
    match prev {
        [Some(a), Some(b)] => {
            let sigma = 2.0 * a.sigma - b.sigma;
            Some(if sigma > 0.0 { GpdParams { xi: 2.0 * a.xi - b.xi, sigma } } else { a })
        }
        [a, _] => a,
    }
}

/// Index of the smallest `AU²`, ties resolved towards the smaller `k`.
fn argmin_au2(rows: &[TailScanRow]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, r) in rows.iter().enumerate() {
        if r.au2.is_finite() && best.is_none_or(|b| r.au2 < rows[b].au2) {
            best = Some(i);
        }
    }
    best
}

/// Scans and selects the tail model.
pub fn detect(
    sample: &[f64],
    table: &CriticalValueTable,
    options: &ScanOptions,
) -> Result<TailModel> {
    Ok(detect_with_scan(sample, table, options)?.model)
}

/// Like [`detect`], also returning the full scan curve.
pub fn detect_with_scan(
    sample: &[f64],
    table: &CriticalValueTable,
    options: &ScanOptions,
) -> Result<Detection> {
    let z = sorted_sample(sample)?;
    let rows = scan_sorted(&z, options.excess_origin, options.parallel);
    let model = select(&z, &rows, table, options)?;
    Ok(Detection { rows, model })
}

fn select(
    z: &[f64],
    rows: &[TailScanRow],
    table: &CriticalValueTable,
    options: &ScanOptions,
) -> Result<TailModel> {
    let n = z.len();
    let best = argmin_au2(rows)
        .ok_or_else(|| Error::DegenerateData("no tail size admits a GPD fit".into()))?;
    let row = rows[best];
    let k_star = row.k;
    let u = match options.excess_origin {
        ExcessOrigin::Inclusive => z[n - k_star],
        ExcessOrigin::NextOrder => z[n - k_star - 1],
    };
    let params = GpdParams::new(row.xi, row.sigma)?;
    let mut warnings = Vec::new();
    if k_star < options.k_min_warn {
        warnings.push(format!(
            "selected tail has only {k_star} points (fewer than {})",
            options.k_min_warn
        ));
    }
    if !row.fit_converged {
        warnings.push(format!(
            "GPD fit at k* = {k_star} did not converge to an interior likelihood maximum"
        ));
    }
    let entry = |stat: GofStat| -> Result<GofEntry> {
        let value = row.statistic(stat);
        let p_value = match options.p_value_mode {
            PValueMode::TableInterpolation => table.p_value(stat, params.xi, value)?,
            PValueMode::MonteCarlo { reps, seed } => {
                PValue::Estimate(mc_p_value(stat, params.xi, k_star, value, reps, seed)?)
            }
        };
        Ok(GofEntry { value, p_value })
    };
    let gof = TailGof { w2: entry(GofStat::W2)?, a2: entry(GofStat::A2)?, au2: entry(GofStat::AU2)? };
    if options.p_value_mode == PValueMode::TableInterpolation {
        warnings.extend(table.shape_warning(params.xi));
    }
    Ok(TailModel { u, k_star, n, params, fit_converged: row.fit_converged, gof, warnings })
}

/// Sensitivity of the selected tail size to the excess origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OriginDiagnostic {
    pub k_star_inclusive: usize,
    pub k_star_next_order: usize,
}

impl OriginDiagnostic {
    pub fn shift(&self) -> i64 {
        self.k_star_next_order as i64 - self.k_star_inclusive as i64
    }
}

/// Selects `k*` under both excess origins.
pub fn origin_diagnostic(sample: &[f64], parallel: bool) -> Result<OriginDiagnostic> {
    let z = sorted_sample(sample)?;
    let pick = |origin| {
        let rows = scan_sorted(&z, origin, parallel);
        argmin_au2(&rows)
            .map(|i| rows[i].k)
            .ok_or_else(|| Error::DegenerateData("no tail size admits a GPD fit".into()))
    };
    Ok(OriginDiagnostic {
        k_star_inclusive: pick(ExcessOrigin::Inclusive)?,
        k_star_next_order: pick(ExcessOrigin::NextOrder)?,
    })
}

/// Deterministic ascending sample `x_k = H^-1(k/n)`, `k = 1..n`. The top point
/// uses the finite upper endpoint when there is one and the plotting position
/// `(n - 0.5)/n` otherwise.
pub fn ideal_case_sample(parent: &ParentDistribution, n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let nf = n as f64;
    let mut out = (1..n)
        .map(|k| parent.quantile(k as f64 / nf))
        .collect::<Result<Vec<_>>>()?;
    let end = parent.upper_endpoint();
    out.push(if end.is_finite() { end } else { parent.quantile((nf - 0.5) / nf)? });
    Ok(out)
}

/// Per-`k` summary of the `AU²` curves over many samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: usize,
    pub mean: f64,
    /// Lower edge of the central [`BAND_MASS`] band.
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McExperiment {
    pub parent: ParentDistribution,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub curve: Vec<CurvePoint>,
    /// `k` at the minimum of the mean curve.
    pub mean_curve_argmin: usize,
    /// Selected tail size of each replication.
    pub k_star: Vec<usize>,
    /// Fitted shape at `k*` of each replication.
    pub xi_at_k_star: Vec<f64>,
}

/// Repeats the scan on `reps` seeded samples from `parent`.
pub fn mc_experiment(
    parent: &ParentDistribution,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<McExperiment> {
    if reps < MIN_EXPERIMENT_REPS {
        return Err(domain(format!(
            "experiment needs at least {MIN_EXPERIMENT_REPS} replications, got {reps}"
        )));
    }
    run_experiment(parent, n, reps, seed)
}

/// Sample of replication `rep`; exposed so single replications can be rerun.
pub fn experiment_sample(parent: &ParentDistribution, n: usize, seed: u64, rep: usize) -> Vec<f64> {
    parent.sample(&mut stream_rng(seed, rep as u64), n)
}

pub(crate) fn run_experiment(
    parent: &ParentDistribution,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<McExperiment> {
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, got: n });
    }
    let scans: Vec<Result<Vec<TailScanRow>>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let z = sorted_sample(&experiment_sample(parent, n, seed, r))?;
            Ok(scan_sorted(&z, ExcessOrigin::Inclusive, false))
        })
        .collect();
    let scans = scans.into_iter().collect::<Result<Vec<_>>>()?;

    let mut k_star = Vec::with_capacity(reps);
    let mut xi_at_k_star = Vec::with_capacity(reps);
    for rows in &scans {
        let i = argmin_au2(rows)
            .ok_or_else(|| Error::DegenerateData("no tail size admits a GPD fit".into()))?;
        k_star.push(rows[i].k);
        xi_at_k_star.push(rows[i].xi);
    }

    let lo_q = 0.5 * (1.0 - BAND_MASS);
    let hi_q = 1.0 - lo_q;
    let mut column = Vec::with_capacity(reps);
    let curve: Vec<CurvePoint> = (0..n - 1)
        .map(|i| {
            column.clear();
            column.extend(scans.iter().map(|rows| rows[i].au2));
            let mean = column.iter().sum::<f64>() / reps as f64;
            column.sort_by(f64::total_cmp);
            CurvePoint {
                k: i + 2,
                mean,
                lower: empirical_quantile(&column, lo_q),
                upper: empirical_quantile(&column, hi_q),
            }
        })
        .collect();
    let mean_curve_argmin = curve
        .iter()
        .filter(|c| c.mean.is_finite())
        .min_by(|a, b| a.mean.total_cmp(&b.mean).then(a.k.cmp(&b.k)))
        .map_or(2, |c| c.k);
    Ok(McExperiment {
        parent: *parent,
        n,
        reps,
        seed,
        curve,
        mean_curve_argmin,
        k_star,
        xi_at_k_star,
    })
}

/// Linear-interpolation quantile of ascending values.
fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    match sorted.get(i + 1) {
        Some(next) if frac > 0.0 => sorted[i] + frac * (next - sorted[i]),
        _ => sorted[i],
    }
}
