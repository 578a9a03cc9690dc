//! Value-at-risk and conditional value-at-risk from a fitted tail.
//!
//! With `k` of `n` observations above the threshold `u`, the loss quantile at
//! confidence `level` is
//!
//! ```text
//! VaR = u + sigma/xi * (((n/k) * (1 - level))^(-xi) - 1)
//! ```
//!
//! and CVaR adds the GPD mean excess at the VaR.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distributions::GpdParams;
use crate::error::{domain, Error, Result};
use crate::tail_detect::TailModel;

/// Maps a raw series into loss space, where large values are bad.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesTransform {
    #[default]
    Identity,
    Negate,
    /// Negative one-step log returns of a price series.
    NegLogReturns,
}

impl SeriesTransform {
    pub const ALL: [SeriesTransform; 3] =
        [SeriesTransform::Identity, SeriesTransform::Negate, SeriesTransform::NegLogReturns];

    pub fn name(self) -> &'static str {
        match self {
            SeriesTransform::Identity => "identity",
            SeriesTransform::Negate => "negate",
            SeriesTransform::NegLogReturns => "neg-log-returns",
        }
    }
}

impl fmt::Display for SeriesTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SeriesTransform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SeriesTransform::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                domain(format!("unknown transform {s:?}, expected identity, negate or neg-log-returns"))
            })
    }
}

pub fn to_losses(series: &[f64], transform: SeriesTransform) -> Result<Vec<f64>> {
    match transform {
        SeriesTransform::Identity => Ok(series.to_vec()),
        SeriesTransform::Negate => Ok(series.iter().map(|x| -x).collect()),
        SeriesTransform::NegLogReturns => {
            if series.len() < 2 {
                return Err(Error::InsufficientData { needed: 2, got: series.len() });
            }
            if let Some(p) = series.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
                return Err(domain(format!("log returns need positive prices, got {p}")));
            }
            Ok(series.windows(2).map(|w| -(w[1] / w[0]).ln()).collect())
        }
    }
}

/// How the mean excess beyond the VaR is measured.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CvarConvention {
    /// `VaR + (sigma + xi * VaR) / (1 - xi)`.
    #[default]
    FromVar,
    /// `VaR + (sigma + xi * (VaR - u)) / (1 - xi)`, the mean excess of the
    /// fitted GPD at distance `VaR - u` from the threshold.
    FromThreshold,
}

/// The parts of a tail model that determine risk measures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub u: f64,
    pub params: GpdParams,
    pub k_star: usize,
    pub n: usize,
}

impl TailEstimate {
    pub fn new(u: f64, params: GpdParams, k_star: usize, n: usize) -> Result<Self> {
        if !u.is_finite() {
            return Err(domain("threshold must be finite"));
        }
        if k_star == 0 || k_star > n {
            return Err(domain(format!("need 0 < k* <= n, got k* = {k_star}, n = {n}")));
        }
        Ok(TailEstimate { u, params, k_star, n })
    }

    pub fn tail_fraction(&self) -> f64 {
        self.k_star as f64 / self.n as f64
    }
}

impl From<&TailModel> for TailEstimate {
    fn from(m: &TailModel) -> Self {
        TailEstimate { u: m.u, params: m.params, k_star: m.k_star, n: m.n }
    }
}

fn check_level(tail: &TailEstimate, level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(domain(format!("confidence level must lie in (0, 1), got {level}")));
    }
    let tail_fraction = tail.tail_fraction();
    if 1.0 - level > tail_fraction {
        return Err(Error::BelowTail { level, tail_fraction, empirical_quantile: None });
    }
    Ok(())
}

pub fn var(tail: &TailEstimate, level: f64) -> Result<f64> {
    check_level(tail, level)?;
    let GpdParams { xi, sigma } = tail.params;
    let log_ratio = (tail.n as f64 / tail.k_star as f64 * (1.0 - level)).ln();
    // sigma/xi * (r^-xi - 1) written to stay accurate as xi -> 0.
    let excess = if xi == 0.0 {
        -sigma * log_ratio
    } else {
        sigma / xi * (-xi * log_ratio).exp_m1()
    };
    Ok(tail.u + excess)
}

pub fn cvar(tail: &TailEstimate, level: f64) -> Result<f64> {
    cvar_with(tail, level, CvarConvention::FromVar)
}

pub fn cvar_with(tail: &TailEstimate, level: f64, convention: CvarConvention) -> Result<f64> {
    let GpdParams { xi, sigma } = tail.params;
    if xi >= 1.0 {
        return Err(Error::InfiniteMean(xi));
    }
    let v = var(tail, level)?;
    let origin = match convention {
        CvarConvention::FromVar => v,
        CvarConvention::FromThreshold => v - tail.u,
    };
    Ok(v + (sigma + xi * origin) / (1.0 - xi))
}

/// Monetary loss `s0 * (exp(var_log) - 1)` implied by a log-return VaR.
pub fn delta_s(s0: f64, var_log: f64) -> Result<f64> {
    if !(s0 > 0.0 && s0.is_finite()) {
        return Err(domain(format!("initial price must be positive, got {s0}")));
    }
    Ok(s0 * var_log.exp_m1())
}

/// Risk measures at one level, or the reason they are unavailable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskEntry {
    pub level: f64,
    pub var: Option<f64>,
    pub cvar: Option<f64>,
    pub delta_s: Option<f64>,
    /// Set when the level lies below the reach of the tail model.
    pub flag: Option<String>,
    /// Empirical loss quantile at a flagged level, when a sample is at hand.
    pub empirical_quantile: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub tail: TailEstimate,
    pub tail_fraction: f64,
    pub convention: CvarConvention,
    pub s0: Option<f64>,
    pub entries: Vec<RiskEntry>,
}

/// Evaluates every level. Levels below the tail are flagged rather than
/// failing the report; `losses` supplies their empirical quantiles.
pub fn risk_report(
    tail: &TailEstimate,
    levels: &[f64],
    convention: CvarConvention,
    s0: Option<f64>,
    losses: Option<&[f64]>,
) -> Result<RiskReport> {
    if let Some(s0) = s0 {
        delta_s(s0, 0.0)?;
    }
    let sorted = losses.map(|l| {
        let mut v = l.to_vec();
        v.sort_by(f64::total_cmp);
        v
    });
    let mut entries = Vec::with_capacity(levels.len());
    for &level in levels {
        match var(tail, level) {
            Ok(v) => {
                let c = match cvar_with(tail, level, convention) {
                    Ok(c) => Some(c),
                    Err(Error::InfiniteMean(_)) => None,
                    Err(e) => return Err(e),
                };
                entries.push(RiskEntry {
                    level,
                    var: Some(v),
                    cvar: c,
                    delta_s: s0.map(|s| s * v.exp_m1()),
                    flag: c.is_none().then(|| Error::InfiniteMean(tail.params.xi).to_string()),
                    empirical_quantile: None,
                });
            }
            Err(Error::BelowTail { level, tail_fraction, .. }) => {
                let empirical = sorted.as_deref().and_then(|s| empirical_quantile(s, level));
                let err = Error::BelowTail { level, tail_fraction, empirical_quantile: empirical };
                entries.push(RiskEntry {
                    level,
                    var: None,
                    cvar: None,
                    delta_s: None,
                    flag: Some(err.to_string()),
                    empirical_quantile: empirical,
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(RiskReport {
        tail: *tail,
        tail_fraction: tail.tail_fraction(),
        convention,
        s0,
        entries,
    })
}

/// Linear-interpolation quantile of ascending values.
fn empirical_quantile(sorted: &[f64], level: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = level * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    Some(match sorted.get(i + 1) {
        Some(next) => sorted[i] + frac * (next - sorted[i]),
        None => sorted[i],
    })
}
