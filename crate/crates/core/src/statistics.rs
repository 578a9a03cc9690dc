//! Weighted mean-square-error statistics between an empirical distribution
//! function and a hypothesised continuous CDF.
//!
//! Every statistic is computed from the ordered probabilities
//! `t_i = F(x_(i))`, `t_1 <= ... <= t_n`. The lower-tail family uses the
//! weight `t^-a`, the upper-tail family `(1 - t)^-b`. Special members:
//!
//! | statistic | family member |
//! |-----------|---------------|
//! | `W²` (Cramér–von Mises) | `a = 0` or `b = 0` |
//! | `AU²` | `b = 1` |
//! | `AL²` | `a = 1` |
//! | `A²` (Anderson–Darling) | `AL² + AU²` |
//!
//! The expected value of a family member under the null hypothesis is
//! `1 / ((2 - a)(3 - a))`, see [`risk_function`].

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` wherever they enter
/// a logarithm or a negative power.
pub const PROB_EPS: f64 = 1e-12;

/// Ascending probabilities `F(x_(1)) <= ... <= F(x_(n))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(domain("probability vector must not be empty"));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(domain(format!("probability {v} outside [0, 1]")));
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(domain("probabilities must be in ascending order"));
        }
        Ok(Self(values))
    }

    /// Sorts `values` before validating them.
    pub fn from_unsorted(mut values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| v.is_nan()) {
            return Err(domain("probability vector contains NaN"));
        }
        values.sort_by(f64::total_cmp);
        Self::new(values)
    }

    /// Maps a sample through `cdf` and sorts the result.
    pub fn from_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_unsorted(sample.iter().map(|&x| cdf(x)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Which member of the statistic families to compute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StatKind {
    W2,
    A2,
    AU2,
    LowerTail(f64),
    UpperTail(f64),
}

impl StatKind {
    pub fn compute(self, probs: &ProbVector) -> Result<f64> {
        match self {
            StatKind::W2 => Ok(cramer_von_mises(probs)),
            StatKind::A2 => Ok(anderson_darling(probs)),
            StatKind::AU2 => Ok(au2(probs)),
            StatKind::LowerTail(a) => lower_tail_stat(a, probs),
            StatKind::UpperTail(b) => upper_tail_stat(b, probs),
        }
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Empirical distribution function `#{X_i <= x} / n`.
pub fn edf(sample: &[f64], x: f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(domain("empirical distribution of an empty sample"));
    }
    let count = sample.iter().filter(|&&v| v <= x).count();
    Ok(count as f64 / sample.len() as f64)
}

fn check_stress(value: f64, name: &'static str) -> Result<()> {
    if !(value >= 0.0 && value.is_finite()) {
        return Err(domain(format!(
            "stress parameter {name} must be a finite value >= 0, got {value}"
        )));
    }
    if value == 3.0 {
        return Err(Error::DivergentStatistic(name));
    }
    Ok(())
}

/// Lower-tail statistic with weight `t^-a`.
pub fn lower_tail_stat(a: f64, probs: &ProbVector) -> Result<f64> {
    check_stress(a, "a")?;
    Ok(lower_tail_unchecked(a, probs.as_slice()))
}

fn lower_tail_unchecked(a: f64, t: &[f64]) -> f64 {
    let n = t.len() as f64;
    let mut acc = CompensatedSum::default();
    if a == 1.0 {
        acc.add(-1.5 * n);
        for (i, &ti) in t.iter().enumerate() {
            let c = (2 * i + 1) as f64 / n;
            acc.add(2.0 * ti - c * ti.max(PROB_EPS).ln());
        }
    } else if a == 2.0 {
        for (i, &ti) in t.iter().enumerate() {
            let c = (2 * i + 1) as f64 / n;
            let tc = ti.max(PROB_EPS);
            acc.add(c / tc + 2.0 * tc.ln());
        }
    } else {
        acc.add(2.0 * n / ((1.0 - a) * (2.0 - a) * (3.0 - a)));
        let clamp = a > 1.0;
        for (i, &ti) in t.iter().enumerate() {
            let c = (2 * i + 1) as f64 / n;
            let tc = if clamp { ti.max(PROB_EPS) } else { ti };
            acc.add(2.0 / (2.0 - a) * tc.powf(2.0 - a) - c / (1.0 - a) * tc.powf(1.0 - a));
        }
    }
    acc.value()
}

/// Upper-tail statistic with weight `(1 - t)^-b`.
pub fn upper_tail_stat(b: f64, probs: &ProbVector) -> Result<f64> {
    check_stress(b, "b")?;
    Ok(upper_tail_unchecked(b, probs.as_slice()))
}

fn upper_tail_unchecked(b: f64, t: &[f64]) -> f64 {
    let n = t.len();
    let nf = n as f64;
    let mut acc = CompensatedSum::default();
    // Coefficient (2(n - i) + 1) / n with 1-based i.
    let coef = |i: usize| (2 * (n - i - 1) + 1) as f64 / nf;
    if b == 1.0 {
        acc.add(0.5 * nf);
        for (i, &ti) in t.iter().enumerate() {
            let s = (1.0 - ti).max(PROB_EPS);
            acc.add(-(2.0 * ti + coef(i) * s.ln()));
        }
    } else if b == 2.0 {
        for (i, &ti) in t.iter().enumerate() {
            let s = (1.0 - ti).max(PROB_EPS);
            acc.add(coef(i) / s + 2.0 * s.ln());
        }
    } else {
        acc.add(2.0 * nf / ((1.0 - b) * (2.0 - b) * (3.0 - b)));
        let clamp = b > 1.0;
        for (i, &ti) in t.iter().enumerate() {
            let s = if clamp { (1.0 - ti).max(PROB_EPS) } else { 1.0 - ti };
            acc.add(2.0 / (2.0 - b) * s.powf(2.0 - b) - coef(i) / (1.0 - b) * s.powf(1.0 - b));
        }
    }
    acc.value()
}

/// Cramér–von Mises `W²`.
pub fn cramer_von_mises(probs: &ProbVector) -> f64 {
    cvm_slice(probs.as_slice())
}

fn cvm_slice(t: &[f64]) -> f64 {
    let n = t.len() as f64;
    let mut acc = CompensatedSum::default();
    acc.add(1.0 / (12.0 * n));
    for (i, &ti) in t.iter().enumerate() {
        let d = (2 * i + 1) as f64 / (2.0 * n) - ti;
        acc.add(d * d);
    }
    acc.value()
}

/// Anderson–Darling `A²`.
pub fn anderson_darling(probs: &ProbVector) -> f64 {
    ad_slice(probs.as_slice())
}

fn ad_slice(t: &[f64]) -> f64 {
    let n = t.len();
    let nf = n as f64;
    let mut acc = CompensatedSum::default();
    acc.add(-nf);
    for i in 0..n {
        let c = (2 * i + 1) as f64 / nf;
        let lo = t[i].max(PROB_EPS).ln();
        let hi = (1.0 - t[n - 1 - i]).max(PROB_EPS).ln();
        acc.add(-c * (lo + hi));
    }
    acc.value()
}

/// Upper-tail statistic `AU²`, the `b = 1` member of the upper family.
pub fn au2(probs: &ProbVector) -> f64 {
    upper_tail_unchecked(1.0, probs.as_slice())
}

/// The three goodness-of-fit statistics used for tail detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofStatistics {
    pub w2: f64,
    pub a2: f64,
    pub au2: f64,
}

pub fn gof_statistics(probs: &ProbVector) -> GofStatistics {
    gof_from_sorted(probs.as_slice())
}

/// `W²`, `A²` and `AU²` for already validated ascending probabilities.
pub(crate) fn gof_from_sorted(t: &[f64]) -> GofStatistics {
    GofStatistics {
        w2: cvm_slice(t),
        a2: ad_slice(t),
        au2: upper_tail_unchecked(1.0, t),
    }
}

/// `W²`, `A²` and `AU²` from ascending probabilities `t` and their log
/// survival values `ln(1 - t_i)`, which a caller with the cumulative hazard
/// already has at full precision.
pub(crate) fn gof_with_log_survival(t: &[f64], log_surv: &[f64]) -> GofStatistics {
    debug_assert_eq!(t.len(), log_surv.len());
    let n = t.len();
    let nf = n as f64;
    let ln_eps = PROB_EPS.ln();
    let mut w2 = CompensatedSum::default();
    let mut a2 = CompensatedSum::default();
    let mut au2 = CompensatedSum::default();
    w2.add(1.0 / (12.0 * nf));
    a2.add(-nf);
    au2.add(0.5 * nf);
    for i in 0..n {
        let ti = t[i];
        let d = (2 * i + 1) as f64 / (2.0 * nf) - ti;
        w2.add(d * d);
        let c = (2 * i + 1) as f64 / nf;
        let lo = ti.max(PROB_EPS).ln();
        let hi = log_surv[n - 1 - i].max(ln_eps);
        a2.add(-c * (lo + hi));
        let coef = (2 * (n - i - 1) + 1) as f64 / nf;
        au2.add(-(2.0 * ti + coef * log_surv[i].max(ln_eps)));
    }
    GofStatistics { w2: w2.value(), a2: a2.value(), au2: au2.value() }
}

/// Expected value `1 / ((2 - a)(3 - a))` of a family member under the null.
pub fn risk_function(a: f64) -> Result<f64> {
    if a == 2.0 || a == 3.0 {
        return Err(Error::Pole(a));
    }
    Ok(1.0 / ((2.0 - a) * (3.0 - a)))
}
