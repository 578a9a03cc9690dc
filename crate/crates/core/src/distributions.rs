//! Generalized Pareto tail model and the parent distributions used in the
//! ideal-case and Monte Carlo experiments.
//!
//! All GPD formulas switch to the exponential limit when `|xi| < SMALL_SHAPE`
//! and are written with `ln_1p`/`exp_m1` so that they stay accurate near
//! `xi = 0`.

use std::fmt;
use std::str::FromStr;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{domain, Error, Result};
use crate::optimize::ln_1p;

/// Shapes with a smaller magnitude are treated as exactly zero.
pub const SMALL_SHAPE: f64 = 1e-8;

/// Shape `xi` and scale `sigma` of a generalized Pareto distribution with
/// location zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpdParams {
    pub xi: f64,
    pub sigma: f64,
}

impl GpdParams {
    pub fn new(xi: f64, sigma: f64) -> Result<Self> {
        if !xi.is_finite() {
            return Err(domain(format!("GPD shape must be finite, got {xi}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(domain(format!("GPD scale must be positive, got {sigma}")));
        }
        Ok(Self { xi, sigma })
    }

    #[inline]
    fn is_exponential(&self) -> bool {
        self.xi.abs() < SMALL_SHAPE
    }

    /// Right end of the support: infinite for `xi >= 0`, `-sigma/xi` otherwise.
    pub fn upper_endpoint(&self) -> f64 {
        if self.xi < 0.0 && !self.is_exponential() {
            -self.sigma / self.xi
        } else {
            f64::INFINITY
        }
    }

    pub fn in_support(&self, x: f64) -> bool {
        x >= 0.0 && x <= self.upper_endpoint()
    }

    /// `-ln(1 - F(x))` for `x` inside the support.
    #[inline]
    pub(crate) fn cumulative_hazard(&self, x: f64) -> f64 {
        if self.is_exponential() {
            x / self.sigma
        } else {
            ln_1p(self.xi * x / self.sigma) / self.xi
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        if x <= 0.0 {
            return 0.0;
        }
        if x >= self.upper_endpoint() {
            return 1.0;
        }
        -(-self.cumulative_hazard(x)).exp_m1()
    }

    /// `ln(1 - F(x))`, accurate far into the tail.
    pub fn log_survival(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        if x <= 0.0 {
            return 0.0;
        }
        if x >= self.upper_endpoint() {
            return f64::NEG_INFINITY;
        }
        -self.cumulative_hazard(x)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        if x < 0.0 || x > self.upper_endpoint() {
            return 0.0;
        }
        if self.is_exponential() {
            return (-x / self.sigma).exp() / self.sigma;
        }
        let base = 1.0 + self.xi * x / self.sigma;
        let exponent = -(1.0 + self.xi) / self.xi;
        if base <= 0.0 {
            // Upper endpoint of a bounded support.
            return if exponent > 0.0 {
                0.0
            } else if exponent == 0.0 {
                1.0 / self.sigma
            } else {
                f64::INFINITY
            };
        }
        (exponent * (self.xi * x / self.sigma).ln_1p()).exp() / self.sigma
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x < 0.0 || x > self.upper_endpoint() {
            return f64::NEG_INFINITY;
        }
        if self.is_exponential() {
            return -self.sigma.ln() - x / self.sigma;
        }
        let z = self.xi * x / self.sigma;
        if z <= -1.0 {
            return self.pdf(x).ln();
        }
        -self.sigma.ln() - (1.0 + 1.0 / self.xi) * z.ln_1p()
    }

    /// Inverse of [`GpdParams::cdf`] on `[0, 1)`.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&q) {
            return Err(domain(format!("quantile level must lie in [0, 1), got {q}")));
        }
        let log_survival = ln_1p(-q);
        if self.is_exponential() {
            Ok(-self.sigma * log_survival)
        } else {
            Ok(self.sigma / self.xi * (-self.xi * log_survival).exp_m1())
        }
    }

    /// Mean excess `e(v) = (sigma + xi * v) / (1 - xi)`.
    pub fn mean_excess(&self, v: f64) -> Result<f64> {
        if self.xi >= 1.0 {
            return Err(Error::InfiniteMean(self.xi));
        }
        Ok((self.sigma + self.xi * v) / (1.0 - self.xi))
    }

    pub fn mean(&self) -> Result<f64> {
        self.mean_excess(0.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n)
            .map(|_| {
                let q: f64 = rng.sample(Open01);
                self.quantile(q).expect("open unit interval")
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParentKind {
    Lognormal,
    Normal,
    Gev,
    Gpd,
    Exponential,
}

impl ParentKind {
    pub const ALL: [ParentKind; 5] = [
        ParentKind::Lognormal,
        ParentKind::Normal,
        ParentKind::Gev,
        ParentKind::Gpd,
        ParentKind::Exponential,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParentKind::Lognormal => "lognormal",
            ParentKind::Normal => "normal",
            ParentKind::Gev => "gev",
            ParentKind::Gpd => "gpd",
            ParentKind::Exponential => "exponential",
        }
    }

    fn has_location(self) -> bool {
        !matches!(self, ParentKind::Exponential)
    }

    fn has_shape(self) -> bool {
        matches!(self, ParentKind::Gev | ParentKind::Gpd)
    }
}

impl fmt::Display for ParentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ParentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ParentKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| domain(format!("unknown parent distribution '{s}'")))
    }
}

/// A parent distribution `H(x)` with location `mu`, scale `sigma` and, for
/// GEV and GPD, shape `xi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParentDistribution {
    pub kind: ParentKind,
    pub mu: f64,
    pub sigma: f64,
    pub xi: f64,
}

impl ParentDistribution {
    /// Validating constructor. Parameters a family does not have must be zero.
    pub fn new(kind: ParentKind, mu: f64, sigma: f64, xi: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(domain(format!("{kind}: scale must be positive, got {sigma}")));
        }
        if !mu.is_finite() || !xi.is_finite() {
            return Err(domain(format!("{kind}: parameters must be finite")));
        }
        if !kind.has_location() && mu != 0.0 {
            return Err(domain(format!("{kind} has no location parameter")));
        }
        if !kind.has_shape() && xi != 0.0 {
            return Err(domain(format!("{kind} has no shape parameter")));
        }
        Ok(Self { kind, mu, sigma, xi })
    }

    pub fn lognormal(mu: f64, sigma: f64) -> Result<Self> {
        Self::new(ParentKind::Lognormal, mu, sigma, 0.0)
    }

    pub fn normal(mu: f64, sigma: f64) -> Result<Self> {
        Self::new(ParentKind::Normal, mu, sigma, 0.0)
    }

    pub fn gev(mu: f64, sigma: f64, xi: f64) -> Result<Self> {
        Self::new(ParentKind::Gev, mu, sigma, xi)
    }

    pub fn gpd(mu: f64, sigma: f64, xi: f64) -> Result<Self> {
        Self::new(ParentKind::Gpd, mu, sigma, xi)
    }

    pub fn exponential(sigma: f64) -> Result<Self> {
        Self::new(ParentKind::Exponential, 0.0, sigma, 0.0)
    }

    /// The reference parameterization of each family used in the experiments:
    /// unit scale, zero location and shape 0.5 where a shape exists.
    pub fn reference(kind: ParentKind) -> Self {
        let xi = if kind.has_shape() { 0.5 } else { 0.0 };
        Self { kind, mu: 0.0, sigma: 1.0, xi }
    }

    fn gpd_part(&self) -> GpdParams {
        GpdParams { xi: self.xi, sigma: self.sigma }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let z = (x - self.mu) / self.sigma;
        match self.kind {
            ParentKind::Normal => std_normal_cdf(z),
            ParentKind::Lognormal => {
                if x <= 0.0 {
                    0.0
                } else {
                    std_normal_cdf((x.ln() - self.mu) / self.sigma)
                }
            }
            ParentKind::Gev => {
                if self.xi.abs() < SMALL_SHAPE {
                    return (-(-z).exp()).exp();
                }
                let t = 1.0 + self.xi * z;
                if t <= 0.0 {
                    return if self.xi > 0.0 { 0.0 } else { 1.0 };
                }
                (-(-(self.xi * z).ln_1p() / self.xi).exp()).exp()
            }
            ParentKind::Gpd => self.gpd_part().cdf(x - self.mu),
            ParentKind::Exponential => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-x / self.sigma).exp_m1()
                }
            }
        }
    }

    /// Inverse CDF on the open interval `(0, 1)`.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(domain(format!("quantile level must lie in (0, 1), got {q}")));
        }
        let x = match self.kind {
            ParentKind::Normal => self.mu + self.sigma * std_normal_quantile(q),
            ParentKind::Lognormal => (self.mu + self.sigma * std_normal_quantile(q)).exp(),
            ParentKind::Gev => {
                let y = -q.ln();
                if self.xi.abs() < SMALL_SHAPE {
                    self.mu - self.sigma * y.ln()
                } else {
                    self.mu + self.sigma / self.xi * (-self.xi * y.ln()).exp_m1()
                }
            }
            ParentKind::Gpd => self.mu + self.gpd_part().quantile(q)?,
            ParentKind::Exponential => -self.sigma * (-q).ln_1p(),
        };
        Ok(x)
    }

    /// Right end of the support (`+inf` for unbounded families).
    pub fn upper_endpoint(&self) -> f64 {
        match self.kind {
            ParentKind::Gev if self.xi < 0.0 && self.xi.abs() >= SMALL_SHAPE => {
                self.mu - self.sigma / self.xi
            }
            ParentKind::Gpd => self.mu + self.gpd_part().upper_endpoint(),
            _ => f64::INFINITY,
        }
    }

    /// Inverse-transform sampling from a caller-owned generator.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n)
            .map(|_| {
                let q: f64 = rng.sample(Open01);
                self.quantile(q).expect("open unit interval")
            })
            .collect()
    }
}

/// Generator for the `stream`-th independent substream of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub fn std_normal_quantile(q: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * q)
}
