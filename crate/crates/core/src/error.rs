use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("stress parameter {0} = 3 makes the statistic divergent")]
    DivergentStatistic(&'static str),

    #[error("risk function has a pole at a = {0}")]
    Pole(f64),

    #[error("shape xi = {0} >= 1 implies an infinite mean")]
    InfiniteMean(f64),

    #[error("insufficient data: need at least {needed} values, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("{value} is outside the tabulated range [{min}, {max}]")]
    OutOfRange { value: f64, min: f64, max: f64 },

    #[error(
        "level {level} lies below the tail model: 1 - level = {:.6} exceeds the tail fraction {tail_fraction:.6}{}",
        1.0 - level,
        match empirical_quantile {
            Some(q) => format!(" (empirical quantile: {q})"),
            None => String::new(),
        }
    )]
    BelowTail {
        level: f64,
        tail_fraction: f64,
        empirical_quantile: Option<f64>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
