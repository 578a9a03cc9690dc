//! Body/tail separation of univariate samples.
//!
//! A sample's upper tail is located by scanning every candidate threshold,
//! fitting a generalized Pareto distribution to the excesses and choosing the
//! threshold that minimizes the upper-tail Anderson-Darling statistic. The
//! fitted tail feeds goodness-of-fit p-values and tail risk measures.

pub mod distributions;
pub mod critical_values;
pub mod error;
pub mod gpd_fit;
mod optimize;
mod serde_util;
pub mod risk;
pub mod statistics;
pub mod tail_detect;

pub use distributions::{GpdParams, ParentDistribution, ParentKind};
pub use error::{Error, Result};
pub use gpd_fit::{fit_mle, neg_log_likelihood, FitMethod, FitResult};
pub use statistics::{GofStatistics, ProbVector, StatKind};
pub use critical_values::{builtin_table, CriticalValueTable, GofStat, McConfig, PValue};
pub use tail_detect::{detect, scan, ScanOptions, TailModel, TailScanRow};
pub use risk::{cvar, delta_s, to_losses, var, CvarConvention, SeriesTransform, TailEstimate};
