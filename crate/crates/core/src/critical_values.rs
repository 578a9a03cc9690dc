//! Critical values of `W²`, `A²` and `AU²` when both GPD parameters are
//! estimated from the sample.
//!
//! The embedded table covers shapes `-0.5..=0.9` and significance levels
//! `0.95..=0.001`. Other shapes and levels are interpolated linearly in `xi`
//! and in `ln p`. Tables can be regenerated by Monte Carlo simulation.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{stream_rng, GpdParams};
use crate::error::{domain, Error, Result};
use crate::gpd_fit::{fit_sorted, fitted_gof};
use crate::statistics::{GofStatistics, StatKind};

pub const TABLE_XI_GRID: [f64; 10] = [-0.5, -0.4, -0.3, -0.2, -0.1, 0.0, 0.1, 0.2, 0.5, 0.9];
pub const TABLE_P_GRID: [f64; 13] = [
    0.950, 0.900, 0.850, 0.800, 0.750, 0.500, 0.250, 0.100, 0.050, 0.025, 0.010, 0.005, 0.001,
];

/// Minimum Monte Carlo replications for a table.
pub const MIN_TABLE_REPLICATIONS: usize = 10_000;
/// Minimum sample size for a table.
pub const MIN_TABLE_SAMPLE_SIZE: usize = 25;
/// Minimum replications for a bootstrap p-value.
pub const MIN_BOOTSTRAP_REPLICATIONS: usize = 1000;
/// Replications per independently seeded chunk.
pub const CHUNK_SIZE: usize = 2000;
pub const DEFAULT_SEED: u64 = 7;

#[rustfmt::skip]
const EMBEDDED: [[[f64; 13]; 10]; 3] = [
    // W2
    [
        [0.027, 0.032, 0.037, 0.041, 0.045, 0.068, 0.104, 0.155, 0.194, 0.236, 0.293, 0.336, 0.439],
        [0.026, 0.031, 0.036, 0.040, 0.044, 0.065, 0.100, 0.147, 0.185, 0.223, 0.276, 0.317, 0.414],
        [0.025, 0.030, 0.035, 0.038, 0.042, 0.063, 0.095, 0.140, 0.175, 0.212, 0.261, 0.300, 0.392],
        [0.025, 0.030, 0.034, 0.037, 0.041, 0.060, 0.091, 0.133, 0.166, 0.200, 0.246, 0.282, 0.368],
        [0.024, 0.029, 0.033, 0.036, 0.040, 0.058, 0.087, 0.127, 0.157, 0.189, 0.233, 0.266, 0.348],
        [0.024, 0.028, 0.032, 0.035, 0.039, 0.056, 0.084, 0.121, 0.150, 0.180, 0.221, 0.253, 0.327],
        [0.023, 0.027, 0.031, 0.034, 0.037, 0.054, 0.081, 0.116, 0.143, 0.171, 0.209, 0.239, 0.309],
        [0.023, 0.027, 0.030, 0.034, 0.037, 0.053, 0.078, 0.111, 0.137, 0.164, 0.200, 0.228, 0.294],
        [0.022, 0.026, 0.029, 0.032, 0.034, 0.049, 0.072, 0.101, 0.124, 0.148, 0.179, 0.204, 0.263],
        [0.021, 0.024, 0.027, 0.030, 0.033, 0.046, 0.067, 0.094, 0.115, 0.136, 0.165, 0.187, 0.240],
    ],
    // A2
    [
        [0.203, 0.239, 0.269, 0.296, 0.321, 0.459, 0.674, 0.965, 1.195, 1.435, 1.765, 2.018, 2.621],
        [0.198, 0.234, 0.262, 0.288, 0.313, 0.445, 0.650, 0.926, 1.146, 1.373, 1.686, 1.927, 2.502],
        [0.194, 0.228, 0.255, 0.280, 0.304, 0.431, 0.627, 0.890, 1.099, 1.315, 1.610, 1.839, 2.388],
        [0.190, 0.223, 0.249, 0.273, 0.297, 0.418, 0.606, 0.855, 1.052, 1.256, 1.537, 1.752, 2.275],
        [0.186, 0.218, 0.244, 0.267, 0.289, 0.406, 0.584, 0.822, 1.010, 1.204, 1.468, 1.671, 2.164],
        [0.183, 0.214, 0.238, 0.261, 0.282, 0.395, 0.565, 0.791, 0.970, 1.153, 1.406, 1.602, 2.062],
        [0.180, 0.210, 0.234, 0.256, 0.276, 0.385, 0.549, 0.765, 0.935, 1.109, 1.348, 1.533, 1.975],
        [0.177, 0.206, 0.230, 0.251, 0.271, 0.376, 0.534, 0.741, 0.903, 1.070, 1.298, 1.474, 1.889],
        [0.171, 0.199, 0.220, 0.240, 0.259, 0.356, 0.499, 0.686, 0.831, 0.980, 1.183, 1.339, 1.715],
        [0.166, 0.192, 0.213, 0.232, 0.249, 0.339, 0.472, 0.641, 0.772, 0.905, 1.087, 1.229, 1.568],
    ],
    // AU2
    [
        [0.085, 0.100, 0.112, 0.123, 0.134, 0.191, 0.277, 0.389, 0.476, 0.565, 0.686, 0.778, 0.995],
        [0.082, 0.097, 0.109, 0.119, 0.130, 0.184, 0.265, 0.371, 0.453, 0.536, 0.650, 0.737, 0.945],
        [0.080, 0.094, 0.106, 0.116, 0.126, 0.177, 0.254, 0.355, 0.432, 0.511, 0.618, 0.701, 0.897],
        [0.078, 0.092, 0.103, 0.113, 0.122, 0.171, 0.245, 0.340, 0.413, 0.487, 0.588, 0.666, 0.851],
        [0.077, 0.090, 0.100, 0.110, 0.119, 0.166, 0.236, 0.326, 0.396, 0.467, 0.563, 0.636, 0.811],
        [0.075, 0.088, 0.098, 0.107, 0.116, 0.161, 0.229, 0.315, 0.381, 0.449, 0.540, 0.611, 0.777],
        [0.074, 0.087, 0.097, 0.105, 0.114, 0.158, 0.223, 0.306, 0.369, 0.434, 0.521, 0.588, 0.746],
        [0.073, 0.085, 0.095, 0.104, 0.112, 0.155, 0.218, 0.298, 0.359, 0.421, 0.505, 0.569, 0.720],
        [0.071, 0.083, 0.092, 0.101, 0.108, 0.149, 0.208, 0.283, 0.340, 0.398, 0.477, 0.536, 0.678],
        [0.071, 0.082, 0.091, 0.099, 0.107, 0.146, 0.204, 0.277, 0.333, 0.389, 0.465, 0.523, 0.661],
    ],
];

/// The statistics with tabulated critical values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GofStat {
    W2,
    A2,
    AU2,
}

impl GofStat {
    pub const ALL: [GofStat; 3] = [GofStat::W2, GofStat::A2, GofStat::AU2];

    pub fn name(self) -> &'static str {
        match self {
            GofStat::W2 => "W2",
            GofStat::A2 => "A2",
            GofStat::AU2 => "AU2",
        }
    }

    pub fn pick(self, stats: &GofStatistics) -> f64 {
        match self {
            GofStat::W2 => stats.w2,
            GofStat::A2 => stats.a2,
            GofStat::AU2 => stats.au2,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for GofStat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GofStat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GofStat::ALL
            .into_iter()
            .find(|g| g.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| domain(format!("unknown statistic {s:?}, expected W2, A2 or AU2")))
    }
}

impl From<GofStat> for StatKind {
    fn from(g: GofStat) -> Self {
        match g {
            GofStat::W2 => StatKind::W2,
            GofStat::A2 => StatKind::A2,
            GofStat::AU2 => StatKind::AU2,
        }
    }
}

impl TryFrom<StatKind> for GofStat {
    type Error = Error;

    fn try_from(kind: StatKind) -> Result<Self> {
        match kind {
            StatKind::W2 => Ok(GofStat::W2),
            StatKind::A2 => Ok(GofStat::A2),
            StatKind::AU2 => Ok(GofStat::AU2),
            other => Err(domain(format!("no critical values for {other:?}"))),
        }
    }
}

/// Monte Carlo settings for table generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub replications: usize,
    pub sample_size: usize,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { replications: 200_000, sample_size: 1000, seed: DEFAULT_SEED }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications < MIN_TABLE_REPLICATIONS {
            return Err(domain(format!(
                "replications must be at least {MIN_TABLE_REPLICATIONS}, got {}",
                self.replications
            )));
        }
        if self.sample_size < MIN_TABLE_SAMPLE_SIZE {
            return Err(domain(format!(
                "sample size must be at least {MIN_TABLE_SAMPLE_SIZE}, got {}",
                self.sample_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Provenance {
    Embedded,
    Generated { config: McConfig, chunk_size: usize, chunks: usize },
}

/// A p-value, possibly censored at the edge of the tabulated range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum PValue {
    Estimate(f64),
    /// The p-value exceeds the bound.
    AtLeast(f64),
    /// The p-value is below the bound.
    AtMost(f64),
}

impl PValue {
    /// The estimate, or the censoring bound.
    pub fn value(self) -> f64 {
        match self {
            PValue::Estimate(p) | PValue::AtLeast(p) | PValue::AtMost(p) => p,
        }
    }

    pub fn is_censored(self) -> bool {
        !matches!(self, PValue::Estimate(_))
    }
}

impl fmt::Display for PValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PValue::Estimate(p) => write!(f, "{p:.4}"),
            PValue::AtLeast(p) => write!(f, "> {p}"),
            PValue::AtMost(p) => write!(f, "< {p}"),
        }
    }
}

/// Critical values indexed by statistic, shape and significance level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalValueTable {
    xi_grid: Vec<f64>,
    p_grid: Vec<f64>,
    /// `values[stat][xi][p]`.
    values: Vec<Vec<Vec<f64>>>,
    provenance: Provenance,
}

/// Sidecar metadata written next to a table CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMetadata {
    pub xi_grid: Vec<f64>,
    pub p_grid: Vec<f64>,
    pub provenance: Provenance,
}

pub fn builtin_table() -> CriticalValueTable {
    CriticalValueTable {
        xi_grid: TABLE_XI_GRID.to_vec(),
        p_grid: TABLE_P_GRID.to_vec(),
        values: EMBEDDED
            .iter()
            .map(|rows| rows.iter().map(|r| r.to_vec()).collect())
            .collect(),
        provenance: Provenance::Embedded,
    }
}

impl CriticalValueTable {
    pub fn new(
        xi_grid: Vec<f64>,
        p_grid: Vec<f64>,
        values: Vec<Vec<Vec<f64>>>,
        provenance: Provenance,
    ) -> Result<Self> {
        validate_grids(&xi_grid, &p_grid)?;
        let shape_ok = values.len() == 3
            && values.iter().all(|rows| {
                rows.len() == xi_grid.len() && rows.iter().all(|r| r.len() == p_grid.len())
            });
        if !shape_ok {
            return Err(domain("table values do not match the grids"));
        }
        for (stat, rows) in GofStat::ALL.iter().zip(&values) {
            for (xi, row) in xi_grid.iter().zip(rows) {
                if row.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                    return Err(domain(format!("nonpositive critical value for {stat} at xi={xi}")));
                }
                if row.windows(2).any(|w| w[1] < w[0]) {
                    return Err(domain(format!(
                        "critical values for {stat} at xi={xi} decrease with decreasing p"
                    )));
                }
            }
        }
        Ok(CriticalValueTable { xi_grid, p_grid, values, provenance })
    }

    pub fn xi_grid(&self) -> &[f64] {
        &self.xi_grid
    }

    pub fn p_grid(&self) -> &[f64] {
        &self.p_grid
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Critical values of `stat` at the `xi_index`-th shape, one per level.
    pub fn row(&self, stat: GofStat, xi_index: usize) -> &[f64] {
        &self.values[stat.index()][xi_index]
    }

    /// Exact entry at grid coordinates, if both lie on the grid.
    pub fn lookup(&self, stat: GofStat, xi: f64, p: f64) -> Option<f64> {
        let i = self.xi_grid.iter().position(|g| (g - xi).abs() < 1e-12)?;
        let j = self.p_grid.iter().position(|g| (g - p).abs() < 1e-12)?;
        Some(self.values[stat.index()][i][j])
    }

    /// Warning text when `xi` lies above the tabulated shapes.
    pub fn shape_warning(&self, xi: f64) -> Option<String> {
        let top = *self.xi_grid.last().expect("nonempty grid");
        (xi > top).then(|| {
            format!("shape {xi:.4} exceeds the tabulated range; critical values taken at xi = {top}")
        })
    }

    /// The critical-value curve over `p_grid`, interpolated linearly in `xi`.
    /// Shapes outside the grid are clamped to its ends.
    pub fn curve_at(&self, stat: GofStat, xi: f64) -> Result<Vec<f64>> {
        if xi.is_nan() {
            return Err(domain("shape is NaN"));
        }
        let rows = &self.values[stat.index()];
        let grid = &self.xi_grid;
        let last = grid.len() - 1;
        let xi = xi.clamp(grid[0], grid[last]);
        let i = grid.partition_point(|g| *g <= xi).clamp(1, last.max(1)) - 1;
        if last == 0 || xi == grid[i] {
            return Ok(rows[i].clone());
        }
        let w = (xi - grid[i]) / (grid[i + 1] - grid[i]);
        Ok(rows[i]
            .iter()
            .zip(&rows[i + 1])
            .map(|(lo, hi)| lo + w * (hi - lo))
            .collect())
    }

    /// Critical value at an arbitrary shape and level inside the level grid.
    pub fn critical_value(&self, stat: GofStat, xi: f64, p: f64) -> Result<f64> {
        let (p_min, p_max) = self.p_range();
        if !(p >= p_min && p <= p_max) {
            return Err(Error::OutOfRange { value: p, min: p_min, max: p_max });
        }
        let curve = self.curve_at(stat, xi)?;
        let ps = &self.p_grid;
        // Levels descend, so find the first level not above p.
        let j = ps.partition_point(|g| *g > p);
        if j < ps.len() && ps[j] == p {
            return Ok(curve[j]);
        }
        let (hi, lo) = (j - 1, j);
        let w = (p.ln() - ps[hi].ln()) / (ps[lo].ln() - ps[hi].ln());
        Ok(curve[hi] + w * (curve[lo] - curve[hi]))
    }

    /// p-value of an observed statistic by inverting the interpolated curve.
    pub fn p_value(&self, stat: GofStat, xi: f64, observed: f64) -> Result<PValue> {
        if observed.is_nan() {
            return Err(domain("observed statistic is NaN"));
        }
        let curve = self.curve_at(stat, xi)?;
        let ps = &self.p_grid;
        let last = ps.len() - 1;
        if observed < curve[0] {
            return Ok(PValue::AtLeast(ps[0]));
        }
        if observed > curve[last] {
            return Ok(PValue::AtMost(ps[last]));
        }
        let j = curve.partition_point(|c| *c < observed);
        if curve[j] == observed {
            return Ok(PValue::Estimate(ps[j]));
        }
        let (lo, hi) = (j - 1, j);
        let w = (observed - curve[lo]) / (curve[hi] - curve[lo]);
        Ok(PValue::Estimate((ps[lo].ln() + w * (ps[hi].ln() - ps[lo].ln())).exp()))
    }

    fn p_range(&self) -> (f64, f64) {
        (*self.p_grid.last().expect("nonempty grid"), self.p_grid[0])
    }

    pub fn metadata(&self) -> TableMetadata {
        TableMetadata {
            xi_grid: self.xi_grid.clone(),
            p_grid: self.p_grid.clone(),
            provenance: self.provenance.clone(),
        }
    }

    /// Writes `stat,xi,p,value` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| domain(format!("writing table: {e}"));
        out.write_record(["stat", "xi", "p", "value"]).map_err(io)?;
        for stat in GofStat::ALL {
            for (i, xi) in self.xi_grid.iter().enumerate() {
                for (j, p) in self.p_grid.iter().enumerate() {
                    let v = self.values[stat.index()][i][j];
                    out.write_record([stat.name(), &xi.to_string(), &p.to_string(), &v.to_string()])
                        .map_err(io)?;
                }
            }
        }
        out.flush().map_err(|e| domain(format!("writing table: {e}")))
    }

    /// Reads a table written by [`CriticalValueTable::write_csv`]; grids and
    /// provenance come from the sidecar metadata.
    pub fn read_csv<R: Read>(reader: R, metadata: TableMetadata) -> Result<Self> {
        let TableMetadata { xi_grid, p_grid, provenance } = metadata;
        validate_grids(&xi_grid, &p_grid)?;
        let mut values = vec![vec![vec![f64::NAN; p_grid.len()]; xi_grid.len()]; 3];
        let mut rdr = csv::Reader::from_reader(reader);
        for record in rdr.records() {
            let record = record.map_err(|e| domain(format!("reading table: {e}")))?;
            if record.len() != 4 {
                return Err(domain(format!("expected 4 fields, got {}", record.len())));
            }
            let stat: GofStat = record[0].parse()?;
            let num = |s: &str| {
                s.trim().parse::<f64>().map_err(|_| domain(format!("not a number: {s:?}")))
            };
            let (xi, p, v) = (num(&record[1])?, num(&record[2])?, num(&record[3])?);
            let i = xi_grid
                .iter()
                .position(|g| *g == xi)
                .ok_or_else(|| domain(format!("xi {xi} is not on the grid")))?;
            let j = p_grid
                .iter()
                .position(|g| *g == p)
                .ok_or_else(|| domain(format!("p {p} is not on the grid")))?;
            values[stat.index()][i][j] = v;
        }
        if values.iter().flatten().flatten().any(|v| v.is_nan()) {
            return Err(domain("table file is missing entries"));
        }
        CriticalValueTable::new(xi_grid, p_grid, values, provenance)
    }
}

fn validate_grids(xi_grid: &[f64], p_grid: &[f64]) -> Result<()> {
    if xi_grid.is_empty() || p_grid.is_empty() {
        return Err(domain("grids must be nonempty"));
    }
    if xi_grid.iter().any(|x| !x.is_finite()) || xi_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(domain("shape grid must be finite and strictly ascending"));
    }
    if p_grid.iter().any(|p| !(*p > 0.0 && *p < 1.0)) || p_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(domain("level grid must lie in (0, 1) and strictly descend"));
    }
    Ok(())
}

/// Statistics of one simulated sample after refitting both parameters.
fn simulated_statistics(xi: f64, n: usize, rng: &mut ChaCha8Rng) -> Result<GofStatistics> {
    let parent = GpdParams::new(xi, 1.0)?;
    let mut sample = parent.sample(rng, n);
    sample.sort_by(f64::total_cmp);
    let fit = fit_sorted(&sample, None)?;
    Ok(fitted_gof(&fit.params, &sample, &mut Vec::new(), &mut Vec::new()))
}

/// Independent generator for chunk `chunk` of stream `stream`.
fn chunk_rng(seed: u64, stream: u64, chunk: u64) -> ChaCha8Rng {
    stream_rng(seed, (stream << 32) | chunk)
}

/// Simulates `replications` statistics at one shape; deterministic in
/// `(seed, stream)` regardless of thread scheduling.
fn simulate(
    xi: f64,
    n: usize,
    replications: usize,
    seed: u64,
    stream: u64,
) -> Result<Vec<GofStatistics>> {
    let chunks = replications.div_ceil(CHUNK_SIZE);
    let parts: Vec<Result<Vec<GofStatistics>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, stream, c as u64);
            let len = CHUNK_SIZE.min(replications - c * CHUNK_SIZE);
            (0..len).map(|_| simulated_statistics(xi, n, &mut rng)).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(replications);
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}

/// Empirical `(1 - p)`-quantile of ascending values.
fn upper_quantile(sorted: &[f64], p: f64) -> f64 {
    let r = sorted.len();
    let idx = ((1.0 - p) * r as f64).ceil() as usize;
    sorted[idx.clamp(1, r) - 1]
}

/// Regenerates critical values by simulating GPD(xi, 1) samples and
/// refitting both parameters to each one.
pub fn generate_table(
    config: McConfig,
    xi_grid: &[f64],
    p_grid: &[f64],
) -> Result<CriticalValueTable> {
    config.validate()?;
    validate_grids(xi_grid, p_grid)?;
    let mut values = vec![Vec::with_capacity(xi_grid.len()); 3];
    for (i, &xi) in xi_grid.iter().enumerate() {
        let stats = simulate(xi, config.sample_size, config.replications, config.seed, i as u64)?;
        for stat in GofStat::ALL {
            let mut column: Vec<f64> = stats.iter().map(|s| stat.pick(s)).collect();
            column.sort_by(f64::total_cmp);
            values[stat.index()].push(p_grid.iter().map(|&p| upper_quantile(&column, p)).collect());
        }
    }
    let provenance = Provenance::Generated {
        config,
        chunk_size: CHUNK_SIZE,
        chunks: config.replications.div_ceil(CHUNK_SIZE),
    };
    CriticalValueTable::new(xi_grid.to_vec(), p_grid.to_vec(), values, provenance)
}

/// Parametric-bootstrap p-value: the fraction of simulated size-`n`
/// GPD(`xi_hat`, 1) samples whose refitted statistic exceeds `observed`.
pub fn mc_p_value(
    stat: GofStat,
    xi_hat: f64,
    n: usize,
    observed: f64,
    reps: usize,
    seed: u64,
) -> Result<f64> {
    if reps < MIN_BOOTSTRAP_REPLICATIONS {
        return Err(domain(format!(
            "bootstrap needs at least {MIN_BOOTSTRAP_REPLICATIONS} replications, got {reps}"
        )));
    }
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    if observed.is_nan() || !xi_hat.is_finite() {
        return Err(domain("observed statistic and shape must be numbers"));
    }
    let stats = simulate(xi_hat, n, reps, seed, 0)?;
    let exceed = stats.iter().filter(|s| stat.pick(s) > observed).count();
    Ok(exceed as f64 / reps as f64)
}
