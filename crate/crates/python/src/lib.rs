//! Python bindings: the `tailsep` extension module.

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use tailsep::distributions::stream_rng;
use tailsep::risk::cvar_with;
use tailsep::statistics::{gof_statistics, lower_tail_stat, risk_function, upper_tail_stat};
use tailsep::tail_detect::{self, ExcessOrigin};
use tailsep::{
    builtin_table, CvarConvention, GofStat, ParentDistribution, ParentKind, PValue, ProbVector,
    ScanOptions, SeriesTransform,
};

create_exception!(tailsep, TailsepError, PyValueError, "Raised by every failing tailsep routine.");

fn err(e: tailsep::Error) -> PyErr {
    TailsepError::new_err(e.to_string())
}

fn parse<T: std::str::FromStr<Err = tailsep::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

fn origin(name: &str) -> PyResult<ExcessOrigin> {
    match name {
        "inclusive" => Ok(ExcessOrigin::Inclusive),
        "next_order" | "next-order" => Ok(ExcessOrigin::NextOrder),
        _ => Err(TailsepError::new_err(format!("unknown excess origin '{name}'"))),
    }
}

fn convention(name: &str) -> PyResult<CvarConvention> {
    match name {
        "from-var" | "from_var" => Ok(CvarConvention::FromVar),
        "from-threshold" | "from_threshold" => Ok(CvarConvention::FromThreshold),
        _ => Err(TailsepError::new_err(format!("unknown CVaR convention '{name}'"))),
    }
}

fn options(excess_origin: &str) -> PyResult<ScanOptions> {
    Ok(ScanOptions { excess_origin: origin(excess_origin)?, ..ScanOptions::default() })
}

/// Generalized Pareto distribution with shape `xi` and scale `sigma`.
#[pyclass(frozen, module = "tailsep", skip_from_py_object)]
#[derive(Clone, Copy)]
struct GpdParams {
    inner: tailsep::GpdParams,
}

#[pymethods]
impl GpdParams {
    #[new]
    fn new(xi: f64, sigma: f64) -> PyResult<Self> {
        Ok(GpdParams { inner: tailsep::GpdParams::new(xi, sigma).map_err(err)? })
    }

    #[getter]
    fn xi(&self) -> f64 {
        self.inner.xi
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.sigma
    }

    fn cdf(&self, x: f64) -> f64 {
        self.inner.cdf(x)
    }

    fn pdf(&self, x: f64) -> f64 {
        self.inner.pdf(x)
    }

    fn quantile(&self, q: f64) -> PyResult<f64> {
        self.inner.quantile(q).map_err(err)
    }

    fn mean_excess(&self, v: f64) -> PyResult<f64> {
        self.inner.mean_excess(v).map_err(err)
    }

    fn upper_endpoint(&self) -> f64 {
        self.inner.upper_endpoint()
    }

    #[pyo3(signature = (n, seed = 7))]
    fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        self.inner.sample(&mut stream_rng(seed, 0), n)
    }

    fn __repr__(&self) -> String {
        format!("GpdParams(xi={}, sigma={})", self.inner.xi, self.inner.sigma)
    }
}

#[pyclass(frozen, module = "tailsep", get_all, skip_from_py_object)]
#[derive(Clone)]
struct FitResult {
    xi: f64,
    sigma: f64,
    log_likelihood: f64,
    converged: bool,
    /// "mle" or "moment_fallback".
    method: String,
    iterations: usize,
}

#[pymethods]
impl FitResult {
    fn params(&self) -> GpdParams {
        GpdParams { inner: tailsep::GpdParams { xi: self.xi, sigma: self.sigma } }
    }

    fn __repr__(&self) -> String {
        format!(
            "FitResult(xi={}, sigma={}, converged={}, method='{}')",
            self.xi, self.sigma, self.converged, self.method
        )
    }
}

/// Maximum-likelihood GPD fit to nonnegative excesses.
#[pyfunction]
fn fit_mle(excesses: Vec<f64>) -> PyResult<FitResult> {
    let f = tailsep::fit_mle(&excesses).map_err(err)?;
    Ok(FitResult {
        xi: f.params.xi,
        sigma: f.params.sigma,
        log_likelihood: f.log_likelihood,
        converged: f.converged,
        method: match f.method {
            tailsep::FitMethod::Mle => "mle",
            tailsep::FitMethod::MomentFallback => "moment_fallback",
        }
        .to_string(),
        iterations: f.iterations,
    })
}

/// W2, A2 and AU2 of probability values in [0, 1] (any order).
#[pyfunction]
fn gof(py: Python<'_>, probs: Vec<f64>) -> PyResult<Bound<'_, PyDict>> {
    let p = ProbVector::from_unsorted(probs).map_err(err)?;
    let s = gof_statistics(&p);
    let d = PyDict::new(py);
    d.set_item("w2", s.w2)?;
    d.set_item("a2", s.a2)?;
    d.set_item("au2", s.au2)?;
    Ok(d)
}

/// Lower-tail stress statistic with exponent `a`.
#[pyfunction]
fn lower_tail(a: f64, probs: Vec<f64>) -> PyResult<f64> {
    lower_tail_stat(a, &ProbVector::from_unsorted(probs).map_err(err)?).map_err(err)
}

/// Upper-tail stress statistic with exponent `b`.
#[pyfunction]
fn upper_tail(b: f64, probs: Vec<f64>) -> PyResult<f64> {
    upper_tail_stat(b, &ProbVector::from_unsorted(probs).map_err(err)?).map_err(err)
}

/// Null expectation `1 / ((2 - a)(3 - a))` of the stress statistics.
#[pyfunction(name = "risk_function")]
fn py_risk_function(a: f64) -> PyResult<f64> {
    risk_function(a).map_err(err)
}

fn p_value_pair(p: PValue) -> (f64, &'static str) {
    match p {
        PValue::Estimate(v) => (v, "estimate"),
        PValue::AtLeast(v) => (v, "at_least"),
        PValue::AtMost(v) => (v, "at_most"),
    }
}

/// P-value from the embedded critical-value table as `(value, kind)`.
#[pyfunction]
fn p_value(stat: &str, xi: f64, observed: f64) -> PyResult<(f64, &'static str)> {
    let s: GofStat = parse(stat)?;
    Ok(p_value_pair(builtin_table().p_value(s, xi, observed).map_err(err)?))
}

/// Critical value from the embedded table at significance `p`.
#[pyfunction]
fn critical_value(stat: &str, xi: f64, p: f64) -> PyResult<f64> {
    let s: GofStat = parse(stat)?;
    builtin_table().critical_value(s, xi, p).map_err(err)
}

/// Selected tail of a sample.
#[pyclass(frozen, module = "tailsep", get_all, skip_from_py_object)]
#[derive(Clone)]
struct TailModel {
    u: f64,
    k_star: usize,
    n: usize,
    xi: f64,
    sigma: f64,
    fit_converged: bool,
    /// `(statistic, value, p_value, p_value_kind)` for W2, A2 and AU2.
    gof: Vec<(String, f64, f64, String)>,
    warnings: Vec<String>,
}

impl From<&tailsep::TailModel> for TailModel {
    fn from(m: &tailsep::TailModel) -> Self {
        let entry = |name: &str, g: &tail_detect::GofEntry| {
            let (p, kind) = p_value_pair(g.p_value);
            (name.to_string(), g.value, p, kind.to_string())
        };
        TailModel {
            u: m.u,
            k_star: m.k_star,
            n: m.n,
            xi: m.params.xi,
            sigma: m.params.sigma,
            fit_converged: m.fit_converged,
            gof: vec![entry("W2", &m.gof.w2), entry("A2", &m.gof.a2), entry("AU2", &m.gof.au2)],
            warnings: m.warnings.clone(),
        }
    }
}

#[pymethods]
impl TailModel {
    #[getter]
    fn tail_fraction(&self) -> f64 {
        self.k_star as f64 / self.n as f64
    }

    fn params(&self) -> GpdParams {
        GpdParams { inner: tailsep::GpdParams { xi: self.xi, sigma: self.sigma } }
    }

    fn estimate(&self) -> PyResult<TailEstimate> {
        TailEstimate::new(self.u, self.xi, self.sigma, self.k_star, self.n)
    }

    fn __repr__(&self) -> String {
        format!(
            "TailModel(u={}, k_star={}, n={}, xi={}, sigma={})",
            self.u, self.k_star, self.n, self.xi, self.sigma
        )
    }
}

/// Selects the upper tail of `sample`.
#[pyfunction]
#[pyo3(signature = (sample, excess_origin = "inclusive"))]
fn detect(py: Python<'_>, sample: Vec<f64>, excess_origin: &str) -> PyResult<TailModel> {
    let opts = options(excess_origin)?;
    let m = py
        .detach(|| tailsep::detect(&sample, &builtin_table(), &opts))
        .map_err(err)?;
    Ok(TailModel::from(&m))
}

/// Scan curve as a list of dicts with keys k, xi, sigma, w2, a2, au2, fit_converged.
#[pyfunction]
#[pyo3(signature = (sample, excess_origin = "inclusive"))]
fn scan<'py>(
    py: Python<'py>,
    sample: Vec<f64>,
    excess_origin: &str,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let opts = options(excess_origin)?;
    let rows = py.detach(|| tailsep::scan(&sample, &opts)).map_err(err)?;
    rows.iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("k", r.k)?;
            d.set_item("xi", r.xi)?;
            d.set_item("sigma", r.sigma)?;
            d.set_item("w2", r.w2)?;
            d.set_item("a2", r.a2)?;
            d.set_item("au2", r.au2)?;
            d.set_item("fit_converged", r.fit_converged)?;
            Ok(d)
        })
        .collect()
}

/// Deterministic quantile sample of a reference parent.
#[pyfunction]
#[pyo3(signature = (parent, n, mu = None, sigma = None, xi = None))]
fn ideal_case_sample(
    parent: &str,
    n: usize,
    mu: Option<f64>,
    sigma: Option<f64>,
    xi: Option<f64>,
) -> PyResult<Vec<f64>> {
    let kind: ParentKind = parse(parent)?;
    let r = ParentDistribution::reference(kind);
    let p = ParentDistribution::new(kind, mu.unwrap_or(r.mu), sigma.unwrap_or(r.sigma), xi.unwrap_or(r.xi))
        .map_err(err)?;
    tail_detect::ideal_case_sample(&p, n).map_err(err)
}

/// Converts a series to losses: "identity", "negate" or "neg-log-returns".
#[pyfunction]
#[pyo3(signature = (series, transform = "identity"))]
fn to_losses(series: Vec<f64>, transform: &str) -> PyResult<Vec<f64>> {
    let t: SeriesTransform = parse(transform)?;
    tailsep::to_losses(&series, t).map_err(err)
}

/// Threshold, GPD parameters and tail size for risk measures.
#[pyclass(frozen, module = "tailsep", skip_from_py_object)]
#[derive(Clone, Copy)]
struct TailEstimate {
    inner: tailsep::TailEstimate,
}

#[pymethods]
impl TailEstimate {
    #[new]
    fn new(u: f64, xi: f64, sigma: f64, k_star: usize, n: usize) -> PyResult<Self> {
        let params = tailsep::GpdParams::new(xi, sigma).map_err(err)?;
        Ok(TailEstimate { inner: tailsep::TailEstimate::new(u, params, k_star, n).map_err(err)? })
    }

    #[getter]
    fn tail_fraction(&self) -> f64 {
        self.inner.tail_fraction()
    }

    fn var(&self, level: f64) -> PyResult<f64> {
        tailsep::var(&self.inner, level).map_err(err)
    }

    #[pyo3(signature = (level, convention = "from-var"))]
    fn cvar(&self, level: f64, convention: &str) -> PyResult<f64> {
        cvar_with(&self.inner, level, self::convention(convention)?).map_err(err)
    }

    fn __repr__(&self) -> String {
        let t = &self.inner;
        format!(
            "TailEstimate(u={}, xi={}, sigma={}, k_star={}, n={})",
            t.u, t.params.xi, t.params.sigma, t.k_star, t.n
        )
    }
}

/// Monetary loss `s0 * (exp(var_log) - 1)` implied by a log-return VaR.
#[pyfunction]
fn delta_s(s0: f64, var_log: f64) -> PyResult<f64> {
    tailsep::delta_s(s0, var_log).map_err(err)
}

#[pymodule(name = "tailsep")]
fn tailsep_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("TailsepError", m.py().get_type::<TailsepError>())?;
    m.add_class::<GpdParams>()?;
    m.add_class::<FitResult>()?;
    m.add_class::<TailModel>()?;
    m.add_class::<TailEstimate>()?;
    m.add_function(wrap_pyfunction!(fit_mle, m)?)?;
    m.add_function(wrap_pyfunction!(gof, m)?)?;
    m.add_function(wrap_pyfunction!(lower_tail, m)?)?;
    m.add_function(wrap_pyfunction!(upper_tail, m)?)?;
    m.add_function(wrap_pyfunction!(py_risk_function, m)?)?;
    m.add_function(wrap_pyfunction!(p_value, m)?)?;
    m.add_function(wrap_pyfunction!(critical_value, m)?)?;
    m.add_function(wrap_pyfunction!(detect, m)?)?;
    m.add_function(wrap_pyfunction!(scan, m)?)?;
    m.add_function(wrap_pyfunction!(ideal_case_sample, m)?)?;
    m.add_function(wrap_pyfunction!(to_losses, m)?)?;
    m.add_function(wrap_pyfunction!(delta_s, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
