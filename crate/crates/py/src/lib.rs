//! Python bindings: symbols, densities and the JSON reports of the checkers.

// NaN must fail every range check, so `!(x > 0.0)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use levydens::bounds::{self, EnvelopeParams, WeightedIntegralCase};
use levydens::checker::{self, Grid, LowerCheckConfig, UpperCheckConfig};
use levydens::density::{self as dens, DensityConfig, DensityResult, MassGrid, Method};
use levydens::iterlog;
use levydens::{Error, IterLogParams, LevySymbol, SymbolKind};

create_exception!(levydens_py, ConvergenceError, PyArithmeticError);

fn py_err(e: Error) -> PyErr {
    match e {
        Error::NoConvergence { .. }
        | Error::Divergence { .. }
        | Error::ToleranceNotMet { .. }
        | Error::NotStabilized { .. }
        | Error::BranchViolation { .. }
        | Error::GridTooCoarse { .. } => ConvergenceError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn params(n: u32, eps: f64) -> PyResult<IterLogParams> {
    IterLogParams::new(n, eps).map_err(py_err)
}

fn to_json<T: serde::Serialize>(v: &T) -> PyResult<String> {
    serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// A Levy symbol `eta`; `kind` is `"chain"`, `"sym"` or `"sq"`.
#[pyclass(name = "Symbol", module = "levydens_py", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PySymbol {
    inner: LevySymbol,
}

#[pymethods]
impl PySymbol {
    #[new]
    fn new(kind: &str, n: u32, eps: f64) -> PyResult<Self> {
        let kind = match kind {
            "chain" => SymbolKind::SubordinatorChain,
            "sym" => SymbolKind::SymmetricIterLog,
            "sq" => SymbolKind::SubordinatedSquare,
            other => return Err(PyValueError::new_err(format!("unknown kind {other:?}"))),
        };
        Ok(Self { inner: LevySymbol::new(kind, n, eps).map_err(py_err)? })
    }

    /// Parses `"chain:n=2,eps=1.0"`.
    #[staticmethod]
    fn parse(spec: &str) -> PyResult<Self> {
        Ok(Self { inner: spec.parse().map_err(py_err)? })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind.tag()
    }

    #[getter]
    fn n(&self) -> u32 {
        self.inner.params.n
    }

    #[getter]
    fn eps(&self) -> f64 {
        self.inner.params.eps
    }

    #[getter]
    fn symmetric(&self) -> bool {
        self.inner.symmetric()
    }

    fn eta(&self, xi: f64) -> Complex64 {
        self.inner.value(xi)
    }

    /// `(eta, eta', eta'')`.
    fn eta_jet(&self, xi: f64) -> PyResult<(Complex64, Complex64, Complex64)> {
        let j = self.inner.eta(xi).map_err(py_err)?;
        Ok((j.value, j.d1, j.d2))
    }

    /// `(Re eta, -Im eta)`.
    fn eta_parts(&self, xi: f64) -> (f64, f64) {
        self.inner.eta_parts(xi)
    }

    fn char_fn(&self, t: f64, xi: f64) -> Complex64 {
        self.inner.char_fn(t, xi)
    }

    fn __repr__(&self) -> String {
        format!("Symbol('{}')", self.inner)
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }
}

fn config(method: &str, tol: f64) -> PyResult<DensityConfig> {
    let m: Method = method.parse().map_err(py_err)?;
    if !(tol > 0.0) {
        return Err(PyValueError::new_err(format!("tol must be positive, got {tol}")));
    }
    Ok(DensityConfig::default().with_method(m).with_tol(tol))
}

fn result_dict<'py>(py: Python<'py>, r: &DensityResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("x", r.x)?;
    d.set_item("t", r.t)?;
    d.set_item("p", r.p)?;
    d.set_item("err_est", r.err_est)?;
    d.set_item("method", r.method_used.to_string())?;
    d.set_item("k_used", r.k_used)?;
    Ok(d)
}

/// Density at `x` as a dict with keys `x, t, p, err_est, method, k_used`.
#[pyfunction]
#[pyo3(signature = (symbol, t, x, method = "auto", tol = 1e-8))]
fn density<'py>(
    py: Python<'py>,
    symbol: &PySymbol,
    t: f64,
    x: f64,
    method: &str,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config(method, tol)?;
    let sym = symbol.inner;
    let r = py.detach(|| dens::density(&sym, t, x, &cfg)).map_err(py_err)?;
    result_dict(py, &r)
}

/// Densities at every `x`, evaluated in parallel.
#[pyfunction]
#[pyo3(signature = (symbol, t, xs, method = "auto", tol = 1e-8))]
fn density_grid<'py>(
    py: Python<'py>,
    symbol: &PySymbol,
    t: f64,
    xs: Vec<f64>,
    method: &str,
    tol: f64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = config(method, tol)?;
    let q = dens::DensityQuery { symbol: symbol.inner, t, xs, method: cfg.method, tol };
    let out = py.detach(|| dens::density_grid(&q, &cfg));
    out.into_iter().map(|r| result_dict(py, &r.map_err(py_err)?)).collect()
}

/// `(mass, err)` of `int_{-a}^{a} p_t`.
#[pyfunction]
fn window_mass(py: Python<'_>, symbol: &PySymbol, t: f64, a: f64) -> PyResult<(f64, f64)> {
    let sym = symbol.inner;
    py.detach(|| dens::window_mass(&sym, t, a, &DensityConfig::default())).map_err(py_err)
}

/// Total mass report as JSON.
#[pyfunction]
fn normalization(py: Python<'_>, symbol: &PySymbol, t: f64) -> PyResult<String> {
    let sym = symbol.inner;
    let r =
        py.detach(|| dens::normalization(&sym, t, &MassGrid::default(), &DensityConfig::default())).map_err(py_err)?;
    to_json(&r)
}

/// Upper-assumption report as JSON; the growth constant is fitted on
/// `[max(xi_min, 1), xi_max]`.
#[pyfunction]
#[pyo3(signature = (symbol, xi_min = 1e-6, xi_max = 1e6, count = 400))]
fn check_upper_assumptions(
    py: Python<'_>,
    symbol: &PySymbol,
    xi_min: f64,
    xi_max: f64,
    count: usize,
) -> PyResult<String> {
    let cfg = UpperCheckConfig {
        grid: Grid::log(xi_min, xi_max, count),
        alpha_grid: Grid::log(xi_min.max(1.0), xi_max, count),
        ..Default::default()
    };
    let sym = symbol.inner;
    to_json(&py.detach(|| checker::check_upper_assumptions(&sym, &cfg)).map_err(py_err)?)
}

/// Lower-assumption report as JSON (symmetric kinds only).
#[pyfunction]
#[pyo3(signature = (symbol, xi_min = 1e-6, xi_max = 1e6, count = 400))]
fn check_lower_assumptions(
    py: Python<'_>,
    symbol: &PySymbol,
    xi_min: f64,
    xi_max: f64,
    count: usize,
) -> PyResult<String> {
    let cfg =
        LowerCheckConfig { grid: Grid::log(xi_min, xi_max, count), d2_grid: Grid::log(xi_min.max(1.0), xi_max, count) };
    let sym = symbol.inner;
    to_json(&py.detach(|| checker::check_lower_assumptions(&sym, &cfg)).map_err(py_err)?)
}

/// Worst relative error between analytic and finite-difference jets.
#[pyfunction]
#[pyo3(signature = (symbol, xi_min = 1e-3, xi_max = 1e6, count = 200))]
fn derivative_selftest(symbol: &PySymbol, xi_min: f64, xi_max: f64, count: usize) -> PyResult<f64> {
    checker::derivative_selftest(&symbol.inner, &Grid::log(xi_min, xi_max, count)).map_err(py_err)
}

/// Weighted tower-integral report as JSON; `case` is 1, 2 or 3.
#[pyfunction]
#[pyo3(signature = (case, alpha, t, n, eps, a_grid, alpha_eps = 1.0))]
fn weighted_integral(
    case: u8,
    alpha: f64,
    t: f64,
    n: u32,
    eps: f64,
    a_grid: Vec<f64>,
    alpha_eps: f64,
) -> PyResult<String> {
    let case = WeightedIntegralCase::from_index(case).map_err(py_err)?;
    to_json(&bounds::weighted_integral_check(case, alpha, alpha_eps, t, params(n, eps)?, &a_grid).map_err(py_err)?)
}

#[pyfunction]
#[pyo3(signature = (alpha, t, n, eps, alpha_eps = 1.0))]
fn a0(alpha: f64, t: f64, n: u32, eps: f64, alpha_eps: f64) -> PyResult<f64> {
    bounds::a0(alpha, t, params(n, eps)?, alpha_eps).map_err(py_err)
}

/// `(upper, lower)` envelope values at `x`.
#[pyfunction]
#[pyo3(signature = (n, eps, alpha, c_t, t, x, refined = false))]
fn envelopes(n: u32, eps: f64, alpha: f64, c_t: f64, t: f64, x: f64, refined: bool) -> PyResult<(f64, f64)> {
    let ep = EnvelopeParams::new(params(n, eps)?, alpha, c_t, refined).map_err(py_err)?;
    Ok((bounds::upper_envelope(&ep, t, x), bounds::lower_envelope(&ep, t, x)))
}

/// `(s_n(x), r_n(x))`.
#[pyfunction]
fn tower(n: u32, x: f64) -> PyResult<(f64, f64)> {
    Ok((iterlog::s(n, x).map_err(py_err)?, iterlog::r(n, x).map_err(py_err)?))
}

#[pymodule]
fn levydens_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySymbol>()?;
    m.add("ConvergenceError", m.py().get_type::<ConvergenceError>())?;
    m.add_function(wrap_pyfunction!(density, m)?)?;
    m.add_function(wrap_pyfunction!(density_grid, m)?)?;
    m.add_function(wrap_pyfunction!(window_mass, m)?)?;
    m.add_function(wrap_pyfunction!(normalization, m)?)?;
    m.add_function(wrap_pyfunction!(check_upper_assumptions, m)?)?;
    m.add_function(wrap_pyfunction!(check_lower_assumptions, m)?)?;
    m.add_function(wrap_pyfunction!(derivative_selftest, m)?)?;
    m.add_function(wrap_pyfunction!(weighted_integral, m)?)?;
    m.add_function(wrap_pyfunction!(a0, m)?)?;
    m.add_function(wrap_pyfunction!(envelopes, m)?)?;
    m.add_function(wrap_pyfunction!(tower, m)?)?;
    Ok(())
}
