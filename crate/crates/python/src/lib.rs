//! Python bindings. Vectors and weights are built from the same text grammar
//! as the command line; structured results come back as plain dicts and lists.

use num_bigint::BigInt;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde::Serialize;

use wdioph::cli::grammar;
use wdioph::{approx, dynamics, structure, EstimatorConfig, FlowConfig};

create_exception!(pywdioph, WdiophError, PyException, "Error raised by the wdioph library.");

fn err(e: wdioph::Error) -> PyErr {
    WdiophError::new_err(format!("{e} (exit status {})", e.exit_code()))
}

fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| WdiophError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "Weight", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyWeight(wdioph::Weight);

#[pymethods]
impl PyWeight {
    /// Comma-separated rationals summing to 1, e.g. `"1/3, 2/3"`.
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        grammar::parse_weight(text).map(PyWeight).map_err(err)
    }

    #[staticmethod]
    fn standard(d: usize) -> Self {
        PyWeight(wdioph::Weight::standard(d))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn entries(&self) -> Vec<String> {
        self.0.entries().iter().map(ToString::to_string).collect()
    }

    fn is_proper(&self) -> bool {
        self.0.is_proper()
    }

    fn as_floats(&self) -> Vec<f64> {
        self.0.as_f64()
    }

    /// Weight of the coordinates after dropping the first `i`.
    fn restrict(&self, i: usize) -> PyResult<Self> {
        wdioph::weight_restriction(&self.0, i).map(PyWeight).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Weight({:?})", self.entries().join(", "))
    }
}

#[pyclass(name = "WeightSet", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyWeightSet(wdioph::WeightSet);

#[pymethods]
impl PyWeightSet {
    /// `"w1; w2; ..."` or `"grid(1/N)"` in dimension `dim`.
    #[new]
    fn new(text: &str, dim: usize) -> PyResult<Self> {
        grammar::parse_weight_set(text, dim).map(PyWeightSet).map_err(err)
    }

    #[staticmethod]
    fn grid(dim: usize, mesh: &str) -> PyResult<Self> {
        let mesh = grammar::parse_rational(mesh).map_err(err)?;
        wdioph::WeightSet::grid(dim, &mesh).map(PyWeightSet).map_err(err)
    }

    #[staticmethod]
    fn singleton(w: &PyWeight) -> Self {
        PyWeightSet(wdioph::WeightSet::singleton(w.0.clone()))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn weights(&self) -> Vec<PyWeight> {
        self.0.weights().iter().cloned().map(PyWeight).collect()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(name = "TargetVector", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTarget(wdioph::TargetVector);

#[pymethods]
impl PyTarget {
    /// Comma-separated coordinates: rationals, `sqrt(n)-m`, `golden`,
    /// `liouville(b)` or `cf(...)`.
    #[new]
    #[pyo3(signature = (text, precision = wdioph::DEFAULT_PRECISION))]
    fn new(text: &str, precision: u32) -> PyResult<Self> {
        grammar::parse_vector(text, precision).map(PyTarget).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn precision(&self) -> u32 {
        self.0.precision()
    }

    fn is_rational(&self) -> bool {
        self.0.is_rational()
    }

    fn as_floats(&self) -> Vec<f64> {
        self.0.as_f64()
    }

    fn describe(&self) -> Vec<String> {
        self.0.describe()
    }

    fn __repr__(&self) -> String {
        format!("TargetVector({:?})", self.0.describe().join(", "))
    }
}

/// `{"approx", "ln", "exact"}`; `exact` is a rational string or None.
#[pyfunction]
fn quasi_norm<'py>(py: Python<'py>, x: &PyTarget, w: &PyWeight) -> PyResult<Bound<'py, PyAny>> {
    let v = wdioph::quasi_norm(&x.0, &w.0).map_err(err)?;
    to_py(
        py,
        &serde_json::json!({
            "approx": v.approx(),
            "ln": if v.ln_approx().is_finite() { Some(v.ln_approx()) } else { None },
            "exact": v.exact().map(|r| r.to_string()),
        }),
    )
}

/// Exact test of `||x||_w <= r`.
#[pyfunction]
fn quasi_norm_leq(x: &PyTarget, w: &PyWeight, r: &str) -> PyResult<bool> {
    let r = grammar::parse_rational(r).map_err(err)?;
    wdioph::quasi_norm_leq(&x.0, &w.0, &r).map_err(err)
}

#[pyfunction]
fn dirichlet_solve<'py>(py: Python<'py>, x: &PyTarget, w: &PyWeight, big_q: u64) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &wdioph::dirichlet_solve(&x.0, &w.0, big_q).map_err(err)?)
}

#[pyfunction]
fn best_sequence<'py>(py: Python<'py>, x: &PyTarget, w: &PyWeight, q_max: u64) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &wdioph::best_sequence(&x.0, &w.0, q_max).map_err(err)?)
}

#[pyfunction]
fn uniform_exponent_estimate<'py>(
    py: Python<'py>,
    x: &PyTarget,
    w: &PyWeight,
    q_max: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let e = approx::uniform_exponent_estimate(&x.0, &w.0, q_max, &EstimatorConfig::default()).map_err(err)?;
    to_py(py, &e)
}

#[pyfunction]
fn ordinary_exponent_estimate<'py>(
    py: Python<'py>,
    x: &PyTarget,
    w: &PyWeight,
    q_max: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let e = approx::ordinary_exponent_estimate(&x.0, &w.0, q_max, &EstimatorConfig::default()).map_err(err)?;
    to_py(py, &e)
}

#[pyfunction]
fn sigma_hat_w_estimate<'py>(
    py: Python<'py>,
    x: &PyTarget,
    ws: &PyWeightSet,
    q_max: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let e = approx::sigma_hat_w_estimate(&x.0, &ws.0, q_max, &EstimatorConfig::default()).map_err(err)?;
    to_py(py, &e)
}

/// Finite-scale `W`-singularity certificate at level `delta` (a rational string).
#[pyfunction]
fn singular_certificate<'py>(
    py: Python<'py>,
    x: &PyTarget,
    ws: &PyWeightSet,
    delta: &str,
    q_max: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let d = grammar::parse_rational(delta).map_err(err)?;
    let c = approx::singular_certificate(&x.0, &ws.0, &d, q_max).map_err(err)?;
    let ok = c.recheck(&x.0).map_err(err)?;
    let out = to_py(py, &c)?;
    out.set_item("succeeded", c.succeeded())?;
    out.set_item("recheck", ok)?;
    Ok(out)
}

/// Sup-norm shortest vector of `a_{w,t} u_x Z^{d+1}`.
#[pyfunction]
fn delta(x: &PyTarget, w: &PyWeight, t: f64) -> PyResult<f64> {
    let fp = dynamics::FlowPoint::new(x.0.clone(), w.0.clone(), t).map_err(err)?;
    dynamics::delta(&fp).map_err(err)
}

#[pyfunction]
fn delta_w(x: &PyTarget, ws: &PyWeightSet, t: f64) -> PyResult<f64> {
    dynamics::delta_w(&x.0, &ws.0, t).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (x, ws, t_max, t_step = 0.25))]
fn tau_hat_estimate<'py>(
    py: Python<'py>,
    x: &PyTarget,
    ws: &PyWeightSet,
    t_max: f64,
    t_step: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = FlowConfig {
        t_step,
        ..FlowConfig::default()
    };
    let grid = cfg.grid(t_max).map_err(err)?;
    to_py(py, &dynamics::tau_hat_estimate(&x.0, &ws.0, &grid, &cfg).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (x, ws, q_max, t_max, slack = 0.1))]
fn verify_sandwich<'py>(
    py: Python<'py>,
    x: &PyTarget,
    ws: &PyWeightSet,
    q_max: u64,
    t_max: f64,
    slack: f64,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &dynamics::verify_sandwich(&x.0, &ws.0, q_max, t_max, slack).map_err(err)?)
}

fn basis(rows: Vec<Vec<i64>>) -> PyResult<dynamics::SubmoduleBasis> {
    let rows: Vec<Vec<BigInt>> = rows.into_iter().map(|r| r.into_iter().map(BigInt::from).collect()).collect();
    dynamics::SubmoduleBasis::new(rows).map_err(err)
}

/// Covolume of the primitive hull of the integer rows along the flow.
#[pyfunction]
fn submodule_covolume(rows: Vec<Vec<i64>>, x: &PyTarget, w: &PyWeight, t: f64) -> PyResult<f64> {
    dynamics::submodule_covolume(&basis(rows)?, &x.0, &w.0, t).map_err(err)
}

#[pyfunction]
fn covolume_decomposition_check<'py>(
    py: Python<'py>,
    rows: Vec<Vec<i64>>,
    x: &PyTarget,
    w: &PyWeight,
    t: f64,
    c: f64,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &dynamics::covolume_decomposition_check(&basis(rows)?, &x.0, &w.0, t, c).map_err(err)?)
}

/// Solution family of `a X - b Y = c`, or None.
#[pyfunction]
fn solve_linear_diophantine<'py>(py: Python<'py>, a: i64, b: i64, c: i64) -> PyResult<Bound<'py, PyAny>> {
    let s = structure::solve_linear_diophantine(a.into(), b.into(), c.into()).map_err(err)?;
    to_py(py, &s)
}

/// The improved exponent for `3/4 < sigma_2 < 1`, as a rational string.
#[pyfunction]
fn exponent_relation_check(sigma2: &str) -> PyResult<String> {
    let s = grammar::parse_rational(sigma2).map_err(err)?;
    structure::exponent_relation_check(&s).map(|r| r.to_string()).map_err(err)
}

#[pyfunction]
fn consecutive_pair_analysis<'py>(
    py: Python<'py>,
    x: &PyTarget,
    delta: &str,
    q_max: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let d = grammar::parse_rational(delta).map_err(err)?;
    to_py(py, &structure::consecutive_pair_analysis(&x.0, &d, q_max).map_err(err)?)
}

#[pymodule]
pub fn pywdioph(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("WdiophError", m.py().get_type::<WdiophError>())?;
    m.add_class::<PyWeight>()?;
    m.add_class::<PyWeightSet>()?;
    m.add_class::<PyTarget>()?;
    m.add_function(wrap_pyfunction!(quasi_norm, m)?)?;
    m.add_function(wrap_pyfunction!(quasi_norm_leq, m)?)?;
    m.add_function(wrap_pyfunction!(dirichlet_solve, m)?)?;
    m.add_function(wrap_pyfunction!(best_sequence, m)?)?;
    m.add_function(wrap_pyfunction!(uniform_exponent_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(ordinary_exponent_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(sigma_hat_w_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(singular_certificate, m)?)?;
    m.add_function(wrap_pyfunction!(delta, m)?)?;
    m.add_function(wrap_pyfunction!(delta_w, m)?)?;
    m.add_function(wrap_pyfunction!(tau_hat_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(verify_sandwich, m)?)?;
    m.add_function(wrap_pyfunction!(submodule_covolume, m)?)?;
    m.add_function(wrap_pyfunction!(covolume_decomposition_check, m)?)?;
    m.add_function(wrap_pyfunction!(solve_linear_diophantine, m)?)?;
    m.add_function(wrap_pyfunction!(exponent_relation_check, m)?)?;
    m.add_function(wrap_pyfunction!(consecutive_pair_analysis, m)?)?;
    Ok(())
}
