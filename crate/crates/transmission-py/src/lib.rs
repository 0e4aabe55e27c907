//! Python bindings: coefficients, symbols, regime checks, mode and field
//! solves, and configuration runs.

use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use transmission::cli::{self, RunOptions};
use transmission::field::{
    self as tfield, interface_report, FieldData, FieldOptions, Geometry as FieldGeometry,
};
use transmission::mode_solver::{self, Forcing, RouteCase, Side};
use transmission::oracle;
use transmission::regime::{self, Mirror, SpectrumInfo};
use transmission::symbols::{
    self, DetCase, FactorizationKind, ScanRanges, ScanSymbol, SymbolArgs, UvBranch,
};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// Diffusion and advection-like coefficients of the two habitats.
#[pyclass(name = "CoefficientSet", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyCoefficientSet {
    inner: symbols::CoefficientSet,
}

#[pymethods]
impl PyCoefficientSet {
    #[new]
    fn new(k_plus: f64, k_minus: f64, l_plus: f64, l_minus: f64) -> PyResult<Self> {
        let inner =
            symbols::CoefficientSet::new(k_plus, k_minus, l_plus, l_minus).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn k_plus(&self) -> f64 {
        self.inner.k_plus
    }

    #[getter]
    fn k_minus(&self) -> f64 {
        self.inner.k_minus
    }

    #[getter]
    fn l_plus(&self) -> f64 {
        self.inner.l_plus
    }

    #[getter]
    fn l_minus(&self) -> f64 {
        self.inner.l_minus
    }

    #[getter]
    fn r_plus(&self) -> f64 {
        self.inner.r_plus()
    }

    #[getter]
    fn r_minus(&self) -> f64 {
        self.inner.r_minus()
    }

    /// Case label such as `"BothNonzero(+,-)"`.
    fn case_label(&self) -> String {
        regime::classify(&self.inner).to_string()
    }

    /// Coefficients of the problem reflected by `x -> -x`.
    fn mirrored(&self) -> Self {
        Self {
            inner: self.inner.mirrored(),
        }
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!(
            "CoefficientSet(k_plus={}, k_minus={}, l_plus={}, l_minus={})",
            c.k_plus, c.k_minus, c.l_plus, c.l_minus
        )
    }
}

fn scan_symbol(name: &str) -> PyResult<ScanSymbol> {
    ScanSymbol::parse(name)
        .ok_or_else(|| value_err(format!("unknown symbol '{name}' (u, v, f1, f2, f3, g)")))
}

/// Complex value of the scalar symbol `name` at `z`.
#[pyfunction]
fn symbol(name: &str, delta: f64, r: f64, z: Complex64) -> PyResult<Complex64> {
    let args = SymbolArgs::new(delta, r, z);
    let out = match scan_symbol(name)? {
        ScanSymbol::U => symbols::uv_symbol(UvBranch::U, &args),
        ScanSymbol::V => symbols::uv_symbol(UvBranch::V, &args),
        ScanSymbol::F1 => symbols::f_symbol(1, &args),
        ScanSymbol::F2 => symbols::f_symbol(2, &args),
        ScanSymbol::F3 => symbols::f_symbol(3, &args),
        ScanSymbol::G => symbols::g_symbol(&args),
    };
    out.map_err(value_err)
}

/// `(b1, b2)` at `z`.
#[pyfunction]
fn b_symbols(coeffs: &PyCoefficientSet, z: Complex64) -> PyResult<(Complex64, Complex64)> {
    symbols::b_symbols(&coeffs.inner, z).map_err(value_err)
}

fn det_case(case: &str) -> PyResult<DetCase> {
    match case {
        "both_nonzero" => Ok(DetCase::BothNonzero),
        "minus_zero" => Ok(DetCase::MinusZero),
        other => Err(value_err(format!(
            "unknown case '{other}' (both_nonzero, minus_zero)"
        ))),
    }
}

/// Determinant symbol of the reduced 2x2 system at `x`.
#[pyfunction]
fn det_symbol(case: &str, coeffs: &PyCoefficientSet, c: f64, d: f64, x: f64) -> PyResult<f64> {
    symbols::det_symbol(det_case(case)?, &coeffs.inner, c, d, x).map_err(value_err)
}

/// Relative residual of one factorization identity; kinds as in
/// `factorization_kinds()`.
#[pyfunction]
fn factorization_residual(
    kind: &str,
    coeffs: &PyCoefficientSet,
    c: f64,
    d: f64,
    x: f64,
) -> PyResult<f64> {
    let kind = FactorizationKind::ALL
        .into_iter()
        .find(|k| k.name() == kind)
        .ok_or_else(|| value_err(format!("unknown identity '{kind}'")))?;
    symbols::factorization_residual(kind, &coeffs.inner, c, d, x).map_err(value_err)
}

#[pyfunction]
fn factorization_kinds() -> Vec<&'static str> {
    FactorizationKind::ALL.iter().map(|k| k.name()).collect()
}

/// Seeded sign scan over the default sampling box.
#[pyfunction]
#[pyo3(signature = (name, count=10_000, seed=0))]
fn sign_scan<'py>(
    py: Python<'py>,
    name: &str,
    count: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let report = symbols::sign_scan(scan_symbol(name)?, &ScanRanges::default(), count, seed);
    let d = PyDict::new(py);
    d.set_item("symbol", report.symbol.name())?;
    d.set_item("samples", report.samples.len())?;
    d.set_item("violations", report.violations)?;
    d.set_item("errors", report.errors)?;
    d.set_item("min", report.min)?;
    d.set_item("max", report.max)?;
    Ok(d)
}

/// Admissibility report; `lambda_min` is the smallest transverse eigenvalue.
#[pyfunction]
#[pyo3(signature = (coeffs, lambda_min, t=None))]
fn check_admissibility<'py>(
    py: Python<'py>,
    coeffs: &PyCoefficientSet,
    lambda_min: f64,
    t: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let spectrum = SpectrumInfo::new(lambda_min).map_err(value_err)?;
    let report = regime::check_admissibility(&coeffs.inner, &spectrum, t).map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("case", report.case_label.to_string())?;
    d.set_item("admissible", report.admissible)?;
    d.set_item("spectral_ok", report.spectral_ok)?;
    d.set_item("t", report.t_parameter)?;
    let conditions: Vec<(String, f64, f64, bool)> = report
        .conditions
        .iter()
        .map(|c| (c.name.clone(), c.value, c.threshold, c.satisfied))
        .collect();
    d.set_item("conditions", conditions)?;
    d.set_item("notes", report.notes.clone())?;
    d.set_item("text", report.text())?;
    Ok(d)
}

/// `None` is zero, a number is a constant, anything else must be callable.
fn forcing_from(obj: Option<Bound<'_, PyAny>>) -> PyResult<Forcing> {
    let Some(obj) = obj else {
        return Ok(Forcing::Zero);
    };
    if let Ok(v) = obj.extract::<f64>() {
        return Ok(Forcing::Constant(v));
    }
    if !obj.is_callable() {
        return Err(value_err("forcing must be None, a number or a callable"));
    }
    let f: Py<PyAny> = obj.unbind();
    Ok(Forcing::function(move |x| {
        Python::attach(|py| {
            f.bind(py)
                .call1((x,))
                .and_then(|v| v.extract::<f64>())
                .unwrap_or(f64::NAN)
        })
    }))
}

/// One-dimensional mode problem on `[a, gamma] u [gamma, b]`.
#[pyclass(name = "ModeProblem", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyModeProblem {
    inner: mode_solver::ModeProblem,
}

#[pymethods]
impl PyModeProblem {
    #[new]
    #[pyo3(signature = (lam, coeffs, a, gamma, b, f_minus=None, f_plus=None, phi_minus=(0.0, 0.0), phi_plus=(0.0, 0.0)))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        lam: f64,
        coeffs: &PyCoefficientSet,
        a: f64,
        gamma: f64,
        b: f64,
        f_minus: Option<Bound<'_, PyAny>>,
        f_plus: Option<Bound<'_, PyAny>>,
        phi_minus: (f64, f64),
        phi_plus: (f64, f64),
    ) -> PyResult<Self> {
        let mut inner = mode_solver::ModeProblem::new(lam, coeffs.inner, a, gamma, b);
        inner.f_minus = forcing_from(f_minus)?;
        inner.f_plus = forcing_from(f_plus)?;
        inner.phi_minus = [phi_minus.0, phi_minus.1];
        inner.phi_plus = [phi_plus.0, phi_plus.1];
        Ok(Self { inner })
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.inner.lambda
    }

    #[getter]
    fn interval(&self) -> (f64, f64, f64) {
        (self.inner.a, self.inner.gamma, self.inner.b)
    }

    /// The problem reflected by `x -> -x`.
    fn mirrored(&self) -> Self {
        Self {
            inner: self.inner.mirrored(),
        }
    }
}

/// Solution of a mode problem.
#[pyclass(name = "ModeSolution", frozen)]
struct PyModeSolution {
    inner: mode_solver::ModeSolution,
}

fn side(name: &str) -> PyResult<Side> {
    match name {
        "minus" => Ok(Side::Minus),
        "plus" => Ok(Side::Plus),
        other => Err(value_err(format!("unknown side '{other}' (minus, plus)"))),
    }
}

#[pymethods]
impl PyModeSolution {
    /// `u(x)`.
    fn __call__(&self, x: f64) -> f64 {
        self.inner.value(x)
    }

    /// `[u, u', u'', u''', u'''']` at `x` on the given side.
    #[pyo3(signature = (x, side_name=None))]
    fn jet(&self, x: f64, side_name: Option<&str>) -> PyResult<[f64; 5]> {
        Ok(match side_name {
            Some(s) => self.inner.eval(side(s)?, x),
            None => self.inner.eval_at(x),
        })
    }

    fn ode_residual(&self, side_name: &str, x: f64) -> PyResult<f64> {
        Ok(self.inner.ode_residual(side(side_name)?, x))
    }

    /// Residuals of the four boundary and four transmission conditions.
    fn condition_residuals(&self) -> [f64; 8] {
        self.inner.condition_residuals()
    }

    #[getter]
    fn rcond(&self) -> f64 {
        self.inner.rcond
    }
}

/// Solves a mode problem with the exponential basis.
#[pyfunction]
#[pyo3(signature = (problem, checked=false))]
fn solve_mode(py: Python<'_>, problem: &PyModeProblem, checked: bool) -> PyResult<PyModeSolution> {
    let mp = problem.inner.clone();
    let out = py.detach(move || {
        if checked {
            mode_solver::solve_mode_checked(&mp)
        } else {
            mode_solver::solve_mode(&mp)
        }
    });
    out.map(|inner| PyModeSolution { inner })
        .map_err(runtime_err)
}

/// `(psi1, psi2, det)` from the reduced 2x2 system of `case`.
#[pyfunction]
fn psi_via_reduced_system(
    py: Python<'_>,
    case: &str,
    problem: &PyModeProblem,
) -> PyResult<(f64, f64, f64)> {
    let case = match case {
        "both_nonzero" => RouteCase::BothNonzero,
        "minus_zero" => RouteCase::MinusZero,
        other => {
            return Err(value_err(format!(
                "unknown case '{other}' (both_nonzero, minus_zero)"
            )))
        }
    };
    let mp = problem.inner.clone();
    let route = py
        .detach(move || mode_solver::psi_via_reduced_system(case, &mp))
        .map_err(runtime_err)?;
    Ok((route.psi1, route.psi2, route.det_value))
}

/// Finite-difference grid study with coarse step `h`.
#[pyfunction]
fn fd_compare<'py>(
    py: Python<'py>,
    solution: &PyModeSolution,
    problem: &PyModeProblem,
    h: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let (ms, mp) = (&solution.inner, problem.inner.clone());
    let cmp = py
        .detach(|| oracle::compare(ms, &mp, h))
        .map_err(runtime_err)?;
    let d = PyDict::new(py);
    d.set_item("h", cmp.h.to_vec())?;
    d.set_item(
        "max_err",
        cmp.errors.iter().map(|e| e.max_err).collect::<Vec<_>>(),
    )?;
    d.set_item(
        "l2_err",
        cmp.errors.iter().map(|e| e.l2_err).collect::<Vec<_>>(),
    )?;
    d.set_item("observed_order", cmp.observed_order)?;
    d.set_item("extrapolated_rel_err", cmp.extrapolated_rel_err)?;
    Ok(d)
}

fn expr_source(text: &str) -> PyResult<tfield::Source> {
    let e = cli::parse_expression(text).map_err(value_err)?;
    Ok(std::sync::Arc::new(move |x, y| {
        e.eval(x, y).unwrap_or(f64::NAN)
    }))
}

fn expr_trace(text: &str, x: f64) -> PyResult<tfield::Trace> {
    let e = cli::parse_expression(text).map_err(value_err)?;
    Ok(std::sync::Arc::new(move |y| {
        e.eval(x, y).unwrap_or(f64::NAN)
    }))
}

/// Solves the 2D problem on `[a, b] x [0, ell]` with `modes` sine modes.
/// Data are expressions in `x` and `y` in the configuration grammar.
#[pyfunction]
#[pyo3(signature = (
    coeffs, a, gamma, b, ell, modes, nx=65, ny=33,
    forcing_minus="0", forcing_plus="0",
    phi1_minus="0", phi2_minus="0", phi1_plus="0", phi2_plus="0",
))]
#[allow(clippy::too_many_arguments)]
fn solve_field<'py>(
    py: Python<'py>,
    coeffs: &PyCoefficientSet,
    a: f64,
    gamma: f64,
    b: f64,
    ell: f64,
    modes: usize,
    nx: usize,
    ny: usize,
    forcing_minus: &str,
    forcing_plus: &str,
    phi1_minus: &str,
    phi2_minus: &str,
    phi1_plus: &str,
    phi2_plus: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let geometry = FieldGeometry::new(a, gamma, b, ell, modes, nx, ny).map_err(value_err)?;
    let data = FieldData {
        g_minus: expr_source(forcing_minus)?,
        g_plus: expr_source(forcing_plus)?,
        phi1_minus: expr_trace(phi1_minus, a)?,
        phi2_minus: expr_trace(phi2_minus, a)?,
        phi1_plus: expr_trace(phi1_plus, b)?,
        phi2_plus: expr_trace(phi2_plus, b)?,
    };
    let c = coeffs.inner;
    let field = py
        .detach(move || tfield::solve_field(&c, &geometry, &data, &FieldOptions::default()))
        .map_err(runtime_err)?;
    let report = interface_report(&field);
    let d = PyDict::new(py);
    d.set_item("x", field.x.clone())?;
    d.set_item("y", field.y.clone())?;
    d.set_item("u", field.values.clone())?;
    d.set_item("max_pde_residual", report.max_pde_residual)?;
    d.set_item("max_interface_residual", report.max_interface())?;
    d.set_item("max_boundary_residual", report.max_boundary())?;
    Ok(d)
}

/// Parses a configuration and returns its normalized text.
#[pyfunction]
fn normalize_config(text: &str) -> PyResult<String> {
    cli::parse_config(text)
        .map(|c| c.to_config_string())
        .map_err(value_err)
}

/// Normalized text of the mirrored configuration.
#[pyfunction]
fn mirror_config(text: &str) -> PyResult<String> {
    cli::parse_config(text)
        .map(|c| c.mirrored().to_config_string())
        .map_err(value_err)
}

/// Runs a configuration as the CLI would; returns
/// `(exit_code, summary_lines, written_files)`.
#[pyfunction]
#[pyo3(signature = (text, out, force=false, seed=0))]
fn run_config(
    py: Python<'_>,
    text: &str,
    out: PathBuf,
    force: bool,
    seed: u64,
) -> PyResult<(i32, Vec<String>, Vec<PathBuf>)> {
    let config = cli::parse_config(text).map_err(value_err)?;
    let opts = RunOptions {
        out,
        force,
        seed,
        quiet: true,
    };
    match py.detach(move || cli::run(&config, &opts)) {
        Ok(o) => Ok((o.status.code(), o.summary, o.files)),
        Err(e) => Ok((e.status().code(), vec![e.to_string()], Vec::new())),
    }
}

#[pymodule]
fn transmission_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCoefficientSet>()?;
    m.add_class::<PyModeProblem>()?;
    m.add_class::<PyModeSolution>()?;
    m.add_function(wrap_pyfunction!(symbol, m)?)?;
    m.add_function(wrap_pyfunction!(b_symbols, m)?)?;
    m.add_function(wrap_pyfunction!(det_symbol, m)?)?;
    m.add_function(wrap_pyfunction!(factorization_residual, m)?)?;
    m.add_function(wrap_pyfunction!(factorization_kinds, m)?)?;
    m.add_function(wrap_pyfunction!(sign_scan, m)?)?;
    m.add_function(wrap_pyfunction!(check_admissibility, m)?)?;
    m.add_function(wrap_pyfunction!(solve_mode, m)?)?;
    m.add_function(wrap_pyfunction!(psi_via_reduced_system, m)?)?;
    m.add_function(wrap_pyfunction!(fd_compare, m)?)?;
    m.add_function(wrap_pyfunction!(solve_field, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_config, m)?)?;
    m.add_function(wrap_pyfunction!(mirror_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
