//! Execution of a parsed configuration: one artifact set per run mode.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use super::config::{RunConfig, RunMode};
use super::expr::Expr;
use crate::field::{self, interface_report, FieldData, FieldOptions, Geometry, Source, Trace};
use crate::mode_solver::{self, ModeProblem, RouteCase, Side};
use crate::oracle;
use crate::quadrature::Quadrature;
use crate::regime::{check_admissibility, classify, CaseLabel, RegimeReport, SpectrumInfo};
use crate::symbols::{
    factorization_residual, sign_scan, FactorizationKind, ScanRanges, SymbolError,
};

/// Process exit status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    /// A tolerance was violated or the regime is not admissible.
    Violation = 1,
    /// Configuration or usage error.
    Usage = 2,
    /// Numerical or module failure.
    Numerical = 3,
    /// A solve in a non-admissible regime was refused without `--force`.
    Refused = 4,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("[{module}] {message}")]
    Module {
        module: &'static str,
        message: String,
    },
    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
    #[error("refusing to solve: {0}")]
    Refused(String),
}

impl RunError {
    pub fn status(&self) -> ExitStatus {
        match self {
            RunError::Config(_) => ExitStatus::Usage,
            RunError::Module { .. } | RunError::Io(_) => ExitStatus::Numerical,
            RunError::Refused(_) => ExitStatus::Refused,
        }
    }

    fn module(module: &'static str, e: impl std::fmt::Display) -> Self {
        RunError::Module {
            module,
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOptions {
    pub out: PathBuf,
    pub force: bool,
    pub seed: u64,
    pub quiet: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            out: PathBuf::from("out"),
            force: false,
            seed: 0,
            quiet: false,
        }
    }
}

/// Status, human-readable summary and written files of a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutcome {
    pub status: ExitStatus,
    pub summary: Vec<String>,
    pub files: Vec<PathBuf>,
}

/// Formats a float with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

struct Artifacts {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Artifacts {
    fn new(dir: &Path) -> Result<Self, RunError> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> Result<(), RunError> {
        let path = self.dir.join(name);
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)
            .map_err(|e| RunError::Io(e.into()))?;
        w.write_record(header).map_err(|e| RunError::Io(e.into()))?;
        for row in rows {
            w.write_record(&row).map_err(|e| RunError::Io(e.into()))?;
        }
        w.flush()?;
        self.files.push(path);
        Ok(())
    }

    fn text(&mut self, name: &str, content: &str) -> Result<(), RunError> {
        let path = self.dir.join(name);
        fs::write(&path, content)?;
        self.files.push(path);
        Ok(())
    }
}

/// Runs the configured mode and writes its artifacts below `opts.out`.
pub fn run(config: &RunConfig, opts: &RunOptions) -> Result<RunOutcome, RunError> {
    let mut art = Artifacts::new(&opts.out)?;
    let (status, summary) = match config.mode {
        RunMode::Check => run_check(config, &mut art)?,
        RunMode::Scan => run_scan(config, opts, &mut art)?,
        RunMode::Identities => run_identities(config, &mut art)?,
        RunMode::SolveMode => run_solve_mode(config, opts, &mut art)?,
        RunMode::Solve => run_solve(config, opts, &mut art)?,
        RunMode::Verify => run_verify(config, opts, &mut art)?,
    };
    Ok(RunOutcome {
        status,
        summary,
        files: art.files,
    })
}

fn verdict(ok: bool) -> ExitStatus {
    if ok {
        ExitStatus::Success
    } else {
        ExitStatus::Violation
    }
}

fn regime_report(config: &RunConfig) -> Result<RegimeReport, RunError> {
    let spectrum =
        SpectrumInfo::sine(config.geometry.ell).map_err(|e| RunError::Config(e.to_string()))?;
    check_admissibility(&config.coefficients, &spectrum, config.numerics.t)
        .map_err(|e| RunError::Config(e.to_string()))
}

fn run_check(
    config: &RunConfig,
    art: &mut Artifacts,
) -> Result<(ExitStatus, Vec<String>), RunError> {
    let report = regime_report(config)?;
    art.text("check.txt", &report.text())?;
    let kv: String = report
        .key_values()
        .iter()
        .map(|(k, v)| format!("{k}={v}\n"))
        .collect();
    art.text("check.kv", &kv)?;
    let summary = vec![format!(
        "case {}: admissible = {}",
        report.case_label, report.admissible
    )];
    Ok((verdict(report.admissible), summary))
}

fn run_scan(
    config: &RunConfig,
    opts: &RunOptions,
    art: &mut Artifacts,
) -> Result<(ExitStatus, Vec<String>), RunError> {
    let ranges = ScanRanges::default();
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    let mut ok = true;
    for symbol in config.numerics.scan_symbol.symbols() {
        let report = sign_scan(symbol, &ranges, config.numerics.samples, opts.seed);
        for s in &report.samples {
            rows.push(vec![
                symbol.name().to_string(),
                fmt17(s.delta),
                fmt17(s.r),
                fmt17(s.x),
                fmt17(s.value),
                (s.violation as u8).to_string(),
            ]);
        }
        ok &= report.violations == 0;
        summary.push(format!(
            "{}: {} samples, {} violations ({} evaluation errors), range [{:.6e}, {:.6e}]",
            symbol.name(),
            report.samples.len(),
            report.violations,
            report.errors,
            report.min,
            report.max
        ));
    }
    art.csv(
        "scan.csv",
        &["symbol", "delta", "r", "x", "value", "violation"],
        rows,
    )?;
    Ok((verdict(ok), summary))
}

fn run_identities(
    config: &RunConfig,
    art: &mut Artifacts,
) -> Result<(ExitStatus, Vec<String>), RunError> {
    let g = &config.geometry;
    let (c, d) = (g.gamma - g.a, g.b - g.gamma);
    let tol = config.numerics.identity_tol;
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for kind in FactorizationKind::ALL {
        for k in 1..=g.modes {
            let x = (k as f64 * std::f64::consts::PI / g.ell).powi(2);
            let residual = match factorization_residual(kind, &config.coefficients, c, d, x) {
                Ok(r) => r,
                Err(SymbolError::WrongCase(_)) => break,
                Err(_) => f64::NAN,
            };
            if !(residual <= tol) {
                failures += 1;
            }
            worst = worst.max(residual);
            rows.push(vec![kind.name().to_string(), fmt17(x), fmt17(residual)]);
        }
    }
    art.csv("identities.csv", &["kind", "x", "residual"], rows)?;
    let summary = vec![format!(
        "max residual {worst:.3e} (tolerance {tol:.1e}), {failures} above tolerance"
    )];
    Ok((verdict(failures == 0), summary))
}

fn check_data(key: &str, e: &Expr, xs: (f64, f64), ys: (f64, f64)) -> Result<(), RunError> {
    const N: usize = 17;
    for i in 0..N {
        for j in 0..N {
            let x = xs.0 + (xs.1 - xs.0) * i as f64 / (N - 1) as f64;
            let y = ys.0 + (ys.1 - ys.0) * j as f64 / (N - 1) as f64;
            e.eval(x, y)
                .map_err(|err| RunError::Config(format!("data.{key} at (x={x}, y={y}): {err}")))?;
        }
    }
    Ok(())
}

fn source(e: &Expr) -> Source {
    let e = e.clone();
    Arc::new(move |x, y| e.eval(x, y).unwrap_or(f64::NAN))
}

fn trace(e: &Expr, x: f64) -> Trace {
    let e = e.clone();
    Arc::new(move |y| e.eval(x, y).unwrap_or(f64::NAN))
}

/// Validated field inputs of a configuration.
pub fn field_inputs(config: &RunConfig) -> Result<(Geometry, FieldData, FieldOptions), RunError> {
    let g = &config.geometry;
    let geometry = Geometry::new(g.a, g.gamma, g.b, g.ell, g.modes, g.nx, g.ny)
        .map_err(|e| RunError::Config(e.to_string()))?;
    let d = &config.data;
    let ys = (0.0, g.ell);
    check_data("forcing_minus", &d.forcing_minus, (g.a, g.gamma), ys)?;
    check_data("forcing_plus", &d.forcing_plus, (g.gamma, g.b), ys)?;
    check_data("phi1_minus", &d.phi1_minus, (g.a, g.a), ys)?;
    check_data("phi2_minus", &d.phi2_minus, (g.a, g.a), ys)?;
    check_data("phi1_plus", &d.phi1_plus, (g.b, g.b), ys)?;
    check_data("phi2_plus", &d.phi2_plus, (g.b, g.b), ys)?;
    let data = FieldData {
        g_minus: source(&d.forcing_minus),
        g_plus: source(&d.forcing_plus),
        phi1_minus: trace(&d.phi1_minus, g.a),
        phi2_minus: trace(&d.phi2_minus, g.a),
        phi1_plus: trace(&d.phi1_plus, g.b),
        phi2_plus: trace(&d.phi2_plus, g.b),
    };
    let q = Quadrature {
        panels: config.numerics.panels,
        nodes: config.numerics.nodes,
    };
    let options = FieldOptions {
        x_quadrature: q,
        y_quadrature: q,
    };
    Ok((geometry, data, options))
}

/// Refuses non-admissible regimes unless forced; returns a note otherwise.
fn gate(config: &RunConfig, opts: &RunOptions) -> Result<Vec<String>, RunError> {
    let report = regime_report(config)?;
    if report.admissible {
        return Ok(vec![format!("case {}: admissible", report.case_label)]);
    }
    if !opts.force {
        return Err(RunError::Refused(format!(
            "case {} is not covered by the admissibility conditions (use --force to solve anyway)",
            report.case_label
        )));
    }
    Ok(vec![format!(
        "case {}: not admissible, solving because of --force",
        report.case_label
    )])
}

fn selected_mode(config: &RunConfig) -> Result<ModeProblem, RunError> {
    let (geometry, data, options) = field_inputs(config)?;
    let mut problems = field::mode_problems(&config.coefficients, &geometry, &data, &options)
        .map_err(|e| RunError::module("field", e))?;
    Ok(problems.swap_remove(config.numerics.mode_index - 1))
}

fn run_solve_mode(
    config: &RunConfig,
    opts: &RunOptions,
    art: &mut Artifacts,
) -> Result<(ExitStatus, Vec<String>), RunError> {
    let mut summary = gate(config, opts)?;
    let mp = selected_mode(config)?;
    let ms = mode_solver::solve_mode(&mp).map_err(|e| RunError::module("mode_solver", e))?;
    let n = config.geometry.nx;
    let mut rows = Vec::new();
    let mut worst_ode: f64 = 0.0;
    for (side, lo, hi) in [(Side::Minus, mp.a, mp.gamma), (Side::Plus, mp.gamma, mp.b)] {
        for i in 0..n {
            let x = if i + 1 == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            };
            let j = ms.eval(side, x);
            let res = ms.ode_residual(side, x);
            if !j[0].is_finite() {
                return Err(RunError::module("mode_solver", "non-finite solution value"));
            }
            worst_ode = worst_ode.max(res);
            let name = if side == Side::Minus { "minus" } else { "plus" };
            rows.push(vec![
                fmt17(x),
                name.to_string(),
                fmt17(j[0]),
                fmt17(j[1]),
                fmt17(j[2]),
                fmt17(j[3]),
                fmt17(res),
            ]);
        }
    }
    art.csv(
        "solve_mode.csv",
        &["x", "side", "u", "u_x", "u_xx", "u_xxx", "ode_residual"],
        rows,
    )?;
    const NAMES: [&str; 8] = [
        "u-(a)", "u-'(a)", "u+(b)", "u+'(b)", "TC1a", "TC1b", "TC2a", "TC2b",
    ];
    let cond = ms.condition_residuals();
    art.csv(
        "solve_mode_conditions.csv",
        &["condition", "residual"],
        NAMES
            .iter()
            .zip(cond)
            .map(|(n, r)| vec![n.to_string(), fmt17(r)]),
    )?;
    let worst_cond = cond.iter().fold(0.0f64, |m, v| m.max(*v));
    let tol = config.numerics.tol;
    summary.push(format!(
        "mode {} (lambda = {:.6e}): rcond {:.3e}, max ODE residual {:.3e}, max condition residual {:.3e}",
        config.numerics.mode_index, mp.lambda, ms.rcond, worst_ode, worst_cond
    ));
    Ok((verdict(worst_ode <= tol && worst_cond <= tol), summary))
}

fn run_solve(
    config: &RunConfig,
    opts: &RunOptions,
    art: &mut Artifacts,
) -> Result<(ExitStatus, Vec<String>), RunError> {
    let mut summary = gate(config, opts)?;
    let (geometry, data, options) = field_inputs(config)?;
    let f = field::solve_field(&config.coefficients, &geometry, &data, &options)
        .map_err(|e| RunError::module("field", e))?;
    if f.values.iter().flatten().any(|v| !v.is_finite()) {
        return Err(RunError::module("field", "non-finite solution values"));
    }
    let mut rows = Vec::with_capacity(f.x.len() * f.y.len());
    for (i, x) in f.x.iter().enumerate() {
        for (j, y) in f.y.iter().enumerate() {
            rows.push(vec![
                fmt17(*x),
                fmt17(*y),
                fmt17(f.values[i][j]),
                fmt17(f.pde_residual[i][j]),
            ]);
        }
    }
    art.csv("solution.csv", &["x", "y", "u", "pde_residual"], rows)?;
    let rep = interface_report(&f);
    let rows = rep
        .interface
        .iter()
        .chain(&rep.boundary)
        .map(|r| vec![r.name.to_string(), fmt17(r.max), fmt17(r.l2)]);
    art.csv("interface.csv", &["condition", "max", "l2"], rows)?;
    let tol = config.numerics.tol;
    summary.push(format!(
        "{} modes: max PDE residual {:.3e}, max interface residual {:.3e}, max boundary residual {:.3e}",
        f.modes.len(),
        rep.max_pde_residual,
        rep.max_interface(),
        rep.max_boundary()
    ));
    let ok = rep.max_pde_residual <= tol && rep.max_interface() <= tol && rep.max_boundary() <= tol;
    Ok((verdict(ok), summary))
}

/// Accepted range of the observed finite-difference order.
pub const ORDER_RANGE: (f64, f64) = (1.7, 2.3);
/// Accepted relative discrepancy of the extrapolated finite-difference solution.
pub const EXTRAPOLATION_TOL: f64 = 1e-6;
/// Mode solutions below this magnitude are treated as zero by `verify`.
pub const TRIVIAL_SOLUTION: f64 = 1e-12;

fn run_verify(
    config: &RunConfig,
    opts: &RunOptions,
    art: &mut Artifacts,
) -> Result<(ExitStatus, Vec<String>), RunError> {
    let mut summary = gate(config, opts)?;
    let mp = selected_mode(config)?;
    let ms = mode_solver::solve_mode(&mp).map_err(|e| RunError::module("mode_solver", e))?;
    let cmp = oracle::compare(&ms, &mp, config.numerics.fd_h)
        .map_err(|e| RunError::module("oracle", e))?;
    let rows = (0..3).map(|i| {
        let order = if i == 0 {
            f64::NAN
        } else {
            (cmp.errors[i - 1].max_err / cmp.errors[i].max_err).log2()
        };
        vec![
            fmt17(cmp.h[i]),
            fmt17(cmp.errors[i].max_err),
            fmt17(cmp.errors[i].l2_err),
            fmt17(order),
        ]
    });
    art.csv(
        "verify.csv",
        &["h", "max_err", "l2_err", "observed_order"],
        rows,
    )?;
    // Solutions at roundoff level (e.g. a mode the data does not excite)
    // carry no convergence information.
    let trivial = cmp.errors[0].max_abs <= TRIVIAL_SOLUTION;
    let order_ok = trivial || (ORDER_RANGE.0..=ORDER_RANGE.1).contains(&cmp.observed_order);
    let extrap_ok = trivial || cmp.extrapolated_rel_err <= EXTRAPOLATION_TOL;
    summary.push(format!(
        "finite differences: observed order {:.4}, extrapolated relative discrepancy {:.3e}",
        cmp.observed_order, cmp.extrapolated_rel_err
    ));

    // Cross-check of the interface traces against the reduced 2x2 system.
    let route = match classify(&config.coefficients) {
        CaseLabel::BothNonzero(..) => Some(RouteCase::BothNonzero),
        CaseLabel::RminusZero => Some(RouteCase::MinusZero),
        _ => None,
    };
    let mut route_ok = true;
    if let Some(case) = route {
        let psi = mode_solver::psi_via_reduced_system(case, &mp)
            .map_err(|e| RunError::module("mode_solver", e))?;
        let trace = ms.eval(Side::Minus, mp.gamma);
        let d1 = (psi.psi1 - trace[0]).abs() / (1.0 + trace[0].abs());
        let d2 = (psi.psi2 - trace[1]).abs() / (1.0 + trace[1].abs());
        route_ok = d1 <= EXTRAPOLATION_TOL && d2 <= EXTRAPOLATION_TOL;
        art.csv(
            "verify_route.csv",
            &[
                "quantity",
                "reduced_system",
                "direct_solve",
                "relative_difference",
            ],
            [
                vec![
                    "u(gamma)".into(),
                    fmt17(psi.psi1),
                    fmt17(trace[0]),
                    fmt17(d1),
                ],
                vec![
                    "u_x(gamma)".into(),
                    fmt17(psi.psi2),
                    fmt17(trace[1]),
                    fmt17(d2),
                ],
            ],
        )?;
        summary.push(format!(
            "reduced 2x2 system: relative differences {d1:.3e}, {d2:.3e}"
        ));
    }
    Ok((verdict(order_ok && extrap_ok && route_ok), summary))
}
