//! Two-dimensional problems on `(a, b) x (0, ell)` by sine-mode reduction.
//!
//! Forcing and boundary data are projected on `sin(k pi y / ell)`, each mode
//! is solved independently, and the field is reconstructed by an ascending
//! sum over modes. Residuals of the equation, the boundary conditions and
//! the four interface conditions are assembled from the mode evaluators.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::mode_solver::{
    solve_mode, transmission_rows, Forcing, ModeProblem, ModeSolution, Side, SolveError,
};
use crate::quadrature::{composite_rule, gauss_legendre, Quadrature};
use crate::symbols::CoefficientSet;

/// Function of `(x, y)`.
pub type Source = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
/// Function of `y` on the cross-section.
pub type Trace = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("first eigenvalue {lambda_1} does not exceed max(-r+, -r-, 0) = {bound}")]
    Spectral { lambda_1: f64, bound: f64 },
    #[error("mode {index}: {source}")]
    Mode {
        index: usize,
        #[source]
        source: SolveError,
    },
}

pub type Result<T> = std::result::Result<T, FieldError>;

/// Rectangle, mode count and evaluation grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub a: f64,
    pub gamma: f64,
    pub b: f64,
    pub ell: f64,
    /// Number of sine modes.
    pub modes: usize,
    pub nx: usize,
    pub ny: usize,
}

impl Geometry {
    pub fn new(
        a: f64,
        gamma: f64,
        b: f64,
        ell: f64,
        modes: usize,
        nx: usize,
        ny: usize,
    ) -> Result<Self> {
        let g = Self {
            a,
            gamma,
            b,
            ell,
            modes,
            nx,
            ny,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.a < self.gamma) {
            problems.push("a < gamma violated");
        }
        if !(self.gamma < self.b) {
            problems.push("gamma < b violated");
        }
        if !(self.ell > 0.0 && self.ell.is_finite()) {
            problems.push("ell > 0 violated");
        }
        if self.modes < 1 {
            problems.push("K >= 1 violated");
        }
        if self.nx < 2 || self.ny < 2 {
            problems.push("grid needs at least 2 points per direction");
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(FieldError::Geometry(problems.join("; ")))
        }
    }

    /// `lambda_k = (k pi / ell)^2`, `k >= 1`.
    pub fn lambda(&self, k: usize) -> f64 {
        let w = k as f64 * PI / self.ell;
        w * w
    }

    /// `sin(k pi y / ell)`.
    pub fn sine(&self, k: usize, y: f64) -> f64 {
        (k as f64 * PI * y / self.ell).sin()
    }

    pub fn x_grid(&self) -> Vec<f64> {
        uniform(self.a, self.b, self.nx)
    }

    pub fn y_grid(&self) -> Vec<f64> {
        uniform(0.0, self.ell, self.ny)
    }
}

fn uniform(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Forcing on each strip and the four boundary traces.
#[derive(Clone)]
pub struct FieldData {
    pub g_minus: Source,
    pub g_plus: Source,
    /// `u(a, y)`.
    pub phi1_minus: Trace,
    /// `du/dx(a, y)`.
    pub phi2_minus: Trace,
    /// `u(b, y)`.
    pub phi1_plus: Trace,
    /// `du/dx(b, y)`.
    pub phi2_plus: Trace,
}

impl FieldData {
    pub fn zero() -> Self {
        let s: Source = Arc::new(|_, _| 0.0);
        let t: Trace = Arc::new(|_| 0.0);
        Self {
            g_minus: s.clone(),
            g_plus: s,
            phi1_minus: t.clone(),
            phi2_minus: t.clone(),
            phi1_plus: t.clone(),
            phi2_plus: t,
        }
    }
}

impl std::fmt::Debug for FieldData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("FieldData(..)")
    }
}

/// Quadrature settings of a field solve.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldOptions {
    /// Rule for the particular solutions in `x`.
    pub x_quadrature: Quadrature,
    /// Rule for the sine projections in `y`.
    pub y_quadrature: Quadrature,
}

/// Projection weights `(2/ell) w_j sin(k pi y_j / ell) / scale` for modes
/// `1..=modes` at the nodes `y_j`.
struct Projector {
    nodes: Vec<f64>,
    weights: Vec<Vec<f64>>,
}

impl Projector {
    fn new(geometry: &Geometry, quadrature: Quadrature, scale: f64) -> Self {
        let rule = gauss_legendre(quadrature.nodes.max(1));
        let pts = composite_rule(0.0, geometry.ell, quadrature.panels.max(1), &rule);
        let nodes = pts.iter().map(|p| p.0).collect();
        let weights = (1..=geometry.modes)
            .map(|k| {
                pts.iter()
                    .map(|&(y, w)| 2.0 / geometry.ell * w * geometry.sine(k, y) / scale)
                    .collect()
            })
            .collect();
        Self { nodes, weights }
    }

    fn trace(&self, f: &Trace) -> Vec<f64> {
        let vals: Vec<f64> = self.nodes.iter().map(|&y| f(y)).collect();
        self.weights
            .iter()
            .map(|w| w.iter().zip(&vals).map(|(w, v)| w * v).sum())
            .collect()
    }
}

/// Mode forcings `f_k(x) = (2/ell) int_0^ell g(x, y) / k_side sin(k pi y / ell) dy`
/// for `k = 1..=modes`.
pub fn project(
    g: &Source,
    geometry: &Geometry,
    k_side: f64,
    quadrature: Quadrature,
) -> Vec<Forcing> {
    let projector = Arc::new(Projector::new(geometry, quadrature, k_side));
    (0..geometry.modes)
        .map(|idx| {
            let p = projector.clone();
            let g = g.clone();
            Forcing::function(move |x| {
                p.weights[idx]
                    .iter()
                    .zip(&p.nodes)
                    .map(|(w, &y)| w * g(x, y))
                    .sum()
            })
        })
        .collect()
}

/// Sine coefficients `(2/ell) int_0^ell phi(y) sin(k pi y / ell) dy`.
pub fn project_trace(phi: &Trace, geometry: &Geometry, quadrature: Quadrature) -> Vec<f64> {
    Projector::new(geometry, quadrature, 1.0).trace(phi)
}

/// Builds the mode problems of a field solve (index `k - 1`).
pub fn mode_problems(
    coeffs: &CoefficientSet,
    geometry: &Geometry,
    data: &FieldData,
    options: &FieldOptions,
) -> Result<Vec<ModeProblem>> {
    geometry.validate()?;
    let bound = coeffs.r_max();
    let lambda_1 = geometry.lambda(1);
    if !(lambda_1 > bound) {
        return Err(FieldError::Spectral { lambda_1, bound });
    }
    let fm = project(
        &data.g_minus,
        geometry,
        coeffs.k_minus,
        options.y_quadrature,
    );
    let fp = project(&data.g_plus, geometry, coeffs.k_plus, options.y_quadrature);
    let projector = Projector::new(geometry, options.y_quadrature, 1.0);
    let p1m = projector.trace(&data.phi1_minus);
    let p2m = projector.trace(&data.phi2_minus);
    let p1p = projector.trace(&data.phi1_plus);
    let p2p = projector.trace(&data.phi2_plus);
    Ok((0..geometry.modes)
        .map(|i| {
            let mut mp = ModeProblem::new(
                geometry.lambda(i + 1),
                *coeffs,
                geometry.a,
                geometry.gamma,
                geometry.b,
            );
            mp.f_minus = fm[i].clone();
            mp.f_plus = fp[i].clone();
            mp.phi_minus = [p1m[i], p2m[i]];
            mp.phi_plus = [p1p[i], p2p[i]];
            mp.quadrature = options.x_quadrature;
            mp
        })
        .collect())
}

/// Names of the four interface conditions, in row order.
pub const INTERFACE_ROWS: [&str; 4] = [
    "u- = u+",
    "du-/dx = du+/dx",
    "k- lap u- = k+ lap u+",
    "d/dx(k- lap u- - l- u-) = d/dx(k+ lap u+ - l+ u+)",
];

/// Names of the boundary conditions, in the order of
/// [`SolutionField::boundary_residuals`].
pub const BOUNDARY_ROWS: [&str; 6] = [
    "u(a,y) = phi1-",
    "du/dx(a,y) = phi2-",
    "u(b,y) = phi1+",
    "du/dx(b,y) = phi2+",
    "u(x,0) = 0",
    "u(x,ell) = 0",
];

/// Reconstructed solution and residual fields.
#[derive(Debug, Clone)]
pub struct SolutionField {
    pub geometry: Geometry,
    pub coeffs: CoefficientSet,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `values[i][j] = u(x_i, y_j)`.
    pub values: Vec<Vec<f64>>,
    pub modes: Vec<ModeSolution>,
    /// Relative equation residual on the grid.
    pub pde_residual: Vec<Vec<f64>>,
    /// Relative residual of each interface row at `(gamma, y_j)`.
    pub interface_residuals: [Vec<f64>; 4],
    /// Residual of each boundary row. Rows on `x = a, b` are indexed by
    /// `y_j`; rows on `y = 0, ell` by `x_i`.
    pub boundary_residuals: [Vec<f64>; 6],
}

/// Solves every mode (in parallel) and reconstructs the field.
pub fn solve_field(
    coeffs: &CoefficientSet,
    geometry: &Geometry,
    data: &FieldData,
    options: &FieldOptions,
) -> Result<SolutionField> {
    let problems = mode_problems(coeffs, geometry, data, options)?;
    let modes = problems
        .par_iter()
        .enumerate()
        .map(|(i, mp)| {
            solve_mode(mp).map_err(|source| FieldError::Mode {
                index: i + 1,
                source,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble_field(*coeffs, *geometry, modes))
}

/// Reconstructs values and residuals from solved modes (mode `k` at index
/// `k - 1`).
pub fn assemble_field(
    coeffs: CoefficientSet,
    geometry: Geometry,
    modes: Vec<ModeSolution>,
) -> SolutionField {
    let x = geometry.x_grid();
    let y = geometry.y_grid();
    let sines: Vec<Vec<f64>> = y
        .iter()
        .map(|&yj| (1..=modes.len()).map(|k| geometry.sine(k, yj)).collect())
        .collect();

    // Per-x mode quantities are computed once, then reduced in ascending k.
    let rows: Vec<(Vec<f64>, Vec<f64>)> = x
        .par_iter()
        .map(|&xi| {
            let side = if xi < geometry.gamma {
                Side::Minus
            } else {
                Side::Plus
            };
            let r = match side {
                Side::Minus => coeffs.r_minus(),
                Side::Plus => coeffs.r_plus(),
            };
            let mut u = Vec::with_capacity(modes.len());
            let mut res = Vec::with_capacity(2 * modes.len());
            for ms in &modes {
                let jet = ms.eval(side, xi);
                let lam = ms.lambda;
                let f = match side {
                    Side::Minus => ms.f_minus.eval(xi),
                    Side::Plus => ms.f_plus.eval(xi),
                };
                let terms = [
                    jet[4],
                    -(2.0 * lam + r) * jet[2],
                    lam * (lam + r) * jet[0],
                    -f,
                ];
                u.push(jet[0]);
                res.push(terms.iter().sum::<f64>());
                res.push(terms.iter().map(|t| t.abs()).sum::<f64>());
            }
            (u, res)
        })
        .collect();

    let mut values = vec![vec![0.0; y.len()]; x.len()];
    let mut pde_residual = vec![vec![0.0; y.len()]; x.len()];
    for (i, (u, res)) in rows.iter().enumerate() {
        for (j, s) in sines.iter().enumerate() {
            let mut acc = 0.0;
            let (mut r, mut scale) = (0.0, 0.0);
            for k in 0..modes.len() {
                acc += u[k] * s[k];
                r += res[2 * k] * s[k];
                scale += res[2 * k + 1] * s[k].abs();
            }
            values[i][j] = acc;
            pde_residual[i][j] = r.abs() / scale.max(1.0);
        }
    }

    // Interface rows from one-sided evaluators at gamma.
    let iface: Vec<[[f64; 6]; 4]> = modes
        .iter()
        .map(|ms| {
            let gm = ms.eval(Side::Minus, geometry.gamma);
            let gp = ms.eval(Side::Plus, geometry.gamma);
            transmission_rows(&coeffs, ms.lambda, &gm, &gp)
        })
        .collect();
    let interface_residuals: [Vec<f64>; 4] = std::array::from_fn(|row| {
        sines
            .iter()
            .map(|s| {
                let (mut r, mut scale) = (0.0, 0.0);
                for (k, terms) in iface.iter().enumerate() {
                    r += terms[row].iter().sum::<f64>() * s[k];
                    scale += terms[row].iter().map(|t| t.abs()).sum::<f64>() * s[k].abs();
                }
                r.abs() / scale.max(1.0)
            })
            .collect()
    });

    // Boundary rows: mode-level mismatches on x = a, b; values on y = 0, ell.
    let ends: Vec<[[f64; 2]; 4]> = modes
        .iter()
        .map(|ms| {
            let ja = ms.eval(Side::Minus, ms.a);
            let jb = ms.eval(Side::Plus, ms.b);
            [
                [ja[0], -ms.phi_minus[0]],
                [ja[1], -ms.phi_minus[1]],
                [jb[0], -ms.phi_plus[0]],
                [jb[1], -ms.phi_plus[1]],
            ]
        })
        .collect();
    let mut boundary_residuals: [Vec<f64>; 6] = Default::default();
    for row in 0..4 {
        boundary_residuals[row] = sines
            .iter()
            .map(|s| {
                let (mut r, mut scale) = (0.0, 0.0);
                for (k, e) in ends.iter().enumerate() {
                    r += (e[row][0] + e[row][1]) * s[k];
                    scale += (e[row][0].abs() + e[row][1].abs()) * s[k].abs();
                }
                r.abs() / scale.max(1.0)
            })
            .collect();
    }
    boundary_residuals[4] = values.iter().map(|v| v[0].abs()).collect();
    boundary_residuals[5] = values.iter().map(|v| v[y.len() - 1].abs()).collect();

    SolutionField {
        geometry,
        coeffs,
        x,
        y,
        values,
        modes,
        pde_residual,
        interface_residuals,
        boundary_residuals,
    }
}

impl SolutionField {
    /// `u(x, y)` from the mode evaluators (ascending `k`).
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.modes
            .iter()
            .enumerate()
            .map(|(i, ms)| ms.value(x) * self.geometry.sine(i + 1, y))
            .fold(0.0, |acc, v| acc + v)
    }

    pub fn max_pde_residual(&self) -> f64 {
        self.pde_residual
            .iter()
            .flatten()
            .fold(0.0, |m, v| m.max(*v))
    }

    pub fn max_boundary_residual(&self) -> f64 {
        self.boundary_residuals
            .iter()
            .flatten()
            .fold(0.0, |m, v| m.max(*v))
    }
}

/// Max and L2-over-`y` norm of one residual row.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSummary {
    pub name: &'static str,
    pub max: f64,
    pub l2: f64,
}

/// Summary of the interface and boundary residuals of a field.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceReport {
    pub interface: Vec<ResidualSummary>,
    pub boundary: Vec<ResidualSummary>,
    pub max_pde_residual: f64,
}

impl InterfaceReport {
    pub fn max_interface(&self) -> f64 {
        self.interface.iter().fold(0.0, |m, r| m.max(r.max))
    }

    pub fn max_boundary(&self) -> f64 {
        self.boundary.iter().fold(0.0, |m, r| m.max(r.max))
    }
}

fn summarize(name: &'static str, values: &[f64], grid: &[f64]) -> ResidualSummary {
    let max = values.iter().fold(0.0f64, |m, v| m.max(*v));
    let mut l2 = 0.0;
    for i in 1..values.len() {
        let h = grid[i] - grid[i - 1];
        l2 += 0.5 * h * (values[i] * values[i] + values[i - 1] * values[i - 1]);
    }
    ResidualSummary {
        name,
        max,
        l2: l2.sqrt(),
    }
}

pub fn interface_report(field: &SolutionField) -> InterfaceReport {
    let interface = INTERFACE_ROWS
        .iter()
        .zip(&field.interface_residuals)
        .map(|(name, v)| summarize(name, v, &field.y))
        .collect();
    let boundary = BOUNDARY_ROWS
        .iter()
        .zip(&field.boundary_residuals)
        .enumerate()
        .map(|(i, (name, v))| summarize(name, v, if i < 4 { &field.y } else { &field.x }))
        .collect();
    InterfaceReport {
        interface,
        boundary,
        max_pde_residual: field.max_pde_residual(),
    }
}
