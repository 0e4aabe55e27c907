//! Per-mode two-interval fourth-order transmission problem.
//!
//! For one eigenvalue `lambda` of the cross-section operator, each strip
//! carries the ODE
//!
//! ```text
//! u'''' - (2 lambda + r) u'' + lambda (lambda + r) u = f
//! ```
//!
//! whose characteristic roots are `±sqrt(lambda)` and `±sqrt(lambda + r)`.
//! The solution on each strip is a particular solution plus four scaled
//! exponentials; the eight weights follow from two clamped conditions at
//! each outer end and four transmission conditions at `gamma`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix2, SMatrix, SVector, Vector2};
use thiserror::Error;

use crate::quadrature::{composite_rule, gauss_legendre, Quadrature};
use crate::regime::{classify, CaseLabel, Mirror};
use crate::symbols::{
    pq_scalar, uv_symbol, CoefficientSet, PqOperator, SymbolArgs, SymbolError, UvBranch,
};

/// Roots closer than this (relative) use the polynomial-augmented basis.
pub const DEGENERATE_ROOTS: f64 = 1e-9;
/// Reciprocal condition numbers below this are treated as singular.
pub const RCOND_MIN: f64 = 1e-13;
/// Collocation points per interval for the post-solve residual check.
pub const COLLOCATION_POINTS: usize = 65;
/// Relative tolerance of the post-solve residual checks.
pub const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("lambda = {lambda} must exceed max(-r, 0) = {bound}")]
    Spectral { lambda: f64, bound: f64 },
    #[error("interval ordering a < gamma < b violated ({a}, {gamma}, {b})")]
    Geometry { a: f64, gamma: f64, b: f64 },
    #[error("near-singular {size}x{size} system (rcond = {rcond:.3e})")]
    NearSingular { size: usize, rcond: f64 },
    #[error("quadrature did not converge (halving change {change:.3e})")]
    Quadrature { change: f64 },
    #[error("determinant {det:.3e} is numerically zero (scale {scale:.3e})")]
    VanishingDeterminant { det: f64, scale: f64 },
    #[error("{what} residual {value:.3e} exceeds {RESIDUAL_TOL:e}")]
    Residual { what: &'static str, value: f64 },
    #[error("route not available: {0}")]
    WrongCase(String),
    #[error(transparent)]
    Symbol(#[from] SymbolError),
}

pub type Result<T> = std::result::Result<T, SolveError>;

/// Right-hand side of one strip as a function of `x`.
#[derive(Clone)]
pub enum Forcing {
    Zero,
    Constant(f64),
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Forcing {
    pub fn function(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Forcing::Function(Arc::new(f))
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Forcing::Zero => 0.0,
            Forcing::Constant(c) => *c,
            Forcing::Function(f) => f(x),
        }
    }

    /// `x -> f(-x)`.
    pub fn reflected(&self) -> Self {
        match self {
            Forcing::Function(f) => {
                let f = f.clone();
                Forcing::function(move |x| f(-x))
            }
            other => other.clone(),
        }
    }
}

impl std::fmt::Debug for Forcing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Forcing::Zero => write!(f, "Zero"),
            Forcing::Constant(c) => write!(f, "Constant({c})"),
            Forcing::Function(_) => write!(f, "Function(..)"),
        }
    }
}

/// One mode of the transmission problem.
#[derive(Debug, Clone)]
pub struct ModeProblem {
    pub lambda: f64,
    pub coeffs: CoefficientSet,
    pub a: f64,
    pub gamma: f64,
    pub b: f64,
    pub f_minus: Forcing,
    pub f_plus: Forcing,
    /// `u(a)`, `u'(a)`.
    pub phi_minus: [f64; 2],
    /// `u(b)`, `u'(b)`.
    pub phi_plus: [f64; 2],
    pub quadrature: Quadrature,
}

impl ModeProblem {
    pub fn new(lambda: f64, coeffs: CoefficientSet, a: f64, gamma: f64, b: f64) -> Self {
        Self {
            lambda,
            coeffs,
            a,
            gamma,
            b,
            f_minus: Forcing::Zero,
            f_plus: Forcing::Zero,
            phi_minus: [0.0; 2],
            phi_plus: [0.0; 2],
            quadrature: Quadrature::default(),
        }
    }

    pub fn c(&self) -> f64 {
        self.gamma - self.a
    }

    pub fn d(&self) -> f64 {
        self.b - self.gamma
    }

    fn validate(&self) -> Result<()> {
        if !(self.a < self.gamma && self.gamma < self.b) {
            return Err(SolveError::Geometry {
                a: self.a,
                gamma: self.gamma,
                b: self.b,
            });
        }
        let bound = self.coeffs.r_max();
        if !(self.lambda > bound) {
            return Err(SolveError::Spectral {
                lambda: self.lambda,
                bound,
            });
        }
        Ok(())
    }
}

impl Mirror for ModeProblem {
    /// Reflection `x -> -x`: the strips trade places and odd derivatives
    /// change sign.
    fn mirrored(&self) -> Self {
        Self {
            lambda: self.lambda,
            coeffs: self.coeffs.swapped(),
            a: -self.b,
            gamma: -self.gamma,
            b: -self.a,
            f_minus: self.f_plus.reflected(),
            f_plus: self.f_minus.reflected(),
            phi_minus: [self.phi_plus[0], -self.phi_plus[1]],
            phi_plus: [self.phi_minus[0], -self.phi_minus[1]],
            quadrature: self.quadrature,
        }
    }
}

/// `(sqrt(lambda), sqrt(lambda + r))`.
pub fn characteristic_roots(lambda: f64, r: f64) -> Result<(f64, f64)> {
    let bound = (-r).max(0.0);
    if !(lambda > bound) {
        return Err(SolveError::Spectral { lambda, bound });
    }
    Ok((lambda.sqrt(), (lambda + r).sqrt()))
}

/// Derivatives 0..=4 of a function at a point.
pub type Jet = [f64; 5];

/// Overflow-safe homogeneous solutions on `[x0, x1]`.
///
/// Each exponential decays away from the end it is anchored at, so every
/// basis value is at most one in magnitude (times `x1 - x0` for the
/// polynomial factor of the degenerate basis).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogeneousBasis {
    pub m: f64,
    pub ell: f64,
    pub x0: f64,
    pub x1: f64,
    pub degenerate: bool,
}

impl HomogeneousBasis {
    pub fn new(lambda: f64, r: f64, x0: f64, x1: f64) -> Result<Self> {
        let (m, ell) = characteristic_roots(lambda, r)?;
        Ok(Self {
            m,
            ell,
            x0,
            x1,
            degenerate: (m - ell).abs() < DEGENERATE_ROOTS * m,
        })
    }

    /// Jet of basis function `i` at `x`.
    pub fn eval(&self, i: usize, x: f64) -> Jet {
        let mut out = [0.0; 5];
        let exp_jet = |rate: f64, t: f64, out: &mut Jet| {
            // d^j/dx^j e^{rate * t(x)} with t' = ±1 folded into `rate`.
            let e = (-rate.abs() * t).exp();
            let mut p = 1.0;
            for o in out.iter_mut() {
                *o = p * e;
                p *= rate;
            }
        };
        let (m, ell) = (self.m, self.ell);
        let tl = x - self.x0;
        let tr = self.x1 - x;
        match (self.degenerate, i) {
            (false, 0) => exp_jet(-m, tl, &mut out),
            (false, 1) => exp_jet(m, tr, &mut out),
            (false, 2) => exp_jet(-ell, tl, &mut out),
            (false, 3) => exp_jet(ell, tr, &mut out),
            (true, 0) => exp_jet(-m, tl, &mut out),
            (true, 2) => exp_jet(m, tr, &mut out),
            (true, 1) => {
                // (x - x0) e^{-m (x - x0)}
                let e = (-m * tl).exp();
                let a = -m;
                let mut pw = [1.0; 5];
                for j in 1..5 {
                    pw[j] = pw[j - 1] * a;
                }
                for j in 0..5 {
                    let lower = if j > 0 { j as f64 * pw[j - 1] } else { 0.0 };
                    out[j] = (pw[j] * tl + lower) * e;
                }
            }
            (true, 3) => {
                // (x1 - x) e^{-m (x1 - x)}; d/dx = -d/dt with t = x1 - x.
                let e = (-m * tr).exp();
                let a = -m;
                let mut pw = [1.0; 5];
                for j in 1..5 {
                    pw[j] = pw[j - 1] * a;
                }
                let mut sign = 1.0;
                for j in 0..5 {
                    let lower = if j > 0 { j as f64 * pw[j - 1] } else { 0.0 };
                    out[j] = sign * (pw[j] * tr + lower) * e;
                    sign = -sign;
                }
            }
            _ => panic!("basis index {i} out of range"),
        }
        out
    }
}

/// Particular solution by the free-space Green's function of
/// `(D^2 - m^2)(D^2 - ell^2)`, integrated over the strip with a composite
/// Gauss rule split at the evaluation point.
#[derive(Debug, Clone)]
pub struct ParticularSolution {
    m: f64,
    ell: f64,
    x0: f64,
    x1: f64,
    forcing: Forcing,
    panels: usize,
    rule: (Vec<f64>, Vec<f64>),
    /// `(s, w, f(s))` for every fixed node.
    cached: Vec<(f64, f64, f64)>,
}

impl ParticularSolution {
    pub fn new(
        lambda: f64,
        r: f64,
        forcing: Forcing,
        x0: f64,
        x1: f64,
        quadrature: Quadrature,
    ) -> Result<Self> {
        let (m, ell) = characteristic_roots(lambda, r)?;
        // Keep the kernel resolved: rate times panel width at most 2.
        let resolve = ((x1 - x0) * m.max(ell) / 2.0).ceil() as usize;
        let panels = quadrature.panels.max(resolve).max(1);
        let rule = gauss_legendre(quadrature.nodes.max(1));
        let cached = match &forcing {
            Forcing::Function(f) => composite_rule(x0, x1, panels, &rule)
                .into_iter()
                .map(|(s, w)| (s, w, f(s)))
                .collect(),
            _ => Vec::new(),
        };
        Ok(Self {
            m,
            ell,
            x0,
            x1,
            forcing,
            panels,
            rule,
            cached,
        })
    }

    /// Derivatives 0..=4 of the particular solution at `x`.
    pub fn eval(&self, x: f64) -> Jet {
        match &self.forcing {
            Forcing::Zero => [0.0; 5],
            Forcing::Constant(c) => {
                let v = c / (self.m * self.m * self.ell * self.ell);
                [v, 0.0, 0.0, 0.0, 0.0]
            }
            Forcing::Function(f) => {
                let mut acc = [0.0; 5];
                let n = self.rule.0.len();
                let h = (self.x1 - self.x0) / self.panels as f64;
                let split = (((x - self.x0) / h).floor().max(0.0) as usize).min(self.panels - 1);
                for p in 0..self.panels {
                    if p == split {
                        continue;
                    }
                    for &(s, w, fs) in &self.cached[p * n..(p + 1) * n] {
                        self.accumulate(&mut acc, x, s, w * fs);
                    }
                }
                let lo = self.x0 + split as f64 * h;
                let hi = if split + 1 == self.panels {
                    self.x1
                } else {
                    lo + h
                };
                for (a, b) in [(lo, x), (x, hi)] {
                    if b > a {
                        let half = 0.5 * (b - a);
                        let mid = a + half;
                        for (xi, wi) in self.rule.0.iter().zip(&self.rule.1) {
                            let s = mid + half * xi;
                            self.accumulate(&mut acc, x, s, half * wi * f(s));
                        }
                    }
                }
                acc[4] += f(x);
                acc
            }
        }
    }

    /// Adds `weight * K^{(j)}(x - s)` for `j = 0..=4` (without the point
    /// mass of the fourth derivative).
    ///
    /// With `t = |x - s|`, `sigma = sign(x - s)` and `delta = ell - m`,
    /// `K^{(j)} = (-1)^{j+1} sigma^j / 2 * h_{j-1}(t)` where
    /// `h_p(t) = (ell^p e^{-ell t} - m^p e^{-m t}) / (ell^2 - m^2)` is
    /// evaluated as `e^{-m t} (ell^p q + c_p) / (ell + m)`,
    /// `q = expm1(-delta t) / delta`, `c_p = (ell^p - m^p) / delta`.
    /// This form has no cancellation as `ell -> m`.
    #[inline]
    fn accumulate(&self, acc: &mut Jet, x: f64, s: f64, weight: f64) {
        let (m, ell) = (self.m, self.ell);
        let t = (x - s).abs();
        let sigma = if x >= s { 1.0 } else { -1.0 };
        let delta = ell - m;
        let q = if delta == 0.0 {
            -t
        } else {
            (-delta * t).exp_m1() / delta
        };
        let e = (-m * t).exp() / (ell + m);
        let c = [
            -1.0 / (m * ell),
            0.0,
            1.0,
            ell + m,
            ell * ell + ell * m + m * m,
        ];
        let ell_p = [1.0 / ell, 1.0, ell, ell * ell, ell * ell * ell];
        let mut sign_j = -0.5 * weight;
        for j in 0..5 {
            acc[j] += sign_j * e * (ell_p[j] * q + c[j]);
            sign_j *= -sigma;
        }
    }
}

/// Strip of a mode solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Minus,
    Plus,
}

/// Solution of one [`ModeProblem`].
#[derive(Debug, Clone)]
pub struct ModeSolution {
    pub lambda: f64,
    pub coeffs: CoefficientSet,
    pub a: f64,
    pub gamma: f64,
    pub b: f64,
    /// `sqrt(lambda)`, `sqrt(lambda + r+)`, `sqrt(lambda + r-)`.
    pub roots: (f64, f64, f64),
    pub weights_minus: [f64; 4],
    pub weights_plus: [f64; 4],
    pub basis_minus: HomogeneousBasis,
    pub basis_plus: HomogeneousBasis,
    pub particular_minus: ParticularSolution,
    pub particular_plus: ParticularSolution,
    pub f_minus: Forcing,
    pub f_plus: Forcing,
    pub phi_minus: [f64; 2],
    pub phi_plus: [f64; 2],
    pub rcond: f64,
}

impl ModeSolution {
    /// Jet of the solution on the given strip (the evaluator extends past
    /// the strip ends analytically).
    pub fn eval(&self, side: Side, x: f64) -> Jet {
        let (basis, part, w) = match side {
            Side::Minus => (
                &self.basis_minus,
                &self.particular_minus,
                &self.weights_minus,
            ),
            Side::Plus => (&self.basis_plus, &self.particular_plus, &self.weights_plus),
        };
        let mut jet = part.eval(x);
        for (i, wi) in w.iter().enumerate() {
            let bj = basis.eval(i, x);
            for j in 0..5 {
                jet[j] += wi * bj[j];
            }
        }
        jet
    }

    /// Jet at `x`, taking the minus strip for `x < gamma` and the plus strip
    /// otherwise.
    pub fn eval_at(&self, x: f64) -> Jet {
        if x < self.gamma {
            self.eval(Side::Minus, x)
        } else {
            self.eval(Side::Plus, x)
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval_at(x)[0]
    }

    fn side_params(&self, side: Side) -> (f64, &Forcing) {
        match side {
            Side::Minus => (self.coeffs.r_minus(), &self.f_minus),
            Side::Plus => (self.coeffs.r_plus(), &self.f_plus),
        }
    }

    /// `|u'''' - (2 lambda + r) u'' + lambda (lambda + r) u - f|` at `x`,
    /// relative to the size of the terms.
    pub fn ode_residual(&self, side: Side, x: f64) -> f64 {
        let (r, f) = self.side_params(side);
        let jet = self.eval(side, x);
        let lam = self.lambda;
        let terms = [
            jet[4],
            -(2.0 * lam + r) * jet[2],
            lam * (lam + r) * jet[0],
            -f.eval(x),
        ];
        let scale: f64 = terms.iter().map(|t| t.abs()).sum();
        terms.iter().sum::<f64>().abs() / scale.max(1.0)
    }

    /// Largest ODE residual over equispaced collocation points of both strips.
    pub fn collocation_residual(&self, points: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for (side, lo, hi) in [
            (Side::Minus, self.a, self.gamma),
            (Side::Plus, self.gamma, self.b),
        ] {
            for i in 0..points {
                let x = lo + (hi - lo) * i as f64 / (points - 1) as f64;
                worst = worst.max(self.ode_residual(side, x));
            }
        }
        worst
    }

    /// Residuals of the eight conditions in assembly order, each relative to
    /// the size of its terms (floor 1).
    pub fn condition_residuals(&self) -> [f64; 8] {
        let um = self.eval(Side::Minus, self.a);
        let up = self.eval(Side::Plus, self.b);
        let gm = self.eval(Side::Minus, self.gamma);
        let gp = self.eval(Side::Plus, self.gamma);
        let rows = transmission_rows(&self.coeffs, self.lambda, &gm, &gp);
        let rel = |terms: &[f64]| {
            terms.iter().sum::<f64>().abs() / terms.iter().map(|t| t.abs()).sum::<f64>().max(1.0)
        };
        [
            rel(&[um[0], -self.phi_minus[0]]),
            rel(&[um[1], -self.phi_minus[1]]),
            rel(&[up[0], -self.phi_plus[0]]),
            rel(&[up[1], -self.phi_plus[1]]),
            rel(&rows[0]),
            rel(&rows[1]),
            rel(&rows[2]),
            rel(&rows[3]),
        ]
    }
}

/// The four interface conditions as signed term lists (each sums to zero
/// for an exact solution): continuity of `u` and `u'`, then
/// `k-(u'' - lambda u) = k+(u'' - lambda u)` and
/// `k-(u''' - lambda u') - l- u' = k+(u''' - lambda u') - l+ u'`.
pub fn transmission_rows(
    coeffs: &CoefficientSet,
    lambda: f64,
    minus: &Jet,
    plus: &Jet,
) -> [[f64; 6]; 4] {
    let (kp, km, lp, lm) = (coeffs.k_plus, coeffs.k_minus, coeffs.l_plus, coeffs.l_minus);
    [
        [minus[0], -plus[0], 0.0, 0.0, 0.0, 0.0],
        [minus[1], -plus[1], 0.0, 0.0, 0.0, 0.0],
        [
            km * minus[2],
            -lambda * km * minus[0],
            -kp * plus[2],
            lambda * kp * plus[0],
            0.0,
            0.0,
        ],
        [
            km * minus[3],
            -lambda * km * minus[1],
            -lm * minus[1],
            -kp * plus[3],
            lambda * kp * plus[1],
            lp * plus[1],
        ],
    ]
}

/// Assembled linear system of one mode.
#[derive(Debug, Clone)]
pub struct TransmissionSystem {
    pub matrix: SMatrix<f64, 8, 8>,
    pub rhs: SVector<f64, 8>,
    pub basis_minus: HomogeneousBasis,
    pub basis_plus: HomogeneousBasis,
    pub particular_minus: ParticularSolution,
    pub particular_plus: ParticularSolution,
}

/// Builds the 8x8 system in row order
/// `[u-(a), u-'(a), u+(b), u+'(b), TC1a, TC1b, TC2a, TC2b]`.
pub fn assemble_transmission_system(mp: &ModeProblem) -> Result<TransmissionSystem> {
    mp.validate()?;
    let (rp, rm) = (mp.coeffs.r_plus(), mp.coeffs.r_minus());
    let basis_minus = HomogeneousBasis::new(mp.lambda, rm, mp.a, mp.gamma)?;
    let basis_plus = HomogeneousBasis::new(mp.lambda, rp, mp.gamma, mp.b)?;
    let particular_minus = ParticularSolution::new(
        mp.lambda,
        rm,
        mp.f_minus.clone(),
        mp.a,
        mp.gamma,
        mp.quadrature,
    )?;
    let particular_plus = ParticularSolution::new(
        mp.lambda,
        rp,
        mp.f_plus.clone(),
        mp.gamma,
        mp.b,
        mp.quadrature,
    )?;

    let mut matrix = SMatrix::<f64, 8, 8>::zeros();
    let mut rhs = SVector::<f64, 8>::zeros();
    // Coefficient of derivative j at x on one side contributes to row i.
    let mut put = |i: usize, side: Side, x: f64, j: usize, coef: f64| {
        let (basis, part, off) = match side {
            Side::Minus => (&basis_minus, &particular_minus, 0),
            Side::Plus => (&basis_plus, &particular_plus, 4),
        };
        for col in 0..4 {
            matrix[(i, off + col)] += coef * basis.eval(col, x)[j];
        }
        rhs[i] -= coef * part.eval(x)[j];
    };
    let (a, g, b, lam) = (mp.a, mp.gamma, mp.b, mp.lambda);
    let c = &mp.coeffs;
    put(0, Side::Minus, a, 0, 1.0);
    put(1, Side::Minus, a, 1, 1.0);
    put(2, Side::Plus, b, 0, 1.0);
    put(3, Side::Plus, b, 1, 1.0);
    put(4, Side::Minus, g, 0, 1.0);
    put(4, Side::Plus, g, 0, -1.0);
    put(5, Side::Minus, g, 1, 1.0);
    put(5, Side::Plus, g, 1, -1.0);
    put(6, Side::Minus, g, 2, c.k_minus);
    put(6, Side::Minus, g, 0, -lam * c.k_minus);
    put(6, Side::Plus, g, 2, -c.k_plus);
    put(6, Side::Plus, g, 0, lam * c.k_plus);
    put(7, Side::Minus, g, 3, c.k_minus);
    put(7, Side::Minus, g, 1, -lam * c.k_minus - c.l_minus);
    put(7, Side::Plus, g, 3, -c.k_plus);
    put(7, Side::Plus, g, 1, lam * c.k_plus + c.l_plus);
    rhs[0] += mp.phi_minus[0];
    rhs[1] += mp.phi_minus[1];
    rhs[2] += mp.phi_plus[0];
    rhs[3] += mp.phi_plus[1];
    Ok(TransmissionSystem {
        matrix,
        rhs,
        basis_minus,
        basis_plus,
        particular_minus,
        particular_plus,
    })
}

/// Row-equilibrated dense LU solve; returns the solution and the
/// reciprocal 1-norm condition number of the equilibrated matrix.
pub(crate) fn solve_dense(matrix: DMatrix<f64>, rhs: DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let n = matrix.nrows();
    let mut a = matrix;
    let mut b = rhs;
    for i in 0..n {
        let s = a.row(i).amax();
        if s > 0.0 {
            a.row_mut(i).scale_mut(1.0 / s);
            b[i] /= s;
        }
    }
    let norm1 = (0..n).map(|j| a.column(j).lp_norm(1)).fold(0.0, f64::max);
    let lu = a.lu();
    let inv = lu.try_inverse().ok_or(SolveError::NearSingular {
        size: n,
        rcond: 0.0,
    })?;
    let inv_norm1 = (0..n).map(|j| inv.column(j).lp_norm(1)).fold(0.0, f64::max);
    let rcond = 1.0 / (norm1 * inv_norm1);
    if !(rcond >= RCOND_MIN) {
        return Err(SolveError::NearSingular { size: n, rcond });
    }
    let x = lu
        .solve(&b)
        .ok_or(SolveError::NearSingular { size: n, rcond })?;
    Ok((x, rcond))
}

/// Reciprocal condition number of the assembled 8x8 matrix, without
/// solving (no singularity error).
pub fn system_rcond(mp: &ModeProblem) -> Result<f64> {
    let sys = assemble_transmission_system(mp)?;
    let mut a = DMatrix::from_iterator(8, 8, sys.matrix.iter().copied());
    for i in 0..8 {
        let s = a.row(i).amax();
        if s > 0.0 {
            a.row_mut(i).scale_mut(1.0 / s);
        }
    }
    let norm1 = (0..8).map(|j| a.column(j).lp_norm(1)).fold(0.0, f64::max);
    match a.try_inverse() {
        Some(inv) => {
            let inv_norm1 = (0..8).map(|j| inv.column(j).lp_norm(1)).fold(0.0, f64::max);
            Ok(1.0 / (norm1 * inv_norm1))
        }
        None => Ok(0.0),
    }
}

/// Solves one mode by the direct 8x8 assembly.
pub fn solve_mode(mp: &ModeProblem) -> Result<ModeSolution> {
    let sys = assemble_transmission_system(mp)?;
    let a = DMatrix::from_iterator(8, 8, sys.matrix.iter().copied());
    let b = DVector::from_iterator(8, sys.rhs.iter().copied());
    let (x, rcond) = solve_dense(a, b)?;
    let (rp, rm) = (mp.coeffs.r_plus(), mp.coeffs.r_minus());
    Ok(ModeSolution {
        lambda: mp.lambda,
        coeffs: mp.coeffs,
        a: mp.a,
        gamma: mp.gamma,
        b: mp.b,
        roots: (
            mp.lambda.sqrt(),
            (mp.lambda + rp).sqrt(),
            (mp.lambda + rm).sqrt(),
        ),
        weights_minus: [x[0], x[1], x[2], x[3]],
        weights_plus: [x[4], x[5], x[6], x[7]],
        basis_minus: sys.basis_minus,
        basis_plus: sys.basis_plus,
        particular_minus: sys.particular_minus,
        particular_plus: sys.particular_plus,
        f_minus: mp.f_minus.clone(),
        f_plus: mp.f_plus.clone(),
        phi_minus: mp.phi_minus,
        phi_plus: mp.phi_plus,
        rcond,
    })
}

/// Relative change of the particular-solution traces when the panel count
/// is doubled; a cheap convergence estimate for the quadrature.
pub fn quadrature_halving_change(mp: &ModeProblem) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let fine = Quadrature {
        panels: 2 * mp.quadrature.panels,
        nodes: mp.quadrature.nodes,
    };
    for (r, f, lo, hi) in [
        (mp.coeffs.r_minus(), &mp.f_minus, mp.a, mp.gamma),
        (mp.coeffs.r_plus(), &mp.f_plus, mp.gamma, mp.b),
    ] {
        let coarse = ParticularSolution::new(mp.lambda, r, f.clone(), lo, hi, mp.quadrature)?;
        let refined = ParticularSolution::new(mp.lambda, r, f.clone(), lo, hi, fine)?;
        for x in [lo, 0.5 * (lo + hi), hi] {
            let (u, v) = (coarse.eval(x), refined.eval(x));
            for j in 0..4 {
                let scale = u[j].abs().max(v[j].abs()).max(1e-300);
                if u[j] != v[j] {
                    worst = worst.max((u[j] - v[j]).abs() / scale.max(1.0));
                }
            }
        }
    }
    Ok(worst)
}

/// [`solve_mode`] followed by the quadrature halving check and the
/// residual checks on collocation points and the eight conditions.
pub fn solve_mode_checked(mp: &ModeProblem) -> Result<ModeSolution> {
    let change = quadrature_halving_change(mp)?;
    if change > RESIDUAL_TOL {
        return Err(SolveError::Quadrature { change });
    }
    let sol = solve_mode(mp)?;
    let ode = sol.collocation_residual(COLLOCATION_POINTS);
    if !(ode <= RESIDUAL_TOL) {
        return Err(SolveError::Residual {
            what: "ODE",
            value: ode,
        });
    }
    let cond = sol.condition_residuals().into_iter().fold(0.0, f64::max);
    if !(cond <= RESIDUAL_TOL) {
        return Err(SolveError::Residual {
            what: "boundary/interface",
            value: cond,
        });
    }
    Ok(sol)
}

/// Solution of a one-strip problem with `u = u'' = 0` at both ends.
#[derive(Debug, Clone)]
pub struct AuxiliarySolution {
    pub basis: HomogeneousBasis,
    pub particular: ParticularSolution,
    pub weights: [f64; 4],
}

impl AuxiliarySolution {
    pub fn eval(&self, x: f64) -> Jet {
        let mut jet = self.particular.eval(x);
        for (i, w) in self.weights.iter().enumerate() {
            let bj = self.basis.eval(i, x);
            for j in 0..5 {
                jet[j] += w * bj[j];
            }
        }
        jet
    }
}

/// Solves `u'''' - (2 lambda + r) u'' + lambda (lambda + r) u = f` on
/// `[x0, x1]` with Navier conditions `u = u'' = 0` at both ends.
pub fn solve_auxiliary(
    lambda: f64,
    r: f64,
    forcing: Forcing,
    x0: f64,
    x1: f64,
    quadrature: Quadrature,
) -> Result<AuxiliarySolution> {
    let basis = HomogeneousBasis::new(lambda, r, x0, x1)?;
    let particular = ParticularSolution::new(lambda, r, forcing, x0, x1, quadrature)?;
    let mut a = DMatrix::zeros(4, 4);
    let mut rhs = DVector::zeros(4);
    for (i, (x, j)) in [(x0, 0), (x1, 0), (x0, 2), (x1, 2)].into_iter().enumerate() {
        for col in 0..4 {
            a[(i, col)] = basis.eval(col, x)[j];
        }
        rhs[i] = -particular.eval(x)[j];
    }
    let (w, _) = solve_dense(a, rhs)?;
    Ok(AuxiliarySolution {
        basis,
        particular,
        weights: [w[0], w[1], w[2], w[3]],
    })
}

/// Auxiliary Navier problem of one strip of a mode problem.
pub fn solve_auxiliary_f(side: Side, mp: &ModeProblem) -> Result<AuxiliarySolution> {
    mp.validate()?;
    match side {
        Side::Plus => solve_auxiliary(
            mp.lambda,
            mp.coeffs.r_plus(),
            mp.f_plus.clone(),
            mp.gamma,
            mp.b,
            mp.quadrature,
        ),
        Side::Minus => solve_auxiliary(
            mp.lambda,
            mp.coeffs.r_minus(),
            mp.f_minus.clone(),
            mp.a,
            mp.gamma,
            mp.quadrature,
        ),
    }
}

/// Interface values from the reduced 2x2 system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiRoute {
    /// `u(gamma)`.
    pub psi1: f64,
    /// `u'(gamma)`.
    pub psi2: f64,
    /// Determinant of the 2x2 matrix that was solved.
    pub det_value: f64,
}

/// Which reduced system to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RouteCase {
    /// Both ratios nonzero.
    BothNonzero,
    /// `r+ != 0`, `r- = 0`.
    MinusZero,
}

/// Traces `t1..t4` built from one strip's boundary data, the derivative
/// traces of its auxiliary solution and the scalar roots.
#[allow(clippy::too_many_arguments)]
fn plus_type_traces(
    mm: f64,
    ll: f64,
    e: f64,
    f: f64,
    p1: f64,
    p2: f64,
    fb: f64,
    fg: f64,
) -> [f64; 4] {
    [
        -ll * (1.0 + f) * p1 + (1.0 - f) * (fb + fg - p2),
        -mm * (1.0 + e) * p1 + (1.0 - e) * (fb + fg - p2),
        ll * (1.0 - f) * p1 - (1.0 + f) * (fb - fg - p2),
        mm * (1.0 - e) * p1 - (1.0 + e) * (fb - fg - p2),
    ]
}

fn solve_2x2(m: Matrix2<f64>, rhs: Vector2<f64>) -> Result<PsiRoute> {
    let det = m.determinant();
    let scale = (m[(0, 0)] * m[(1, 1)]).abs() + (m[(0, 1)] * m[(1, 0)]).abs();
    if !(det.abs() >= RCOND_MIN * scale) {
        return Err(SolveError::VanishingDeterminant { det, scale });
    }
    let psi1 = (rhs[0] * m[(1, 1)] - m[(0, 1)] * rhs[1]) / det;
    let psi2 = (m[(0, 0)] * rhs[1] - m[(1, 0)] * rhs[0]) / det;
    Ok(PsiRoute {
        psi1,
        psi2,
        det_value: det,
    })
}

/// Interface values `(u(gamma), u'(gamma))` from the scalar 2x2 system
/// that eliminates the strip interiors.
///
/// The matrix entries are the `P`/`Q` scalars, and the right-hand sides are
/// assembled from the boundary data and the auxiliary Navier solutions.
/// For the case with both ratios nonzero the left strip is handled as a
/// reflected right strip.
pub fn psi_via_reduced_system(case: RouteCase, mp: &ModeProblem) -> Result<PsiRoute> {
    mp.validate()?;
    let label = classify(&mp.coeffs);
    let ok = match case {
        RouteCase::BothNonzero => matches!(label, CaseLabel::BothNonzero(..)),
        RouteCase::MinusZero => label == CaseLabel::RminusZero,
    };
    if !ok {
        return Err(SolveError::WrongCase(format!(
            "{case:?} requested for {label}"
        )));
    }
    let lam = mp.lambda;
    let (c, d) = (mp.c(), mp.d());
    let k = &mp.coeffs;
    let m = lam.sqrt();
    let mm = -m;
    let fp = solve_auxiliary_f(Side::Plus, mp)?;
    let fm = solve_auxiliary_f(Side::Minus, mp)?;
    let fp_g = fp.eval(mp.gamma);
    let fp_b = fp.eval(mp.b);
    let fm_g = fm.eval(mp.gamma);
    let fm_a = fm.eval(mp.a);
    let pq = |w| pq_scalar(w, k, c, d, lam);
    let uv = |delta: f64, r: f64| -> Result<(f64, f64)> {
        let args = SymbolArgs::real(delta, r, lam);
        Ok((
            uv_symbol(UvBranch::U, &args)?.re,
            uv_symbol(UvBranch::V, &args)?.re,
        ))
    };

    match case {
        RouteCase::MinusZero => {
            let rp = k.r_plus();
            let ll = -(lam + rp).sqrt();
            let (e, f, ec) = ((-d * m).exp(), (d * ll).exp(), (-c * m).exp());
            let (up, vp) = uv(d, rp)?;
            let (um, vm) = uv(c, 0.0)?;
            let [p1, p2, p3] = [
                pq(PqOperator::P1Plus)?,
                pq(PqOperator::P2Plus)?,
                pq(PqOperator::P3Plus)?,
            ];
            let [q1, q2, q3] = [
                pq(PqOperator::Q1Minus)?,
                pq(PqOperator::Q2Minus)?,
                pq(PqOperator::Q3Minus)?,
            ];
            let (p1m, p2m) = (mp.phi_minus[0], mp.phi_minus[1]);
            let tp = plus_type_traces(
                mm,
                ll,
                e,
                f,
                mp.phi_plus[0],
                mp.phi_plus[1],
                fp_b[1],
                fp_g[1],
            );
            let t2m = -mm * (1.0 + ec) * p1m + (1.0 - ec) * (p2m - fm_a[1] - fm_g[1]);
            let t4m = mm * (1.0 - ec) * p1m - (1.0 + ec) * (p2m - fm_a[1] + fm_g[1]);
            let r2 = -k.k_minus * fm_g[3] + k.k_minus * mm * mm * fm_g[1] + k.k_plus * fp_g[3]
                - k.k_plus * mm * mm * fp_g[1]
                - k.l_plus * fp_g[1];
            let s3 = 2.0 * k.k_minus * mm * ((1.0 - ec) * t2m / um + (1.0 + ec) * t4m / vm)
                - k.k_plus * (ll + mm) * ((1.0 - f) * tp[1] / up + (1.0 + f) * tp[3] / vp);
            let s4 = -2.0 * k.k_minus * mm * ((1.0 + ec) * t2m / um + (1.0 - ec) * t4m / vm)
                - k.k_plus * (ll + mm) * ((1.0 + e) * tp[0] / up + (1.0 - e) * tp[2] / vp)
                + 2.0 / mm * r2;
            let lambda2 = Matrix2::new(
                (p1 - 2.0 * mm * q1) * mm,
                -(p2 + 2.0 * mm * q2),
                p3 + 2.0 * mm * mm * q3,
                2.0 * mm * q1 - p1,
            );
            solve_2x2(lambda2, Vector2::new(s3, s4))
        }
        RouteCase::BothNonzero => {
            let side = |kk: f64,
                        r: f64,
                        delta: f64,
                        p1: f64,
                        p2: f64,
                        fb: f64,
                        fg: f64|
             -> Result<(f64, f64)> {
                let ll = -(lam + r).sqrt();
                let (e, f) = ((-delta * m).exp(), (delta * ll).exp());
                let (u, v) = uv(delta, r)?;
                let t = plus_type_traces(mm, ll, e, f, p1, p2, fb, fg);
                let a = kk * (ll + mm) * ((1.0 - f) * t[1] / u + (1.0 + f) * t[3] / v);
                let b = kk * (ll + mm) * ((1.0 + e) * t[0] / u + (1.0 - e) * t[2] / v);
                Ok((a, b))
            };
            let (ap, bp) = side(
                k.k_plus,
                k.r_plus(),
                d,
                mp.phi_plus[0],
                mp.phi_plus[1],
                fp_b[1],
                fp_g[1],
            )?;
            let (am, bm) = side(
                k.k_minus,
                k.r_minus(),
                c,
                mp.phi_minus[0],
                -mp.phi_minus[1],
                -fm_a[1],
                -fm_g[1],
            )?;
            let r1 = -k.k_plus * fp_g[3]
                + k.k_plus * mm * mm * fp_g[1]
                + k.l_plus * fp_g[1]
                + k.k_minus * fm_g[3]
                - k.k_minus * mm * mm * fm_g[1]
                - k.l_minus * fm_g[1];
            let s1 = ap - am;
            let s2 = -bp - bm - 2.0 / mm * r1;
            let [p1p, p2p, p3p] = [
                pq(PqOperator::P1Plus)?,
                pq(PqOperator::P2Plus)?,
                pq(PqOperator::P3Plus)?,
            ];
            let [p1m, p2m, p3m] = [
                pq(PqOperator::P1Minus)?,
                pq(PqOperator::P2Minus)?,
                pq(PqOperator::P3Minus)?,
            ];
            let lambda1 = Matrix2::new((p1m - p1p) * mm, p2p + p2m, p3p + p3m, p1m - p1p);
            solve_2x2(lambda1, Vector2::new(s1, s2))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn coeffs(kp: f64, km: f64, lp: f64, lm: f64) -> CoefficientSet {
        CoefficientSet::new(kp, km, lp, lm).unwrap()
    }

    #[test]
    fn roots_examples() {
        assert_eq!(characteristic_roots(4.0, -3.0).unwrap(), (2.0, 1.0));
        assert_eq!(characteristic_roots(1.0, 0.0).unwrap(), (1.0, 1.0));
        assert!(characteristic_roots(1.0, -1.0).is_err());
        // (chi^2 - 4)(chi^2 - 1) = chi^4 - 5 chi^2 + 4 with a = -4, r = -3.
        let (a, r) = (-4.0, -3.0);
        assert_eq!(2.0 * a - r, -5.0);
        assert_eq!(a * a - r * a, 4.0);
    }

    #[test]
    fn basis_satisfies_the_ode() {
        for (lam, r) in [(4.0, -3.0), (1.0, 0.0), (2.0, 1.5)] {
            let basis = HomogeneousBasis::new(lam, r, 0.0, 1.0).unwrap();
            assert_eq!(basis.degenerate, r == 0.0);
            for i in 0..4 {
                for x in [0.0, 0.3, 1.0] {
                    let j = basis.eval(i, x);
                    let res = j[4] - (2.0 * lam + r) * j[2] + lam * (lam + r) * j[0];
                    assert!(res.abs() < 1e-12, "lam={lam} r={r} i={i} x={x}: {res}");
                }
            }
        }
    }

    #[test]
    fn basis_wronskian_is_nonzero() {
        let basis = HomogeneousBasis::new(4.0, -3.0, 0.0, 1.0).unwrap();
        let w = nalgebra::Matrix4::from_fn(|j, i| basis.eval(i, 0.5)[j]);
        assert!(w.determinant().abs() > 1e-3);
        let degenerate = HomogeneousBasis::new(1.0, 0.0, 0.0, 1.0).unwrap();
        assert_eq!(degenerate.eval(1, 0.0)[0], 0.0);
        assert_eq!(degenerate.eval(1, 0.0)[1], 1.0);
        let big = HomogeneousBasis::new(2500.0, 1e-3, 0.0, 1.0).unwrap();
        for i in 0..4 {
            for k in 0..=20 {
                assert!(big.eval(i, k as f64 / 20.0)[0].abs() <= 1.0);
            }
        }
    }

    #[test]
    fn particular_examples() {
        let q = Quadrature::default();
        let zero = ParticularSolution::new(4.0, -3.0, Forcing::Zero, 0.0, 1.0, q).unwrap();
        assert_eq!(zero.eval(0.5), [0.0; 5]);
        let c = ParticularSolution::new(4.0, -3.0, Forcing::Constant(28.0), 0.0, 1.0, q).unwrap();
        assert_eq!(c.eval(0.3)[0], 7.0);
        // The Green's-function particular solution differs from
        // sin(pi x) / ((pi^2 + 4)(pi^2 + 1)) by a homogeneous solution, so
        // the ODE residual is the check.
        let pi = std::f64::consts::PI;
        let s = ParticularSolution::new(
            4.0,
            -3.0,
            Forcing::function(move |x| (pi * x).sin()),
            0.0,
            1.0,
            q,
        )
        .unwrap();
        for x in [0.0, 0.1, 0.5, 0.77, 1.0] {
            let j = s.eval(x);
            let res = j[4] - 5.0 * j[2] + 4.0 * j[0] - (pi * x).sin();
            assert!(res.abs() < 1e-12, "x={x}: {res}");
        }
    }

    #[test]
    fn particular_kernel_is_stable_for_close_roots() {
        let q = Quadrature::default();
        let f = Forcing::function(|x: f64| (2.0 * x).cos());
        let a = ParticularSolution::new(9.0, 1e-12, f.clone(), 0.0, 1.0, q).unwrap();
        let b = ParticularSolution::new(9.0, 0.0, f, 0.0, 1.0, q).unwrap();
        for x in [0.0, 0.4, 1.0] {
            for j in 0..5 {
                assert!((a.eval(x)[j] - b.eval(x)[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_data_gives_zero() {
        let mp = ModeProblem::new(3.0, coeffs(1.0, 2.0, 1.0, -1.0), 0.0, 0.7, 1.5);
        let sys = assemble_transmission_system(&mp).unwrap();
        assert_eq!(sys.rhs, SVector::<f64, 8>::zeros());
        for i in 2..4 {
            for j in 0..4 {
                assert_eq!(sys.matrix[(i, j)], 0.0);
            }
        }
        let sol = solve_mode(&mp).unwrap();
        assert_eq!(sol.value(0.3), 0.0);
        assert_eq!(sol.value(1.2), 0.0);
    }

    #[test]
    fn tc2_rows_without_minus_laplacian_term() {
        let with = ModeProblem::new(3.0, coeffs(1.0, 2.0, 1.0, 0.0), 0.0, 0.7, 1.5);
        let sys = assemble_transmission_system(&with).unwrap();
        // Row 7 minus-side coefficient is k-(u''' - lambda u') exactly.
        let b = &sys.basis_minus;
        for col in 0..4 {
            let j = b.eval(col, 0.7);
            assert_eq!(sys.matrix[(7, col)], 2.0 * j[3] + (-3.0 * 2.0 - 0.0) * j[1]);
        }
    }

    fn cos_problem() -> ModeProblem {
        // u = cos(x) on both strips with k+ = k- = 1, l+ = l- = 2, lambda = 4:
        // f = u'''' - 10 u'' + 24 u = 35 cos(x).
        let mut mp = ModeProblem::new(4.0, coeffs(1.0, 1.0, 2.0, 2.0), 0.0, 1.0, 2.0);
        mp.f_minus = Forcing::function(|x: f64| 35.0 * x.cos());
        mp.f_plus = mp.f_minus.clone();
        mp.phi_minus = [1.0, 0.0];
        mp.phi_plus = [2f64.cos(), -2f64.sin()];
        mp
    }

    #[test]
    fn recovers_cosine() {
        let mp = cos_problem();
        let sol = solve_mode(&mp).unwrap();
        for i in 0..=40 {
            let x = 2.0 * i as f64 / 40.0;
            assert!((sol.value(x) - x.cos()).abs() < 1e-12, "x={x}");
        }
        assert!(sol.collocation_residual(COLLOCATION_POINTS) < 1e-12);
        assert!(sol.condition_residuals().iter().all(|r| *r < 1e-12));
        assert!(quadrature_halving_change(&mp).unwrap() < 1e-12);
        solve_mode_checked(&mp).unwrap();
    }

    #[test]
    fn solves_are_deterministic() {
        let mp = cos_problem();
        let a = solve_mode(&mp).unwrap();
        let b = solve_mode(&mp).unwrap();
        assert_eq!(a.weights_minus, b.weights_minus);
        assert_eq!(a.weights_plus, b.weights_plus);
    }

    #[test]
    fn auxiliary_examples() {
        let q = Quadrature::default();
        let zero = solve_auxiliary(5.0, 1.0, Forcing::Zero, 1.0, 2.0, q).unwrap();
        assert_eq!(zero.eval(1.5), [0.0; 5]);
        let (lam, r, g, d) = (5.0, 1.3, 1.0, 0.8);
        let w = std::f64::consts::PI / d;
        let mu = (w * w + lam) * (w * w + lam + r);
        let f = Forcing::function(move |x| (w * (x - g)).sin());
        let sol = solve_auxiliary(lam, r, f, g, g + d, q).unwrap();
        for x in [g, g + 0.2, g + 0.5, g + d] {
            assert!((sol.eval(x)[0] - (w * (x - g)).sin() / mu).abs() < 1e-13);
        }
        assert!(sol.eval(g)[2].abs() < 1e-10);
        assert!(sol.eval(g + d)[2].abs() < 1e-10);
    }

    fn random_mode(lam: f64, c: CoefficientSet) -> ModeProblem {
        let mut mp = ModeProblem::new(lam, c, 0.0, 0.8, 1.5);
        mp.f_minus = Forcing::function(|x: f64| 0.7 + x.sin() - 0.3 * (3.0 * x).cos());
        mp.f_plus = Forcing::function(|x: f64| -0.4 + x * x);
        mp.phi_minus = [0.3, -0.2];
        mp.phi_plus = [0.5, 0.1];
        mp
    }

    #[test]
    fn reduced_system_matches_direct_solve() {
        for (c, case) in [
            (coeffs(1.2, 0.9, 1.1, 0.0), RouteCase::MinusZero),
            (coeffs(1.2, 0.9, 1.1, -0.5), RouteCase::BothNonzero),
            (coeffs(1.0, 1.0, 3.0, 2.0), RouteCase::BothNonzero),
        ] {
            for lam in [3.0, 30.0, 300.0] {
                let mp = random_mode(lam, c);
                let sol = solve_mode(&mp).unwrap();
                let trace = sol.eval(Side::Minus, mp.gamma);
                let route = psi_via_reduced_system(case, &mp).unwrap();
                assert!((route.psi1 - trace[0]).abs() <= 1e-9 * (1.0 + trace[0].abs()));
                assert!((route.psi2 - trace[1]).abs() <= 1e-9 * (1.0 + trace[1].abs()));
            }
        }
    }

    #[test]
    fn reduced_system_rejects_wrong_case() {
        let mp = random_mode(3.0, coeffs(1.0, 1.0, 1.0, 1.0));
        assert!(psi_via_reduced_system(RouteCase::MinusZero, &mp).is_err());
        let zero = ModeProblem::new(3.0, coeffs(1.0, 1.0, 1.0, 0.0), 0.0, 1.0, 2.0);
        let r = psi_via_reduced_system(RouteCase::MinusZero, &zero).unwrap();
        assert_eq!((r.psi1, r.psi2), (0.0, 0.0));
    }

    #[test]
    fn mirror_equivariance() {
        let mp = random_mode(5.0, coeffs(1.3, 0.7, 2.0, -0.4));
        let sol = solve_mode(&mp).unwrap();
        let mirrored = solve_mode(&mp.mirrored()).unwrap();
        for i in 0..=30 {
            let x = mp.a + (mp.b - mp.a) * i as f64 / 30.0;
            let j = sol.eval_at(x);
            let k = mirrored.eval_at(-x);
            assert!((j[0] - k[0]).abs() < 1e-10);
            assert!((j[1] + k[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn case_two_determinant_can_vanish() {
        // Satisfies k-/k+ <= 2 and r+ <= -27 k+^2 / (64 k-^2), yet the mode
        // system is singular near lambda = 231.109.
        let c = coeffs(2.2877, 0.22508, 2.2877 * -161.404, 0.0);
        let near = |lam: f64| {
            let mut mp = ModeProblem::new(lam, c, 0.0, 4.42, 4.42 + 2.25);
            mp.phi_minus = [1.0, 0.0];
            system_rcond(&mp).unwrap()
        };
        let mut best = f64::INFINITY;
        let mut lam = 231.0;
        while lam < 231.2 {
            best = best.min(near(lam));
            lam += 1e-4;
        }
        assert!(best < 1e-9, "min rcond {best}");
        assert!(near(200.0) > 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        let mp = ModeProblem::new(0.1, coeffs(1.0, 1.0, -1.0, 0.0), 0.0, 1.0, 2.0);
        assert!(matches!(solve_mode(&mp), Err(SolveError::Spectral { .. })));
        let mp = ModeProblem::new(2.0, coeffs(1.0, 1.0, 1.0, 0.0), 0.0, 0.0, 2.0);
        assert!(matches!(solve_mode(&mp), Err(SolveError::Geometry { .. })));
    }

    #[test]
    fn jump_in_second_derivative_is_recovered() {
        let (kp, km, lp, lm, lam, g) = (2.0, 0.5, 1.0, -0.3, 6.0, 0.6);
        let c = coeffs(kp, km, lp, lm);
        let (rp, rm) = (c.r_plus(), c.r_minus());
        // u- = sin(x) + x^2; u+ = u- + alpha (x-g)^2 + beta (x-g)^3.
        let um = |x: f64| {
            [
                x.sin() + x * x,
                x.cos() + 2.0 * x,
                -x.sin() + 2.0,
                -x.cos(),
                x.sin(),
            ]
        };
        let ug = um(g);
        let alpha = (km - kp) * (ug[2] - lam * ug[0]) / (2.0 * kp);
        let beta = (km * (ug[3] - lam * ug[1]) - lm * ug[1] - kp * (ug[3] - lam * ug[1])
            + lp * ug[1])
            / (6.0 * kp);
        let up = move |x: f64| {
            let t = x - g;
            let b = um(x);
            [
                b[0] + alpha * t * t + beta * t * t * t,
                b[1] + 2.0 * alpha * t + 3.0 * beta * t * t,
                b[2] + 2.0 * alpha + 6.0 * beta * t,
                b[3] + 6.0 * beta,
                b[4],
            ]
        };
        let op = move |u: [f64; 5], r: f64| u[4] - (2.0 * lam + r) * u[2] + lam * (lam + r) * u[0];
        let mut mp = ModeProblem::new(lam, c, 0.0, g, 1.4);
        mp.f_minus = Forcing::function(move |x| op(um(x), rm));
        mp.f_plus = Forcing::function(move |x| op(up(x), rp));
        mp.phi_minus = [um(0.0)[0], um(0.0)[1]];
        mp.phi_plus = [up(1.4)[0], up(1.4)[1]];
        let sol = solve_mode(&mp).unwrap();
        assert_relative_eq!(
            sol.eval(Side::Minus, g)[2] - sol.eval(Side::Plus, g)[2],
            -2.0 * alpha,
            epsilon = 1e-9
        );
        for i in 0..=28 {
            let x = 1.4 * i as f64 / 28.0;
            let exact = if x < g { um(x)[0] } else { up(x)[0] };
            assert!((sol.value(x) - exact).abs() < 1e-11);
        }
    }
}
