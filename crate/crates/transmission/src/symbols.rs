//! Scalar realizations of the operator functions that appear in the
//! transmission systems.
//!
//! Every operator expression built from the cross-section operator `A` is a
//! function of `-A`. Substituting a spectral value `z` for `-A` turns
//! `M = -sqrt(-A)` into `-sqrt(z)`, `L = -sqrt(-A + r)` into `-sqrt(z + r)`
//! and the semigroups `e^{dM}` into decaying exponentials `e^{-d sqrt(z)}`.
//! The functions here evaluate those scalar images and check the identities
//! and sign properties the well-posedness argument rests on.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Below this `|r|` the dedicated `r = 0` formulas are used.
pub const R_SWITCH: f64 = 1e-6;
/// Magnitude under which `u` or `v` is treated as vanishing.
pub const VANISHING_GUARD: f64 = 1e-300;
/// Denominator floor of relative residuals.
pub const RESIDUAL_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SymbolError {
    #[error("argument {re}{im:+}i lies on the branch cut")]
    BranchCut { re: f64, im: f64 },
    #[error("interval length must be positive, got {0}")]
    NonPositiveLength(f64),
    #[error("{factor} vanishes at z = {re}{im:+}i")]
    Vanishing {
        factor: &'static str,
        re: f64,
        im: f64,
    },
    #[error("{0}")]
    WrongCase(String),
    #[error("invalid coefficients: {0}")]
    InvalidCoefficients(String),
}

pub type Result<T> = std::result::Result<T, SymbolError>;

/// Physical constants of the two habitats.
///
/// `minus` refers to the left strip `(a, gamma)`, `plus` to the right strip
/// `(gamma, b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientSet {
    pub k_plus: f64,
    pub k_minus: f64,
    pub l_plus: f64,
    pub l_minus: f64,
}

impl CoefficientSet {
    pub fn new(k_plus: f64, k_minus: f64, l_plus: f64, l_minus: f64) -> Result<Self> {
        let all = [k_plus, k_minus, l_plus, l_minus];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(SymbolError::InvalidCoefficients(
                "coefficients must be finite".into(),
            ));
        }
        if k_plus == 0.0 || k_minus == 0.0 {
            return Err(SymbolError::InvalidCoefficients(
                "k_plus and k_minus must be nonzero".into(),
            ));
        }
        if k_plus * k_minus <= 0.0 {
            return Err(SymbolError::InvalidCoefficients(
                "k_plus * k_minus > 0 violated".into(),
            ));
        }
        Ok(Self {
            k_plus,
            k_minus,
            l_plus,
            l_minus,
        })
    }

    pub fn r_plus(&self) -> f64 {
        self.l_plus / self.k_plus
    }

    pub fn r_minus(&self) -> f64 {
        self.l_minus / self.k_minus
    }

    /// `max(-r_plus, -r_minus, 0)`: every spectral value must exceed it.
    pub fn r_max(&self) -> f64 {
        (-self.r_plus()).max(-self.r_minus()).max(0.0)
    }

    /// Habitats exchanged; used by the reflection `x -> -x`.
    pub fn swapped(&self) -> Self {
        Self {
            k_plus: self.k_minus,
            k_minus: self.k_plus,
            l_plus: self.l_minus,
            l_minus: self.l_plus,
        }
    }
}

/// Arguments shared by the one-interval symbols.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolArgs {
    pub delta: f64,
    pub r: f64,
    pub z: Complex64,
}

impl SymbolArgs {
    pub fn new(delta: f64, r: f64, z: Complex64) -> Self {
        Self { delta, r, z }
    }

    pub fn real(delta: f64, r: f64, x: f64) -> Self {
        Self::new(delta, r, Complex64::new(x, 0.0))
    }

    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(SymbolError::NonPositiveLength(self.delta));
        }
        let r_m = (-self.r).max(0.0);
        if self.z.im == 0.0 && self.z.re <= r_m {
            return Err(SymbolError::BranchCut {
                re: self.z.re,
                im: self.z.im,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UvBranch {
    U,
    V,
}

/// Principal square root on `C \ (-inf, 0)`, with `sqrt(0) = 0`.
pub fn principal_sqrt(z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 && z.re < 0.0 {
        return Err(SymbolError::BranchCut { re: z.re, im: z.im });
    }
    Ok(z.sqrt())
}

/// `e^w - 1` without cancellation for small `|w|`.
pub(crate) fn expm1_c(w: Complex64) -> Complex64 {
    let (a, b) = (w.re, w.im);
    let half_sin = (0.5 * b).sin();
    Complex64::new(
        a.exp_m1() * b.cos() - 2.0 * half_sin * half_sin,
        a.exp() * b.sin(),
    )
}

/// Roots and exponentials shared by every symbol at one argument.
struct Pieces {
    m: Complex64,
    l: Complex64,
    e_m: Complex64,
    e_l: Complex64,
    /// `1 - e^{-delta (l + m)}` (`1 - e^{-2 delta m}` when `r = 0`).
    a: Complex64,
    /// Correction term: `u = a - b`, `v = a + b`.
    b: Complex64,
    zero_branch: bool,
}

fn pieces(args: &SymbolArgs) -> Result<Pieces> {
    args.validate()?;
    let d = args.delta;
    let m = principal_sqrt(args.z)?;
    let e_m = (-d * m).exp();
    if args.r.abs() < R_SWITCH {
        let a = -expm1_c(-2.0 * d * m);
        let b = 2.0 * d * m * e_m;
        return Ok(Pieces {
            m,
            l: m,
            e_m,
            e_l: e_m,
            a,
            b,
            zero_branch: true,
        });
    }
    pieces_general(args, m)
}

fn pieces_general(args: &SymbolArgs, m: Complex64) -> Result<Pieces> {
    let d = args.delta;
    let e_m = (-d * m).exp();
    let l = principal_sqrt(args.z + args.r)?;
    let s = l + m;
    let e_l = (-d * l).exp();
    let a = -expm1_c(-d * s);
    // (s^2 / r)(e_m - e_l) with l - m = r / s kept exact.
    let b = -e_m * s * s * expm1_c(-d * args.r / s) / args.r;
    Ok(Pieces {
        m,
        l,
        e_m,
        e_l,
        a,
        b,
        zero_branch: false,
    })
}

fn guard(value: Complex64, factor: &'static str, z: Complex64) -> Result<Complex64> {
    if value.norm() < VANISHING_GUARD || !value.is_finite() {
        return Err(SymbolError::Vanishing {
            factor,
            re: z.re,
            im: z.im,
        });
    }
    Ok(value)
}

/// `u_{delta,r}(z)` or `v_{delta,r}(z)`.
pub fn uv_symbol(branch: UvBranch, args: &SymbolArgs) -> Result<Complex64> {
    let p = pieces(args)?;
    Ok(match branch {
        UvBranch::U => p.a - p.b,
        UvBranch::V => p.a + p.b,
    })
}

/// The `r != 0` branch of `u` or `v` evaluated even below the small-`r`
/// switch. Used to check continuity across the switch.
pub fn uv_symbol_nonzero_branch(branch: UvBranch, args: &SymbolArgs) -> Result<Complex64> {
    let p = nonzero_pieces(args)?;
    Ok(match branch {
        UvBranch::U => p.a - p.b,
        UvBranch::V => p.a + p.b,
    })
}

/// The `r != 0` branch of `f_{delta,r,index}` evaluated even below the
/// small-`r` switch.
pub fn f_symbol_nonzero_branch(index: u8, args: &SymbolArgs) -> Result<Complex64> {
    let p = nonzero_pieces(args)?;
    f_from_pieces(index, &p, args.z)
}

fn nonzero_pieces(args: &SymbolArgs) -> Result<Pieces> {
    if args.r == 0.0 {
        return Err(SymbolError::WrongCase("r = 0 has no r != 0 form".into()));
    }
    args.validate()?;
    pieces_general(args, principal_sqrt(args.z)?)
}

fn f_from_pieces(index: u8, p: &Pieces, z: Complex64) -> Result<Complex64> {
    let u = guard(p.a - p.b, "u", z)?;
    let v = guard(p.a + p.b, "v", z)?;
    let e = p.e_m;
    let one = Complex64::new(1.0, 0.0);
    if p.zero_branch {
        return Ok(match index {
            1 => (1.0 / u + 1.0 / v) * (one - e * e),
            2 => (one - e).powi(2) / u + (one + e).powi(2) / v,
            3 => (one + e).powi(2) / u + (one - e).powi(2) / v,
            _ => return Err(SymbolError::WrongCase(format!("no f-index {index}"))),
        });
    }
    let s = p.l + p.m;
    let f = p.e_l;
    Ok(match index {
        1 => s * p.l / u * (one + e) * (one + f) + s * p.l / v * (one - e) * (one - f),
        2 => -s / u * (one + e) * (one - f) - s / v * (one - e) * (one + f),
        3 => -s / u * (one - e) * (one - f) - s / v * (one + e) * (one + f),
        _ => return Err(SymbolError::WrongCase(format!("no f-index {index}"))),
    })
}

/// `f_{delta,r,index}(z)` for `index` in `1..=3`.
pub fn f_symbol(index: u8, args: &SymbolArgs) -> Result<Complex64> {
    let p = pieces(args)?;
    f_from_pieces(index, &p, args.z)
}

/// `g_{delta,r}(z)`.
pub fn g_symbol(args: &SymbolArgs) -> Result<Complex64> {
    let p = pieces(args)?;
    let d = args.delta;
    if p.zero_branch {
        let e2 = p.e_m * p.e_m;
        let a2 = p.a * p.a;
        return Ok((1.0 + p.m) * a2 * a2 + 4.0 * a2 * e2 - 16.0 * d * d * args.z * e2 * e2);
    }
    // -l W + m Z rewritten as (m - l) Z + l (Z - W) so that the leading
    // cancellation between m and l is done analytically (m - l = -r / s).
    let s = p.l + p.m;
    let e_s = p.e_m * p.e_l;
    let a2 = p.a * p.a;
    let c = p.b * (p.e_m - p.e_l);
    let z_part = (a2 + c) * (a2 + c);
    let sum = p.e_m + p.e_l;
    let z_minus_w = -4.0 * a2 * e_s + 2.0 * a2 * c + c * c + p.b * p.b * sum * sum;
    Ok(-args.r / s * z_part + p.l * z_minus_w)
}

/// `(b1(z), b2(z))` of the case with both ratios nonzero.
pub fn b_symbols(coeffs: &CoefficientSet, z: Complex64) -> Result<(Complex64, Complex64)> {
    let r = coeffs.r_max();
    if z.im == 0.0 && z.re <= r {
        return Err(SymbolError::BranchCut { re: z.re, im: z.im });
    }
    let m = principal_sqrt(z)?;
    let lp = principal_sqrt(z + coeffs.r_plus())?;
    let lm = principal_sqrt(z + coeffs.r_minus())?;
    let sigma = lp + lm + 2.0 * m;
    let b2 = 1.0
        + coeffs.l_plus / coeffs.k_minus / ((lm + m) * sigma)
        + coeffs.l_minus / coeffs.k_plus / ((lp + m) * sigma);
    let b1 = -4.0 * coeffs.k_plus * coeffs.k_minus * (lp + m) * (lm + m) * sigma * b2;
    Ok((b1, b2))
}

/// Operators whose scalar images enter the 2x2 transmission systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PqOperator {
    P1Plus,
    P2Plus,
    P3Plus,
    P1Minus,
    P2Minus,
    P3Minus,
    Q1Minus,
    Q2Minus,
    Q3Minus,
}

fn real_arg(x: f64, floor: f64) -> Result<()> {
    if !(x > floor) {
        return Err(SymbolError::BranchCut { re: x, im: 0.0 });
    }
    Ok(())
}

/// The `P_i` scalar built by substituting the roots into the operator
/// expression for one strip of length `delta`.
fn p_scalar(index: u8, k: f64, delta: f64, r: f64, x: f64) -> Result<f64> {
    let args = SymbolArgs::real(delta, r, x);
    let p = pieces(&args)?;
    let z = args.z;
    let u = guard(p.a - p.b, "u", z)?.re;
    let v = guard(p.a + p.b, "v", z)?.re;
    let (m, l, e, f) = (p.m.re, p.l.re, p.e_m.re, p.e_l.re);
    let s = l + m;
    Ok(match index {
        1 => -k * s * ((1.0 + e) * (1.0 - f) / u + (1.0 - e) * (1.0 + f) / v),
        2 => -k * s * ((1.0 - e) * (1.0 - f) / u + (1.0 + e) * (1.0 + f) / v),
        3 => k * s * l * ((1.0 + e) * (1.0 + f) / u + (1.0 - e) * (1.0 - f) / v),
        _ => return Err(SymbolError::WrongCase(format!("no P-index {index}"))),
    })
}

/// Scalar image of one of the `P_i^{+-}`, `Q_i^-` operators at `x`.
///
/// `c = gamma - a` and `d = b - gamma` are the strip lengths.
pub fn pq_scalar(
    which: PqOperator,
    coeffs: &CoefficientSet,
    c: f64,
    d: f64,
    x: f64,
) -> Result<f64> {
    use PqOperator::*;
    real_arg(x, coeffs.r_max())?;
    let (kp, km, rp, rm) = (
        coeffs.k_plus,
        coeffs.k_minus,
        coeffs.r_plus(),
        coeffs.r_minus(),
    );
    match which {
        P1Plus => p_scalar(1, kp, d, rp, x),
        P2Plus => p_scalar(2, kp, d, rp, x),
        P3Plus => p_scalar(3, kp, d, rp, x),
        P1Minus => p_scalar(1, km, c, rm, x),
        P2Minus => p_scalar(2, km, c, rm, x),
        P3Minus => p_scalar(3, km, c, rm, x),
        Q1Minus => Ok(km * f_symbol(1, &SymbolArgs::real(c, 0.0, x))?.re),
        Q2Minus => Ok(km * f_symbol(2, &SymbolArgs::real(c, 0.0, x))?.re),
        Q3Minus => Ok(km * f_symbol(3, &SymbolArgs::real(c, 0.0, x))?.re),
    }
}

fn fr(index: u8, delta: f64, r: f64, x: f64) -> Result<f64> {
    Ok(f_symbol(index, &SymbolArgs::real(delta, r, x))?.re)
}

fn gr(delta: f64, r: f64, x: f64) -> Result<f64> {
    Ok(g_symbol(&SymbolArgs::real(delta, r, x))?.re)
}

fn uvr(delta: f64, r: f64, x: f64) -> Result<(f64, f64)> {
    let args = SymbolArgs::real(delta, r, x);
    Ok((
        uv_symbol(UvBranch::U, &args)?.re,
        uv_symbol(UvBranch::V, &args)?.re,
    ))
}

/// `4 k^2 (l + m)^2 g / (u^2 v^2)` for one strip: the closed form of the
/// diagonal determinant block.
fn g_block(k: f64, delta: f64, r: f64, x: f64) -> Result<f64> {
    let (u, v) = uvr(delta, r, x)?;
    let m = x.sqrt();
    let s = if r.abs() < R_SWITCH {
        2.0 * m
    } else {
        (x + r).sqrt() + m
    };
    Ok(4.0 * k * k * s * s / (u * u * v * v) * gr(delta, r, x)?)
}

/// Which of the two coefficient cases with a nonzero right ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetCase {
    /// `r_plus != 0` and `r_minus != 0`.
    BothNonzero,
    /// `r_plus != 0` and `r_minus = 0`.
    MinusZero,
}

fn check_case(case: DetCase, coeffs: &CoefficientSet) -> Result<()> {
    let (rp, rm) = (coeffs.r_plus(), coeffs.r_minus());
    let zero = |r: f64| r.abs() < R_SWITCH;
    let ok = match case {
        DetCase::BothNonzero => !zero(rp) && !zero(rm),
        DetCase::MinusZero => !zero(rp) && zero(rm),
    };
    if ok {
        Ok(())
    } else {
        Err(SymbolError::WrongCase(format!(
            "{case:?} requested with r_plus = {rp}, r_minus = {rm}"
        )))
    }
}

/// Components `g1+`, `g1-`, `g2` of `f1 = g1+ + g1- + g2`.
pub fn f1_components(coeffs: &CoefficientSet, c: f64, d: f64, x: f64) -> Result<[f64; 3]> {
    check_case(DetCase::BothNonzero, coeffs)?;
    real_arg(x, coeffs.r_max())?;
    let (kp, km, rp, rm) = (
        coeffs.k_plus,
        coeffs.k_minus,
        coeffs.r_plus(),
        coeffs.r_minus(),
    );
    let g1p = g_block(kp, d, rp, x)?;
    let g1m = g_block(km, c, rm, x)?;
    let g2 = kp * fr(1, d, rp, x)? * km * fr(3, c, rm, x)?
        + km * fr(1, c, rm, x)? * kp * fr(3, d, rp, x)?
        - 2.0 * x.sqrt() * kp * fr(2, d, rp, x)? * km * fr(2, c, rm, x)?;
    Ok([g1p, g1m, g2])
}

/// Components `g3+`, `g3-`, `g4` of the printed `f2 = g3+ + g3- + g4`.
pub fn f2_components(coeffs: &CoefficientSet, c: f64, d: f64, x: f64) -> Result<[f64; 3]> {
    check_case(DetCase::MinusZero, coeffs)?;
    real_arg(x, coeffs.r_max())?;
    let (kp, km, rp) = (coeffs.k_plus, coeffs.k_minus, coeffs.r_plus());
    let g3p = g_block(kp, d, rp, x)?;
    let (u0, v0) = uvr(c, 0.0, x)?;
    let g3m = 16.0 * km * km * x / (u0 * u0 * v0 * v0) * gr(c, 0.0, x)?;
    let m = x.sqrt();
    let g4 = -2.0
        * m
        * (kp * fr(3, d, rp, x)? * km * fr(2, c, 0.0, x)?
            + kp * fr(2, d, rp, x)? * km * fr(3, c, 0.0, x)?)
        + 2.0 * x * kp * fr(1, d, rp, x)? * km * fr(1, c, 0.0, x)?;
    Ok([g3p, g3m, g4])
}

/// The determinant symbol: `f1(x)` for [`DetCase::BothNonzero`], the
/// printed `f2(x)` for [`DetCase::MinusZero`].
pub fn det_symbol(case: DetCase, coeffs: &CoefficientSet, c: f64, d: f64, x: f64) -> Result<f64> {
    let parts = match case {
        DetCase::BothNonzero => f1_components(coeffs, c, d, x)?,
        DetCase::MinusZero => f2_components(coeffs, c, d, x)?,
    };
    Ok(parts.iter().sum())
}

/// Identities checked by [`factorization_residual`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FactorizationKind {
    D1Plus,
    D1Minus,
    D3Plus,
    D3Minus,
    DetLambda1,
    DetLambda2,
    UPlusV,
    UTimesV,
}

impl FactorizationKind {
    pub const ALL: [FactorizationKind; 8] = [
        Self::D1Plus,
        Self::D1Minus,
        Self::D3Plus,
        Self::D3Minus,
        Self::DetLambda1,
        Self::DetLambda2,
        Self::UPlusV,
        Self::UTimesV,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::D1Plus => "D1+",
            Self::D1Minus => "D1-",
            Self::D3Plus => "D3+",
            Self::D3Minus => "D3-",
            Self::DetLambda1 => "detLambda1",
            Self::DetLambda2 => "detLambda2",
            Self::UPlusV => "UplusV",
            Self::UTimesV => "UtimesV",
        }
    }

    /// Coefficient case the identity belongs to, `None` when it applies to
    /// every case.
    pub fn case(&self) -> Option<DetCase> {
        match self {
            Self::D1Plus | Self::D1Minus | Self::DetLambda1 => Some(DetCase::BothNonzero),
            Self::D3Plus | Self::D3Minus | Self::DetLambda2 => Some(DetCase::MinusZero),
            Self::UPlusV | Self::UTimesV => None,
        }
    }
}

fn relative(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(RESIDUAL_FLOOR)
}

/// Pieces of the 2x2 systems assembled from [`pq_scalar`].
struct PqSet {
    p_plus: [f64; 3],
    p_minus: [f64; 3],
    q_minus: [f64; 3],
}

fn pq_set(
    coeffs: &CoefficientSet,
    c: f64,
    d: f64,
    x: f64,
    with_p_minus: bool,
    with_q: bool,
) -> Result<PqSet> {
    use PqOperator::*;
    let get = |w| pq_scalar(w, coeffs, c, d, x);
    let p_plus = [get(P1Plus)?, get(P2Plus)?, get(P3Plus)?];
    let p_minus = if with_p_minus {
        [get(P1Minus)?, get(P2Minus)?, get(P3Minus)?]
    } else {
        [0.0; 3]
    };
    let q_minus = if with_q {
        [get(Q1Minus)?, get(Q2Minus)?, get(Q3Minus)?]
    } else {
        [0.0; 3]
    };
    Ok(PqSet {
        p_plus,
        p_minus,
        q_minus,
    })
}

/// `|LHS - RHS| / max(|LHS|, |RHS|, tiny)` for one identity at `x`.
///
/// The left side is assembled from the `P`/`Q` scalars exactly as the
/// determinant blocks are formed from operators; the right side is the
/// factorized closed form in terms of `u`, `v`, `f_i` and `g`.
pub fn factorization_residual(
    kind: FactorizationKind,
    coeffs: &CoefficientSet,
    c: f64,
    d: f64,
    x: f64,
) -> Result<f64> {
    use FactorizationKind::*;
    if let Some(case) = kind.case() {
        check_case(case, coeffs)?;
    }
    real_arg(x, coeffs.r_max())?;
    let mm = -x.sqrt();
    match kind {
        D1Plus | D1Minus => {
            let pq = pq_set(coeffs, c, d, x, true, false)?;
            let (p, k, delta, r) = if kind == D1Plus {
                (pq.p_plus, coeffs.k_plus, d, coeffs.r_plus())
            } else {
                (pq.p_minus, coeffs.k_minus, c, coeffs.r_minus())
            };
            let lhs = mm * p[0] * p[0] - p[2] * p[1];
            let rhs = -g_block(k, delta, r, x)?;
            Ok(relative(lhs, rhs))
        }
        DetLambda1 => {
            let pq = pq_set(coeffs, c, d, x, true, false)?;
            let (pp, pm) = (pq.p_plus, pq.p_minus);
            let lhs = mm * (pm[0] - pp[0]).powi(2) - (pp[1] + pm[1]) * (pp[2] + pm[2]);
            let rhs = -det_symbol(DetCase::BothNonzero, coeffs, c, d, x)?;
            Ok(relative(lhs, rhs))
        }
        D3Plus => {
            let pq = pq_set(coeffs, c, d, x, false, false)?;
            let p = pq.p_plus;
            let lhs = -mm * p[0] * p[0] + p[1] * p[2];
            let rhs = g_block(coeffs.k_plus, d, coeffs.r_plus(), x)?;
            Ok(relative(lhs, rhs))
        }
        D3Minus => {
            let pq = pq_set(coeffs, c, d, x, false, true)?;
            let q = pq.q_minus;
            let (a, b) = (2.0 * mm * q[0], 2.0 * mm);
            let lhs = -mm * a * a + (b * q[1]) * (b * q[2]);
            let (u0, v0) = uvr(c, 0.0, x)?;
            let km = coeffs.k_minus;
            let rhs = 16.0 * km * km * x / (u0 * u0 * v0 * v0) * gr(c, 0.0, x)?;
            Ok(relative(lhs, rhs))
        }
        DetLambda2 => {
            // Determinant of the system as printed, against the closed-form
            // diagonal blocks plus the cross term written with f-symbols.
            let pq = pq_set(coeffs, c, d, x, false, true)?;
            let (p, q) = (pq.p_plus, pq.q_minus);
            let lhs = -mm * (p[0] - 2.0 * mm * q[0]).powi(2)
                + (p[2] + 2.0 * mm * q[2]) * (p[1] + 2.0 * mm * q[1]);
            let [g3p, g3m, _] = f2_components(coeffs, c, d, x)?;
            let (kp, km, rp) = (coeffs.k_plus, coeffs.k_minus, coeffs.r_plus());
            let cross = 2.0
                * mm
                * (kp * fr(1, d, rp, x)? * km * fr(2, c, 0.0, x)?
                    + kp * fr(3, d, rp, x)? * km * fr(3, c, 0.0, x)?)
                + 4.0 * x * kp * fr(2, d, rp, x)? * km * fr(1, c, 0.0, x)?;
            Ok(relative(lhs, g3p + g3m + cross))
        }
        UPlusV | UTimesV => {
            let mut worst: f64 = 0.0;
            for (delta, r) in [(d, coeffs.r_plus()), (c, coeffs.r_minus())] {
                let (u, v) = uvr(delta, r, x)?;
                let m = x.sqrt();
                let res = if r.abs() < R_SWITCH {
                    let e = (-delta * m).exp();
                    let one_m = 1.0 - e * e;
                    if kind == UPlusV {
                        relative(u + v, 2.0 * one_m)
                    } else {
                        relative(u * v, one_m * one_m - 4.0 * delta * delta * x * e * e)
                    }
                } else {
                    let l = (x + r).sqrt();
                    let s = l + m;
                    let es = (-delta * s).exp();
                    if kind == UPlusV {
                        relative(u + v, 2.0 * (1.0 - es))
                    } else {
                        let diff = (-delta * m).exp() - (-delta * l).exp();
                        relative(u * v, (1.0 - es).powi(2) - (s * s / r * diff).powi(2))
                    }
                };
                worst = worst.max(res);
            }
            Ok(worst)
        }
    }
}

/// Symbols covered by [`sign_scan`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScanSymbol {
    U,
    V,
    F1,
    F2,
    F3,
    G,
}

impl ScanSymbol {
    pub const ALL: [ScanSymbol; 6] = [Self::U, Self::V, Self::F1, Self::F2, Self::F3, Self::G];

    pub fn name(&self) -> &'static str {
        match self {
            Self::U => "u",
            Self::V => "v",
            Self::F1 => "f1",
            Self::F2 => "f2",
            Self::F3 => "f3",
            Self::G => "g",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }

    /// Expected sign (+1 or -1) of the symbol on the real axis right of `r_m`.
    pub fn expected_sign(&self, r: f64) -> f64 {
        let zero = r.abs() < R_SWITCH;
        match self {
            Self::U | Self::V | Self::F1 => 1.0,
            Self::F2 | Self::F3 | Self::G if zero => 1.0,
            Self::F2 | Self::F3 | Self::G => -1.0,
        }
    }

    pub fn evaluate(&self, args: &SymbolArgs) -> Result<f64> {
        let value = match self {
            Self::U => uv_symbol(UvBranch::U, args)?,
            Self::V => uv_symbol(UvBranch::V, args)?,
            Self::F1 => f_symbol(1, args)?,
            Self::F2 => f_symbol(2, args)?,
            Self::F3 => f_symbol(3, args)?,
            Self::G => g_symbol(args)?,
        };
        Ok(value.re)
    }
}

/// Sampling box of a sign scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRanges {
    pub delta: (f64, f64),
    /// Negative ratios, `lo < hi < 0`.
    pub r_negative: (f64, f64),
    /// Positive ratios, `0 < lo < hi`.
    pub r_positive: (f64, f64),
    /// Whether `r = 0` is one of the three equally likely pieces.
    pub include_zero: bool,
    /// `x` is drawn from `(r_m, r_m + x_width]`.
    pub x_width: f64,
}

impl Default for ScanRanges {
    fn default() -> Self {
        Self {
            delta: (0.1, 10.0),
            r_negative: (-5.0, -0.01),
            r_positive: (0.01, 5.0),
            include_zero: true,
            x_width: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSample {
    pub delta: f64,
    pub r: f64,
    pub x: f64,
    pub value: f64,
    pub violation: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanReport {
    pub symbol: ScanSymbol,
    pub samples: Vec<ScanSample>,
    pub min: f64,
    pub max: f64,
    pub violations: usize,
    /// Samples where evaluation failed (counted as violations).
    pub errors: usize,
}

impl ScanReport {
    pub fn first_violation(&self) -> Option<&ScanSample> {
        self.samples.iter().find(|s| s.violation)
    }
}

/// Seeded sample points `(delta, r, x)` of a scan, in a fixed order.
pub fn scan_points(ranges: &ScanRanges, count: usize, seed: u64) -> Vec<(f64, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pieces = if ranges.include_zero { 3 } else { 2 };
    (0..count)
        .map(|_| {
            let delta = rng.gen_range(ranges.delta.0..=ranges.delta.1);
            let r = match rng.gen_range(0..pieces) {
                0 => rng.gen_range(ranges.r_negative.0..=ranges.r_negative.1),
                1 => rng.gen_range(ranges.r_positive.0..=ranges.r_positive.1),
                _ => 0.0,
            };
            let r_m = (-r).max(0.0);
            let x = r_m + ranges.x_width * (1.0 - rng.gen::<f64>());
            (delta, r, x)
        })
        .collect()
}

/// Samples the symbol on the real axis and records every sign violation.
pub fn sign_scan(symbol: ScanSymbol, ranges: &ScanRanges, count: usize, seed: u64) -> ScanReport {
    let mut samples = Vec::with_capacity(count);
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut violations, mut errors) = (0, 0);
    for (delta, r, x) in scan_points(ranges, count, seed) {
        let (value, violation) = match symbol.evaluate(&SymbolArgs::real(delta, r, x)) {
            Ok(v) => {
                min = min.min(v);
                max = max.max(v);
                (v, !(v * symbol.expected_sign(r) > 0.0))
            }
            Err(_) => {
                errors += 1;
                (f64::NAN, true)
            }
        };
        violations += violation as usize;
        samples.push(ScanSample {
            delta,
            r,
            x,
            value,
            violation,
        });
    }
    ScanReport {
        symbol,
        samples,
        min,
        max,
        violations,
        errors,
    }
}
