//! Finite-difference reference solver for single modes.
//!
//! Discretizes the per-mode ODE, the clamped end conditions and the four
//! interface conditions directly with second-order stencils and solves the
//! resulting banded system. It shares no numerics with the exponential-basis
//! solver and only reads the problem data.

use thiserror::Error;

use crate::mode_solver::{Forcing, ModeProblem, ModeSolution};

/// Minimum number of interior nodes per interval.
pub const MIN_INTERIOR_NODES: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("step h = {h} leaves fewer than {MIN_INTERIOR_NODES} interior nodes on an interval of length {length}")]
    StepTooLarge { h: f64, length: f64 },
    #[error("singular finite-difference system at h = {h} (pivot column {column})")]
    Singular { h: f64, column: usize },
    #[error("lambda = {lambda} must exceed max(-r, 0) = {bound}")]
    Spectral { lambda: f64, bound: f64 },
    #[error("interval ordering a < gamma < b violated")]
    Geometry,
}

pub type Result<T> = std::result::Result<T, OracleError>;

/// Square banded matrix with partial-pivoting LU on band storage.
///
/// Row `i` stores columns `i - kl ..= i + kl + ku`; the extra `kl` columns
/// absorb fill-in from row exchanges.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    /// Builds a band matrix from `(row, col, value)` triplets, deriving the
    /// bandwidths from the entries.
    pub fn from_triplets(n: usize, entries: &[(usize, usize, f64)]) -> Self {
        let kl = entries
            .iter()
            .map(|&(i, j, _)| i.saturating_sub(j))
            .max()
            .unwrap_or(0);
        let ku = entries
            .iter()
            .map(|&(i, j, _)| j.saturating_sub(i))
            .max()
            .unwrap_or(0);
        let mut m = Self::zeros(n, kl, ku);
        for &(i, j, v) in entries {
            *m.at(i, j) += v;
        }
        m
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn at(&mut self, i: usize, j: usize) -> &mut f64 {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        &mut self.data[i * self.width + (j + self.kl - i)]
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.kl + self.ku || j >= self.n {
            0.0
        } else {
            self.data[i * self.width + (j + self.kl - i)]
        }
    }

    /// Solves `A x = rhs` in place by Gaussian elimination with partial
    /// pivoting. Returns the first column whose pivot vanished on failure.
    pub fn solve(mut self, mut rhs: Vec<f64>) -> std::result::Result<Vec<f64>, usize> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let reach = kl + ku;
        let scale = self.data.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        for col in 0..n {
            let last_row = (col + kl).min(n - 1);
            let mut piv = col;
            for r in col + 1..=last_row {
                if self.get(r, col).abs() > self.get(piv, col).abs() {
                    piv = r;
                }
            }
            if self.get(piv, col).abs() <= f64::EPSILON * 1e-3 * scale {
                return Err(col);
            }
            let last_col = (col + reach).min(n - 1);
            if piv != col {
                for j in col..=last_col {
                    let a = self.get(col, j);
                    let b = self.get(piv, j);
                    *self.at(col, j) = b;
                    *self.at(piv, j) = a;
                }
                rhs.swap(col, piv);
            }
            let p = self.get(col, col);
            for r in col + 1..=last_row {
                let factor = self.get(r, col) / p;
                if factor == 0.0 {
                    continue;
                }
                *self.at(r, col) = 0.0;
                for j in col + 1..=last_col {
                    let v = self.get(col, j);
                    if v != 0.0 {
                        *self.at(r, j) -= factor * v;
                    }
                }
                rhs[r] -= factor * rhs[col];
            }
        }
        for i in (0..n).rev() {
            let mut acc = rhs[i];
            for j in i + 1..=(i + reach).min(n - 1) {
                acc -= self.get(i, j) * rhs[j];
            }
            rhs[i] = acc / self.get(i, i);
        }
        Ok(rhs)
    }
}

/// Finite-difference solution on one interval.
#[derive(Debug, Clone, PartialEq)]
pub struct FdInterval {
    pub h: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
}

impl FdInterval {
    /// One-sided second-order first derivative at the left end.
    pub fn d1_left(&self) -> f64 {
        (-3.0 * self.u[0] + 4.0 * self.u[1] - self.u[2]) / (2.0 * self.h)
    }

    /// One-sided second-order first derivative at the right end.
    pub fn d1_right(&self) -> f64 {
        let n = self.u.len() - 1;
        (3.0 * self.u[n] - 4.0 * self.u[n - 1] + self.u[n - 2]) / (2.0 * self.h)
    }

    /// One-sided second-order third derivative at the left end.
    pub fn d3_left(&self) -> f64 {
        let w = D3_FORWARD;
        (0..5).map(|i| w[i] * self.u[i]).sum::<f64>() / self.h.powi(3)
    }

    /// One-sided second-order third derivative at the right end.
    pub fn d3_right(&self) -> f64 {
        let n = self.u.len() - 1;
        let w = D3_FORWARD;
        -(0..5).map(|i| w[i] * self.u[n - i]).sum::<f64>() / self.h.powi(3)
    }
}

/// Finite-difference solution of a two-interval mode problem. The interface
/// node appears in both intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct FdGrid {
    pub minus: FdInterval,
    pub plus: FdInterval,
}

impl FdGrid {
    /// `(x, u)` over both intervals; the interface node is listed once per
    /// interval.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.minus
            .x
            .iter()
            .zip(&self.minus.u)
            .chain(self.plus.x.iter().zip(&self.plus.u))
            .map(|(x, u)| (*x, *u))
    }
}

const D1_FORWARD: [f64; 3] = [-1.5, 2.0, -0.5];
const D2_FORWARD: [f64; 4] = [2.0, -5.0, 4.0, -1.0];
const D3_FORWARD: [f64; 5] = [-2.5, 9.0, -12.0, 7.0, -1.5];

fn interval_count(length: f64, h: f64) -> Result<usize> {
    let n = (length / h).round() as usize;
    if n < MIN_INTERIOR_NODES + 1 {
        return Err(OracleError::StepTooLarge { h, length });
    }
    Ok(n)
}

fn check_spectral(lambda: f64, r: f64) -> Result<()> {
    let bound = (-r).max(0.0);
    if !(lambda > bound) {
        return Err(OracleError::Spectral { lambda, bound });
    }
    Ok(())
}

/// Row builder that keeps the triplet list and right-hand side in step.
struct Rows {
    entries: Vec<(usize, usize, f64)>,
    rhs: Vec<f64>,
}

impl Rows {
    fn new(n: usize) -> Self {
        Self {
            entries: Vec::new(),
            rhs: vec![0.0; n],
        }
    }

    fn add(&mut self, row: usize, col: usize, v: f64) {
        self.entries.push((row, col, v));
    }

    /// Adds the centered ODE stencil at node `i` of an interval whose node
    /// 0 sits in column `offset`.
    #[allow(clippy::too_many_arguments)]
    fn ode(&mut self, row: usize, offset: usize, i: usize, h: f64, lambda: f64, r: f64, f: f64) {
        let d4 = [1.0, -4.0, 6.0, -4.0, 1.0];
        let d2 = [0.0, 1.0, -2.0, 1.0, 0.0];
        let c2 = -(2.0 * lambda + r);
        let c0 = lambda * (lambda + r);
        let (h2, h4) = (h * h, h.powi(4));
        for k in 0..5 {
            let mut v = d4[k] / h4 + c2 * d2[k] / h2;
            if k == 2 {
                v += c0;
            }
            self.add(row, offset + i + k - 2, v);
        }
        self.rhs[row] = f;
    }

    /// Scales every row by its largest coefficient and solves.
    fn solve(mut self, n: usize, h: f64) -> Result<Vec<f64>> {
        let mut row_max = vec![0.0f64; n];
        for &(i, _, v) in &self.entries {
            row_max[i] = row_max[i].max(v.abs());
        }
        for e in &mut self.entries {
            e.2 /= row_max[e.0];
        }
        for (b, s) in self.rhs.iter_mut().zip(&row_max) {
            *b /= s;
        }
        BandMatrix::from_triplets(n, &self.entries)
            .solve(self.rhs)
            .map_err(|column| OracleError::Singular { h, column })
    }
}

/// Solves the mode problem with `n_minus` and `n_plus` subintervals.
pub fn fd_solve_mode_n(mp: &ModeProblem, n_minus: usize, n_plus: usize) -> Result<FdGrid> {
    if !(mp.a < mp.gamma && mp.gamma < mp.b) {
        return Err(OracleError::Geometry);
    }
    let (lam, k) = (mp.lambda, &mp.coeffs);
    let (rp, rm) = (k.l_plus / k.k_plus, k.l_minus / k.k_minus);
    check_spectral(lam, rp)?;
    check_spectral(lam, rm)?;
    let (nm, np) = (n_minus, n_plus);
    let hm = (mp.gamma - mp.a) / nm as f64;
    let hp = (mp.b - mp.gamma) / np as f64;
    for (n, len, h) in [(nm, mp.gamma - mp.a, hm), (np, mp.b - mp.gamma, hp)] {
        if n < MIN_INTERIOR_NODES + 1 {
            return Err(OracleError::StepTooLarge { h, length: len });
        }
    }
    let xm: Vec<f64> = (0..=nm)
        .map(|i| {
            if i == nm {
                mp.gamma
            } else {
                mp.a + i as f64 * hm
            }
        })
        .collect();
    let xp: Vec<f64> = (0..=np)
        .map(|j| {
            if j == np {
                mp.b
            } else {
                mp.gamma + j as f64 * hp
            }
        })
        .collect();
    let size = nm + np + 2;
    let pc = nm + 1; // column of plus node 0
    let mut rows = Rows::new(size);

    rows.add(0, 0, 1.0);
    rows.rhs[0] = mp.phi_minus[0];
    for (k, w) in D1_FORWARD.iter().enumerate() {
        rows.add(1, k, w / hm);
    }
    rows.rhs[1] = mp.phi_minus[1];
    for i in 2..=nm - 2 {
        rows.ode(i, 0, i, hm, lam, rm, mp.f_minus.eval(xm[i]));
    }

    // Interface rows; minus stencils run leftwards from column nm.
    let t = nm - 1;
    rows.add(t, nm, 1.0);
    rows.add(t, pc, -1.0);
    for (q, w) in D1_FORWARD.iter().enumerate() {
        rows.add(t + 1, nm - q, -w / hm);
        rows.add(t + 1, pc + q, -w / hp);
    }
    for (q, w) in D2_FORWARD.iter().enumerate() {
        rows.add(t + 2, nm - q, k.k_minus * w / (hm * hm));
        rows.add(t + 2, pc + q, -k.k_plus * w / (hp * hp));
    }
    rows.add(t + 2, nm, -lam * k.k_minus);
    rows.add(t + 2, pc, lam * k.k_plus);
    let gm = -(lam * k.k_minus + k.l_minus);
    let gp = -(lam * k.k_plus + k.l_plus);
    for (q, w) in D3_FORWARD.iter().enumerate() {
        rows.add(t + 3, nm - q, -k.k_minus * w / hm.powi(3));
        rows.add(t + 3, pc + q, -k.k_plus * w / hp.powi(3));
    }
    for (q, w) in D1_FORWARD.iter().enumerate() {
        rows.add(t + 3, nm - q, -gm * w / hm);
        rows.add(t + 3, pc + q, -gp * w / hp);
    }

    for j in 2..=np - 2 {
        rows.ode(pc + j, pc, j, hp, lam, rp, mp.f_plus.eval(xp[j]));
    }
    let last = size - 1;
    for (q, w) in D1_FORWARD.iter().enumerate() {
        rows.add(last - 1, last - q, -w / hp);
    }
    rows.rhs[last - 1] = mp.phi_plus[1];
    rows.add(last, last, 1.0);
    rows.rhs[last] = mp.phi_plus[0];

    let u = rows.solve(size, hm.min(hp))?;
    Ok(FdGrid {
        minus: FdInterval {
            h: hm,
            x: xm,
            u: u[..=nm].to_vec(),
        },
        plus: FdInterval {
            h: hp,
            x: xp,
            u: u[pc..].to_vec(),
        },
    })
}

/// Solves the mode problem with step `h`, adjusted per interval to the
/// nearest divisor of its length.
pub fn fd_solve_mode(mp: &ModeProblem, h: f64) -> Result<FdGrid> {
    let nm = interval_count(mp.gamma - mp.a, h)?;
    let np = interval_count(mp.b - mp.gamma, h)?;
    fd_solve_mode_n(mp, nm, np)
}

/// Solves `u'''' - (2 lambda + r) u'' + lambda (lambda + r) u = f` on
/// `[x0, x1]` with `u = u'' = 0` at both ends using `n` subintervals.
pub fn fd_solve_auxiliary(
    lambda: f64,
    r: f64,
    f: &Forcing,
    x0: f64,
    x1: f64,
    n: usize,
) -> Result<FdInterval> {
    check_spectral(lambda, r)?;
    let h = (x1 - x0) / n as f64;
    if n < MIN_INTERIOR_NODES + 1 {
        return Err(OracleError::StepTooLarge { h, length: x1 - x0 });
    }
    let x: Vec<f64> = (0..=n)
        .map(|i| if i == n { x1 } else { x0 + i as f64 * h })
        .collect();
    let mut rows = Rows::new(n + 1);
    rows.add(0, 0, 1.0);
    for (q, w) in D2_FORWARD.iter().enumerate() {
        rows.add(1, q, w / (h * h));
        rows.add(n - 1, n - q, w / (h * h));
    }
    for i in 2..=n - 2 {
        rows.ode(i, 0, i, h, lambda, r, f.eval(x[i]));
    }
    rows.add(n, n, 1.0);
    let u = rows.solve(n + 1, h)?;
    Ok(FdInterval { h, x, u })
}

/// Error of a mode solution against a finite-difference grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridError {
    pub max_err: f64,
    /// Discrete L2 norm `sqrt(sum h e_i^2)` over both intervals.
    pub l2_err: f64,
    /// Largest `|u|` of the mode solution at the nodes.
    pub max_abs: f64,
}

/// Samples `ms` at the nodes of `fd`.
pub fn grid_error(ms: &ModeSolution, fd: &FdGrid) -> GridError {
    let mut max_err: f64 = 0.0;
    let mut max_abs: f64 = 0.0;
    let mut l2 = 0.0;
    for (side, interval) in [
        (crate::mode_solver::Side::Minus, &fd.minus),
        (crate::mode_solver::Side::Plus, &fd.plus),
    ] {
        for (x, u) in interval.x.iter().zip(&interval.u) {
            let exact = ms.eval(side, *x)[0];
            let e = (exact - u).abs();
            max_err = max_err.max(e);
            max_abs = max_abs.max(exact.abs());
            l2 += interval.h * e * e;
        }
    }
    GridError {
        max_err,
        l2_err: l2.sqrt(),
        max_abs,
    }
}

/// Result of comparing a mode solution with the grids `h, h/2, h/4`.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// Steps of the three grids (minus interval).
    pub h: [f64; 3],
    pub errors: [GridError; 3],
    /// `log2(e_{h/2} / e_{h/4})` of the max errors.
    pub observed_order: f64,
    /// Max error of the Richardson extrapolation at the coarse nodes,
    /// relative to `max(max |u|, 1e-300)`.
    pub extrapolated_rel_err: f64,
}

/// Exponents of the error expansion removed by the extrapolation; the
/// one-sided closures contribute odd powers.
const RICHARDSON_POWERS: [i32; 3] = [2, 3, 4];

/// Runs the grid study with coarse step `h`.
///
/// Errors and the observed order use the grids `h`, `h/2`, `h/4`; the
/// extrapolation adds `h/8` and removes the terms in [`RICHARDSON_POWERS`].
pub fn compare(ms: &ModeSolution, mp: &ModeProblem, h: f64) -> Result<Comparison> {
    let nm = interval_count(mp.gamma - mp.a, h)?;
    let np = interval_count(mp.b - mp.gamma, h)?;
    let grids = [
        fd_solve_mode_n(mp, nm, np)?,
        fd_solve_mode_n(mp, 2 * nm, 2 * np)?,
        fd_solve_mode_n(mp, 4 * nm, 4 * np)?,
        fd_solve_mode_n(mp, 8 * nm, 8 * np)?,
    ];
    let errors = [
        grid_error(ms, &grids[0]),
        grid_error(ms, &grids[1]),
        grid_error(ms, &grids[2]),
    ];
    let observed_order = (errors[1].max_err / errors[2].max_err).log2();

    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (side, pick) in [
        (
            crate::mode_solver::Side::Minus,
            (|g: &FdGrid| &g.minus) as fn(&FdGrid) -> &FdInterval,
        ),
        (crate::mode_solver::Side::Plus, |g: &FdGrid| &g.plus),
    ] {
        let coarse = pick(&grids[0]);
        for (i, x) in coarse.x.iter().enumerate() {
            let mut table: Vec<f64> = grids
                .iter()
                .enumerate()
                .map(|(level, g)| pick(g).u[i << level])
                .collect();
            for p in RICHARDSON_POWERS {
                let w = 2f64.powi(p);
                table = table
                    .windows(2)
                    .map(|t| (w * t[1] - t[0]) / (w - 1.0))
                    .collect();
            }
            let exact = ms.eval(side, *x)[0];
            worst = worst.max((table[0] - exact).abs());
            scale = scale.max(exact.abs());
        }
    }
    Ok(Comparison {
        h: [grids[0].minus.h, grids[1].minus.h, grids[2].minus.h],
        errors,
        observed_order,
        extrapolated_rel_err: if worst == 0.0 {
            0.0
        } else {
            worst / scale.max(1e-300)
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mode_solver::{solve_auxiliary, solve_mode};
    use crate::quadrature::Quadrature;
    use crate::symbols::CoefficientSet;

    fn cos_problem() -> ModeProblem {
        let c = CoefficientSet::new(1.0, 1.0, 2.0, 2.0).unwrap();
        let mut mp = ModeProblem::new(4.0, c, 0.0, 1.0, 2.0);
        mp.f_minus = Forcing::function(|x: f64| 35.0 * x.cos());
        mp.f_plus = mp.f_minus.clone();
        mp.phi_minus = [1.0, 0.0];
        mp.phi_plus = [2f64.cos(), -2f64.sin()];
        mp
    }

    #[test]
    fn band_solver_matches_dense() {
        let n = 12;
        let mut entries = Vec::new();
        let mut dense = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(2)..(i + 4).min(n) {
                // Small diagonal forces pivoting.
                let v = if i == j {
                    1e-3
                } else {
                    ((i * 7 + j * 3) % 5) as f64 - 1.7
                };
                entries.push((i, j, v));
                dense[(i, j)] = v;
            }
        }
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = BandMatrix::from_triplets(n, &entries)
            .solve(rhs.clone())
            .unwrap();
        let b = &dense * nalgebra::DVector::from_vec(x);
        for i in 0..n {
            assert!((b[i] - rhs[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_problem_gives_zero_grid() {
        let c = CoefficientSet::new(1.0, 2.0, 1.0, 0.5).unwrap();
        let mp = ModeProblem::new(3.0, c, 0.0, 1.0, 2.0);
        let fd = fd_solve_mode(&mp, 0.05).unwrap();
        assert!(fd.nodes().all(|(_, u)| u == 0.0));
        let ms = solve_mode(&mp).unwrap();
        let e = grid_error(&ms, &fd);
        assert_eq!((e.max_err, e.l2_err), (0.0, 0.0));
    }

    #[test]
    fn cosine_at_fine_step() {
        let fd = fd_solve_mode(&cos_problem(), 1e-3).unwrap();
        let err = fd
            .nodes()
            .map(|(x, u)| (u - x.cos()).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-4, "{err}");
    }

    #[test]
    fn second_order_convergence() {
        let mp = cos_problem();
        let ms = solve_mode(&mp).unwrap();
        let cmp = compare(&ms, &mp, 1.0 / 20.0).unwrap();
        assert!((1.7..=2.3).contains(&cmp.observed_order), "{cmp:?}");
        assert!(cmp.extrapolated_rel_err < 1e-6, "{cmp:?}");
    }

    #[test]
    fn rejects_coarse_steps() {
        assert!(matches!(
            fd_solve_mode(&cos_problem(), 0.5),
            Err(OracleError::StepTooLarge { .. })
        ));
    }

    #[test]
    fn auxiliary_traces_match_basis_solver() {
        let f = Forcing::function(|x: f64| 1.0 + x.sin());
        let (lam, r, x0, x1) = (5.0, 1.3, 1.0, 2.0);
        let exact = solve_auxiliary(lam, r, f.clone(), x0, x1, Quadrature::default()).unwrap();
        let fine = fd_solve_auxiliary(lam, r, &f, x0, x1, 400).unwrap();
        let h2 = fine.h * fine.h;
        assert!((fine.d1_left() - exact.eval(x0)[1]).abs() < 10.0 * h2);
        assert!((fine.d3_left() - exact.eval(x0)[3]).abs() < 100.0 * h2);
        assert!((fine.d1_right() - exact.eval(x1)[1]).abs() < 10.0 * h2);
    }
}
