//! Two-habitat transmission problems for the generalized diffusion equation
//! `k Δ²u − l Δu = g`, solved by sine-mode reduction, together with scalar
//! symbol checks of the conditions that make the interface system solvable.

// `!(a > b)` is used on purpose so that NaN counts as a failed check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod field;
pub mod mode_solver;
pub mod oracle;
pub mod quadrature;
pub mod regime;
pub mod symbols;

pub use mode_solver::{solve_mode, Forcing, ModeProblem, ModeSolution, SolveError};
pub use regime::{check_admissibility, classify, CaseLabel, Mirror, RegimeReport, SpectrumInfo};
pub use symbols::{CoefficientSet, SymbolArgs, SymbolError};
