//! Coefficient-regime classification and admissibility checks.
//!
//! A coefficient set falls in one of four cases according to which of the
//! ratios `r± = l±/k±` vanish. Each case with at least one nonzero ratio has
//! a list of sufficient inequalities that guarantee a unique classical
//! solution; on top of those every spectral value of the cross-section
//! operator must lie right of `max(-r+, -r-, 0)`.

use std::fmt;

use thiserror::Error;

use crate::symbols::CoefficientSet;

/// Relative tolerance for weak inequalities.
pub const WEAK_TOL: f64 = 1e-12;
/// Number of log-spaced trial values of the free parameter `t`.
pub const T_GRID: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegimeError {
    #[error("t = {t} outside the admissible interval (0, {upper})")]
    InvalidT { t: f64, upper: f64 },
    #[error("lambda_min must be positive, got {0}")]
    InvalidSpectrum(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn of(r: f64) -> Self {
        if r > 0.0 {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    fn symbol(&self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseLabel {
    /// Both ratios nonzero, with the signs of `(r+, r-)`.
    BothNonzero(Sign, Sign),
    RminusZero,
    RplusZero,
    BothZero,
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CaseLabel::BothNonzero(p, m) => write!(f, "BothNonzero({},{})", p.symbol(), m.symbol()),
            CaseLabel::RminusZero => write!(f, "RminusZero"),
            CaseLabel::RplusZero => write!(f, "RplusZero"),
            CaseLabel::BothZero => write!(f, "BothZero"),
        }
    }
}

/// Spectrum of the cross-section operator in the diagonal model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumInfo {
    pub lambda_min: f64,
    pub inv_norm: f64,
}

impl SpectrumInfo {
    pub fn new(lambda_min: f64) -> Result<Self, RegimeError> {
        if !(lambda_min > 0.0) || !lambda_min.is_finite() {
            return Err(RegimeError::InvalidSpectrum(lambda_min));
        }
        Ok(Self {
            lambda_min,
            inv_norm: 1.0 / lambda_min,
        })
    }

    /// Dirichlet sine spectrum on `(0, ell)`: `lambda_min = (pi/ell)^2`.
    pub fn sine(ell: f64) -> Result<Self, RegimeError> {
        Self::new((std::f64::consts::PI / ell).powi(2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    /// `value >= threshold`
    AtLeast,
    /// `value <= threshold`
    AtMost,
}

/// One inequality of a regime check.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub relation: Relation,
    /// Signed distance to the threshold; nonnegative means satisfied
    /// before the tolerance is applied.
    pub margin: f64,
    pub satisfied: bool,
}

impl Condition {
    /// `scale` sets the size of the relative tolerance; pass the sum of the
    /// magnitudes of the terms that make up `value`.
    fn new(
        name: impl Into<String>,
        value: f64,
        relation: Relation,
        threshold: f64,
        scale: f64,
    ) -> Self {
        let margin = match relation {
            Relation::AtLeast => value - threshold,
            Relation::AtMost => threshold - value,
        };
        let tol = WEAK_TOL * scale.max(value.abs()).max(threshold.abs());
        Self {
            name: name.into(),
            value,
            threshold,
            relation,
            margin,
            satisfied: margin >= -tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    pub case_label: CaseLabel,
    pub conditions: Vec<Condition>,
    pub t_parameter: Option<f64>,
    pub spectral_ok: bool,
    pub admissible: bool,
    pub lambda_min: f64,
    pub r: f64,
    pub notes: Vec<String>,
}

impl RegimeReport {
    pub fn text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("case: {}\n", self.case_label));
        for c in &self.conditions {
            let rel = match c.relation {
                Relation::AtLeast => ">=",
                Relation::AtMost => "<=",
            };
            out.push_str(&format!(
                "  [{}] {}: {:.6e} {} {:.6e} (margin {:.3e})\n",
                if c.satisfied { "ok" } else { "FAIL" },
                c.name,
                c.value,
                rel,
                c.threshold,
                c.margin
            ));
        }
        if let Some(t) = self.t_parameter {
            out.push_str(&format!("t: {t:.16e}\n"));
        }
        out.push_str(&format!(
            "spectral: lambda_min = {:.6e} > r = {:.6e}: {}\n",
            self.lambda_min,
            self.r,
            if self.spectral_ok { "ok" } else { "FAIL" }
        ));
        for n in &self.notes {
            out.push_str(&format!("note: {n}\n"));
        }
        out.push_str(&format!("admissible: {}\n", self.admissible));
        out
    }

    pub fn key_values(&self) -> Vec<(String, String)> {
        let mut kv = vec![("case".to_string(), self.case_label.to_string())];
        for (i, c) in self.conditions.iter().enumerate() {
            kv.push((format!("condition.{i}.name"), c.name.clone()));
            kv.push((format!("condition.{i}.value"), format!("{:.16e}", c.value)));
            kv.push((
                format!("condition.{i}.threshold"),
                format!("{:.16e}", c.threshold),
            ));
            kv.push((
                format!("condition.{i}.margin"),
                format!("{:.16e}", c.margin),
            ));
            kv.push((format!("condition.{i}.satisfied"), c.satisfied.to_string()));
        }
        if let Some(t) = self.t_parameter {
            kv.push(("t".into(), format!("{t:.16e}")));
        }
        kv.push(("lambda_min".into(), format!("{:.16e}", self.lambda_min)));
        kv.push(("r".into(), format!("{:.16e}", self.r)));
        kv.push(("spectral_ok".into(), self.spectral_ok.to_string()));
        kv.push(("admissible".into(), self.admissible.to_string()));
        kv
    }
}

/// Reflection of a problem through `x -> -x`, which exchanges the habitats.
pub trait Mirror: Sized {
    fn mirrored(&self) -> Self;
}

impl Mirror for CoefficientSet {
    fn mirrored(&self) -> Self {
        self.swapped()
    }
}

/// Mirrors any problem description; applying it twice restores the input.
pub fn mirror_problem<T: Mirror>(problem: &T) -> T {
    problem.mirrored()
}

fn is_zero(r: f64, scale: f64) -> bool {
    r.abs() < 1e-12 * scale
}

pub fn classify(coeffs: &CoefficientSet) -> CaseLabel {
    let (rp, rm) = (coeffs.r_plus(), coeffs.r_minus());
    let scale = 1f64.max(rp.abs()).max(rm.abs());
    match (is_zero(rp, scale), is_zero(rm, scale)) {
        (true, true) => CaseLabel::BothZero,
        (false, true) => CaseLabel::RminusZero,
        (true, false) => CaseLabel::RplusZero,
        (false, false) => CaseLabel::BothNonzero(Sign::of(rp), Sign::of(rm)),
    }
}

/// `((sqrt(t+1) + sqrt(t))^2 / t^2) * k^2 / (4 k'^2)`.
pub fn t_bound(t: f64, k_near: f64, k_far: f64) -> f64 {
    let root = (t + 1.0).sqrt() + t.sqrt();
    root * root / (t * t) * k_near * k_near / (4.0 * k_far * k_far)
}

/// Conditions of the case where one ratio vanishes. `near` is the habitat
/// with the nonzero ratio, `far` the one with zero ratio.
fn one_zero_conditions(
    k_near: f64,
    k_far: f64,
    r_near: f64,
    spectrum: &SpectrumInfo,
    t: Option<f64>,
    near: &str,
    far: &str,
) -> Result<(Vec<Condition>, Option<f64>), RegimeError> {
    let mut conds = vec![Condition::new(
        format!("k_{far}/k_{near} <= 2"),
        k_far / k_near,
        Relation::AtMost,
        2.0,
        1.0,
    )];
    if r_near < 0.0 {
        let bound = -27.0 * k_near * k_near / (64.0 * k_far * k_far);
        conds.push(Condition::new(
            format!("r_{near} <= -27 k_{near}^2 / (64 k_{far}^2)"),
            r_near,
            Relation::AtMost,
            bound,
            0.0,
        ));
        return Ok((conds, None));
    }
    let upper = 1.0 / (r_near * spectrum.inv_norm);
    let name = format!("r_{near} >= ((sqrt(t+1)+sqrt(t))^2/t^2) k_{near}^2 / (4 k_{far}^2)");
    let chosen = match t {
        Some(t) => {
            if !(t > 0.0 && t < upper) {
                return Err(RegimeError::InvalidT { t, upper });
            }
            t
        }
        None => {
            // The bound decreases in t, so the best grid value is the largest;
            // the whole grid is still evaluated so the choice is explicit.
            let mut best = (f64::NEG_INFINITY, f64::NAN);
            for i in 0..T_GRID {
                let frac = 1.0 - (i as f64 + 1.0) / (T_GRID as f64 + 1.0);
                let t = upper * (1e-6f64.ln() * frac).exp();
                let margin = r_near - t_bound(t, k_near, k_far);
                if margin > best.0 {
                    best = (margin, t);
                }
            }
            best.1
        }
    };
    conds.push(Condition::new(
        name,
        r_near,
        Relation::AtLeast,
        t_bound(chosen, k_near, k_far),
        0.0,
    ));
    Ok((conds, Some(chosen)))
}

/// Evaluates the sufficient conditions of the case `coeffs` falls in.
///
/// `t` is the free parameter of the case with one vanishing ratio and the
/// other positive; when omitted it is chosen on a log-spaced grid.
pub fn check_admissibility(
    coeffs: &CoefficientSet,
    spectrum: &SpectrumInfo,
    t: Option<f64>,
) -> Result<RegimeReport, RegimeError> {
    let label = classify(coeffs);
    let (kp, km, lp, lm) = (coeffs.k_plus, coeffs.k_minus, coeffs.l_plus, coeffs.l_minus);
    let mut notes = Vec::new();
    let mut t_parameter = None;
    let conditions = match label {
        CaseLabel::BothNonzero(Sign::Plus, Sign::Plus) => vec![],
        CaseLabel::BothNonzero(Sign::Minus, Sign::Minus) => vec![Condition::new(
            "(l+ - l-)(k+ - k-) >= 0",
            (lp - lm) * (kp - km),
            Relation::AtLeast,
            0.0,
            (lp.abs() + lm.abs()) * (kp.abs() + km.abs()),
        )],
        CaseLabel::BothNonzero(Sign::Plus, Sign::Minus) => vec![Condition::new(
            "-6 l- k+ + l+ k+ + l- k- >= 0",
            -6.0 * lm * kp + lp * kp + lm * km,
            Relation::AtLeast,
            0.0,
            6.0 * (lm * kp).abs() + (lp * kp).abs() + (lm * km).abs(),
        )],
        CaseLabel::BothNonzero(Sign::Minus, Sign::Plus) => vec![Condition::new(
            "-6 l+ k- + l+ k+ + l- k- >= 0",
            -6.0 * lp * km + lp * kp + lm * km,
            Relation::AtLeast,
            0.0,
            6.0 * (lp * km).abs() + (lp * kp).abs() + (lm * km).abs(),
        )],
        CaseLabel::RminusZero => {
            let (c, t) = one_zero_conditions(kp, km, coeffs.r_plus(), spectrum, t, "+", "-")?;
            t_parameter = t;
            c
        }
        CaseLabel::RplusZero => {
            let (c, t) = one_zero_conditions(km, kp, coeffs.r_minus(), spectrum, t, "-", "+")?;
            t_parameter = t;
            c
        }
        CaseLabel::BothZero => {
            notes.push(
                "r+ = r- = 0 lies outside the covered coefficient cases: no admissibility guarantee"
                    .into(),
            );
            vec![]
        }
    };
    if spectrum.inv_norm != 1.0 / spectrum.lambda_min {
        notes.push("inv_norm differs from 1/lambda_min".into());
    }
    notes.push("operator norm of the inverse taken as 1/lambda_min (diagonal L2 model)".into());
    let r = coeffs.r_max();
    let spectral_ok = spectrum.lambda_min > r;
    let admissible =
        label != CaseLabel::BothZero && spectral_ok && conditions.iter().all(|c| c.satisfied);
    Ok(RegimeReport {
        case_label: label,
        conditions,
        t_parameter,
        spectral_ok,
        admissible,
        lambda_min: spectrum.lambda_min,
        r,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coeffs(kp: f64, km: f64, lp: f64, lm: f64) -> CoefficientSet {
        CoefficientSet::new(kp, km, lp, lm).unwrap()
    }

    #[test]
    fn classify_examples() {
        use Sign::*;
        assert_eq!(
            classify(&coeffs(1.0, 1.0, 1.0, 2.0)),
            CaseLabel::BothNonzero(Plus, Plus)
        );
        assert_eq!(
            classify(&coeffs(1.0, 1.0, -1.0, 0.0)),
            CaseLabel::RminusZero
        );
        assert_eq!(classify(&coeffs(1.0, 1.0, 0.0, 0.0)), CaseLabel::BothZero);
        assert_eq!(classify(&coeffs(1.0, 1.0, 0.0, 3.0)), CaseLabel::RplusZero);
        assert_eq!(
            classify(&coeffs(1.0, 1.0, 1e-14, 3.0)),
            CaseLabel::RplusZero
        );
    }

    #[test]
    fn mixed_sign_example() {
        let rep = check_admissibility(
            &coeffs(1.0, 1.0, 3.0, -1.0),
            &SpectrumInfo::new(2.0).unwrap(),
            None,
        )
        .unwrap();
        assert_eq!(rep.conditions[0].value, 8.0);
        assert!(rep.admissible);
    }

    #[test]
    fn negative_ratio_with_zero_minus_ratio() {
        let c = coeffs(1.0, 1.0, -0.5, 0.0);
        let ok = check_admissibility(&c, &SpectrumInfo::new(0.6).unwrap(), None).unwrap();
        assert!(ok.admissible);
        let low = check_admissibility(&c, &SpectrumInfo::new(0.4).unwrap(), None).unwrap();
        assert!(!low.spectral_ok && !low.admissible);
        let weak = check_admissibility(
            &coeffs(1.0, 1.0, -0.4, 0.0),
            &SpectrumInfo::new(1.0).unwrap(),
            None,
        )
        .unwrap();
        assert!(!weak.admissible);
    }

    #[test]
    fn equality_boundary_passes() {
        let c = coeffs(1.0, 1.0, -1.0, -2.0);
        let rep = check_admissibility(&c, &SpectrumInfo::new(2.5).unwrap(), None).unwrap();
        assert_eq!(rep.conditions[0].value, 0.0);
        assert!(rep.admissible);
        let rep = check_admissibility(&c, &SpectrumInfo::new(1.9).unwrap(), None).unwrap();
        assert!(!rep.admissible);
    }

    #[test]
    fn ratio_bound_on_k() {
        let rep = check_admissibility(
            &coeffs(1.0, 2.5, -10.0, 0.0),
            &SpectrumInfo::new(20.0).unwrap(),
            None,
        )
        .unwrap();
        assert!(!rep.conditions[0].satisfied);
    }

    #[test]
    fn t_search_and_explicit_t() {
        let bound = t_bound(0.5, 1.0, 1.0);
        let c = coeffs(1.0, 1.0, bound, 0.0);
        let spectrum = SpectrumInfo::sine(1.0).unwrap();
        let rep = check_admissibility(&c, &spectrum, Some(0.5)).unwrap();
        assert!(rep.admissible);
        assert_eq!(rep.t_parameter, Some(0.5));
        let searched = check_admissibility(&c, &spectrum, None).unwrap();
        assert!(searched.admissible);
        assert!(searched.t_parameter.unwrap() > 0.5);
        let upper = spectrum.lambda_min / bound;
        assert!(check_admissibility(&c, &spectrum, Some(upper * 1.01)).is_err());
        assert!(check_admissibility(&c, &spectrum, Some(0.0)).is_err());
    }

    #[test]
    fn mirrored_case_uses_swapped_indices() {
        let c = coeffs(1.0, 1.0, -0.5, 0.0);
        let spectrum = SpectrumInfo::new(1.0).unwrap();
        let a = check_admissibility(&c, &spectrum, None).unwrap();
        let b = check_admissibility(&c.swapped(), &spectrum, None).unwrap();
        assert_eq!(b.case_label, CaseLabel::RplusZero);
        assert_eq!(a.admissible, b.admissible);
        assert_eq!(a.conditions.len(), b.conditions.len());
        for (x, y) in a.conditions.iter().zip(&b.conditions) {
            assert_eq!(x.value, y.value);
            assert_eq!(x.threshold, y.threshold);
        }
    }

    #[test]
    fn both_zero_is_never_admissible() {
        let rep = check_admissibility(
            &coeffs(1.0, 1.0, 0.0, 0.0),
            &SpectrumInfo::new(1.0).unwrap(),
            None,
        )
        .unwrap();
        assert!(!rep.admissible);
        assert!(rep.notes[0].contains("no admissibility guarantee"));
    }

    #[test]
    fn margins_are_continuous() {
        let spectrum = SpectrumInfo::new(5.0).unwrap();
        let base = coeffs(1.3, 0.8, 2.0, -1.0);
        let eps = 1e-7;
        let a = check_admissibility(&base, &spectrum, None).unwrap();
        let b = check_admissibility(&coeffs(1.3, 0.8, 2.0 + eps, -1.0 + eps), &spectrum, None).unwrap();
        let da = (a.conditions[0].value - b.conditions[0].value).abs();
        assert!(da < 10.0 * eps);
    }

    #[test]
    fn report_serializes() {
        let rep = check_admissibility(
            &coeffs(1.0, 1.0, 3.0, -1.0),
            &SpectrumInfo::new(2.0).unwrap(),
            None,
        )
        .unwrap();
        assert!(rep.text().contains("admissible: true"));
        let kv = rep.key_values();
        assert!(kv.iter().any(|(k, v)| k == "admissible" && v == "true"));
    }
}
