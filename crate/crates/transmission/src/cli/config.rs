//! Run configuration: a sectioned `key = value` file.
//!
//! ```text
//! # comment
//! [coefficients]
//! k_plus = 1
//! k_minus = 1
//! l_plus = 3
//! l_minus = -1
//! [geometry]
//! a = 0
//! gamma = 1
//! b = 2
//! ell = 1
//! K = 8
//! [data]
//! forcing_plus = "sin(pi*y) * exp(-x)"
//! [run]
//! mode = check
//! ```
//!
//! Numeric values may be constant expressions such as `pi/2` or `1e-3`.
//! Data values are expressions in `x` and `y`, optionally double-quoted.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::expr::{parse_expression, Expr};
use crate::regime::Mirror;
use crate::symbols::{CoefficientSet, ScanSymbol};

/// A configuration error with its 1-based line (0 when not tied to a line).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

/// All errors found in a configuration.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lines: Vec<String> = self.0.iter().map(|e| e.to_string()).collect();
        f.write_str(&lines.join("\n"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Check,
    Scan,
    SolveMode,
    Solve,
    Verify,
    Identities,
}

impl RunMode {
    pub const ALL: [RunMode; 6] = [
        RunMode::Check,
        RunMode::Scan,
        RunMode::SolveMode,
        RunMode::Solve,
        RunMode::Verify,
        RunMode::Identities,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            RunMode::Check => "check",
            RunMode::Scan => "scan",
            RunMode::SolveMode => "solve-mode",
            RunMode::Solve => "solve",
            RunMode::Verify => "verify",
            RunMode::Identities => "identities",
        }
    }
}

impl FromStr for RunMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        RunMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown run mode '{s}'"))
    }
}

/// Symbols covered by a scan run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanSelection {
    All,
    One(ScanSymbol),
}

impl ScanSelection {
    pub fn symbols(&self) -> Vec<ScanSymbol> {
        match self {
            ScanSelection::All => ScanSymbol::ALL.to_vec(),
            ScanSelection::One(s) => vec![*s],
        }
    }

    fn name(&self) -> &'static str {
        match self {
            ScanSelection::All => "all",
            ScanSelection::One(s) => s.name(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryConfig {
    pub a: f64,
    pub gamma: f64,
    pub b: f64,
    pub ell: f64,
    pub modes: usize,
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub forcing_minus: Expr,
    pub forcing_plus: Expr,
    pub phi1_minus: Expr,
    pub phi2_minus: Expr,
    pub phi1_plus: Expr,
    pub phi2_plus: Expr,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericsConfig {
    /// Gauss panels per interval.
    pub panels: usize,
    /// Gauss nodes per panel.
    pub nodes: usize,
    /// Tolerance of residual columns.
    pub tol: f64,
    /// Tolerance of factorization residuals.
    pub identity_tol: f64,
    /// Coarse finite-difference step of `verify`.
    pub fd_h: f64,
    /// Free parameter of the one-zero-ratio regime test.
    pub t: Option<f64>,
    /// Samples per symbol of `scan`.
    pub samples: usize,
    /// Mode index `k >= 1` for `solve-mode` and `verify`.
    pub mode_index: usize,
    pub scan_symbol: ScanSelection,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            panels: 64,
            nodes: 8,
            tol: 1e-8,
            identity_tol: 1e-10,
            fd_h: 1.0 / 40.0,
            t: None,
            samples: 10_000,
            mode_index: 1,
            scan_symbol: ScanSelection::All,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub coefficients: CoefficientSet,
    pub geometry: GeometryConfig,
    pub data: DataConfig,
    pub numerics: NumericsConfig,
    pub mode: RunMode,
}

const SECTIONS: [(&str, &[&str]); 5] = [
    ("coefficients", &["k_plus", "k_minus", "l_plus", "l_minus"]),
    ("geometry", &["a", "gamma", "b", "ell", "K", "nx", "ny"]),
    (
        "data",
        &[
            "forcing",
            "forcing_plus",
            "forcing_minus",
            "phi1_minus",
            "phi2_minus",
            "phi1_plus",
            "phi2_plus",
        ],
    ),
    (
        "numerics",
        &[
            "panels",
            "nodes",
            "tol",
            "identity_tol",
            "fd_h",
            "t",
            "samples",
            "mode_index",
            "scan_symbol",
        ],
    ),
    ("run", &["mode"]),
];

struct Entry {
    line: usize,
    value: String,
}

struct Collector {
    entries: std::collections::HashMap<(String, String), Entry>,
    errors: Vec<ConfigError>,
}

impl Collector {
    fn err(&mut self, line: usize, message: impl Into<String>) {
        self.errors.push(ConfigError {
            line,
            message: message.into(),
        });
    }

    fn raw(&self, section: &str, key: &str) -> Option<&Entry> {
        self.entries.get(&(section.to_string(), key.to_string()))
    }

    fn expr(&mut self, section: &str, key: &str) -> Option<(usize, Expr)> {
        let entry = self.raw(section, key)?;
        let (line, text) = (entry.line, unquote(&entry.value).to_string());
        match parse_expression(&text) {
            Ok(e) => Some((line, e)),
            Err(e) => {
                self.err(line, format!("{section}.{key}: {e}"));
                None
            }
        }
    }

    fn number(&mut self, section: &str, key: &str, default: Option<f64>) -> Option<f64> {
        let line = self.raw(section, key).map(|e| e.line);
        match self.expr(section, key) {
            Some((line, e)) => match e.eval_constant() {
                Ok(v) => Some(v),
                Err(err) => {
                    self.err(line, format!("{section}.{key}: {err}"));
                    None
                }
            },
            None if line.is_some() => None,
            None => {
                if default.is_none() {
                    self.err(0, format!("missing required key {section}.{key}"));
                }
                default
            }
        }
    }

    fn integer(&mut self, section: &str, key: &str, default: Option<usize>) -> Option<usize> {
        let line = self.raw(section, key).map_or(0, |e| e.line);
        let v = self.number(section, key, default.map(|d| d as f64))?;
        if v < 0.0 || v.fract() != 0.0 || v > 1e12 {
            self.err(
                line,
                format!("{section}.{key} must be a non-negative integer, got {v}"),
            );
            return None;
        }
        Some(v as usize)
    }

    fn data(&mut self, key: &str, fallback: Option<&Expr>) -> Expr {
        match self.expr("data", key) {
            Some((_, e)) => e,
            None => fallback.cloned().unwrap_or_else(Expr::zero),
        }
    }
}

fn unquote(s: &str) -> &str {
    let t = s.trim();
    if t.len() >= 2 && t.starts_with('"') && t.ends_with('"') {
        &t[1..t.len() - 1]
    } else {
        t
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    let mut c = Collector {
        entries: Default::default(),
        errors: Vec::new(),
    };
    let mut section: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = strip_comment(raw).trim();
        if content.is_empty() {
            continue;
        }
        if content.starts_with('[') {
            if !content.ends_with(']') {
                c.err(line, format!("malformed section header '{content}'"));
                continue;
            }
            let name = content[1..content.len() - 1].trim();
            if SECTIONS.iter().any(|(s, _)| *s == name) {
                section = Some(name.to_string());
            } else {
                c.err(line, format!("unknown section [{name}]"));
                section = None;
            }
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            c.err(line, format!("expected 'key = value', got '{content}'"));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(sec) = section.clone() else {
            c.err(line, format!("key '{key}' outside a known section"));
            continue;
        };
        let known = SECTIONS
            .iter()
            .find(|(s, _)| *s == sec)
            .map_or(&[][..], |s| s.1);
        if !known.contains(&key) {
            c.err(line, format!("unknown key '{key}' in [{sec}]"));
            continue;
        }
        if value.is_empty() {
            c.err(line, format!("empty value for '{key}'"));
            continue;
        }
        let slot = (sec.clone(), key.to_string());
        if let Some(prev) = c.entries.get(&slot) {
            let prev_line = prev.line;
            c.err(
                line,
                format!("duplicate key '{key}' (first on line {prev_line})"),
            );
            continue;
        }
        c.entries.insert(
            slot,
            Entry {
                line,
                value: value.to_string(),
            },
        );
    }

    let kp = c.number("coefficients", "k_plus", None);
    let km = c.number("coefficients", "k_minus", None);
    let lp = c.number("coefficients", "l_plus", None);
    let lm = c.number("coefficients", "l_minus", None);
    let coefficients = match (kp, km, lp, lm) {
        (Some(kp), Some(km), Some(lp), Some(lm)) => match CoefficientSet::new(kp, km, lp, lm) {
            Ok(cs) => Some(cs),
            Err(e) => {
                c.err(0, format!("coefficients: {e}"));
                None
            }
        },
        _ => None,
    };

    let a = c.number("geometry", "a", None);
    let gamma = c.number("geometry", "gamma", None);
    let b = c.number("geometry", "b", None);
    let ell = c.number("geometry", "ell", None);
    let modes = c.integer("geometry", "K", None);
    let nx = c.integer("geometry", "nx", Some(65));
    let ny = c.integer("geometry", "ny", Some(33));
    let line_of = |c: &Collector, k: &str| c.raw("geometry", k).map_or(0, |e| e.line);
    if let (Some(a), Some(g)) = (a, gamma) {
        if !(a < g) {
            let l = line_of(&c, "gamma");
            c.err(l, "a < gamma violated");
        }
    }
    if let (Some(g), Some(b)) = (gamma, b) {
        if !(g < b) {
            let l = line_of(&c, "b");
            c.err(l, "gamma < b violated");
        }
    }
    if let Some(ell) = ell {
        if !(ell > 0.0) {
            let l = line_of(&c, "ell");
            c.err(l, "ell > 0 violated");
        }
    }
    if modes == Some(0) {
        let l = line_of(&c, "K");
        c.err(l, "K >= 1 violated");
    }
    for (k, v) in [("nx", nx), ("ny", ny)] {
        if matches!(v, Some(n) if n < 2) {
            let l = line_of(&c, k);
            c.err(l, format!("{k} >= 2 violated"));
        }
    }

    let both = c.expr("data", "forcing").map(|x| x.1);
    for side in ["forcing_plus", "forcing_minus"] {
        if both.is_some() && c.raw("data", side).is_some() {
            let l = c.raw("data", side).map_or(0, |e| e.line);
            c.err(l, format!("{side} conflicts with forcing"));
        }
    }
    let data = DataConfig {
        forcing_minus: c.data("forcing_minus", both.as_ref()),
        forcing_plus: c.data("forcing_plus", both.as_ref()),
        phi1_minus: c.data("phi1_minus", None),
        phi2_minus: c.data("phi2_minus", None),
        phi1_plus: c.data("phi1_plus", None),
        phi2_plus: c.data("phi2_plus", None),
    };

    let d = NumericsConfig::default();
    let panels = c.integer("numerics", "panels", Some(d.panels));
    let nodes = c.integer("numerics", "nodes", Some(d.nodes));
    let tol = c.number("numerics", "tol", Some(d.tol));
    let identity_tol = c.number("numerics", "identity_tol", Some(d.identity_tol));
    let fd_h = c.number("numerics", "fd_h", Some(d.fd_h));
    let t = if c.raw("numerics", "t").is_some() {
        c.number("numerics", "t", None).map(Some)
    } else {
        Some(None)
    };
    let samples = c.integer("numerics", "samples", Some(d.samples));
    let mode_index = c.integer("numerics", "mode_index", Some(d.mode_index));
    let nline = |c: &Collector, k: &str| c.raw("numerics", k).map_or(0, |e| e.line);
    for (k, v) in [
        ("panels", panels),
        ("nodes", nodes),
        ("samples", samples),
        ("mode_index", mode_index),
    ] {
        if v == Some(0) {
            let l = nline(&c, k);
            c.err(l, format!("{k} >= 1 violated"));
        }
    }
    if let (Some(k), Some(m)) = (mode_index, modes) {
        if k > m {
            let l = nline(&c, "mode_index");
            c.err(l, format!("mode_index {k} exceeds K = {m}"));
        }
    }
    for (k, v) in [("tol", tol), ("identity_tol", identity_tol), ("fd_h", fd_h)] {
        if matches!(v, Some(x) if !(x > 0.0)) {
            let l = nline(&c, k);
            c.err(l, format!("{k} > 0 violated"));
        }
    }
    if matches!(t, Some(Some(x)) if !(x > 0.0)) {
        let l = nline(&c, "t");
        c.err(l, "t > 0 violated");
    }
    let scan_symbol = match c.raw("numerics", "scan_symbol") {
        None => Some(d.scan_symbol),
        Some(e) => {
            let (line, v) = (e.line, unquote(&e.value).to_string());
            if v == "all" {
                Some(ScanSelection::All)
            } else {
                match ScanSymbol::parse(&v) {
                    Some(s) => Some(ScanSelection::One(s)),
                    None => {
                        c.err(line, format!("unknown scan symbol '{v}'"));
                        None
                    }
                }
            }
        }
    };

    let mode = match c.raw("run", "mode") {
        None => {
            c.err(0, "missing required key run.mode");
            None
        }
        Some(e) => {
            let (line, v) = (e.line, unquote(&e.value).to_string());
            match v.parse::<RunMode>() {
                Ok(m) => Some(m),
                Err(msg) => {
                    c.err(line, msg);
                    None
                }
            }
        }
    };

    if !c.errors.is_empty() {
        c.errors.sort_by_key(|e| e.line);
        return Err(ConfigErrors(c.errors));
    }
    Ok(RunConfig {
        coefficients: coefficients.expect("checked"),
        geometry: GeometryConfig {
            a: a.expect("checked"),
            gamma: gamma.expect("checked"),
            b: b.expect("checked"),
            ell: ell.expect("checked"),
            modes: modes.expect("checked"),
            nx: nx.expect("checked"),
            ny: ny.expect("checked"),
        },
        data,
        numerics: NumericsConfig {
            panels: panels.expect("checked"),
            nodes: nodes.expect("checked"),
            tol: tol.expect("checked"),
            identity_tol: identity_tol.expect("checked"),
            fd_h: fd_h.expect("checked"),
            t: t.expect("checked"),
            samples: samples.expect("checked"),
            mode_index: mode_index.expect("checked"),
            scan_symbol: scan_symbol.expect("checked"),
        },
        mode: mode.expect("checked"),
    })
}

fn strip_comment(line: &str) -> &str {
    let mut in_quotes = false;
    for (i, ch) in line.char_indices() {
        match ch {
            '"' => in_quotes = !in_quotes,
            '#' if !in_quotes => return &line[..i],
            _ => {}
        }
    }
    line
}

/// Shortest representation that parses back to the same `f64`.
fn num(v: f64) -> String {
    format!("{v:?}")
}

impl RunConfig {
    /// Serializes to the configuration grammar; parsing the result yields an
    /// equal config.
    pub fn to_config_string(&self) -> String {
        let c = &self.coefficients;
        let g = &self.geometry;
        let d = &self.data;
        let n = &self.numerics;
        let mut s = String::new();
        s += "[coefficients]\n";
        s += &format!("k_plus = {}\nk_minus = {}\n", num(c.k_plus), num(c.k_minus));
        s += &format!("l_plus = {}\nl_minus = {}\n", num(c.l_plus), num(c.l_minus));
        s += "\n[geometry]\n";
        s += &format!(
            "a = {}\ngamma = {}\nb = {}\nell = {}\n",
            num(g.a),
            num(g.gamma),
            num(g.b),
            num(g.ell)
        );
        s += &format!("K = {}\nnx = {}\nny = {}\n", g.modes, g.nx, g.ny);
        s += "\n[data]\n";
        for (k, e) in [
            ("forcing_minus", &d.forcing_minus),
            ("forcing_plus", &d.forcing_plus),
            ("phi1_minus", &d.phi1_minus),
            ("phi2_minus", &d.phi2_minus),
            ("phi1_plus", &d.phi1_plus),
            ("phi2_plus", &d.phi2_plus),
        ] {
            s += &format!("{k} = \"{e}\"\n");
        }
        s += "\n[numerics]\n";
        s += &format!("panels = {}\nnodes = {}\n", n.panels, n.nodes);
        s += &format!(
            "tol = {}\nidentity_tol = {}\nfd_h = {}\n",
            num(n.tol),
            num(n.identity_tol),
            num(n.fd_h)
        );
        if let Some(t) = n.t {
            s += &format!("t = {}\n", num(t));
        }
        s += &format!("samples = {}\nmode_index = {}\n", n.samples, n.mode_index);
        s += &format!("scan_symbol = {}\n", n.scan_symbol.name());
        s += "\n[run]\n";
        s += &format!("mode = {}\n", self.mode.name());
        s
    }
}

impl Mirror for RunConfig {
    /// Reflection `x -> -x`: habitats swap, `(a, gamma, b)` becomes
    /// `(-b, -gamma, -a)`, expressions are reflected and `x`-derivative data
    /// change sign.
    fn mirrored(&self) -> Self {
        let g = &self.geometry;
        let d = &self.data;
        Self {
            coefficients: self.coefficients.mirrored(),
            geometry: GeometryConfig {
                a: -g.b,
                gamma: -g.gamma,
                b: -g.a,
                ..*g
            },
            data: DataConfig {
                forcing_minus: d.forcing_plus.reflect_x(),
                forcing_plus: d.forcing_minus.reflect_x(),
                phi1_minus: d.phi1_plus.reflect_x(),
                phi2_minus: d.phi2_plus.reflect_x().neg(),
                phi1_plus: d.phi1_minus.reflect_x(),
                phi2_plus: d.phi2_minus.reflect_x().neg(),
            },
            numerics: self.numerics,
            mode: self.mode,
        }
    }
}
