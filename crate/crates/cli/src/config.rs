//! Line-oriented `key = value` run configuration.
//!
//! ```text
//! # cubic nonlinearity on the hinged unit square
//! nx = 33
//! ny = 33
//! bc = navier
//! term = 1, 4
//! mode = both
//! ```
//!
//! `term = a, p` may repeat; each adds `a|t|^{p−2}t` to `f`.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use biharm_dual::{BoundaryCondition, DescentMetric, Grid2D, Nonlinearity, SolverConfig, Term};
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Ground,
    Nodal,
    Both,
    Validate,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ground" => Ok(Mode::Ground),
            "nodal" => Ok(Mode::Nodal),
            "both" => Ok(Mode::Both),
            "validate" => Ok(Mode::Validate),
            other => Err(format!("unknown mode {other:?} (expected ground, nodal, both or validate)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub bc: BoundaryCondition,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub terms: Vec<Term>,
    pub solver: SolverConfig,
    pub mode: Mode,
    pub output: PathBuf,
}

impl RunConfig {
    pub fn grid(&self) -> Grid2D {
        let g = self.grid;
        Grid2D::new(g.nx, g.ny, g.lx, g.ly, g.bc).expect("validated at parse time")
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        Nonlinearity::new(self.terms.clone()).expect("validated at parse time")
    }
}

/// A problem found while reading the configuration. Line 0 means the
/// problem is not tied to a line (a missing key or a command-line flag).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            f.write_str(&self.message)
        } else {
            write!(f, "line {}: {}", self.line, self.message)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"))]
pub struct ConfigErrors(pub Vec<Diagnostic>);

impl ConfigErrors {
    pub fn contains(&self, needle: &str) -> bool {
        self.0.iter().any(|d| d.message.contains(needle))
    }
}

/// Accumulates settings before validation.
#[derive(Clone, Debug)]
pub struct Builder {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    bc: BoundaryCondition,
    terms: Vec<(Term, usize)>,
    /// Whether any `term` line appeared, valid or not.
    term_seen: bool,
    solver: SolverConfig,
    mode: Mode,
    output: PathBuf,
    diags: Vec<Diagnostic>,
}

impl Default for Builder {
    fn default() -> Self {
        Self {
            nx: 33,
            ny: 33,
            lx: 1.0,
            ly: 1.0,
            bc: BoundaryCondition::Navier,
            terms: Vec::new(),
            term_seen: false,
            solver: SolverConfig::default(),
            mode: Mode::Both,
            output: PathBuf::from("out"),
            diags: Vec::new(),
        }
    }
}

fn parse<T: FromStr>(value: &str, what: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("{what}: cannot parse {value:?}"))
}

fn parse_term(value: &str) -> Result<Term, String> {
    let parts: Vec<_> = value.split(',').map(str::trim).collect();
    let [a, p] = parts.as_slice() else {
        return Err(format!("term: expected \"a, p\", got {value:?}"));
    };
    let a: f64 = parse(a, "term coefficient")?;
    let p: f64 = parse(p, "term exponent")?;
    if !(a > 0.0 && a.is_finite()) {
        return Err(format!("coefficient must be positive, got {a}"));
    }
    if !(p > 2.0 && p.is_finite()) {
        return Err(format!("exponent must exceed 2, got {p}"));
    }
    Ok(Term { a, p })
}

impl Builder {
    /// Apply one setting. Terms accumulate; every other key overwrites.
    pub fn set(&mut self, key: &str, value: &str, line: usize) {
        if let Err(message) = self.try_set(key, value, line) {
            self.diags.push(Diagnostic { line, message });
        }
    }

    /// Drop every `term` seen so far, so that command-line terms replace
    /// the file's nonlinearity instead of extending it.
    pub fn clear_terms(&mut self) {
        self.terms.clear();
        self.term_seen = false;
    }

    fn try_set(&mut self, key: &str, value: &str, line: usize) -> Result<(), String> {
        let s = &mut self.solver;
        match key {
            "nx" => self.nx = parse(value, key)?,
            "ny" => self.ny = parse(value, key)?,
            "lx" => self.lx = parse(value, key)?,
            "ly" => self.ly = parse(value, key)?,
            "bc" => self.bc = value.parse().map_err(|e: biharm_dual::Error| e.to_string())?,
            "term" => {
                self.term_seen = true;
                self.terms.push((parse_term(value)?, line));
            }
            "mode" => self.mode = value.parse()?,
            "output" => self.output = PathBuf::from(value),
            "seed" => s.seed = parse(value, key)?,
            "max_iters" => s.max_iters = parse(value, key)?,
            "step0" => s.step0 = parse(value, key)?,
            "armijo_c" => s.armijo_c = parse(value, key)?,
            "armijo_shrink" => s.armijo_shrink = parse(value, key)?,
            "tol_residual" => s.tol_residual = parse(value, key)?,
            "tol_defect" => s.tol_defect = parse(value, key)?,
            "n_starts" => s.n_starts = parse(value, key)?,
            "metric" => s.metric = value.parse::<DescentMetric>()?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    pub fn build(mut self) -> Result<RunConfig, ConfigErrors> {
        if self.nx < 3 || self.ny < 3 {
            self.diags.push(Diagnostic {
                line: 0,
                message: format!("grid needs at least 3 interior nodes per side, got {}x{}", self.nx, self.ny),
            });
        } else if let Err(e) = Grid2D::new(self.nx, self.ny, self.lx, self.ly, self.bc) {
            self.diags.push(Diagnostic {
                line: 0,
                message: e.to_string(),
            });
        }
        let terms: Vec<Term> = self.terms.iter().map(|(t, _)| *t).collect();
        if terms.is_empty() && !self.term_seen {
            self.diags.push(Diagnostic {
                line: 0,
                message: "nonlinearity required".into(),
            });
        } else if let (false, Err(e)) = (terms.is_empty(), Nonlinearity::new(terms.clone())) {
            self.diags.push(Diagnostic {
                line: 0,
                message: e.to_string(),
            });
        }
        if let Err(message) = self.solver.validate() {
            self.diags.push(Diagnostic { line: 0, message });
        }
        if !self.diags.is_empty() {
            self.diags.sort_by_key(|d| d.line);
            return Err(ConfigErrors(self.diags));
        }
        Ok(RunConfig {
            grid: GridSpec {
                nx: self.nx,
                ny: self.ny,
                lx: self.lx,
                ly: self.ly,
                bc: self.bc,
            },
            terms,
            solver: self.solver,
            mode: self.mode,
            output: self.output,
        })
    }
}

/// Read `key = value` lines into a builder; `#` starts a comment.
pub fn read_config(text: &str) -> Builder {
    let mut b = Builder::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        match content.split_once('=') {
            Some((k, v)) => b.set(k.trim(), v.trim(), line),
            None => b.diags.push(Diagnostic {
                line,
                message: format!("expected key = value, got {content:?}"),
            }),
        }
    }
    b
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    read_config(text).build()
}
