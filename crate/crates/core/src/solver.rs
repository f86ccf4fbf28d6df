//! Descent on `Ψ` restricted to the Nehari set (ground states) and to the
//! nodal set (least-energy sign-changing solutions).
//!
//! Every iterate lives on its constraint set. A step moves along a descent
//! direction of `Ψ`, re-projects, and is accepted by an Armijo test on the
//! projected value. Because projection maximizes `Ψ` over the fibers
//! `t ↦ tw` (or `(t, s) ↦ tw⁺ + sw⁻`), the directional derivative of the
//! projected value at `α = 0` is still `Ψ′(w)d`, so the usual test applies.

use std::collections::VecDeque;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dual::DualContext;
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::nehari::{project_ray_with, NodalParts};

/// How a step direction is formed from the current iterate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DescentMetric {
    /// `d = f(Tw) − w`. Pairs with the gradient `h(w) − Tw` through the
    /// monotone map `f`, so `Ψ′(w)d ≤ 0` node by node; a unit step is the
    /// fixed-point update `w ← f(Tw)`.
    #[default]
    Secant,
    /// `d = Tw − h(w)`, the raw nodal gradient. Badly scaled wherever `w`
    /// is small because `h′` is unbounded at 0.
    Gradient,
}

impl std::str::FromStr for DescentMetric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "secant" => Ok(DescentMetric::Secant),
            "gradient" => Ok(DescentMetric::Gradient),
            other => Err(format!("unknown descent metric {other:?} (expected secant or gradient)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub step0: f64,
    pub armijo_c: f64,
    pub armijo_shrink: f64,
    /// Target for the relative dual residual `‖w − f(Tw)‖/‖w‖`.
    pub tol_residual: f64,
    /// Target for the relative constraint defects after projection.
    pub tol_defect: f64,
    pub n_starts: usize,
    pub seed: u64,
    /// Worker threads for multi-start; 0 picks the available parallelism.
    pub threads: usize,
    pub metric: DescentMetric,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            step0: 1.0,
            armijo_c: 1e-4,
            armijo_shrink: 0.5,
            tol_residual: 1e-6,
            tol_defect: 1e-8,
            n_starts: 1,
            seed: 0,
            threads: 0,
            metric: DescentMetric::Secant,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> std::result::Result<(), String> {
        let positive = [
            ("step0", self.step0),
            ("tol_residual", self.tol_residual),
            ("tol_defect", self.tol_defect),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if self.max_iters == 0 {
            return Err("max_iters must be positive".into());
        }
        if self.n_starts == 0 {
            return Err("n_starts must be positive".into());
        }
        if !(self.armijo_c > 0.0 && self.armijo_c <= 0.5) {
            return Err(format!("armijo_c must lie in (0, 0.5], got {}", self.armijo_c));
        }
        if !(self.armijo_shrink > 0.0 && self.armijo_shrink < 1.0) {
            return Err(format!("armijo_shrink must lie in (0, 1), got {}", self.armijo_shrink));
        }
        Ok(())
    }
}

/// One row per accepted iterate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceEntry {
    pub psi: f64,
    pub residual: f64,
    /// Step length that produced this iterate (0 for the initial point).
    pub step: f64,
    /// `Ψ(P(x)) − Ψ(x)` for the re-projection of the trial point `x`;
    /// nonnegative because projection maximizes along fibers.
    pub jump: f64,
    /// Largest relative constraint defect of the iterate.
    pub defect: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Positive,
    Negative,
    Nodal,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::Positive => "positive",
            Classification::Negative => "negative",
            Classification::Nodal => "nodal",
        })
    }
}

/// Outcome of one start of a multi-start solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StartSummary {
    pub seed: u64,
    pub converged: bool,
    pub collapsed: bool,
    pub psi: f64,
    pub residual: f64,
    pub iters: usize,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub w: Field,
    pub u: Field,
    pub psi: f64,
    /// `I(u)` for `u = Tw`.
    pub primal: f64,
    pub residual: f64,
    pub iters: usize,
    pub trace: Vec<TraceEntry>,
    pub classification: Classification,
    pub nodal_domains: usize,
    /// Seed of the winning start.
    pub seed: u64,
    /// Relative constraint defects at the returned point: `(𝒩, 𝒩)` for the
    /// ground state, `(w⁺, w⁻)` for the nodal solve.
    pub defects: (f64, f64),
    /// Smallest `∫wTw` over all iterates of the winning run.
    pub min_quadratic: f64,
    /// Smallest `∫w^±Tw^±` over all iterates (nodal solves only).
    pub min_quadratic_parts: Option<(f64, f64)>,
    /// Number of starts discarded after collapsing to one sign.
    pub restarts: usize,
    pub starts: Vec<StartSummary>,
}

/// Sign pattern of `u` and number of connected sign regions.
///
/// Entries with `|u| ≤ 1e−9‖u‖∞` count as zero. Components are taken over
/// 4-adjacency, separately for the positive and the negative nodes.
pub fn classify(u: &Field) -> Result<(Classification, usize)> {
    let eps = 1e-9 * u.max_abs();
    if u.max_abs() == 0.0 {
        return Err(Error::ZeroField);
    }
    let g = u.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let sign: Vec<i8> = u
        .values()
        .iter()
        .map(|&v| if v > eps { 1 } else if v < -eps { -1 } else { 0 })
        .collect();
    let mut seen = vec![false; sign.len()];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for start in 0..sign.len() {
        if sign[start] == 0 || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(k) = queue.pop_front() {
            let (i, j) = (k % nx, k / nx);
            let mut visit = |n: usize| {
                if !seen[n] && sign[n] == sign[k] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            };
            if i > 0 {
                visit(k - 1);
            }
            if i + 1 < nx {
                visit(k + 1);
            }
            if j > 0 {
                visit(k - nx);
            }
            if j + 1 < ny {
                visit(k + nx);
            }
        }
    }
    let pos = sign.contains(&1);
    let neg = sign.contains(&-1);
    let class = match (pos, neg) {
        (true, true) => Classification::Nodal,
        (true, false) => Classification::Positive,
        _ => Classification::Negative,
    };
    Ok((class, count))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Mode {
    Ground,
    Nodal,
}

/// A feasible iterate with its cached image under `T`.
struct Point {
    w: Field,
    tw: Field,
    psi: f64,
    defects: (f64, f64),
    quad_parts: Option<(f64, f64)>,
}

fn project(ctx: &DualContext, mode: Mode, x: &Field, tx: &Field, tol_defect: f64) -> Result<Point> {
    match mode {
        Mode::Ground => {
            let t = project_ray_with(ctx, x, tx)?;
            let w = x.scale(t);
            let tw = tx.scale(t);
            let hw = w.try_map(|v| ctx.nl().h(v))?;
            let a = hw.inner(&w)?;
            let d = (a - w.inner(&tw)?) / a;
            Ok(Point {
                psi: ctx.psi_with(&w, &tw)?,
                w,
                tw,
                defects: (d, d),
                quad_parts: None,
            })
        }
        Mode::Nodal => {
            let parts = NodalParts::new(ctx, x)?;
            let proj = parts.project(tol_defect)?;
            let (w, tw) = parts.combine(proj.t, proj.s);
            let defects = parts.relative_defects(proj.t, proj.s)?;
            let quad = (proj.t * proj.t * parts.a, proj.s * proj.s * parts.c);
            Ok(Point {
                psi: ctx.psi_with(&w, &tw)?,
                w,
                tw,
                defects,
                quad_parts: Some(quad),
            })
        }
    }
}

/// Trial failures that just mean "step too long".
fn recoverable(e: &Error) -> bool {
    matches!(
        e,
        Error::NotSignChanging | Error::RayMissesNehari | Error::BracketNotFound { .. } | Error::RootNotConverged { .. }
    )
}

struct Run {
    point: Point,
    residual: f64,
    trace: Vec<TraceEntry>,
    converged: bool,
    min_quadratic: f64,
    min_quadratic_parts: Option<(f64, f64)>,
}

fn descend(ctx: &DualContext, cfg: &SolverConfig, mode: Mode, init: &Field) -> Result<Run> {
    let tinit = ctx.apply_t(init)?;
    let mut p = project(ctx, mode, init, &tinit, cfg.tol_defect)?;
    let mut trace = Vec::new();
    let mut min_quadratic = f64::INFINITY;
    let mut min_parts: Option<(f64, f64)> = None;
    let mut step = 0.0;
    let mut jump = 0.0;
    loop {
        let residual = ctx.dual_residual(&p.w, &p.tw)?;
        min_quadratic = min_quadratic.min(p.w.inner(&p.tw)?);
        if let Some((a, c)) = p.quad_parts {
            min_parts = Some(match min_parts {
                Some((x, y)) => (x.min(a), y.min(c)),
                None => (a, c),
            });
        }
        trace.push(TraceEntry {
            psi: p.psi,
            residual,
            step,
            jump,
            defect: p.defects.0.abs().max(p.defects.1.abs()),
        });
        let feasible = p.defects.0.abs() <= cfg.tol_defect && p.defects.1.abs() <= cfg.tol_defect;
        let done = residual <= cfg.tol_residual && feasible;
        if done || trace.len() > cfg.max_iters {
            return Ok(Run {
                point: p,
                residual,
                trace,
                converged: done,
                min_quadratic,
                min_quadratic_parts: min_parts,
            });
        }

        let grad = ctx.grad_psi_with(&p.w, &p.tw)?;
        let d = match cfg.metric {
            DescentMetric::Secant => p.tw.map(|v| ctx.nl().f(v)).sub(&p.w)?,
            DescentMetric::Gradient => grad.scale(-1.0),
        };
        let slope = grad.inner(&d)?;
        let td = ctx.apply_t(&d)?;
        let noise = 32.0 * f64::EPSILON * p.psi.abs();
        let mut alpha = cfg.step0;
        let mut next = None;
        if slope < 0.0 {
            for _ in 0..60 {
                let x = p.w.lin_comb(1.0, &d, alpha)?;
                let tx = p.tw.lin_comb(1.0, &td, alpha)?;
                match project(ctx, mode, &x, &tx, cfg.tol_defect) {
                    Ok(q) if q.psi <= p.psi + cfg.armijo_c * alpha * slope + noise => {
                        jump = q.psi - ctx.psi_with(&x, &tx)?;
                        next = Some(q);
                        break;
                    }
                    Ok(_) => {}
                    Err(e) if recoverable(&e) => {}
                    Err(e) => return Err(e),
                }
                alpha *= cfg.armijo_shrink;
            }
        }
        match next {
            Some(q) => {
                p = q;
                step = alpha;
            }
            None => {
                // no admissible step: stationary to working precision
                return Ok(Run {
                    point: p,
                    residual,
                    trace,
                    converged: false,
                    min_quadratic,
                    min_quadratic_parts: min_parts,
                });
            }
        }
    }
}

fn finish(ctx: &DualContext, run: Run, seed: u64, restarts: usize, starts: Vec<StartSummary>) -> Result<SolveReport> {
    let Run {
        point,
        residual,
        trace,
        min_quadratic,
        min_quadratic_parts,
        ..
    } = run;
    let (classification, nodal_domains) = classify(&point.tw)?;
    let primal = ctx.primal_energy_of_tw(&point.w, &point.tw)?;
    Ok(SolveReport {
        psi: point.psi,
        primal,
        residual,
        iters: trace.len() - 1,
        trace,
        classification,
        nodal_domains,
        seed,
        defects: point.defects,
        min_quadratic,
        min_quadratic_parts,
        restarts,
        starts,
        w: point.w,
        u: point.tw,
    })
}

fn single(ctx: &DualContext, cfg: &SolverConfig, mode: Mode, init: &Field) -> Result<SolveReport> {
    cfg.validate().map_err(Error::InvalidConfig)?;
    ctx.grid().check_same(init.grid())?;
    let run = match descend(ctx, cfg, mode, init) {
        Err(Error::NotSignChanging) => return Err(Error::SignCollapse { starts: 1 }),
        other => other?,
    };
    if !run.converged {
        return Err(Error::NotConverged {
            best_residual: run.residual,
            trace: run.trace,
        });
    }
    let summary = StartSummary {
        seed: cfg.seed,
        converged: true,
        collapsed: false,
        psi: run.point.psi,
        residual: run.residual,
        iters: run.trace.len() - 1,
    };
    finish(ctx, run, cfg.seed, 0, vec![summary])
}

/// Ground state from a caller-supplied initial field.
pub fn solve_ground_state_from(ctx: &DualContext, cfg: &SolverConfig, init: &Field) -> Result<SolveReport> {
    single(ctx, cfg, Mode::Ground, init)
}

/// Nodal ground state from a caller-supplied sign-changing initial field.
pub fn solve_nodal_from(ctx: &DualContext, cfg: &SolverConfig, init: &Field) -> Result<SolveReport> {
    single(ctx, cfg, Mode::Nodal, init)
}

/// `sin(πx/lx)·sin(πy/ly)·(1 + 0.2ξ)` with seeded `ξ ~ U(−1, 1)` per node,
/// scaled to unit max.
pub fn ground_initial(ctx: &DualContext, seed: u64) -> Field {
    let g = *ctx.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lx, ly) = (g.lx(), g.ly());
    Field::from_fn(g, |x, y| {
        (PI * x / lx).sin() * (PI * y / ly).sin() * (1.0 + 0.2 * rng.gen_range(-1.0..1.0))
    })
}

/// `sin(2πx/lx)·sin(πy/ly)·(1 + 0.2ξ)`: positive on the left half,
/// negative on the right.
pub fn nodal_initial(ctx: &DualContext, seed: u64) -> Field {
    let g = *ctx.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lx, ly) = (g.lx(), g.ly());
    Field::from_fn(g, |x, y| {
        (2.0 * PI * x / lx).sin() * (PI * y / ly).sin() * (1.0 + 0.2 * rng.gen_range(-1.0..1.0))
    })
}

/// Seed of the `k`-th attempt of start `i`.
fn start_seed(base: u64, i: usize, attempt: usize) -> u64 {
    base.wrapping_add(i as u64)
        .wrapping_add((attempt as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

const MAX_ATTEMPTS: usize = 4;

enum StartOutcome {
    Done { run: Run, seed: u64, restarts: usize },
    Collapsed { restarts: usize },
}

fn run_start(ctx: &DualContext, cfg: &SolverConfig, mode: Mode, i: usize) -> Result<StartOutcome> {
    for attempt in 0..MAX_ATTEMPTS {
        let seed = start_seed(cfg.seed, i, attempt);
        let init = match mode {
            Mode::Ground => ground_initial(ctx, seed),
            Mode::Nodal => nodal_initial(ctx, seed),
        };
        match descend(ctx, cfg, mode, &init) {
            Ok(run) => {
                let collapsed = mode == Mode::Nodal
                    && classify(&run.point.tw).map(|(c, _)| c != Classification::Nodal).unwrap_or(true);
                if !collapsed {
                    return Ok(StartOutcome::Done {
                        run,
                        seed,
                        restarts: attempt,
                    });
                }
            }
            Err(Error::NotSignChanging) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(StartOutcome::Collapsed {
        restarts: MAX_ATTEMPTS,
    })
}

fn thread_count(cfg: &SolverConfig) -> usize {
    let avail = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let t = if cfg.threads == 0 { avail } else { cfg.threads };
    t.clamp(1, cfg.n_starts)
}

fn multi_start(ctx: &DualContext, cfg: &SolverConfig, mode: Mode) -> Result<SolveReport> {
    cfg.validate().map_err(Error::InvalidConfig)?;
    let n = cfg.n_starts;
    let threads = thread_count(cfg);
    let mut outcomes: Vec<Option<Result<StartOutcome>>> = (0..n).map(|_| None).collect();
    if threads == 1 {
        for (i, slot) in outcomes.iter_mut().enumerate() {
            *slot = Some(run_start(ctx, cfg, mode, i));
        }
    } else {
        std::thread::scope(|scope| {
            let chunk = n.div_ceil(threads);
            for (c, slots) in outcomes.chunks_mut(chunk).enumerate() {
                scope.spawn(move || {
                    for (k, slot) in slots.iter_mut().enumerate() {
                        *slot = Some(run_start(ctx, cfg, mode, c * chunk + k));
                    }
                });
            }
        });
    }

    let mut restarts = 0;
    let mut summaries = Vec::new();
    let mut done = Vec::new();
    let mut collapsed = 0;
    for outcome in outcomes.into_iter().map(|o| o.expect("every start ran")) {
        match outcome? {
            StartOutcome::Done { run, seed, restarts: r } => {
                restarts += r;
                summaries.push(StartSummary {
                    seed,
                    converged: run.converged,
                    collapsed: false,
                    psi: run.point.psi,
                    residual: run.residual,
                    iters: run.trace.len() - 1,
                });
                done.push((run, seed));
            }
            StartOutcome::Collapsed { restarts: r } => {
                restarts += r;
                collapsed += 1;
                summaries.push(StartSummary {
                    seed: start_seed(cfg.seed, summaries.len(), r - 1),
                    converged: false,
                    collapsed: true,
                    psi: f64::NAN,
                    residual: f64::NAN,
                    iters: 0,
                });
            }
        }
    }
    if collapsed == n {
        return Err(Error::SignCollapse { starts: n });
    }
    let best = done
        .iter()
        .enumerate()
        .filter(|(_, (r, _))| r.converged)
        .min_by(|(_, (a, sa)), (_, (b, sb))| a.point.psi.total_cmp(&b.point.psi).then(sa.cmp(sb)))
        .map(|(i, _)| i);
    match best {
        Some(i) => {
            let (run, seed) = done.swap_remove(i);
            finish(ctx, run, seed, restarts, summaries)
        }
        None => {
            let (run, _) = done
                .into_iter()
                .min_by(|(a, sa), (b, sb)| a.residual.total_cmp(&b.residual).then(sa.cmp(sb)))
                .expect("at least one start did not collapse");
            Err(Error::NotConverged {
                best_residual: run.residual,
                trace: run.trace,
            })
        }
    }
}

/// Minimize `Ψ` over the Nehari set from `n_starts` perturbed sine bumps.
pub fn solve_ground_state(ctx: &DualContext, cfg: &SolverConfig) -> Result<SolveReport> {
    multi_start(ctx, cfg, Mode::Ground)
}

/// Minimize `Ψ` over the nodal set from `n_starts` perturbed dipoles.
pub fn solve_nodal(ctx: &DualContext, cfg: &SolverConfig) -> Result<SolveReport> {
    multi_start(ctx, cfg, Mode::Nodal)
}
