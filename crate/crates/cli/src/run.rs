//! Execute a configuration and write `report.json`, field and trace CSVs.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use biharm_dual::biharmonic::{discrete_sine_eigenvalue, sine_mode};
use biharm_dual::{
    cross_term_inequality, fibering_jacobian, solve_ground_state, solve_nodal, BoundaryCondition, Classification,
    DualContext, Error, Field, Grid2D, SolveReport, TraceEntry,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{Mode, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

/// Environment variable capping multi-start worker threads.
pub const THREADS_ENV: &str = "BIHARM_DUAL_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Setup(Error),
    #[error("{THREADS_ENV} must be a positive integer, got {0:?}")]
    Threads(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        EXIT_CONFIG
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub report: Value,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), RunError> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(contents.as_bytes()).map_err(io_err(path))
}

/// `x,y,value` rows in node order, 17 significant digits.
pub fn field_csv(field: &Field) -> String {
    let g = field.grid();
    let mut out = String::from("x,y,value\n");
    for (k, v) in field.values().iter().enumerate() {
        let (x, y) = g.coords(k);
        out.push_str(&format!("{x:.16e},{y:.16e},{v:.16e}\n"));
    }
    out
}

pub fn trace_csv(trace: &[TraceEntry]) -> String {
    let mut out = String::from("iter,psi,residual,step\n");
    for (i, t) in trace.iter().enumerate() {
        out.push_str(&format!("{i},{:.16e},{:.16e},{:.16e}\n", t.psi, t.residual, t.step));
    }
    out
}

/// Read a field written by [`field_csv`] back onto `grid`, checking that
/// the coordinates match node by node.
pub fn read_field_csv(text: &str, grid: Grid2D) -> Result<Field, String> {
    let mut lines = text.lines();
    if lines.next() != Some("x,y,value") {
        return Err("missing x,y,value header".into());
    }
    let mut values = Vec::with_capacity(grid.len());
    for (k, line) in lines.enumerate() {
        let cols: Vec<f64> = line
            .split(',')
            .map(|c| c.parse::<f64>().map_err(|e| format!("row {}: {e}", k + 1)))
            .collect::<Result<_, _>>()?;
        let [x, y, v] = cols.as_slice() else {
            return Err(format!("row {}: expected 3 columns", k + 1));
        };
        if k >= grid.len() {
            return Err("more rows than grid nodes".into());
        }
        let (gx, gy) = grid.coords(k);
        if (x - gx).abs() > 1e-12 * grid.lx() || (y - gy).abs() > 1e-12 * grid.ly() {
            return Err(format!("row {}: node ({x}, {y}) does not match grid ({gx}, {gy})", k + 1));
        }
        values.push(*v);
    }
    Field::new(grid, values).map_err(|e| e.to_string())
}

fn threads_from_env() -> Result<Option<usize>, RunError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(RunError::Threads(v)),
        },
        Err(_) => Ok(None),
    }
}

fn report_json(ctx: &DualContext, r: &SolveReport, nodal: bool) -> Value {
    let mut v = json!({
        "converged": true,
        "error": Value::Null,
        "psi": r.psi,
        "primal": r.primal,
        "gap": (r.psi - r.primal).abs(),
        "relative_gap": (r.psi - r.primal).abs() / (1.0 + r.psi.abs()),
        "residual": r.residual,
        "iters": r.iters,
        "classification": r.classification,
        "nodal_domains": r.nodal_domains,
        "seed": r.seed,
        "defects": [r.defects.0, r.defects.1],
        "min_quadratic": r.min_quadratic,
        "min_quadratic_parts": r.min_quadratic_parts.map(|(a, b)| vec![a, b]),
        "restarts": r.restarts,
        "starts": r.starts,
        "jacobian": Value::Null,
        "cross_term": Value::Null,
    });
    if nodal {
        v["jacobian"] = match fibering_jacobian(ctx, &r.w) {
            Ok(j) => serde_json::to_value(j).expect("plain numbers"),
            Err(e) => json!({ "error": e.to_string() }),
        };
        v["cross_term"] = match cross_term_inequality(ctx, &r.w) {
            Ok((lhs, rhs)) => json!({ "lhs": lhs, "rhs": rhs, "strict": lhs < rhs }),
            Err(e) => json!({ "error": e.to_string() }),
        };
    }
    v
}

struct Section {
    json: Value,
    report: Option<SolveReport>,
    seconds: f64,
}

fn solve_section(ctx: &DualContext, cfg: &RunConfig, nodal: bool, out: &Path) -> Result<Section, RunError> {
    let name = if nodal { "nodal" } else { "ground" };
    let start = Instant::now();
    let result = if nodal {
        solve_nodal(ctx, &cfg.solver)
    } else {
        solve_ground_state(ctx, &cfg.solver)
    };
    let seconds = start.elapsed().as_secs_f64();
    match result {
        Ok(r) => {
            for (suffix, field) in [("w", &r.w), ("u", &r.u)] {
                write_file(&out.join(format!("field_{name}_{suffix}.csv")), &field_csv(field))?;
            }
            write_file(&out.join(format!("trace_{name}.csv")), &trace_csv(&r.trace))?;
            Ok(Section {
                json: report_json(ctx, &r, nodal),
                report: Some(r),
                seconds,
            })
        }
        Err(e) => {
            let (best, iters) = match &e {
                Error::NotConverged { best_residual, trace } => {
                    write_file(&out.join(format!("trace_{name}.csv")), &trace_csv(trace))?;
                    (Some(*best_residual), trace.len().saturating_sub(1))
                }
                _ => (None, 0),
            };
            Ok(Section {
                json: json!({
                    "converged": false,
                    "error": e.to_string(),
                    "best_residual": best,
                    "iters": iters,
                }),
                report: None,
                seconds,
            })
        }
    }
}

/// Property checks on the operator: sine-mode eigenpair (hinged plate
/// only), symmetry and positivity of `∫aTb` on seeded random fields, and
/// positivity preservation (hinged plate only).
fn operator_checks(ctx: &DualContext, seed: u64) -> Result<Value, Error> {
    let g = *ctx.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random = |lo: f64| Field::new(g, (0..g.len()).map(|_| rng.gen_range(lo..1.0)).collect());
    let mut sym = 0.0_f64;
    let mut min_quad = f64::INFINITY;
    let mut positivity = true;
    for _ in 0..10 {
        let a = random(-1.0)?;
        let b = random(-1.0)?;
        let ab = ctx.bilinear_t(&a, &b)?;
        let ba = ctx.bilinear_t(&b, &a)?;
        let scale = (ctx.bilinear_t(&a, &a)? * ctx.bilinear_t(&b, &b)?).sqrt();
        sym = sym.max((ab - ba).abs() / scale);
        min_quad = min_quad.min(ctx.bilinear_t(&a, &a)? / a.inner(&a)?);
        if g.bc() == BoundaryCondition::Navier {
            let pos = random(0.0)?.map(|v| v + 1e-3);
            positivity &= ctx.apply_t(&pos)?.values().iter().all(|&v| v > 0.0);
        }
    }
    let (sine, sine_ok) = if g.bc() == BoundaryCondition::Navier {
        let w = sine_mode(&g);
        let lam = discrete_sine_eigenvalue(&g);
        let tw = ctx.apply_t(&w)?;
        let err = tw.lin_comb(1.0, &w, -1.0 / (lam * lam))?.max_abs() / (w.max_abs() / (lam * lam));
        (json!(err), err <= 1e-10)
    } else {
        (Value::Null, true)
    };
    let passed = sym <= 1e-10 && min_quad > 0.0 && positivity && sine_ok;
    Ok(json!({
        "symmetry_defect": sym,
        "min_rayleigh_quotient": min_quad,
        "positivity_preserved": if g.bc() == BoundaryCondition::Navier { json!(positivity) } else { Value::Null },
        "sine_mode_error": sine,
        "passed": passed,
    }))
}

/// Run `cfg`, writing all outputs under `cfg.output`.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome, RunError> {
    let total = Instant::now();
    let mut cfg = cfg.clone();
    if cfg.solver.threads == 0 {
        if let Some(n) = threads_from_env()? {
            cfg.solver.threads = n;
        }
    }
    let out = cfg.output.clone();
    fs::create_dir_all(&out).map_err(io_err(&out))?;
    let nl = cfg.nonlinearity();
    let diagnostics = nl.validate();
    let ctx = DualContext::new(cfg.grid(), nl).map_err(RunError::Setup)?;

    let mut echo = serde_json::to_value(&cfg).expect("plain data");
    // thread count only affects scheduling, never results
    echo["solver"]
        .as_object_mut()
        .expect("struct")
        .remove("threads");
    echo["output"] = json!(cfg.output.display().to_string());

    let mut report = json!({
        "config": echo,
        "ground": Value::Null,
        "nodal": Value::Null,
        "checks": {
            "nonlinearity_hypotheses_ok": diagnostics.all_passed(),
            "energy_ordering_ok": Value::Null,
            "ground_one_signed": Value::Null,
            "nodal_two_domains": Value::Null,
            "jacobian_det_negative": Value::Null,
            "cross_term_strict": Value::Null,
        },
        "timings": {
            "ground_seconds": Value::Null,
            "nodal_seconds": Value::Null,
            "total_seconds": Value::Null,
        },
    });
    let mut exit_code = EXIT_OK;

    if cfg.mode == Mode::Validate {
        let ops = operator_checks(&ctx, cfg.solver.seed).map_err(RunError::Setup)?;
        let ok = diagnostics.all_passed() && ops["passed"] == json!(true);
        let validate = json!({
            "nonlinearity": diagnostics,
            "operator": ops,
            "all_passed": ok,
        });
        write_file(
            &out.join("validate.json"),
            &serde_json::to_string_pretty(&validate).expect("json"),
        )?;
        report["checks"]["operator"] = validate["operator"].clone();
        if !ok {
            exit_code = EXIT_NOT_CONVERGED;
        }
    }

    let mut ground = None;
    if matches!(cfg.mode, Mode::Ground | Mode::Both) {
        let s = solve_section(&ctx, &cfg, false, &out)?;
        report["ground"] = s.json;
        report["timings"]["ground_seconds"] = json!(s.seconds);
        match &s.report {
            Some(r) => {
                let signed = matches!(r.classification, Classification::Positive | Classification::Negative);
                report["checks"]["ground_one_signed"] = json!(signed);
            }
            None => exit_code = EXIT_NOT_CONVERGED,
        }
        ground = s.report;
    }
    if matches!(cfg.mode, Mode::Nodal | Mode::Both) {
        let s = solve_section(&ctx, &cfg, true, &out)?;
        report["timings"]["nodal_seconds"] = json!(s.seconds);
        match &s.report {
            Some(r) => {
                let checks = &mut report["checks"];
                checks["nodal_two_domains"] = json!(r.classification == Classification::Nodal && r.nodal_domains == 2);
                checks["jacobian_det_negative"] = s.json["jacobian"]["det"].as_f64().map(|d| d < 0.0).into();
                checks["cross_term_strict"] = s.json["cross_term"]["strict"].clone();
                if let Some(g) = &ground {
                    checks["energy_ordering_ok"] = json!(r.psi >= g.psi);
                }
            }
            None => exit_code = EXIT_NOT_CONVERGED,
        }
        report["nodal"] = s.json;
    }

    report["timings"]["total_seconds"] = json!(total.elapsed().as_secs_f64());
    write_file(
        &out.join("report.json"),
        &serde_json::to_string_pretty(&report).expect("json"),
    )?;
    Ok(RunOutcome { exit_code, report })
}
