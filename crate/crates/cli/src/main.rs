use std::path::PathBuf;
use std::process::ExitCode;

use biharm_dual_cli::{read_config, run, EXIT_CONFIG};
use clap::Parser;

/// Ground and nodal ground states of Δ²u = f(u) by the dual method.
///
/// Flags override the matching keys of the configuration file.
#[derive(Debug, Parser)]
#[command(name = "biharm-dual", version)]
struct Args {
    /// Configuration file with `key = value` lines.
    config: PathBuf,
    #[arg(long)]
    nx: Option<String>,
    #[arg(long)]
    ny: Option<String>,
    #[arg(long)]
    lx: Option<String>,
    #[arg(long)]
    ly: Option<String>,
    #[arg(long)]
    bc: Option<String>,
    /// `a,p`; repeat for several terms. Replaces the file's terms.
    #[arg(long = "term", allow_hyphen_values = true)]
    terms: Vec<String>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    output: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long = "max_iters")]
    max_iters: Option<String>,
    #[arg(long)]
    step0: Option<String>,
    #[arg(long = "armijo_c")]
    armijo_c: Option<String>,
    #[arg(long = "armijo_shrink")]
    armijo_shrink: Option<String>,
    #[arg(long = "tol_residual")]
    tol_residual: Option<String>,
    #[arg(long = "tol_defect")]
    tol_defect: Option<String>,
    #[arg(long = "n_starts")]
    n_starts: Option<String>,
    #[arg(long)]
    metric: Option<String>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{}: {e}", args.config.display());
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let mut builder = read_config(&text);
    let overrides = [
        ("nx", &args.nx),
        ("ny", &args.ny),
        ("lx", &args.lx),
        ("ly", &args.ly),
        ("bc", &args.bc),
        ("mode", &args.mode),
        ("output", &args.output),
        ("seed", &args.seed),
        ("max_iters", &args.max_iters),
        ("step0", &args.step0),
        ("armijo_c", &args.armijo_c),
        ("armijo_shrink", &args.armijo_shrink),
        ("tol_residual", &args.tol_residual),
        ("tol_defect", &args.tol_defect),
        ("n_starts", &args.n_starts),
        ("metric", &args.metric),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            builder.set(key, v, 0);
        }
    }
    if !args.terms.is_empty() {
        builder.clear_terms();
        for t in &args.terms {
            builder.set("term", t, 0);
        }
    }
    let cfg = match builder.build() {
        Ok(c) => c,
        Err(errors) => {
            for d in &errors.0 {
                eprintln!("{}: {d}", args.config.display());
            }
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    match run(&cfg) {
        Ok(outcome) => {
            let r = &outcome.report;
            for section in ["ground", "nodal"] {
                let s = &r[section];
                if s.is_null() {
                    continue;
                }
                if s["converged"] == true {
                    eprintln!(
                        "{section}: psi = {} residual = {} iters = {} ({}, {} domains)",
                        s["psi"], s["residual"], s["iters"], s["classification"], s["nodal_domains"]
                    );
                } else {
                    eprintln!("{section}: {}", s["error"]);
                }
            }
            eprintln!("wrote {}", cfg.output.join("report.json").display());
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
