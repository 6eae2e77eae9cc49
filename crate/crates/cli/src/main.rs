use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{Parser, Subcommand};
use vvflux_core::harness::{self, SweepOptions};
use vvflux_core::solver::{run_mms, MmsProblem};

#[derive(Debug, Parser)]
#[command(name = "vvflux", about = "Vanishing-viscosity sweeps for conservation laws with discontinuous flux")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an eps sweep and write per-run CSVs plus sweep reports.
    Run {
        config: PathBuf,
        /// Output directory (overrides `out_dir` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Sweep members solved concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Check the flux and interface hypotheses without solving.
    Validate { config: PathBuf },
    /// Solver verification against exact advection-diffusion solutions.
    Mms,
    /// Print the version.
    Version,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config, out, jobs } => run(config, out, jobs),
        Command::Validate { config } => validate(config),
        Command::Mms => mms(),
        Command::Version => {
            println!("vvflux {}", env!("CARGO_PKG_VERSION"));
            Ok(0)
        }
    };
    match code {
        Ok(c) => ExitCode::from(c),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .downcast_ref::<vvflux_core::Error>()
                .map_or(1, vvflux_core::Error::exit_code);
            ExitCode::from(code as u8)
        }
    }
}

fn load(path: &PathBuf) -> anyhow::Result<harness::RunConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(harness::parse_config(&text)?)
}

fn run(config: PathBuf, out: Option<PathBuf>, jobs: usize) -> anyhow::Result<u8> {
    let cfg = load(&config)?;
    let out_dir = out.or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    let report = harness::run_sweep(
        &cfg,
        &SweepOptions {
            jobs,
            out_dir: Some(out_dir.clone()),
        },
    )?;
    for r in &report.runs {
        println!(
            "eps={} n={} steps={} beta={:.6} r2={} max_u+={:.3e} l1_margin={:.4} ledger={:.3e}",
            r.eps,
            r.cells,
            r.steps,
            r.fit.beta,
            r.fit.r_squared.map_or("n/a".to_string(), |v| format!("{v:.4}")),
            r.max_positivity,
            r.l1_margin,
            r.ledger_max
        );
        for w in &r.warnings {
            eprintln!("warning: eps={}: {w}", r.eps);
        }
    }
    for v in &report.verdicts {
        println!("({}) {}: {}", v.label, v.rule, v.verdict);
    }
    println!("report: {}", out_dir.join("sweep_report.md").display());
    Ok(report.exit_code() as u8)
}

fn validate(config: PathBuf) -> anyhow::Result<u8> {
    let cfg = load(&config)?;
    let report = harness::validate_only(&cfg)?;
    println!("{report}");
    Ok(if report.pass() { 0 } else { 3 })
}

fn mms() -> anyhow::Result<u8> {
    let cases = [
        ("advection-diffusion, c = 1", MmsProblem::default(), 0.9),
        (
            "heat equation, c = 0",
            MmsProblem {
                speed: 0.0,
                ..MmsProblem::default()
            },
            0.9,
        ),
    ];
    let mut ok = true;
    for (name, problem, min_order) in cases {
        let table = run_mms(&problem)?;
        println!("{name}");
        for row in &table.rows {
            println!("  n={:5} h={:.5} l1_error={:.6e}", row.cells, row.spacing, row.l1_error);
        }
        let order = table.min_order().unwrap_or(f64::NAN);
        let pass = order >= min_order;
        ok &= pass;
        println!("  observed order {order:.3} (need >= {min_order}): {}", if pass { "PASS" } else { "FAIL" });
    }
    Ok(if ok { 0 } else { 2 })
}
