//! `acns` command-line interface.
//!
//! Every subcommand prints one JSON object on stdout when it succeeds. On
//! failure it prints `{"error": kind, "message": text}` on stderr and exits
//! with a code that identifies the failure class:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success (including an `insufficient` ensemble verdict) |
//! | 1 | I/O or serialization failure |
//! | 2 | command-line usage error |
//! | 3 | invalid configuration or parameters |
//! | 4 | numerical blow-up or a solver failure |
//! | 5 | an ensemble member failed |
//! | 6 | the energy inequality check failed |

use std::path::PathBuf;
use std::process::ExitCode;

use acns::harness::{self, RunConfig, RunOptions, VerdictStatus, WORKERS_ENV};
use acns::Error;
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "acns", version, about = "Stochastic Allen–Cahn–Navier–Stokes simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single trajectory: snapshots, energy ledger, summary.
    Run {
        #[arg(short, long)]
        config: PathBuf,
        /// Fresh output directory.
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Monte-Carlo ensemble and energy-inequality verdict.
    Ensemble {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Overrides `ensemble.members`.
        #[arg(short, long)]
        members: Option<usize>,
        #[arg(short, long, env = WORKERS_ENV)]
        workers: Option<usize>,
    },
    /// Paired paths from two nearby initial data.
    Dependence {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Perturbation sizes, replacing `dependence.epsilons`.
        #[arg(short, long = "epsilon", value_delimiter = ',')]
        epsilons: Vec<f64>,
    },
    /// Pressure of a finished `run` directory.
    Pressure { dir: PathBuf },
    /// Self-convergence in N, λ or dt.
    Converge {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Checks a configuration without running it.
    Validate {
        #[arg(short, long)]
        config: PathBuf,
    },
}

struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::Io(_) | Error::Json(_) => (1, "io"),
            Error::BlowUp { .. } | Error::Domain { .. } | Error::Convergence { .. } => (4, "blow_up"),
            Error::Member { .. } => (5, "member"),
            _ => (3, "config"),
        };
        Failure {
            code,
            kind,
            message: e.to_string(),
        }
    }
}

fn execute(command: Command) -> Result<Value, Failure> {
    match command {
        Command::Run { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let outcome = harness::run(&cfg, &out)?;
            Ok(json!({ "command": "run", "out": out, "summary": outcome.summary }))
        }
        Command::Ensemble {
            config,
            out,
            members,
            workers,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(m) = members {
                cfg.ensemble.members = m;
            }
            let outcome = harness::ensemble(&cfg, &out, RunOptions { workers })?;
            let v = &outcome.verdict;
            let value = json!({
                "command": "ensemble",
                "out": out,
                "status": v.status,
                "members": v.members,
                "worst_margin": v.inequality.as_ref().map(|i| i.worst_margin),
            });
            if v.status == VerdictStatus::Fail {
                return Err(Failure {
                    code: 6,
                    kind: "verdict",
                    message: format!("energy inequality violated; see {}", out.join("verdict.json").display()),
                });
            }
            Ok(value)
        }
        Command::Dependence { config, out, epsilons } => {
            let cfg = RunConfig::load(&config)?;
            let eps = (!epsilons.is_empty()).then_some(epsilons.as_slice());
            let study = harness::dependence(&cfg, &out, eps)?;
            Ok(json!({
                "command": "dependence",
                "out": out,
                "slope": study.slope,
                "final_distances": study.reports.iter().map(|r| r.final_distance).collect::<Vec<_>>(),
            }))
        }
        Command::Pressure { dir } => {
            let p = harness::pressure(&dir)?;
            Ok(json!({
                "command": "pressure",
                "dir": dir,
                "steps": p.steps.len(),
                "max_closure": p.max_closure,
                "max_mean": p.max_mean,
                "ratio": p.report.ratio,
            }))
        }
        Command::Converge { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let r = harness::converge(&cfg, &out)?;
            Ok(json!({
                "command": "converge",
                "out": out,
                "distances": r.distances,
                "rates": r.rates,
                "fitted_rate": r.fitted_rate,
                "monotone": r.monotone,
            }))
        }
        Command::Validate { config } => {
            let cfg = RunConfig::load(&config)?;
            cfg.validate()?;
            Ok(json!({ "command": "validate", "valid": true, "config_hash": harness::config_hash(&cfg)? }))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(v) => {
            println!("{v}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("{}", json!({ "error": f.kind, "message": f.message }));
            ExitCode::from(f.code)
        }
    }
}
