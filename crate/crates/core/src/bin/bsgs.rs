use std::path::PathBuf;
use std::process::ExitCode;

use bsgs::experiments::{self, Algorithm, Suite, SweepConfig};
use bsgs::Error;
use clap::{Args, Parser, Subcommand};

/// Bias-scaling sweeps and invariant suites.
#[derive(Parser)]
#[command(name = "bsgs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an invariant suite: markov, pg, pmc, hmm or core.
    Verify { suite: String },
    /// Policy-gradient sweep over λ.
    PgSweep(RunArgs),
    /// Adaptive PMC sweep over the particle count.
    PmcSweep(RunArgs),
    /// Split-likelihood sweep over the block length.
    HmmSweep(RunArgs),
    /// Policy-gradient runs with trajectory CSVs.
    PgRun(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    steps: Option<usize>,
}

enum Failure {
    Usage(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. }
            | Error::Json(_)
            | Error::InvalidSchedule(_)
            | Error::InvalidProjection(_) => Failure::Usage(e.to_string()),
            other => Failure::Run(other.to_string()),
        }
    }
}

fn load(args: &RunArgs, expected: Algorithm) -> Result<(SweepConfig, PathBuf), Failure> {
    let mut cfg = SweepConfig::load(&args.config)
        .map_err(|e| Failure::Usage(format!("{}: {e}", args.config.display())))?;
    if cfg.algorithm != expected {
        return Err(Failure::Usage(format!(
            "config algorithm is {:?}, this subcommand expects {expected:?}",
            cfg.algorithm
        )));
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(steps) = args.steps {
        cfg.steps = steps;
    }
    if let Some(out) = &args.out {
        cfg.output = Some(out.clone());
    }
    cfg.validate()?;
    let out = cfg.output.clone().unwrap_or_else(|| PathBuf::from("."));
    cfg.output = Some(out.clone());
    Ok((cfg, out))
}

fn sweep(args: &RunArgs, algorithm: Algorithm) -> Result<bool, Failure> {
    let (cfg, out) = load(args, algorithm)?;
    let report = experiments::sweep(&cfg)?;
    report.write(&out).map_err(Failure::from)?;
    for c in &report.checks {
        println!(
            "{} {} value={} threshold={}",
            match (c.required, c.passed) {
                (false, _) => "INFO",
                (true, true) => "PASS",
                (true, false) => "FAIL",
            },
            c.name,
            c.value,
            c.threshold
        );
    }
    println!("report written to {}", out.join("report.json").display());
    Ok(report.passed)
}

fn dispatch(cli: Cli) -> Result<bool, Failure> {
    match cli.command {
        Command::Verify { suite } => {
            let suite: Suite = suite
                .parse()
                .map_err(|e: Error| Failure::Usage(e.to_string()))?;
            let report = experiments::verify(suite)?;
            println!(
                "{}",
                serde_json::to_string(&report).map_err(|e| Failure::Run(e.to_string()))?
            );
            Ok(report.passed)
        }
        Command::PgSweep(a) => sweep(&a, Algorithm::PolicyGradient),
        Command::PmcSweep(a) => sweep(&a, Algorithm::AdaptivePmc),
        Command::HmmSweep(a) => sweep(&a, Algorithm::HmmIdent),
        Command::PgRun(a) => {
            let (cfg, out) = load(&a, Algorithm::PolicyGradient)?;
            let runs = experiments::pg_run(&cfg)?;
            for r in &runs {
                println!(
                    "lambda={} final_theta={:?} tail_sup_grad={} projections={}",
                    r.lambda, r.final_theta, r.tail.sup_grad_norm, r.projections
                );
            }
            println!("trajectories written to {}", out.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
