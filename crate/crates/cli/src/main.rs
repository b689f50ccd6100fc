use std::path::PathBuf;
use std::process::ExitCode;

use anneal_core::experiments::{
    exit_code, run_diagnostics, run_estimate, run_logistic_pipeline, run_sweep, Config, FamilyConfig, SweepSpec,
    EXIT_CONFIG, EXIT_DIAGNOSTIC, EXIT_OK,
};
use anneal_core::potential::LogisticModel;
use anyhow::Context;
use clap::{Args, Parser, Subcommand};

/// Annealed importance sampling and thermodynamic integration with
/// discretized Langevin diffusions.
#[derive(Parser)]
#[command(name = "anneal", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct Overrides {
    /// Base seed (overrides run.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (overrides run.workers).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output CSV (overrides output.path).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate log Z1/Z0 for one (epsilon, h) cell.
    Estimate { config: PathBuf },
    /// Run a resumable grid over dimensions.
    Sweep { config: PathBuf },
    /// Marginal likelihood of a logistic regression data set.
    Logistic { data: PathBuf, config: PathBuf },
    /// Run the diagnostic suite; exit code 3 if any check fails.
    Diagnose { config: PathBuf },
}

fn load(path: &PathBuf, o: &Overrides) -> anyhow::Result<Config> {
    let mut c = Config::from_file(path)?;
    if let Some(s) = o.seed {
        c.run.seed = s;
    }
    if o.workers.is_some() {
        c.run.workers = o.workers;
    }
    if let Some(out) = &o.out {
        c.output.path = out.clone();
    }
    c.validate()?;
    Ok(c)
}

fn run(cli: &Cli) -> anyhow::Result<i32> {
    let o = &cli.overrides;
    match &cli.command {
        Command::Estimate { config } => {
            let c = load(config, o)?;
            let out = run_estimate(&c)?;
            print!("{}", out.summary_csv()?);
            Ok(EXIT_OK)
        }
        Command::Sweep { config } => {
            let c = load(config, o)?;
            let spec = SweepSpec::from_config(&c)?;
            let out = run_sweep(&spec)?;
            for cell in &out.computed {
                for row in cell.report_rows() {
                    println!(
                        "d={} eps={:e} h={:e} {} estimate={} stderr={}",
                        row.d, row.epsilon, row.h, row.estimator, row.estimate, row.stderr
                    );
                }
            }
            println!(
                "computed {} cells, skipped {}, {}",
                out.computed.len(),
                out.skipped,
                if out.complete { "complete" } else { "incomplete" }
            );
            Ok(EXIT_OK)
        }
        Command::Logistic { data, config } => {
            let c = load(config, o)?;
            let prior_var = match &c.family {
                FamilyConfig::Logistic { prior_var, .. } => *prior_var,
                f => anyhow::bail!("config family is `{}`, expected `logistic`", f.name()),
            };
            let model = LogisticModel::from_csv(data, prior_var).with_context(|| format!("{}", data.display()))?;
            let r = run_logistic_pipeline(model, &c)?;
            let k = &r.constants;
            println!(
                "d={} m={} epsilon={:e} h={:e} replicates={}",
                r.d, r.m, r.epsilon, r.h, r.replicates
            );
            println!(
                "K={} L={} M={} xi={} lambda_max={}",
                k.strong_convexity,
                k.lipschitz,
                k.time_continuity,
                k.xi.unwrap_or(f64::NAN),
                k.lambda_max.unwrap_or(f64::NAN)
            );
            println!("log_z0={}", r.log_z0);
            print!("{}", r.summary_csv()?);
            let status = |ok: bool| if ok { "PASS" } else { "FAIL" };
            println!(
                "contraction {} ({} violations / {})",
                status(r.contraction.satisfied),
                r.contraction.violations,
                r.contraction.checked
            );
            match &r.drift {
                Some(d) => println!(
                    "drift {} ({} violations / {})",
                    status(d.satisfied),
                    d.violations,
                    d.checked
                ),
                None => println!("drift SKIP (h/epsilon >= 2K/L^2)"),
            }
            Ok(EXIT_OK)
        }
        Command::Diagnose { config } => {
            let c = load(config, o)?;
            let out = run_diagnostics(&c)?;
            print!("{}", out.summary());
            Ok(if out.passed { EXIT_OK } else { EXIT_DIAGNOSTIC })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                EXIT_CONFIG as u8
            } else {
                EXIT_OK as u8
            });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<anneal_core::Error>().map_or(EXIT_CONFIG, exit_code);
            ExitCode::from(code as u8)
        }
    }
}
