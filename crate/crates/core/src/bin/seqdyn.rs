use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use seqdyn::runner::{self, ExperimentConfig, ExperimentRecord, DEFAULT_OUT_DIR, OUT_DIR_ENV};
use seqdyn::Error;

#[derive(Parser)]
#[command(name = "seqdyn", version, about = "Seeded experiments on sequential piecewise expanding maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML or JSON config.
    Run {
        config: PathBuf,
        /// Output directory (default: $SEQDYN_OUT_DIR, else ./seqdyn-out).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for Monte-Carlo sampling.
        #[arg(long)]
        threads: Option<usize>,
        /// Replaces the config's seed.
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// List the scenarios, their parameters, and what each checks.
    List {
        #[arg(long)]
        json: bool,
    },
    /// Re-run a stored record and compare its results bit for bit.
    Verify {
        record: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn set_threads(threads: Option<usize>) -> Result<(), Error> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Argument("--threads must be ≥ 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Argument(e.to_string()))?;
    }
    Ok(())
}

fn print_list(json: bool) -> Result<(), Error> {
    let rows = runner::list_scenarios();
    let mut out = std::io::stdout().lock();
    if json {
        let text = serde_json::to_string_pretty(&rows).map_err(|e| Error::Serialize(e.to_string()))?;
        writeln!(out, "{text}")?;
        return Ok(());
    }
    writeln!(out, "{:<18} {:<22} {:<40} verifies", "scenario", "required", "optional")?;
    for r in rows {
        writeln!(
            out,
            "{:<18} {:<22} {:<40} {}",
            r.name,
            r.required.join(","),
            r.optional.join(","),
            r.verifies
        )?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Run {
            config,
            out,
            threads,
            seed_override,
        } => {
            set_threads(threads)?;
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed_override {
                cfg.seed = Some(s);
            }
            let dir = out
                .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
            let (record, files) = runner::run_to_dir(&cfg, &dir)?;
            let summary = serde_json::json!({
                "scenario": record.config.scenario,
                "files": files,
                "fitted": record.fitted,
                "warnings": record.warnings,
                "wall_clock_seconds": record.wall_clock_seconds,
            });
            println!("{summary:#}");
            Ok(ExitCode::SUCCESS)
        }
        Command::List { json } => {
            print_list(json)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { record, threads } => {
            set_threads(threads)?;
            let rec = ExperimentRecord::load(&record)?;
            let report = runner::verify(&rec)?;
            println!("{:#}", serde_json::to_value(&report).map_err(|e| Error::Serialize(e.to_string()))?);
            Ok(if report.identical { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            let body = serde_json::json!({ "error_class": e.class(), "message": e.to_string() });
            eprintln!("{body}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
