//! `privsub` — experiment driver CLI.
//!
//! Usage: `privsub <task> --config <file> [--seed N --trials N --out path]
//! [--audit] [--emit-instance path]`
//!
//! Exit codes: 0 success, 1 usage error, 2 solver/oracle error, 3 audit
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use privsub_harness::config::{ExperimentConfig, Task};
use privsub_harness::runner::{self, run_experiment};

#[derive(Parser, Debug)]
#[command(name = "privsub", disable_help_subcommand = true)]
struct Cli {
    /// Task: submod-cardinality | submod-matroid | setcover | clustering |
    /// heavyhitters | audit
    task: String,

    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,

    /// Replace the config's seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Override the number of trials per seed.
    #[arg(long)]
    trials: Option<usize>,

    /// Output path for the metrics CSV (audit reports use `<out>.audit.json`).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Additionally run the built-in exact audit battery and fail (exit 3)
    /// if any claim is violated.
    #[arg(long)]
    audit: bool,

    /// Write the materialized instance in its interchange format and exit.
    #[arg(long)]
    emit_instance: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help/version requests are not usage errors.
            if err.use_stderr() {
                eprintln!("{err}");
                return ExitCode::from(1);
            }
            print!("{err}");
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let task = match Task::parse(&cli.task) {
        Ok(task) => task,
        Err(err) => {
            eprintln!("error: {err}");
            return Ok(ExitCode::from(1));
        }
    };
    let mut config = ExperimentConfig::load(&cli.config)?;
    config.task = task;
    if let Some(seed) = cli.seed {
        config.seeds = vec![seed];
    }
    if let Some(trials) = cli.trials {
        config.trials = trials;
    }
    if let Some(out) = cli.out {
        config.out = Some(out);
    }
    config.validate()?;

    if let Some(path) = cli.emit_instance {
        let instance = runner::materialize_instance(&config)?;
        let (contents, _ext) = runner::instance_to_file(&instance)?;
        std::fs::write(&path, contents)?;
        println!("wrote instance to {}", path.display());
        return Ok(ExitCode::SUCCESS);
    }

    let output = run_experiment(&config)?;
    if let Some(out) = &config.out {
        if !output.csv.is_empty() {
            std::fs::write(out, &output.csv)?;
            println!("wrote {} rows to {}", output.rows.len(), out.display());
        }
        for (suffix, bytes) in &output.artifacts {
            let path = out.with_file_name(format!(
                "{}.{suffix}",
                out.file_stem().and_then(|s| s.to_str()).unwrap_or("out")
            ));
            std::fs::write(&path, bytes)?;
            println!("wrote {}", path.display());
        }
    } else {
        if !output.csv.is_empty() {
            print!("{}", output.csv);
        }
        for (suffix, bytes) in &output.artifacts {
            if suffix.ends_with(".json") {
                println!("{}", String::from_utf8_lossy(bytes));
            }
        }
    }
    if !output.passed() {
        eprintln!("audit battery failed");
        return Ok(ExitCode::from(3));
    }

    if cli.audit && task != Task::Audit {
        let battery = runner::run_audit_battery(config.params.epsilon.min(1.0))?;
        if let Some(out) = &config.out {
            let path = out.with_extension("audit.json");
            std::fs::write(&path, serde_json::to_string_pretty(&battery)?)?;
            println!("wrote audit report to {}", path.display());
        }
        if !battery.pass {
            eprintln!("audit battery failed");
            return Ok(ExitCode::from(3));
        }
    }
    Ok(ExitCode::SUCCESS)
}
