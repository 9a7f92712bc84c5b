use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use oco_cli::accept::{run_suite, select, write_artifacts, Ctx, CRITERIA};
use oco_cli::csv::format_number;
use oco_cli::{run_experiment, CliError, ExperimentConfig, RunOptions, RunSummary};

#[derive(Parser)]
#[command(name = "oco", version, about = "Run online learning experiments and the acceptance suite")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Play every seed of a config and write one CSV per seed.
    Run {
        config: PathBuf,
        /// Master seed, replacing `master_seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for the CSVs.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run acceptance presets: `all`, a criterion number, a preset name, or `list`.
    Accept {
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for the preset artifacts; nothing is written without it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Play a config without writing CSVs and print final regret against the bound per seed.
    Bounds {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn print_summary(summary: &RunSummary) {
    for s in &summary.seeds {
        let bound = s.final_bound.map(format_number).unwrap_or_else(|| "-".into());
        println!(
            "seed {:>3} ({:#018x}): final regret {} bound {} {}",
            s.index,
            s.seed,
            format_number(s.final_regret),
            bound,
            if s.passed { "ok" } else { "VIOLATED" }
        );
    }
    let bound = summary.mean_final_bound.map(format_number).unwrap_or_else(|| "-".into());
    println!(
        "{}: T = {}, {} seeds, mean final regret {}, max {}, mean bound {}, check {:?}: {}",
        summary.name,
        summary.horizon,
        summary.seeds.len(),
        format_number(summary.mean_final_regret),
        format_number(summary.max_final_regret),
        bound,
        summary.check,
        if summary.passed { "pass" } else { "FAIL" }
    );
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let summary = run_experiment(&cfg, &RunOptions { master_seed: seed, out_dir: Some(out) })?;
            print_summary(&summary);
            Ok(summary.passed)
        }
        Command::Bounds { config, seed } => {
            let cfg = ExperimentConfig::load(&config)?;
            let summary = run_experiment(&cfg, &RunOptions { master_seed: seed, out_dir: None })?;
            print_summary(&summary);
            Ok(summary.passed)
        }
        Command::Accept { suite, seed, out } => {
            if suite == "list" {
                for c in &CRITERIA {
                    println!("{:02} {:<20} {}", c.id, c.slug, c.title);
                }
                return Ok(true);
            }
            let ids = select(&suite)?;
            let outcomes = run_suite(&ids, &Ctx { master_seed: seed }, |o| println!("{}", o.line()));
            if let Some(dir) = out {
                write_artifacts(&outcomes, &dir)?;
            }
            let failed = outcomes.iter().filter(|o| !o.passed).count();
            println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
            Ok(failed == 0)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
