use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dam_sim::{run_scenario, ScenarioConfig};

#[derive(Parser)]
#[command(name = "dam-sim", version, about = "Run delay alignment modulation scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its CSV results.
    Run {
        config: PathBuf,
        /// Parse and validate only; write nothing.
        #[arg(long)]
        validate_only: bool,
        /// Added to every seed in the scenario.
        #[arg(long, default_value_t = 0)]
        seed_offset: u64,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let Command::Run { config, validate_only, seed_offset, out, jobs } = Cli::parse().command;
    let cfg = match ScenarioConfig::load(&config) {
        Ok(c) => c.with_seed_offset(seed_offset),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if validate_only {
        println!("{}: ok", config.display());
        return ExitCode::SUCCESS;
    }
    let started = std::time::Instant::now();
    match run_scenario(&cfg, &out, jobs) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            log::info!("{} finished in {:.1} s", cfg.name, started.elapsed().as_secs_f64());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
