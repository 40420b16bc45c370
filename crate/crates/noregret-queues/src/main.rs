use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use noregret_queues::model::max_slack;
use noregret_queues::params::compute_window;
use noregret_queues::scenario::{
    list_scenarios, run_scenario, verify_quick, RunOverrides, ScenarioConfig, StrategyKind,
};

#[derive(Parser)]
#[command(name = "noregret-queues", about = "Queueing-game simulator: no-regret queues vs servers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a scenario config and write trace/regret/potential CSVs.
    Run {
        config: PathBuf,
        #[arg(long)]
        seeds: Option<u32>,
        #[arg(long)]
        horizon: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Print the window-length report for a scenario's system and slack.
    Params { config: PathBuf },
    /// List scenario config files in a directory.
    ListScenarios {
        #[arg(long, default_value = "scenarios")]
        dir: PathBuf,
    },
    /// Run the quick property suite on tiny instances.
    Verify,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Run { config, seeds, horizon, out, jobs } => {
            let cfg = ScenarioConfig::from_path(&config).map_err(|e| e.to_string())?;
            let overrides = RunOverrides { seeds, horizon, out_dir: out, jobs };
            let outcome = if cfg.strategy.kind == StrategyKind::Exp3p {
                noregret_queues::run_learning_scenario(&cfg, &overrides)
            } else {
                run_scenario(&cfg, &overrides)
            }
            .map_err(|e| e.to_string())?;
            print!("{}", outcome.summary_text());
            println!("artifacts: {}", outcome.out_dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Params { config } => {
            let cfg = ScenarioConfig::from_path(&config).map_err(|e| e.to_string())?;
            let slack = max_slack(&cfg.spec);
            match slack.eta.filter(|&e| e > 0.0) {
                Some(eta) => {
                    let params = compute_window(&cfg.spec, eta).map_err(|e| e.to_string())?;
                    println!("system: n={} m={}", cfg.spec.n(), cfg.spec.m());
                    print!("{params}");
                    Ok(ExitCode::SUCCESS)
                }
                None => {
                    println!("system has no positive slack eta; no finite window applies");
                    if let Some(k) = slack.violating_prefix {
                        println!("half-rate feasibility first fails at prefix {k}");
                    }
                    Ok(ExitCode::from(1))
                }
            }
        }
        Command::ListScenarios { dir } => {
            let entries = list_scenarios(&dir).map_err(|e| e.to_string())?;
            if entries.is_empty() {
                println!("no scenario files under {}", dir.display());
            }
            for (name, path) in entries {
                println!("{name}\t{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify => {
            let mut all_pass = true;
            for check in verify_quick() {
                let status = if check.pass { "PASS" } else { "FAIL" };
                println!("{status} {} ({})", check.name, check.detail);
                all_pass &= check.pass;
            }
            Ok(if all_pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}
