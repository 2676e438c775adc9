use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use energy_walk::scenario::{
    load_config, preset, preset_names, run_scenario, selftest, HarnessError,
};

/// Energy-ladder walk simulator: classical birth-death transport, its
/// collision-model quantum channel, and figure-reproduction scenarios.
#[derive(Parser)]
#[command(name = "energy-walk", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a JSON config file.
    Run {
        /// Path to the scenario config.
        config: PathBuf,
        /// Output directory for CSV and SVG files.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Skip SVG plot generation.
        #[arg(long)]
        no_svg: bool,
    },
    /// Run a built-in preset scenario.
    Preset {
        /// Preset name (see `list-presets`).
        name: String,
        /// Output directory for CSV and SVG files.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// List the built-in presets.
    ListPresets,
    /// Run the oracle-equivalence and invariant battery.
    Selftest,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, HarnessError> {
    match cli.command {
        Command::Run { config, out, no_svg } => {
            let cfg = load_config(&config)?;
            let report = run_scenario(&cfg, &out, !no_svg)?;
            print!("{}", report.render());
            Ok(ExitCode::SUCCESS)
        }
        Command::Preset { name, out } => {
            let Some(cfg) = preset(&name) else {
                return Err(HarnessError::Schema {
                    field: "preset".into(),
                    message: format!(
                        "unknown preset `{name}`; available: {}",
                        preset_names().iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
                    ),
                });
            };
            let report = run_scenario(&cfg, &out, true)?;
            print!("{}", report.render());
            Ok(ExitCode::SUCCESS)
        }
        Command::ListPresets => {
            for (name, description) in preset_names() {
                println!("{name:8} {description}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Selftest => {
            let checks = selftest();
            let mut failed = 0usize;
            for check in &checks {
                match &check.result {
                    Ok(()) => println!("PASS {}", check.name),
                    Err(msg) => {
                        failed += 1;
                        println!("FAIL {}: {msg}", check.name);
                    }
                }
            }
            println!("{} passed, {failed} failed", checks.len() - failed);
            if failed == 0 {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(4))
            }
        }
    }
}
