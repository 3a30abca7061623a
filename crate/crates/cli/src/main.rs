use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;

use commands::CliError;

#[derive(Debug, Parser)]
#[command(name = "reflector", version, about = "Vision-guided mmWave reflector simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the lateral-walk experiment and write traces, CCDFs and a summary.
    Run {
        /// Scenario JSON; the built-in default layout is used when omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated CCDF thresholds in dB, e.g. `--thresholds=-80,-75`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        thresholds: Option<Vec<f64>>,
    },
    /// Replay the AoA measurement table and check its integrity.
    ReplayAoa {
        /// Table CSV; the bundled measurements are used when omitted.
        table: Option<PathBuf>,
        /// Also write error_stats.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a log-distance model to `distance,power_db` samples.
    Fit {
        samples: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the orientation controller over a recorded observation file.
    ControllerTrace {
        observations: PathBuf,
        /// Scenario JSON supplying camera, motor and marker settings.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Initial calibration orientation in camera-frame degrees.
        #[arg(long, allow_hyphen_values = true)]
        calibrate: Option<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            out,
            seed,
            thresholds,
        } => commands::cmd_run(&commands::RunConfig {
            scenario_path: scenario,
            output_dir: out,
            seed_override: seed,
            thresholds_db: thresholds,
        }),
        Command::ReplayAoa { table, out } => commands::cmd_replay_aoa(table.as_deref(), out.as_deref()),
        Command::Fit { samples, out } => commands::cmd_fit(&samples, &out),
        Command::ControllerTrace {
            observations,
            scenario,
            calibrate,
            out,
        } => commands::cmd_controller_trace(&observations, scenario.as_deref(), calibrate, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Usage(_) => ExitCode::from(2),
                CliError::Internal(_) => ExitCode::from(1),
            }
        }
    }
}
