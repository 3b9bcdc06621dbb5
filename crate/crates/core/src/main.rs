use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gpts::bridge::{mock_trainer_main, MockTransport};
use gpts::env::SyntheticPretrainSpec;
use gpts::harness::{run_experiment, summarize, ExperimentConfig, HarnessError, DEFAULT_CONFIG_TOML};

/// Online hyperparameter selection with Gaussian-process Thompson sampling.
///
/// Exit codes: 0 success, 2 configuration error, 3 environment or bridge
/// failure, 4 numerical failure or inconsistent results.
#[derive(Parser)]
#[command(name = "gpts", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured policy for every seed.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated seeds replacing those in the config.
        #[arg(long, value_delimiter = ',')]
        seed_override: Option<Vec<u64>>,
        /// Output directory replacing the one in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate and re-check the run CSVs in a directory.
    Summarize {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Serve the trainer protocol backed by the synthetic loss model.
    MockTrainer {
        /// `stdio` or `tcp:<port>` (port 0 picks a free one).
        #[arg(long, default_value = "stdio", value_parser = parse_transport)]
        transport: MockTransport,
        /// TOML file with a synthetic model spec; defaults to the built-in one.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Print a commented default experiment config.
    PrintDefaultConfig,
}

fn parse_transport(s: &str) -> Result<MockTransport, String> {
    if s == "stdio" {
        return Ok(MockTransport::Stdio);
    }
    s.strip_prefix("tcp:")
        .and_then(|p| p.parse().ok())
        .map(MockTransport::Tcp)
        .ok_or_else(|| format!("expected stdio or tcp:<port>, got {s:?}"))
}

fn fail(e: HarnessError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, seed_override, out } => {
            let mut cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            if let Some(seeds) = seed_override {
                cfg.seeds = seeds;
            }
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            let report = match run_experiment(&cfg) {
                Ok(r) => r,
                Err(e) => return fail(e),
            };
            for r in report.failures() {
                if let Some((_, msg)) = &r.failure {
                    eprintln!("run {} seed {} failed: {msg}", r.task.policy.label(), r.task.seed);
                }
            }
            println!("{} runs written to {}", report.runs.len(), report.output_dir.display());
            ExitCode::from(report.exit_code() as u8)
        }
        Command::Summarize { dir } => match summarize(&dir) {
            Ok(report) => {
                print!("{report}");
                if report.violations.is_empty() {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(4)
                }
            }
            Err(e) => fail(e),
        },
        Command::MockTrainer { transport, spec } => {
            let spec = match spec {
                None => SyntheticPretrainSpec::default(),
                Some(path) => match std::fs::read_to_string(&path)
                    .map_err(|e| e.to_string())
                    .and_then(|t| toml::from_str::<SyntheticPretrainSpec>(&t).map_err(|e| e.to_string()))
                {
                    Ok(s) => s,
                    Err(e) => return fail(HarnessError::Config(format!("{}: {e}", path.display()))),
                },
            };
            ExitCode::from(mock_trainer_main(&spec, transport) as u8)
        }
        Command::PrintDefaultConfig => {
            print!("{DEFAULT_CONFIG_TOML}");
            ExitCode::SUCCESS
        }
    }
}
