use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use osbp::checks::{SuiteOptions, DEFAULT_INSTANCES};
use osbp_cli::commands;
use osbp_cli::config::Loaded;
use osbp_cli::CliError;

#[derive(Parser)]
#[command(name = "osbp", version, about = "Open-set domain adaptation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Run configuration (TOML). Defaults apply when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set train.t=0.7`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<Loaded, CliError> {
        Loaded::load(self.config.as_deref(), &self.overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic open-set scenario: source/target CSVs and a manifest.
    Synth {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Train the configured method and evaluate it on the labeled target.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Print per-epoch losses to stderr.
        #[arg(long)]
        progress: bool,
    },
    /// Train and evaluate once per parameter value.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// One of t, unknown_ratio, grl_weight, threshold.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        values: Vec<f64>,
        /// Runs per value, each with its own seed.
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        /// Run grid points one after another instead of in parallel.
        #[arg(long)]
        serial: bool,
        /// Output path; defaults to `output.sweep` from the config.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Compare analytic and finite-difference gradients for every layer kind and loss.
    Gradcheck {
        #[arg(long, default_value_t = DEFAULT_INSTANCES)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scale analytic gradients by this factor to exercise the failure path.
        #[arg(long, hide = true)]
        corrupt_backward: Option<f64>,
    },
    /// Evaluate a saved checkpoint on the configured target.
    Eval {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Also write `label,f1..fF` generator features of the target to this file.
        #[arg(long, value_name = "PATH")]
        dump_features: Option<PathBuf>,
    },
}

fn dispatch(command: Command) -> Result<String, CliError> {
    match command {
        Command::Synth { config, out } => commands::synth(&config.load()?, &out),
        Command::Train { config, progress } => commands::train(&config.load()?, progress),
        Command::Sweep {
            config,
            param,
            values,
            repeats,
            serial,
            out,
        } => commands::sweep_cmd(&config.load()?, &param, &values, repeats, !serial, out.as_deref()),
        Command::Gradcheck {
            instances,
            seed,
            corrupt_backward,
        } => commands::gradcheck(&SuiteOptions {
            instances,
            seed,
            corrupt: corrupt_backward,
        }),
        Command::Eval {
            config,
            checkpoint,
            dump_features,
        } => commands::eval(&config.load()?, &checkpoint, dump_features.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { osbp_cli::exit::CONFIG } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(text) => {
            println!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) if e.code == osbp_cli::exit::CHECK_FAILED => {
            println!("{e}");
            ExitCode::from(e.code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
