use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fbrnn_cli::{
    cmd_eval, cmd_gradcheck, cmd_sweep, cmd_synth, cmd_train, load_config, parse_override_args,
    CliError, SweepParam,
};

/// Bidirectional LSTM/GRU gesture classifiers with a Fisher-discriminant
/// softmax loss: data synthesis, preprocessing, training, evaluation,
/// gradient checking and hyperparameter sweeps.
#[derive(Parser)]
#[command(name = "fbrnn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Config file: flat TOML `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides as trailing `--key value` pairs; they win over the file.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic gesture dataset under <out_dir>/dataset.
    Synth(RunArgs),
    /// Train a model; writes model.fbm and train_report.csv.
    Train(RunArgs),
    /// Evaluate a saved model on a dataset directory; writes eval.json.
    Eval {
        /// Model container written by `train`.
        #[arg(long)]
        model: PathBuf,
        /// Dataset directory (class subdirectories of CSV files).
        #[arg(long)]
        data: PathBuf,
        /// Output directory for eval.json.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Finite-difference gradient check of both cell kinds.
    Gradcheck(RunArgs),
    /// Train once per value of a Fisher scalar; writes sweep_<param>.csv.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Which scalar to vary: theta, delta or alpha.
        #[arg(long)]
        param: String,
        /// Comma-separated values, each in [0,1].
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
    },
}

fn config_from(run: &RunArgs) -> Result<fbrnn_cli::RunConfig, CliError> {
    let overrides = parse_override_args(&run.overrides)?;
    load_config(run.config.as_deref(), &overrides)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(run) => {
            cmd_synth(&config_from(&run)?)?;
            Ok(())
        }
        Command::Train(run) => {
            cmd_train(&config_from(&run)?)?;
            Ok(())
        }
        Command::Eval { model, data, out } => {
            cmd_eval(&model, &data, &out)?;
            Ok(())
        }
        Command::Gradcheck(run) => {
            if cmd_gradcheck(&config_from(&run)?)? {
                Ok(())
            } else {
                Err(CliError::Numeric(
                    "gradient check exceeded tolerance".to_string(),
                ))
            }
        }
        Command::Sweep { run, param, values } => {
            let cfg = config_from(&run)?;
            let param: SweepParam = param.parse()?;
            cmd_sweep(&cfg, param, &values)?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
