//! Library side of the `fbrnn` command-line tool: run configuration
//! (flat TOML + `--key value` overrides) and the five commands
//! `synth | train | eval | gradcheck | sweep`.

pub mod commands;
pub mod config;

pub use commands::{
    cmd_eval, cmd_gradcheck, cmd_sweep, cmd_synth, cmd_train, CliError, SweepParam, TrainOutcome,
};
pub use config::{load_config, parse_override_args, RunConfig};
