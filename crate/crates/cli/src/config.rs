//! Run configuration: a flat `key = value` TOML file plus command-line
//! `--key value` overrides (overrides win). Parsing is strict — unknown
//! keys, type errors and out-of-range values are all collected and
//! reported together, never silently defaulted.

use std::path::{Path, PathBuf};

use toml::Value;

use fbrnn_core::cells::CellKind;
use fbrnn_core::data::SynthConfig;
use fbrnn_core::model::{ModelConfig, PoolingMode};
use fbrnn_core::optim::{OptimizerKind, TrainConfig};

use crate::commands::CliError;

/// Everything a run needs: model shape, loss scalars, preprocessing,
/// training protocol, data source and output location.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub cell_kind: CellKind,
    pub hidden_dim: usize,
    pub theta: f64,
    pub delta: f64,
    pub alpha: f64,
    pub pooling: PoolingMode,
    pub window: usize,
    pub target_len: usize,
    pub channels: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_iterations: usize,
    pub optimizer: OptimizerKind,
    pub momentum: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub grad_clip_norm: Option<f64>,
    pub seed: u64,
    pub log_every: usize,
    pub test_fraction: f64,
    /// When unset, the synthetic generator supplies the data.
    pub data_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub synth_classes: usize,
    pub synth_samples_per_class: usize,
    pub synth_speed_jitter: f64,
    pub synth_amplitude_jitter: f64,
    pub synth_noise_sigma: f64,
}

impl Default for RunConfig {
    /// Desk-scale synthetic-task profile: a bidirectional GRU with the
    /// Fisher loss enabled, small enough to train in seconds.
    fn default() -> Self {
        RunConfig {
            cell_kind: CellKind::Gru,
            hidden_dim: 16,
            theta: 0.3,
            delta: 0.01,
            alpha: 0.5,
            pooling: PoolingMode::MeanPool,
            window: 5,
            target_len: 32,
            channels: 6,
            learning_rate: 0.002,
            batch_size: 32,
            max_iterations: 500,
            optimizer: OptimizerKind::Adam,
            momentum: 0.9,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            grad_clip_norm: Some(5.0),
            seed: 7,
            log_every: 25,
            test_fraction: 0.3,
            data_dir: None,
            out_dir: PathBuf::from("out"),
            synth_classes: 4,
            synth_samples_per_class: 150,
            synth_speed_jitter: 0.2,
            synth_amplitude_jitter: 0.2,
            synth_noise_sigma: 0.05,
        }
    }
}

impl RunConfig {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            max_iterations: self.max_iterations,
            optimizer: self.optimizer,
            momentum: self.momentum,
            adam_beta1: self.adam_beta1,
            adam_beta2: self.adam_beta2,
            adam_epsilon: self.adam_epsilon,
            grad_clip_norm: self.grad_clip_norm,
            seed: self.seed,
            log_every: self.log_every,
        }
    }

    pub fn model_config(&self, n_classes: usize) -> ModelConfig {
        ModelConfig {
            cell_kind: self.cell_kind,
            input_dim: self.channels,
            hidden_dim: self.hidden_dim,
            n_classes,
            theta: self.theta,
            delta: self.delta,
            alpha: self.alpha,
            pooling: self.pooling,
            window: self.window,
            target_len: self.target_len,
        }
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            n_classes: self.synth_classes,
            samples_per_class: self.synth_samples_per_class,
            base_speed_jitter: self.synth_speed_jitter,
            amplitude_jitter: self.synth_amplitude_jitter,
            noise_sigma: self.synth_noise_sigma,
            seed: self.seed,
        }
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(x) => Some(*x as f64),
        _ => None,
    }
}

fn as_usize(v: &Value) -> Option<usize> {
    match v {
        Value::Integer(x) if *x >= 0 => Some(*x as usize),
        _ => None,
    }
}

fn as_u64(v: &Value) -> Option<u64> {
    match v {
        Value::Integer(x) if *x >= 0 => Some(*x as u64),
        _ => None,
    }
}

fn as_str(v: &Value) -> Option<&str> {
    match v {
        Value::String(s) => Some(s),
        _ => None,
    }
}

struct Setter<'a> {
    cfg: &'a mut RunConfig,
    errors: Vec<String>,
}

impl Setter<'_> {
    fn f64_in(&mut self, key: &str, v: &Value, lo: f64, hi: f64, lo_open: bool, hi_open: bool) -> Option<f64> {
        let Some(x) = as_f64(v) else {
            self.errors.push(format!("{key}: expected a number, got `{v}`"));
            return None;
        };
        let ok_lo = if lo_open { x > lo } else { x >= lo };
        let ok_hi = if hi_open { x < hi } else { x <= hi };
        if !(ok_lo && ok_hi) {
            let l = if lo_open { "(" } else { "[" };
            let r = if hi_open { ")" } else { "]" };
            self.errors.push(format!("{key}: must be in {l}{lo}, {hi}{r}, got {x}"));
            return None;
        }
        Some(x)
    }

    fn positive_f64(&mut self, key: &str, v: &Value) -> Option<f64> {
        match as_f64(v) {
            Some(x) if x > 0.0 => Some(x),
            Some(x) => {
                self.errors.push(format!("{key}: must be positive, got {x}"));
                None
            }
            None => {
                self.errors.push(format!("{key}: expected a number, got `{v}`"));
                None
            }
        }
    }

    fn usize_min(&mut self, key: &str, v: &Value, min: usize) -> Option<usize> {
        match as_usize(v) {
            Some(x) if x >= min => Some(x),
            Some(x) => {
                self.errors.push(format!("{key}: must be at least {min}, got {x}"));
                None
            }
            None => {
                self.errors.push(format!("{key}: expected a nonnegative integer, got `{v}`"));
                None
            }
        }
    }

    fn apply(&mut self, key: &str, v: &Value) {
        match key {
            "cell_kind" => match as_str(v) {
                Some("lstm") => self.cfg.cell_kind = CellKind::Lstm,
                Some("gru") => self.cfg.cell_kind = CellKind::Gru,
                _ => self.errors.push(format!("cell_kind: expected `lstm` or `gru`, got `{v}`")),
            },
            "hidden_dim" => {
                if let Some(x) = self.usize_min("hidden_dim", v, 1) {
                    self.cfg.hidden_dim = x;
                }
            }
            "theta" => {
                if let Some(x) = self.f64_in("theta", v, 0.0, 1.0, false, false) {
                    self.cfg.theta = x;
                }
            }
            "delta" => {
                if let Some(x) = self.f64_in("delta", v, 0.0, 1.0, false, false) {
                    self.cfg.delta = x;
                }
            }
            "alpha" => {
                if let Some(x) = self.f64_in("alpha", v, 0.0, 1.0, false, false) {
                    self.cfg.alpha = x;
                }
            }
            "pooling" => match as_str(v) {
                Some("mean_pool") => self.cfg.pooling = PoolingMode::MeanPool,
                Some("per_step_vote") => self.cfg.pooling = PoolingMode::PerStepVote,
                _ => self.errors.push(format!(
                    "pooling: expected `mean_pool` or `per_step_vote`, got `{v}`"
                )),
            },
            "window" => match self.usize_min("window", v, 1) {
                Some(x) if x % 2 == 1 => self.cfg.window = x,
                Some(x) => self.errors.push(format!("window: must be odd, got {x}")),
                None => {}
            },
            "target_len" => {
                if let Some(x) = self.usize_min("target_len", v, 2) {
                    self.cfg.target_len = x;
                }
            }
            "channels" => match as_usize(v) {
                Some(3) => self.cfg.channels = 3,
                Some(6) => self.cfg.channels = 6,
                _ => self.errors.push(format!("channels: expected 3 or 6, got `{v}`")),
            },
            "learning_rate" => {
                if let Some(x) = self.positive_f64("learning_rate", v) {
                    self.cfg.learning_rate = x;
                }
            }
            "batch_size" => {
                if let Some(x) = self.usize_min("batch_size", v, 1) {
                    self.cfg.batch_size = x;
                }
            }
            "max_iterations" => {
                if let Some(x) = self.usize_min("max_iterations", v, 0) {
                    self.cfg.max_iterations = x;
                }
            }
            "optimizer" => match as_str(v) {
                Some("adam") => self.cfg.optimizer = OptimizerKind::Adam,
                Some("sgd_momentum") => self.cfg.optimizer = OptimizerKind::SgdMomentum,
                _ => self.errors.push(format!(
                    "optimizer: expected `adam` or `sgd_momentum`, got `{v}`"
                )),
            },
            "momentum" => {
                if let Some(x) = self.f64_in("momentum", v, 0.0, 1.0, false, true) {
                    self.cfg.momentum = x;
                }
            }
            "adam_beta1" => {
                if let Some(x) = self.f64_in("adam_beta1", v, 0.0, 1.0, true, true) {
                    self.cfg.adam_beta1 = x;
                }
            }
            "adam_beta2" => {
                if let Some(x) = self.f64_in("adam_beta2", v, 0.0, 1.0, true, true) {
                    self.cfg.adam_beta2 = x;
                }
            }
            "adam_epsilon" => {
                if let Some(x) = self.positive_f64("adam_epsilon", v) {
                    self.cfg.adam_epsilon = x;
                }
            }
            "grad_clip_norm" => {
                if as_str(v) == Some("none") {
                    self.cfg.grad_clip_norm = None;
                } else if let Some(x) = self.positive_f64("grad_clip_norm", v) {
                    self.cfg.grad_clip_norm = Some(x);
                }
            }
            "seed" => match as_u64(v) {
                Some(x) => self.cfg.seed = x,
                None => self.errors.push(format!("seed: expected a nonnegative integer, got `{v}`")),
            },
            "log_every" => {
                if let Some(x) = self.usize_min("log_every", v, 1) {
                    self.cfg.log_every = x;
                }
            }
            "test_fraction" => {
                if let Some(x) = self.f64_in("test_fraction", v, 0.0, 1.0, true, true) {
                    self.cfg.test_fraction = x;
                }
            }
            "data_dir" => match as_str(v) {
                Some(s) => self.cfg.data_dir = Some(PathBuf::from(s)),
                None => self.errors.push(format!("data_dir: expected a path string, got `{v}`")),
            },
            "out_dir" => match as_str(v) {
                Some(s) => self.cfg.out_dir = PathBuf::from(s),
                None => self.errors.push(format!("out_dir: expected a path string, got `{v}`")),
            },
            "synth_classes" => match as_usize(v) {
                Some(x) if (1..=4).contains(&x) => self.cfg.synth_classes = x,
                _ => self.errors.push(format!("synth_classes: expected 1 to 4, got `{v}`")),
            },
            "synth_samples_per_class" => {
                if let Some(x) = self.usize_min("synth_samples_per_class", v, 2) {
                    self.cfg.synth_samples_per_class = x;
                }
            }
            "synth_speed_jitter" => {
                if let Some(x) = self.f64_in("synth_speed_jitter", v, 0.0, 0.5, false, false) {
                    self.cfg.synth_speed_jitter = x;
                }
            }
            "synth_amplitude_jitter" => {
                if let Some(x) = self.f64_in("synth_amplitude_jitter", v, 0.0, 0.5, false, false) {
                    self.cfg.synth_amplitude_jitter = x;
                }
            }
            "synth_noise_sigma" => {
                if let Some(x) = self.f64_in("synth_noise_sigma", v, 0.0, f64::INFINITY, false, true) {
                    self.cfg.synth_noise_sigma = x;
                }
            }
            other => self.errors.push(format!("unknown key `{other}`")),
        }
    }
}

/// Turns a raw `--key value` string into a TOML value: numbers parse as
/// numbers, everything else falls back to a string.
fn parse_override_value(raw: &str) -> Value {
    if let Ok(table) = format!("v = {raw}").parse::<toml::Table>() {
        if let Some(v) = table.get("v") {
            return v.clone();
        }
    }
    Value::String(raw.to_string())
}

/// Splits trailing CLI arguments into `(key, value)` override pairs;
/// every key must be written `--key`.
pub fn parse_override_args(args: &[String]) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    let mut errors = Vec::new();
    let mut it = args.iter();
    while let Some(key) = it.next() {
        let Some(name) = key.strip_prefix("--") else {
            errors.push(format!("override `{key}` must start with `--`"));
            continue;
        };
        match it.next() {
            Some(value) => out.push((name.to_string(), value.clone())),
            None => errors.push(format!("override `--{name}` is missing its value")),
        }
    }
    if errors.is_empty() {
        Ok(out)
    } else {
        Err(CliError::Config(errors))
    }
}

/// Builds the run configuration from an optional file plus overrides.
/// Every diagnostic is collected; the error lists all offending keys.
pub fn load_config(
    path: Option<&Path>,
    overrides: &[(String, String)],
) -> Result<RunConfig, CliError> {
    let mut setter = Setter {
        cfg: &mut RunConfig::default(),
        errors: Vec::new(),
    };

    if let Some(path) = path {
        let body = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(vec![format!("cannot read {path:?}: {e}")]))?;
        let table: toml::Table = body
            .parse()
            .map_err(|e| CliError::Config(vec![format!("{path:?} is not valid TOML: {e}")]))?;
        for (key, value) in &table {
            setter.apply(key, value);
        }
    }
    for (key, raw) in overrides {
        let value = parse_override_value(raw);
        setter.apply(key, &value);
    }

    if setter.errors.is_empty() {
        let cfg = setter.cfg.clone();
        Ok(cfg)
    } else {
        Err(CliError::Config(setter.errors))
    }
}
