//! The five CLI commands. Every command is deterministic given the
//! config seed, and all artifacts land under the configured output
//! directory.

use std::fmt;
use std::path::{Path, PathBuf};

use fbrnn_core::cells::CellKind;
use fbrnn_core::data::{
    generate_synthetic, load_directory, save_dataset, split, ChannelFormat, DataError, Dataset,
    SequenceSample, SYNTH_SAMPLE_PERIOD,
};
use fbrnn_core::gradcheck::{run_gradcheck, GradCheckOptions, GradCheckReport};
use fbrnn_core::model::{
    evaluate, load_model, save_model, EvalResult, GestureModel, ModelIoError,
};
use fbrnn_core::optim::{train, TrainError, TrainReport};
use fbrnn_core::preprocess::{preprocess_pipeline, PreprocessError, RawSignal};

use crate::config::RunConfig;

/// Command failures carry their process exit code: 2 for configuration
/// problems, 3 for data problems, 4 for numerical failures.
#[derive(Debug)]
pub enum CliError {
    Config(Vec<String>),
    Data(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(errors) => {
                writeln!(f, "configuration error:")?;
                for e in errors {
                    writeln!(f, "  - {e}")?;
                }
                Ok(())
            }
            CliError::Data(msg) => write!(f, "data error: {msg}"),
            CliError::Numeric(msg) => write!(f, "numerical failure: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<PreprocessError> for CliError {
    fn from(e: PreprocessError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ModelIoError> for CliError {
    fn from(e: ModelIoError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::NonFiniteGradient { .. } => CliError::Numeric(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

fn io_data(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("io error at {path:?}: {e}"))
}

/// Applies the preprocessing pipeline to every sample of a raw dataset.
pub fn preprocess_dataset(
    ds: &Dataset,
    window: usize,
    target_len: usize,
) -> Result<Dataset, CliError> {
    let mut samples = Vec::with_capacity(ds.len());
    for s in &ds.samples {
        if s.values.rows() < 2 {
            return Err(CliError::Data(format!(
                "sample `{}` has fewer than 2 timesteps",
                s.source_id
            )));
        }
        let sig = RawSignal::from_sample_matrix(&s.values, SYNTH_SAMPLE_PERIOD);
        let values = preprocess_pipeline(&sig, window, target_len).map_err(|e| {
            CliError::Data(format!("sample `{}`: {e}", s.source_id))
        })?;
        samples.push(SequenceSample {
            values,
            label: s.label,
            source_id: s.source_id.clone(),
        });
    }
    Ok(Dataset {
        samples,
        n_classes: ds.n_classes,
        class_names: ds.class_names.clone(),
    })
}

/// Raw (unpreprocessed) dataset: loaded from `data_dir` when set,
/// otherwise generated synthetically.
pub fn resolve_raw_dataset(cfg: &RunConfig) -> Result<Dataset, CliError> {
    match &cfg.data_dir {
        Some(dir) => {
            let format = ChannelFormat::from_channels(cfg.channels)
                .expect("channels validated at config parse");
            let ds = load_directory(dir, format)?;
            if ds.is_empty() {
                return Err(CliError::Data(format!("dataset at {dir:?} is empty")));
            }
            Ok(ds)
        }
        None => Ok(generate_synthetic(&cfg.synth_config())),
    }
}

/// Writes a synthetic dataset (CSV files plus manifest) under
/// `<out_dir>/dataset` and returns that path.
pub fn cmd_synth(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let ds = generate_synthetic(&cfg.synth_config());
    let root = cfg.out_dir.join("dataset");
    save_dataset(&ds, &root, SYNTH_SAMPLE_PERIOD)?;
    println!(
        "wrote {} samples across {} classes to {}",
        ds.len(),
        ds.n_classes,
        root.display()
    );
    Ok(root)
}

/// Everything `train` leaves behind.
pub struct TrainOutcome {
    pub model_path: PathBuf,
    pub report_path: PathBuf,
    pub report: TrainReport,
    pub eval: EvalResult,
}

/// Trains one model per the config: resolve data, preprocess, split,
/// train, then write the model container and the report CSV.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainOutcome, CliError> {
    let raw = resolve_raw_dataset(cfg)?;
    let pre = preprocess_dataset(&raw, cfg.window, cfg.target_len)?;
    let (train_set, test_set) = split(&pre, cfg.test_fraction, cfg.seed)?;

    let mut model = GestureModel::new(&cfg.model_config(pre.n_classes), cfg.seed);
    let report = train(&mut model, &train_set, Some(&test_set), &cfg.train_config())?;

    std::fs::create_dir_all(&cfg.out_dir).map_err(io_data(&cfg.out_dir))?;
    let model_path = cfg.out_dir.join("model.fbm");
    save_model(&model, &model_path)?;
    let report_path = cfg.out_dir.join("train_report.csv");
    report.write_csv(&report_path).map_err(io_data(&report_path))?;

    let eval = evaluate(&model, &test_set);
    println!(
        "trained {} for {} iterations; test accuracy {:.4}",
        cfg.cell_kind.as_str(),
        cfg.max_iterations,
        eval.overall_accuracy
    );
    Ok(TrainOutcome {
        model_path,
        report_path,
        report,
        eval,
    })
}

/// Evaluates a saved model on a dataset directory; prints the per-class
/// table and writes `eval.json` under `out_dir`.
pub fn cmd_eval(
    model_path: &Path,
    data_dir: &Path,
    out_dir: &Path,
) -> Result<EvalResult, CliError> {
    let model = load_model(model_path)?;
    let format = ChannelFormat::from_channels(model.input_dim()).ok_or_else(|| {
        CliError::Data(format!(
            "model expects {} channels; no matching file format",
            model.input_dim()
        ))
    })?;
    let raw = load_directory(data_dir, format)?;
    if raw.is_empty() {
        return Err(CliError::Data(format!("dataset at {data_dir:?} is empty")));
    }
    if let Some(channels) = raw.channel_count() {
        if channels != model.input_dim() {
            return Err(CliError::Data(format!(
                "model expects {} channels but data has {channels}",
                model.input_dim()
            )));
        }
    }
    if raw.n_classes != model.n_classes() {
        return Err(CliError::Data(format!(
            "model has {} classes but data directory has {}",
            model.n_classes(),
            raw.n_classes
        )));
    }
    let pre = preprocess_dataset(&raw, model.window, model.target_len)?;
    let result = evaluate(&model, &pre);

    println!("class        accuracy");
    for (name, acc) in result.class_names.iter().zip(&result.per_class_accuracy) {
        match acc {
            Some(a) => println!("{name:<12} {a:.4}"),
            None => println!("{name:<12} (no samples)"),
        }
    }
    println!("overall      {:.4}", result.overall_accuracy);
    if let Some(r) = result.fisher_ratio {
        println!("fisher ratio {r:.4}");
    }

    std::fs::create_dir_all(out_dir).map_err(io_data(out_dir))?;
    let json_path = out_dir.join("eval.json");
    let body = serde_json::to_string_pretty(&result)
        .map_err(|e| CliError::Data(format!("cannot serialize eval result: {e}")))?;
    std::fs::write(&json_path, body).map_err(io_data(&json_path))?;
    Ok(result)
}

fn print_gradcheck_report(report: &GradCheckReport) {
    println!("-- {} --", report.cell_kind.as_str());
    for block in &report.blocks {
        let verdict = if block.max_rel_err <= report.tolerance {
            "ok"
        } else {
            "FAIL"
        };
        println!("  {:<22} max rel err {:>10.3e}  {verdict}", block.name, block.max_rel_err);
    }
}

/// Finite-difference suites for both cell kinds (and both losses) at
/// H=4, T=7, N=3, n=3, m=5; returns whether every block stayed within
/// tolerance. With θ = 0 the Fisher feature-gradient block is skipped.
pub fn cmd_gradcheck(cfg: &RunConfig) -> Result<bool, CliError> {
    let seeds: Vec<u64> = (0..5).map(|k| cfg.seed + k).collect();
    let mut all_ok = true;
    for kind in [CellKind::Lstm, CellKind::Gru] {
        let report = run_gradcheck(&GradCheckOptions::new(kind, cfg.theta, seeds.clone()));
        print_gradcheck_report(&report);
        all_ok &= report.passed();
    }
    if cfg.theta == 0.0 {
        println!("theta = 0: Fisher feature-gradient block skipped");
    }
    println!("gradient check: {}", if all_ok { "PASS" } else { "FAIL" });
    Ok(all_ok)
}

/// Which Fisher scalar a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Theta,
    Delta,
    Alpha,
}

impl SweepParam {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepParam::Theta => "theta",
            SweepParam::Delta => "delta",
            SweepParam::Alpha => "alpha",
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "theta" => Ok(SweepParam::Theta),
            "delta" => Ok(SweepParam::Delta),
            "alpha" => Ok(SweepParam::Alpha),
            other => Err(CliError::Config(vec![format!(
                "sweep parameter must be theta, delta or alpha, got `{other}`"
            )])),
        }
    }
}

/// Trains one model per value with the same seed and otherwise identical
/// settings; returns `(value, test accuracy)` rows and writes them as
/// CSV under `out_dir`.
pub fn cmd_sweep(
    cfg: &RunConfig,
    param: SweepParam,
    values: &[f64],
) -> Result<Vec<(f64, f64)>, CliError> {
    if values.is_empty() {
        return Err(CliError::Config(vec!["sweep needs at least one value".into()]));
    }
    let bad: Vec<String> = values
        .iter()
        .filter(|v| !(0.0..=1.0).contains(*v))
        .map(|v| format!("{}: sweep value {v} outside [0,1]", param.as_str()))
        .collect();
    if !bad.is_empty() {
        return Err(CliError::Config(bad));
    }

    // Resolve and preprocess once; every run sees the identical split.
    let raw = resolve_raw_dataset(cfg)?;
    let pre = preprocess_dataset(&raw, cfg.window, cfg.target_len)?;
    let (train_set, test_set) = split(&pre, cfg.test_fraction, cfg.seed)?;

    let mut rows = Vec::with_capacity(values.len());
    for &value in values {
        let mut run_cfg = cfg.clone();
        match param {
            SweepParam::Theta => run_cfg.theta = value,
            SweepParam::Delta => run_cfg.delta = value,
            SweepParam::Alpha => run_cfg.alpha = value,
        }
        let mut model = GestureModel::new(&run_cfg.model_config(pre.n_classes), run_cfg.seed);
        train(&mut model, &train_set, None, &run_cfg.train_config())?;
        let accuracy = fbrnn_core::model::accuracy(&model, &test_set);
        println!("{} = {value}: accuracy {accuracy:.4}", param.as_str());
        rows.push((value, accuracy));
    }

    std::fs::create_dir_all(&cfg.out_dir).map_err(io_data(&cfg.out_dir))?;
    let path = cfg.out_dir.join(format!("sweep_{}.csv", param.as_str()));
    let mut body = String::from("value,accuracy\n");
    for (v, a) in &rows {
        body.push_str(&format!("{v},{a}\n"));
    }
    std::fs::write(&path, body).map_err(io_data(&path))?;
    Ok(rows)
}
