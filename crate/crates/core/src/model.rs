//! Model assembly: bidirectional encoder + mean pooling + linear
//! classifier, with the Fisher state riding along. Inference offers
//! pooled-argmax and per-timestep majority voting; evaluation produces a
//! confusion matrix and the Fisher discriminability ratio of the pooled
//! features. Models serialize to a self-describing binary container: one
//! JSON header line followed by little-endian f64 parameter blocks in
//! canonical order.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cells::{encode_bidirectional, CellKind, CellParams, EncoderOutput};
use crate::data::Dataset;
use crate::linalg::{softmax, Matrix};
use crate::loss::{ClassifierParams, FisherState};

/// How per-timestep features turn into a class decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolingMode {
    /// Classify the time-mean pooled feature (the training-time view).
    MeanPool,
    /// Per-timestep argmax, modal class wins; ties break by summed
    /// posterior mass, then lowest class index.
    PerStepVote,
}

impl PoolingMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            PoolingMode::MeanPool => "mean_pool",
            PoolingMode::PerStepVote => "per_step_vote",
        }
    }
}

/// Dimensions and hyperparameters needed to build a fresh model.
#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub cell_kind: CellKind,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub n_classes: usize,
    pub theta: f64,
    pub delta: f64,
    pub alpha: f64,
    pub pooling: PoolingMode,
    /// Preprocessing defaults carried with the model.
    pub window: usize,
    pub target_len: usize,
}

/// A complete gesture classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct GestureModel {
    pub cell_kind: CellKind,
    pub fwd: CellParams,
    pub bwd: CellParams,
    pub classifier: ClassifierParams,
    pub fisher: FisherState,
    pub pooling: PoolingMode,
    pub window: usize,
    pub target_len: usize,
}

impl GestureModel {
    /// Fresh model with seeded initialization. The classifier operates on
    /// the pooled 2H-dimensional bidirectional feature.
    pub fn new(cfg: &ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fwd = CellParams::init(cfg.cell_kind, cfg.input_dim, cfg.hidden_dim, &mut rng);
        let bwd = CellParams::init(cfg.cell_kind, cfg.input_dim, cfg.hidden_dim, &mut rng);
        let feature_dim = 2 * cfg.hidden_dim;
        let classifier = ClassifierParams::init(cfg.n_classes, feature_dim, &mut rng);
        let fisher = FisherState::new(cfg.n_classes, feature_dim, cfg.theta, cfg.delta, cfg.alpha);
        GestureModel {
            cell_kind: cfg.cell_kind,
            fwd,
            bwd,
            classifier,
            fisher,
            pooling: cfg.pooling,
            window: cfg.window,
            target_len: cfg.target_len,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.fwd.input_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.fwd.hidden_dim()
    }

    pub fn feature_dim(&self) -> usize {
        2 * self.hidden_dim()
    }

    pub fn n_classes(&self) -> usize {
        self.classifier.n_classes()
    }

    pub fn encode(&self, values: &Matrix) -> EncoderOutput {
        assert_eq!(
            values.cols(),
            self.input_dim(),
            "sample channel count does not match model input dim"
        );
        encode_bidirectional(&self.fwd, &self.bwd, values)
    }

    /// The pooled feature `O_i`: time mean of the per-step bidirectional
    /// features. Both losses operate on this vector.
    pub fn forward_features(&self, values: &Matrix) -> Vec<f64> {
        let out = self.encode(values);
        pool_mean(&out.features)
    }

    /// Predicted label plus class posteriors (posteriors always sum to 1).
    pub fn classify(&self, values: &Matrix) -> (usize, Vec<f64>) {
        let out = self.encode(values);
        match self.pooling {
            PoolingMode::MeanPool => {
                let pooled = pool_mean(&out.features);
                let posterior = softmax(&self.classifier.logits(&pooled));
                (argmax(&posterior), posterior)
            }
            PoolingMode::PerStepVote => {
                let n = self.n_classes();
                let mut votes = vec![0usize; n];
                let mut mass = vec![0.0f64; n];
                let mut mean_posterior = vec![0.0f64; n];
                for f in &out.features {
                    let p = softmax(&self.classifier.logits(f));
                    votes[argmax(&p)] += 1;
                    for (j, &v) in p.iter().enumerate() {
                        mass[j] += v;
                        mean_posterior[j] += v / out.features.len() as f64;
                    }
                }
                let mut best = 0usize;
                for j in 1..n {
                    if votes[j] > votes[best]
                        || (votes[j] == votes[best] && mass[j] > mass[best])
                    {
                        best = j;
                    }
                }
                (best, mean_posterior)
            }
        }
    }

    /// Named parameter blocks in canonical container order:
    /// both cell directions, then the classifier.
    pub fn param_blocks(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        for (name, block) in self.fwd.blocks() {
            out.push((format!("fwd.{name}"), block));
        }
        for (name, block) in self.bwd.blocks() {
            out.push((format!("bwd.{name}"), block));
        }
        out.push(("cls.w".to_string(), self.classifier.w.as_slice()));
        out.push(("cls.b".to_string(), self.classifier.b.as_slice()));
        out
    }

    pub fn param_blocks_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out = Vec::new();
        for (name, block) in self.fwd.blocks_mut() {
            out.push((format!("fwd.{name}"), block));
        }
        for (name, block) in self.bwd.blocks_mut() {
            out.push((format!("bwd.{name}"), block));
        }
        out.push(("cls.w".to_string(), self.classifier.w.as_mut_slice()));
        out.push(("cls.b".to_string(), self.classifier.b.as_mut_slice()));
        out
    }
}

pub(crate) fn pool_mean(features: &[Vec<f64>]) -> Vec<f64> {
    let t_len = features.len();
    let mut pooled = vec![0.0; features[0].len()];
    for f in features {
        crate::linalg::add_assign(&mut pooled, f);
    }
    for v in &mut pooled {
        *v /= t_len as f64;
    }
    pooled
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Evaluation summary; exported as JSON by the CLI.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalResult {
    pub overall_accuracy: f64,
    /// Per class; absent for classes with no samples in the dataset.
    pub per_class_accuracy: Vec<Option<f64>>,
    /// Rows are true classes, columns predicted classes.
    pub confusion: Vec<Vec<u64>>,
    /// Inter-class centroid scatter over within-class scatter of the
    /// pooled features; absent when fewer than two classes are present
    /// or the within-class scatter is zero.
    pub fisher_ratio: Option<f64>,
    pub class_names: Vec<String>,
}

/// Mean pairwise squared distance between class centroids divided by the
/// mean squared distance of samples to their own class centroid.
pub fn fisher_ratio(features: &[Vec<f64>], labels: &[usize], n_classes: usize) -> Option<f64> {
    assert_eq!(features.len(), labels.len());
    if features.is_empty() {
        return None;
    }
    let dim = features[0].len();
    let mut centroids = vec![vec![0.0; dim]; n_classes];
    let mut counts = vec![0usize; n_classes];
    for (f, &y) in features.iter().zip(labels) {
        crate::linalg::add_assign(&mut centroids[y], f);
        counts[y] += 1;
    }
    let present: Vec<usize> = (0..n_classes).filter(|&j| counts[j] > 0).collect();
    if present.len() < 2 {
        return None;
    }
    for &j in &present {
        for v in &mut centroids[j] {
            *v /= counts[j] as f64;
        }
    }

    let mut inter = 0.0;
    let mut pairs = 0usize;
    for (a, &j) in present.iter().enumerate() {
        for &k in &present[a + 1..] {
            inter += sq_dist(&centroids[j], &centroids[k]);
            pairs += 1;
        }
    }
    inter /= pairs as f64;

    let mut within = 0.0;
    for (f, &y) in features.iter().zip(labels) {
        within += sq_dist(f, &centroids[y]);
    }
    within /= features.len() as f64;

    if within > 0.0 {
        Some(inter / within)
    } else {
        None
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Classification accuracy under the model's pooling mode.
pub fn accuracy(model: &GestureModel, dataset: &Dataset) -> f64 {
    assert!(!dataset.is_empty(), "cannot evaluate an empty dataset");
    let correct = dataset
        .samples
        .iter()
        .filter(|s| model.classify(&s.values).0 == s.label)
        .count();
    correct as f64 / dataset.len() as f64
}

/// Full evaluation: confusion matrix, per-class and overall accuracy,
/// Fisher ratio of the pooled features.
pub fn evaluate(model: &GestureModel, dataset: &Dataset) -> EvalResult {
    assert!(!dataset.is_empty(), "cannot evaluate an empty dataset");
    let n = model.n_classes();
    let mut confusion = vec![vec![0u64; n]; n];
    let mut pooled = Vec::with_capacity(dataset.len());
    let mut labels = Vec::with_capacity(dataset.len());
    for s in &dataset.samples {
        assert!(s.label < n, "dataset label out of range for the model");
        let (pred, _) = model.classify(&s.values);
        confusion[s.label][pred] += 1;
        pooled.push(model.forward_features(&s.values));
        labels.push(s.label);
    }

    let total: u64 = confusion.iter().flatten().sum();
    let trace: u64 = (0..n).map(|j| confusion[j][j]).sum();
    let per_class_accuracy = (0..n)
        .map(|j| {
            let row: u64 = confusion[j].iter().sum();
            if row > 0 {
                Some(confusion[j][j] as f64 / row as f64)
            } else {
                None
            }
        })
        .collect();

    EvalResult {
        overall_accuracy: trace as f64 / total as f64,
        per_class_accuracy,
        confusion,
        fisher_ratio: fisher_ratio(&pooled, &labels, n),
        class_names: dataset.class_names.clone(),
    }
}

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("io error at {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a model container: {0}")]
    BadHeader(String),
    #[error("unsupported container version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt container: {0}")]
    Corrupt(String),
}

const CONTAINER_FORMAT: &str = "fbrnn-model";
const CONTAINER_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ContainerHeader {
    format: String,
    version: u32,
    cell_kind: String,
    input_dim: usize,
    hidden_dim: usize,
    n_classes: usize,
    theta: f64,
    delta: f64,
    alpha: f64,
    pooling: String,
    window: usize,
    target_len: usize,
    blocks: Vec<(String, usize)>,
}

fn mean_block_names(n_classes: usize) -> Vec<String> {
    (0..n_classes).map(|j| format!("fisher.mean.{j}")).collect()
}

/// Writes the model container: JSON header line + raw f64 blocks.
pub fn save_model(model: &GestureModel, path: &Path) -> Result<(), ModelIoError> {
    let io = |source| ModelIoError::Io {
        path: path.to_path_buf(),
        source,
    };

    let mut blocks: Vec<(String, &[f64])> = model.param_blocks();
    let mean_names = mean_block_names(model.n_classes());
    for (name, mean) in mean_names.iter().zip(&model.fisher.means) {
        blocks.push((name.clone(), mean.as_slice()));
    }

    let header = ContainerHeader {
        format: CONTAINER_FORMAT.to_string(),
        version: CONTAINER_VERSION,
        cell_kind: model.cell_kind.as_str().to_string(),
        input_dim: model.input_dim(),
        hidden_dim: model.hidden_dim(),
        n_classes: model.n_classes(),
        theta: model.fisher.theta,
        delta: model.fisher.delta,
        alpha: model.fisher.alpha,
        pooling: model.pooling.as_str().to_string(),
        window: model.window,
        target_len: model.target_len,
        blocks: blocks.iter().map(|(n, b)| (n.clone(), b.len())).collect(),
    };

    let mut file = fs::File::create(path).map_err(io)?;
    let mut line = serde_json::to_string(&header).expect("header serializes");
    line.push('\n');
    file.write_all(line.as_bytes()).map_err(io)?;
    for (_, block) in &blocks {
        for v in *block {
            file.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    Ok(())
}

/// Reads a model container back; everything (parameters, Fisher state,
/// config) round-trips losslessly.
pub fn load_model(path: &Path) -> Result<GestureModel, ModelIoError> {
    let io = |source| ModelIoError::Io {
        path: path.to_path_buf(),
        source,
    };
    let bytes = fs::read(path).map_err(io)?;
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| ModelIoError::BadHeader("missing header line".to_string()))?;
    let header: ContainerHeader = serde_json::from_slice(&bytes[..newline])
        .map_err(|e| ModelIoError::BadHeader(e.to_string()))?;
    if header.format != CONTAINER_FORMAT {
        return Err(ModelIoError::BadHeader(format!(
            "unexpected format tag `{}`",
            header.format
        )));
    }
    if header.version != CONTAINER_VERSION {
        return Err(ModelIoError::VersionMismatch {
            found: header.version,
            expected: CONTAINER_VERSION,
        });
    }

    let cell_kind = match header.cell_kind.as_str() {
        "lstm" => CellKind::Lstm,
        "gru" => CellKind::Gru,
        other => return Err(ModelIoError::Corrupt(format!("unknown cell kind `{other}`"))),
    };
    let pooling = match header.pooling.as_str() {
        "mean_pool" => PoolingMode::MeanPool,
        "per_step_vote" => PoolingMode::PerStepVote,
        other => return Err(ModelIoError::Corrupt(format!("unknown pooling `{other}`"))),
    };

    let mut model = GestureModel {
        cell_kind,
        fwd: CellParams::zeros(cell_kind, header.input_dim, header.hidden_dim),
        bwd: CellParams::zeros(cell_kind, header.input_dim, header.hidden_dim),
        classifier: ClassifierParams::zeros(header.n_classes, 2 * header.hidden_dim),
        fisher: FisherState::new(
            header.n_classes,
            2 * header.hidden_dim,
            header.theta,
            header.delta,
            header.alpha,
        ),
        pooling,
        window: header.window,
        target_len: header.target_len,
    };

    // Header block list must match the canonical layout for these dims.
    let expected: Vec<(String, usize)> = {
        let mut names: Vec<(String, usize)> = model
            .param_blocks()
            .iter()
            .map(|(n, b)| (n.clone(), b.len()))
            .collect();
        for (name, mean) in mean_block_names(header.n_classes).into_iter().zip(&model.fisher.means)
        {
            names.push((name, mean.len()));
        }
        names
    };
    if header.blocks != expected {
        return Err(ModelIoError::Corrupt(
            "block table does not match the declared dimensions".to_string(),
        ));
    }

    let mut cursor = &bytes[newline + 1..];
    let mut read_block = |len: usize| -> Result<Vec<f64>, ModelIoError> {
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            let mut buf = [0u8; 8];
            cursor
                .read_exact(&mut buf)
                .map_err(|_| ModelIoError::Corrupt("truncated parameter data".to_string()))?;
            out.push(f64::from_le_bytes(buf));
        }
        Ok(out)
    };

    {
        let blocks = model.param_blocks_mut();
        let mut data = Vec::with_capacity(blocks.len());
        for (_, b) in &blocks {
            data.push(b.len());
        }
        let mut loaded = Vec::with_capacity(blocks.len());
        for len in data {
            loaded.push(read_block(len)?);
        }
        for ((_, dst), src) in blocks.into_iter().zip(loaded) {
            dst.copy_from_slice(&src);
        }
    }
    for j in 0..header.n_classes {
        let mean = read_block(2 * header.hidden_dim)?;
        model.fisher.means[j] = mean;
    }
    if !cursor.is_empty() {
        return Err(ModelIoError::Corrupt(format!(
            "{} trailing bytes after parameter data",
            cursor.len()
        )));
    }

    Ok(model)
}
