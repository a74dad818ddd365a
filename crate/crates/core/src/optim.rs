//! Training loop: shuffled mini-batches, BPTT orchestration, Adam or
//! SGD-with-momentum updates, optional direction-preserving gradient
//! clipping, and per-iteration loss/error tracking.
//!
//! One training step runs, in order: forward encode, mean pooling,
//! combined loss, error injection into BPTT, the parameter update, and
//! finally the class-mean update.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cells::{backward_bptt, CellParams};
use crate::data::{Dataset, SequenceSample};
use crate::linalg::Matrix;
use crate::loss::{combined_loss, update_means, FeatureBatch, LossBreakdown};
use crate::model::{accuracy, pool_mean, GestureModel};

/// Which parameter-update rule to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    SgdMomentum,
}

impl OptimizerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::SgdMomentum => "sgd_momentum",
        }
    }
}

/// Everything the training loop needs beyond the model itself.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_iterations: usize,
    pub optimizer: OptimizerKind,
    pub momentum: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    /// Global-norm clip; `None` disables clipping.
    pub grad_clip_norm: Option<f64>,
    pub seed: u64,
    /// Losses and error rates are recorded every this many iterations
    /// (and always at the final iteration).
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
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
        }
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("gradient for parameter block `{block}` is not finite at iteration {iteration}")]
    NonFiniteGradient { block: String, iteration: usize },
    #[error("training batch is empty")]
    EmptyBatch,
    #[error("class `{class}` has no samples in the training set")]
    MissingClass { class: String },
}

/// Per-parameter-block accumulators; shapes mirror the model blocks.
#[derive(Debug, Clone)]
pub enum OptimizerState {
    Adam {
        first: Vec<Vec<f64>>,
        second: Vec<Vec<f64>>,
        step: u64,
    },
    Momentum {
        velocity: Vec<Vec<f64>>,
    },
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, model: &GestureModel) -> Self {
        let shapes: Vec<usize> = model.param_blocks().iter().map(|(_, b)| b.len()).collect();
        let zeros: Vec<Vec<f64>> = shapes.iter().map(|&len| vec![0.0; len]).collect();
        match kind {
            OptimizerKind::Adam => OptimizerState::Adam {
                first: zeros.clone(),
                second: zeros,
                step: 0,
            },
            OptimizerKind::SgdMomentum => OptimizerState::Momentum { velocity: zeros },
        }
    }
}

/// Gradients of the combined loss with respect to every model parameter,
/// in the model's canonical block order.
pub struct ModelGradients {
    pub fwd: CellParams,
    pub bwd: CellParams,
    pub cls_w: Matrix,
    pub cls_b: Vec<f64>,
}

impl ModelGradients {
    pub fn blocks(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        for (name, block) in self.fwd.blocks() {
            out.push((format!("fwd.{name}"), block));
        }
        for (name, block) in self.bwd.blocks() {
            out.push((format!("bwd.{name}"), block));
        }
        out.push(("cls.w".to_string(), self.cls_w.as_slice()));
        out.push(("cls.b".to_string(), self.cls_b.as_slice()));
        out
    }

    fn blocks_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out = Vec::new();
        for (name, block) in self.fwd.blocks_mut() {
            out.push((format!("fwd.{name}"), block));
        }
        for (name, block) in self.bwd.blocks_mut() {
            out.push((format!("bwd.{name}"), block));
        }
        out.push(("cls.w".to_string(), self.cls_w.as_mut_slice()));
        out.push(("cls.b".to_string(), self.cls_b.as_mut_slice()));
        out
    }

    /// Global L2 norm over every block.
    pub fn global_norm(&self) -> f64 {
        self.blocks()
            .iter()
            .map(|(_, b)| b.iter().map(|g| g * g).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    /// Scales every gradient so the global norm is at most `max_norm`;
    /// a positive scalar multiple, so the direction never changes.
    pub fn clip_global_norm(&mut self, max_norm: f64) {
        let norm = self.global_norm();
        if norm > max_norm {
            let scale = max_norm / norm;
            for (_, block) in self.blocks_mut() {
                for g in block {
                    *g *= scale;
                }
            }
        }
    }
}

/// Forward + loss + full backward over one batch; the model is not
/// modified. This is the exact gradient path the finite-difference
/// checker verifies.
pub fn model_gradients(
    model: &GestureModel,
    batch: &[&SequenceSample],
) -> (ModelGradients, LossBreakdown) {
    assert!(!batch.is_empty(), "batch must be nonempty");
    let caches: Vec<_> = batch.iter().map(|s| model.encode(&s.values)).collect();
    let pooled: Vec<Vec<f64>> = caches.iter().map(|c| pool_mean(&c.features)).collect();
    let labels: Vec<usize> = batch.iter().map(|s| s.label).collect();
    let feature_batch = FeatureBatch::new(pooled, labels);

    let loss_out = combined_loss(&model.classifier, &model.fisher, &feature_batch);

    let mut grads = ModelGradients {
        fwd: model.fwd.zeros_like(),
        bwd: model.bwd.zeros_like(),
        cls_w: loss_out.grad_w,
        cls_b: loss_out.grad_b,
    };

    for (cache, grad_pooled) in caches.iter().zip(&loss_out.grad_features) {
        // Mean pooling spreads the feature gradient uniformly over time.
        let t_len = cache.len();
        let per_step: Vec<f64> = grad_pooled.iter().map(|g| g / t_len as f64).collect();
        let grad_f: Vec<Vec<f64>> = (0..t_len).map(|_| per_step.clone()).collect();
        let bptt = backward_bptt(&model.fwd, &model.bwd, cache, &grad_f);
        accumulate(&mut grads.fwd, &bptt.fwd);
        accumulate(&mut grads.bwd, &bptt.bwd);
    }

    (grads, loss_out.breakdown)
}

fn accumulate(dst: &mut CellParams, src: &CellParams) {
    for ((_, d), (_, s)) in dst.blocks_mut().into_iter().zip(src.blocks()) {
        crate::linalg::add_assign(d, s);
    }
}

fn apply_update(
    model: &mut GestureModel,
    grads: &ModelGradients,
    config: &TrainConfig,
    opt: &mut OptimizerState,
) {
    let params = model.param_blocks_mut();
    let grad_blocks = grads.blocks();
    debug_assert_eq!(params.len(), grad_blocks.len());
    match opt {
        OptimizerState::Adam { first, second, step } => {
            *step += 1;
            let t = *step as i32;
            let bias1 = 1.0 - config.adam_beta1.powi(t);
            let bias2 = 1.0 - config.adam_beta2.powi(t);
            for (((_, p), (_, g)), (m, v)) in params
                .into_iter()
                .zip(grad_blocks)
                .zip(first.iter_mut().zip(second.iter_mut()))
            {
                for k in 0..p.len() {
                    m[k] = config.adam_beta1 * m[k] + (1.0 - config.adam_beta1) * g[k];
                    v[k] = config.adam_beta2 * v[k] + (1.0 - config.adam_beta2) * g[k] * g[k];
                    let m_hat = m[k] / bias1;
                    let v_hat = v[k] / bias2;
                    p[k] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.adam_epsilon);
                }
            }
        }
        OptimizerState::Momentum { velocity } => {
            for (((_, p), (_, g)), vel) in params.into_iter().zip(grad_blocks).zip(velocity) {
                for k in 0..p.len() {
                    vel[k] = config.momentum * vel[k] + g[k];
                    p[k] -= config.learning_rate * vel[k];
                }
            }
        }
    }
}

/// One optimization step on a mini-batch: gradients, optional clipping,
/// parameter update, then the class-mean update. Non-finite gradients
/// abort with the offending block named.
pub fn train_step(
    model: &mut GestureModel,
    batch: &[&SequenceSample],
    config: &TrainConfig,
    opt: &mut OptimizerState,
    iteration: usize,
) -> Result<LossBreakdown, TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let (mut grads, breakdown) = model_gradients(model, batch);

    for (name, block) in grads.blocks() {
        if block.iter().any(|g| !g.is_finite()) {
            return Err(TrainError::NonFiniteGradient {
                block: name,
                iteration,
            });
        }
    }
    if let Some(max_norm) = config.grad_clip_norm {
        grads.clip_global_norm(max_norm);
    }

    apply_update(model, &grads, config, opt);

    let pooled: Vec<Vec<f64>> = batch.iter().map(|s| model.forward_features(&s.values)).collect();
    let labels: Vec<usize> = batch.iter().map(|s| s.label).collect();
    update_means(&mut model.fisher, &FeatureBatch::new(pooled, labels));

    Ok(breakdown)
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    pub iteration: usize,
    pub loss_softmax: f64,
    pub loss_fisher: f64,
    pub loss_total: f64,
    pub train_err: f64,
    /// NaN when no test set was supplied.
    pub test_err: f64,
}

/// Per-iteration records of losses and error rates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub records: Vec<TrainRecord>,
}

impl TrainReport {
    /// CSV with header `iter,loss_s,loss_f,loss_total,train_err,test_err`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,loss_s,loss_f,loss_total,train_err,test_err\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.iteration, r.loss_softmax, r.loss_fisher, r.loss_total, r.train_err, r.test_err
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv())
    }

    /// The record logged at the given iteration, if any.
    pub fn at_iteration(&self, iteration: usize) -> Option<&TrainRecord> {
        self.records.iter().find(|r| r.iteration == iteration)
    }
}

/// Runs `max_iterations` mini-batch steps over seeded epoch shuffles
/// (the last partial batch of an epoch is kept). Deterministic given the
/// config seed. Requires every class to be present in the training set.
pub fn train(
    model: &mut GestureModel,
    train_set: &Dataset,
    test_set: Option<&Dataset>,
    config: &TrainConfig,
) -> Result<TrainReport, TrainError> {
    let counts = train_set.class_counts();
    for (label, &count) in counts.iter().enumerate() {
        if count == 0 {
            return Err(TrainError::MissingClass {
                class: train_set
                    .class_names
                    .get(label)
                    .cloned()
                    .unwrap_or_else(|| label.to_string()),
            });
        }
    }

    let mut opt = OptimizerState::new(config.optimizer, model);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0usize;

    let mut report = TrainReport::default();
    for iteration in 1..=config.max_iterations {
        if cursor >= order.len() {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let end = (cursor + config.batch_size).min(order.len());
        let batch: Vec<&SequenceSample> =
            order[cursor..end].iter().map(|&i| &train_set.samples[i]).collect();
        cursor = end;

        let breakdown = train_step(model, &batch, config, &mut opt, iteration)?;

        if iteration % config.log_every == 0 || iteration == config.max_iterations {
            let train_err = 1.0 - accuracy(model, train_set);
            let test_err = match test_set {
                Some(ds) => 1.0 - accuracy(model, ds),
                None => f64::NAN,
            };
            report.records.push(TrainRecord {
                iteration,
                loss_softmax: breakdown.softmax,
                loss_fisher: breakdown.fisher,
                loss_total: breakdown.total,
                train_err,
                test_err,
            });
        }
    }

    Ok(report)
}
