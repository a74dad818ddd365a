//! Finite-difference verification of the analytic gradients.
//!
//! Builds small model instances (H=4, T=7, N=3, n=3, m=5), perturbs every
//! scalar parameter by ±step, and compares the central difference of the
//! combined loss against the analytic BPTT gradients, block by block. The
//! feature gradients of the softmax and Fisher losses are checked the same
//! way (the Fisher check is skipped when θ = 0).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cells::CellKind;
use crate::data::SequenceSample;
use crate::linalg::Matrix;
use crate::loss::{fisher_loss, softmax_loss, FeatureBatch};
use crate::model::{GestureModel, ModelConfig, PoolingMode};
use crate::optim::model_gradients;

const HIDDEN_DIM: usize = 4;
const SEQ_LEN: usize = 7;
const INPUT_DIM: usize = 3;
const N_CLASSES: usize = 3;
const BATCH: usize = 5;

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    pub cell_kind: CellKind,
    pub theta: f64,
    pub seeds: Vec<u64>,
    pub tolerance: f64,
    pub step: f64,
    /// Test fixture: a nonzero value is added to one analytic gradient
    /// entry so the check must fail. Always 0.0 in real runs.
    pub tamper: f64,
}

impl GradCheckOptions {
    pub fn new(cell_kind: CellKind, theta: f64, seeds: Vec<u64>) -> Self {
        GradCheckOptions {
            cell_kind,
            theta,
            seeds,
            tolerance: 1e-4,
            step: 1e-5,
            tamper: 0.0,
        }
    }
}

/// Worst relative error observed for one parameter block.
#[derive(Debug, Clone)]
pub struct BlockCheck {
    pub name: String,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub cell_kind: CellKind,
    pub tolerance: f64,
    pub blocks: Vec<BlockCheck>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.blocks.iter().all(|b| b.max_rel_err <= self.tolerance)
    }

    pub fn worst(&self) -> Option<&BlockCheck> {
        self.blocks
            .iter()
            .max_by(|a, b| a.max_rel_err.partial_cmp(&b.max_rel_err).unwrap())
    }
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-5)
}

/// Random model with every block populated (plain init leaves peepholes
/// and biases at zero, which would leave their gradients unexercised).
fn random_instance(opts: &GradCheckOptions, seed: u64) -> (GestureModel, Vec<SequenceSample>) {
    let mut model = GestureModel::new(
        &ModelConfig {
            cell_kind: opts.cell_kind,
            input_dim: INPUT_DIM,
            hidden_dim: HIDDEN_DIM,
            n_classes: N_CLASSES,
            theta: opts.theta,
            delta: 0.01,
            alpha: 0.5,
            pooling: PoolingMode::MeanPool,
            window: 3,
            target_len: SEQ_LEN,
        },
        seed,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(1));
    for (_, block) in model.param_blocks_mut() {
        for v in block {
            *v = rng.random_range(-0.5..0.5);
        }
    }
    for mean in &mut model.fisher.means {
        for v in mean {
            *v = rng.random_range(-0.8..0.8);
        }
    }
    let samples = (0..BATCH)
        .map(|k| SequenceSample {
            values: Matrix::from_fn(SEQ_LEN, INPUT_DIM, |_, _| rng.random_range(-1.0..1.0)),
            label: k % N_CLASSES,
            source_id: format!("gradcheck-{k}"),
        })
        .collect();
    (model, samples)
}

fn combined_total(model: &GestureModel, samples: &[&SequenceSample]) -> f64 {
    let pooled: Vec<Vec<f64>> = samples.iter().map(|s| model.forward_features(&s.values)).collect();
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let batch = FeatureBatch::new(pooled, labels);
    crate::loss::combined_loss(&model.classifier, &model.fisher, &batch)
        .breakdown
        .total
}

/// Runs the finite-difference suite; returns per-block worst relative
/// errors aggregated over all seeds.
pub fn run_gradcheck(opts: &GradCheckOptions) -> GradCheckReport {
    let mut worst: Vec<(String, f64)> = Vec::new();
    let mut note = |name: &str, err: f64| {
        if let Some(entry) = worst.iter_mut().find(|(n, _)| n == name) {
            entry.1 = entry.1.max(err);
        } else {
            worst.push((name.to_string(), err));
        }
    };

    for (seed_idx, &seed) in opts.seeds.iter().enumerate() {
        let (model, samples) = random_instance(opts, seed);
        let batch: Vec<&SequenceSample> = samples.iter().collect();
        let (mut grads, _) = model_gradients(&model, &batch);

        if opts.tamper != 0.0 {
            if let Some((_, block)) = grads.blocks_for_tamper().first_mut() {
                block[0] += opts.tamper;
            }
        }

        let analytic = grads.blocks();
        for (block_idx, (name, block)) in analytic.iter().enumerate() {
            for k in 0..block.len() {
                let mut plus = model.clone();
                plus.param_blocks_mut()[block_idx].1[k] += opts.step;
                let mut minus = model.clone();
                minus.param_blocks_mut()[block_idx].1[k] -= opts.step;
                let fd = (combined_total(&plus, &batch) - combined_total(&minus, &batch))
                    / (2.0 * opts.step);
                note(name, rel_err(block[k], fd));
            }
        }

        // Feature-gradient checks of each loss in isolation.
        let pooled: Vec<Vec<f64>> =
            batch.iter().map(|s| model.forward_features(&s.values)).collect();
        let labels: Vec<usize> = batch.iter().map(|s| s.label).collect();
        let feature_batch = FeatureBatch::new(pooled, labels);

        let softmax_analytic = softmax_loss(&model.classifier, &feature_batch).grad_features;
        for i in 0..feature_batch.len() {
            for d in 0..feature_batch.features[i].len() {
                let mut plus = feature_batch.clone();
                plus.features[i][d] += opts.step;
                let mut minus = feature_batch.clone();
                minus.features[i][d] -= opts.step;
                let fd = (softmax_loss(&model.classifier, &plus).loss
                    - softmax_loss(&model.classifier, &minus).loss)
                    / (2.0 * opts.step);
                note("loss.softmax.grad_o", rel_err(softmax_analytic[i][d], fd));
            }
        }

        if opts.theta > 0.0 {
            let fisher_analytic = fisher_loss(&model.fisher, &feature_batch).grad_features;
            for i in 0..feature_batch.len() {
                for d in 0..feature_batch.features[i].len() {
                    let mut plus = feature_batch.clone();
                    plus.features[i][d] += opts.step;
                    let mut minus = feature_batch.clone();
                    minus.features[i][d] -= opts.step;
                    let fd = (fisher_loss(&model.fisher, &plus).loss
                        - fisher_loss(&model.fisher, &minus).loss)
                        / (2.0 * opts.step);
                    note("loss.fisher.grad_o", rel_err(fisher_analytic[i][d], fd));
                }
            }
        }

        let _ = seed_idx;
    }

    GradCheckReport {
        cell_kind: opts.cell_kind,
        tolerance: opts.tolerance,
        blocks: worst
            .into_iter()
            .map(|(name, max_rel_err)| BlockCheck { name, max_rel_err })
            .collect(),
    }
}

impl crate::optim::ModelGradients {
    fn blocks_for_tamper(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out = Vec::new();
        for (name, block) in self.fwd.blocks_mut() {
            out.push((format!("fwd.{name}"), block));
        }
        out
    }
}
