//! Softmax cross-entropy, the Fisher discriminant criterion, their
//! combination, analytic gradients, and the running class-mean state.
//!
//! For a mini-batch of pooled features `O_1..O_m` with labels `y_i`:
//!
//! ```text
//! L_s = -(1/m) Σ_i log( exp(w_{y_i}·O_i + b_{y_i}) / Σ_j exp(w_j·O_i + b_j) )
//! L_f = (1/m) Σ_i ‖O_i - μ_{y_i}‖² - (δ/(n(n-1))) Σ_{j,k} ‖μ_j - μ_k‖²
//! L   = L_s + θ·L_f
//! ```
//!
//! The inter-class double sum runs over all ordered pairs (j,k) including
//! j = k (those terms are zero). Class means are treated as constants when
//! differentiating, so ∂L_f/∂O_i = (2/m)(O_i - μ_{y_i}); the means
//! themselves move by a damped step toward their batch centroids.

use crate::linalg::{softmax, Matrix};

/// Final linear layer mapping pooled features to class logits.
/// Row `j` of `w` is the weight vector of class `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl ClassifierParams {
    pub fn zeros(n_classes: usize, feature_dim: usize) -> Self {
        ClassifierParams {
            w: Matrix::zeros(n_classes, feature_dim),
            b: vec![0.0; n_classes],
        }
    }

    pub fn init<R: rand::Rng>(n_classes: usize, feature_dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (feature_dim as f64).sqrt();
        let mut c = ClassifierParams::zeros(n_classes, feature_dim);
        for v in c.w.as_mut_slice() {
            *v = rng.random_range(-bound..bound);
        }
        c
    }

    pub fn n_classes(&self) -> usize {
        self.w.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn logits(&self, features: &[f64]) -> Vec<f64> {
        let mut z = self.w.matvec(features);
        crate::linalg::add_assign(&mut z, &self.b);
        z
    }
}

/// Running per-class mean vectors plus the scalars steering the Fisher
/// loss: θ weighs L_f against L_s, δ weighs the inter-class term, α is
/// the mean-update rate. All three live in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct FisherState {
    pub means: Vec<Vec<f64>>,
    pub theta: f64,
    pub delta: f64,
    pub alpha: f64,
}

impl FisherState {
    /// Means start at zero; features are bounded early in training and the
    /// damped update converges regardless of the start.
    pub fn new(n_classes: usize, feature_dim: usize, theta: f64, delta: f64, alpha: f64) -> Self {
        assert!((0.0..=1.0).contains(&theta), "theta must be in [0,1]");
        assert!((0.0..=1.0).contains(&delta), "delta must be in [0,1]");
        assert!((0.0..=1.0).contains(&alpha), "alpha must be in [0,1]");
        FisherState {
            means: vec![vec![0.0; feature_dim]; n_classes],
            theta,
            delta,
            alpha,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.means.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.means[0].len()
    }
}

/// A mini-batch of pooled features with class labels.
#[derive(Debug, Clone)]
pub struct FeatureBatch {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl FeatureBatch {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>) -> Self {
        assert!(!features.is_empty(), "batch must be nonempty");
        assert_eq!(features.len(), labels.len(), "feature/label count mismatch");
        FeatureBatch { features, labels }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// The scalar triple reported every iteration: `total == softmax + θ·fisher`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub softmax: f64,
    pub fisher: f64,
    pub total: f64,
}

/// Output of a softmax-loss evaluation: the scalar plus exact gradients
/// for the features, the classifier weights and the biases.
pub struct SoftmaxLossOutput {
    pub loss: f64,
    pub grad_features: Vec<Vec<f64>>,
    pub grad_w: Matrix,
    pub grad_b: Vec<f64>,
}

/// Mean cross-entropy of softmax logits over the batch, with analytic
/// gradients. Log-probabilities use the max-shift formulation.
pub fn softmax_loss(c: &ClassifierParams, batch: &FeatureBatch) -> SoftmaxLossOutput {
    let n = c.n_classes();
    let m = batch.len() as f64;
    let mut loss = 0.0;
    let mut grad_features = Vec::with_capacity(batch.len());
    let mut grad_w = Matrix::zeros(c.w.rows(), c.w.cols());
    let mut grad_b = vec![0.0; n];

    for (features, &label) in batch.features.iter().zip(&batch.labels) {
        assert!(label < n, "label {label} out of range for {n} classes");
        assert_eq!(features.len(), c.feature_dim(), "feature dim mismatch");
        let z = c.logits(features);
        let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_sum: f64 = z.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        loss += -(z[label] - max - log_sum);

        // dz_j = (p_j - 1{j=y}) / m
        let p = softmax(&z);
        let mut dz = p;
        dz[label] -= 1.0;
        for v in &mut dz {
            *v /= m;
        }
        grad_features.push(c.w.matvec_t(&dz));
        grad_w.add_outer(&dz, features);
        crate::linalg::add_assign(&mut grad_b, &dz);
    }

    SoftmaxLossOutput {
        loss: loss / m,
        grad_features,
        grad_w,
        grad_b,
    }
}

/// Output of a Fisher-criterion evaluation.
pub struct FisherLossOutput {
    pub loss: f64,
    pub grad_features: Vec<Vec<f64>>,
}

/// Fisher criterion value and its feature gradients (means constant).
pub fn fisher_loss(state: &FisherState, batch: &FeatureBatch) -> FisherLossOutput {
    let n = state.n_classes();
    let m = batch.len() as f64;
    let dim = state.feature_dim();

    let mut intra = 0.0;
    let mut grad_features = Vec::with_capacity(batch.len());
    for (features, &label) in batch.features.iter().zip(&batch.labels) {
        assert!(label < n, "label {label} out of range for {n} classes");
        assert_eq!(features.len(), dim, "feature dim mismatch");
        let mean = &state.means[label];
        let mut grad = vec![0.0; dim];
        for k in 0..dim {
            let diff = features[k] - mean[k];
            intra += diff * diff;
            grad[k] = 2.0 * diff / m;
        }
        grad_features.push(grad);
    }
    intra /= m;

    // Ordered pairs (j,k), j=k terms vanish; normalized by n(n-1).
    let mut inter = 0.0;
    if n >= 2 {
        let mut pair_sum = 0.0;
        for j in 0..n {
            for k in 0..n {
                for d in 0..dim {
                    let diff = state.means[j][d] - state.means[k][d];
                    pair_sum += diff * diff;
                }
            }
        }
        inter = state.delta / (n * (n - 1)) as f64 * pair_sum;
    }

    FisherLossOutput {
        loss: intra - inter,
        grad_features,
    }
}

/// Output of a combined-loss evaluation.
pub struct CombinedLossOutput {
    pub breakdown: LossBreakdown,
    pub grad_features: Vec<Vec<f64>>,
    pub grad_w: Matrix,
    pub grad_b: Vec<f64>,
}

/// `L = L_s + θ·L_f` with the backpropagation error
/// `∂L/∂O_i = ∂L_s/∂O_i + θ·∂L_f/∂O_i`. With θ = 0 the result is
/// bitwise identical to `softmax_loss` (Fisher still evaluated for
/// reporting, but contributes nothing).
pub fn combined_loss(
    c: &ClassifierParams,
    state: &FisherState,
    batch: &FeatureBatch,
) -> CombinedLossOutput {
    assert_eq!(
        c.n_classes(),
        state.n_classes(),
        "classifier/Fisher class count mismatch"
    );
    let s = softmax_loss(c, batch);
    let f = fisher_loss(state, batch);

    let (total, grad_features) = if state.theta == 0.0 {
        (s.loss, s.grad_features)
    } else {
        let mut grads = s.grad_features;
        for (g, fg) in grads.iter_mut().zip(&f.grad_features) {
            crate::linalg::axpy(g, state.theta, fg);
        }
        (s.loss + state.theta * f.loss, grads)
    };

    CombinedLossOutput {
        breakdown: LossBreakdown {
            softmax: s.loss,
            fisher: f.loss,
            total,
        },
        grad_features,
        grad_w: s.grad_w,
        grad_b: s.grad_b,
    }
}

/// Damped mean update: for each class present in the batch,
/// `Δμ_j = Σ_{i: y_i=j}(μ_j - O_i) / (1 + count_j)` and
/// `μ_j ← μ_j - α·Δμ_j`. Absent classes are untouched, so the new mean
/// always lies between the old mean and the batch class centroid.
pub fn update_means(state: &mut FisherState, batch: &FeatureBatch) {
    let n = state.n_classes();
    let dim = state.feature_dim();
    let mut sums = vec![vec![0.0; dim]; n];
    let mut counts = vec![0usize; n];
    for (features, &label) in batch.features.iter().zip(&batch.labels) {
        assert!(label < n, "label {label} out of range for {n} classes");
        crate::linalg::add_assign(&mut sums[label], features);
        counts[label] += 1;
    }
    for j in 0..n {
        if counts[j] == 0 {
            continue;
        }
        let damp = 1.0 + counts[j] as f64;
        for d in 0..dim {
            let delta = (counts[j] as f64 * state.means[j][d] - sums[j][d]) / damp;
            state.means[j][d] -= state.alpha * delta;
        }
    }
}
