//! Cross-module checks on the synthetic gesture task: pipeline output
//! bounds over a whole corpus, a simple-classifier oracle pinning the
//! task's difficulty, and inference-mode agreement.

use fbrnn_core::cells::CellKind;
use fbrnn_core::data::{generate_synthetic, split, Dataset, SequenceSample, SynthConfig};
use fbrnn_core::linalg::softmax;
use fbrnn_core::model::{GestureModel, ModelConfig, PoolingMode};
use fbrnn_core::optim::{train, TrainConfig};
use fbrnn_core::preprocess::{preprocess_pipeline, RawSignal};

fn preprocess_dataset(ds: &Dataset, window: usize, target_len: usize) -> Dataset {
    let samples = ds
        .samples
        .iter()
        .map(|s| SequenceSample {
            values: preprocess_pipeline(
                &RawSignal::from_sample_matrix(&s.values, 0.005),
                window,
                target_len,
            )
            .unwrap(),
            label: s.label,
            source_id: s.source_id.clone(),
        })
        .collect();
    Dataset {
        samples,
        n_classes: ds.n_classes,
        class_names: ds.class_names.clone(),
    }
}

#[test]
fn pipeline_outputs_stay_within_overshoot_bound() {
    // Normalization guarantees [0,1] only at the spline knots; the spline
    // may overshoot in between. Empirical bound over the default corpus.
    let ds = generate_synthetic(&SynthConfig::default());
    let pre = preprocess_dataset(&ds, 5, 32);
    let mut lo = f64::MAX;
    let mut hi = f64::MIN;
    for s in &pre.samples {
        for &v in s.values.as_slice() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    assert!(
        lo >= -0.25 && hi <= 1.25,
        "pipeline output range [{lo:.3}, {hi:.3}] exceeds [-0.25, 1.25]"
    );
}

/// Multinomial logistic regression on per-channel summary statistics
/// (mean, standard deviation, min, max). A deliberately simple baseline:
/// if it gets under 15% test error, the task is separable enough for the
/// recurrent models' 5% training-error contract to be meaningful.
#[test]
fn logistic_regression_on_summary_statistics_oracle() {
    let ds = generate_synthetic(&SynthConfig::default());
    let (train_set, test_set) = split(&ds, 0.3, 23).unwrap();

    let summarize = |s: &SequenceSample| -> Vec<f64> {
        let mut out = Vec::with_capacity(24);
        for c in 0..6 {
            let col: Vec<f64> = (0..s.values.rows()).map(|t| s.values.get(t, c)).collect();
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            let min = col.iter().cloned().fold(f64::MAX, f64::min);
            let max = col.iter().cloned().fold(f64::MIN, f64::max);
            out.extend([mean, var.sqrt(), min, max]);
        }
        out
    };

    let x_train: Vec<Vec<f64>> = train_set.samples.iter().map(summarize).collect();
    let y_train: Vec<usize> = train_set.samples.iter().map(|s| s.label).collect();

    // Standardize features to unit scale for plain gradient descent.
    let dim = x_train[0].len();
    let mut mu = vec![0.0; dim];
    let mut sd = vec![0.0; dim];
    for x in &x_train {
        for d in 0..dim {
            mu[d] += x[d] / x_train.len() as f64;
        }
    }
    for x in &x_train {
        for d in 0..dim {
            sd[d] += (x[d] - mu[d]).powi(2) / x_train.len() as f64;
        }
    }
    for s in &mut sd {
        *s = s.sqrt().max(1e-9);
    }
    let standardize = |x: &[f64]| -> Vec<f64> {
        (0..dim).map(|d| (x[d] - mu[d]) / sd[d]).collect()
    };

    let n_classes = 4;
    let mut w = vec![vec![0.0; dim]; n_classes];
    let mut b = vec![0.0; n_classes];
    let lr = 0.1;
    for _ in 0..400 {
        let mut gw = vec![vec![0.0; dim]; n_classes];
        let mut gb = vec![0.0; n_classes];
        for (x, &y) in x_train.iter().zip(&y_train) {
            let z = standardize(x);
            let logits: Vec<f64> = (0..n_classes)
                .map(|j| b[j] + w[j].iter().zip(&z).map(|(a, v)| a * v).sum::<f64>())
                .collect();
            let p = softmax(&logits);
            for j in 0..n_classes {
                let err = p[j] - if j == y { 1.0 } else { 0.0 };
                gb[j] += err / x_train.len() as f64;
                for d in 0..dim {
                    gw[j][d] += err * z[d] / x_train.len() as f64;
                }
            }
        }
        for j in 0..n_classes {
            b[j] -= lr * gb[j];
            for d in 0..dim {
                w[j][d] -= lr * gw[j][d];
            }
        }
    }

    let mut correct = 0;
    for s in &test_set.samples {
        let z = standardize(&summarize(s));
        let logits: Vec<f64> = (0..n_classes)
            .map(|j| b[j] + w[j].iter().zip(&z).map(|(a, v)| a * v).sum::<f64>())
            .collect();
        let pred = (0..n_classes)
            .max_by(|&a, &c| logits[a].partial_cmp(&logits[c]).unwrap())
            .unwrap();
        if pred == s.label {
            correct += 1;
        }
    }
    let err = 1.0 - correct as f64 / test_set.len() as f64;
    println!("summary-statistics logistic regression test error: {err:.4}");
    assert!(err < 0.15, "baseline test error {err:.4} not under 15%");
}

#[test]
fn pooled_and_vote_inference_mostly_agree() {
    // Reported, not asserted as a hard bound: how often the two
    // inference modes pick the same class on a trained model.
    let raw = generate_synthetic(&SynthConfig {
        samples_per_class: 40,
        ..SynthConfig::default()
    });
    let pre = preprocess_dataset(&raw, 5, 24);
    let (train_set, test_set) = split(&pre, 0.3, 29).unwrap();
    let mut model = GestureModel::new(
        &ModelConfig {
            cell_kind: CellKind::Gru,
            input_dim: 6,
            hidden_dim: 12,
            n_classes: 4,
            theta: 0.3,
            delta: 0.01,
            alpha: 0.5,
            pooling: PoolingMode::MeanPool,
            window: 5,
            target_len: 24,
        },
        29,
    );
    let config = TrainConfig {
        max_iterations: 200,
        seed: 29,
        ..TrainConfig::default()
    };
    train(&mut model, &train_set, None, &config).unwrap();

    let mut vote_model = model.clone();
    vote_model.pooling = PoolingMode::PerStepVote;
    let agree = test_set
        .samples
        .iter()
        .filter(|s| model.classify(&s.values).0 == vote_model.classify(&s.values).0)
        .count();
    let agreement = agree as f64 / test_set.len() as f64;
    println!("mean_pool vs per_step_vote agreement: {agreement:.4}");
    println!(
        "train accuracy {:.4} vs test accuracy {:.4}",
        fbrnn_core::model::accuracy(&model, &train_set),
        fbrnn_core::model::accuracy(&model, &test_set)
    );
}
