//! Signal preprocessing: moving-average smoothing, per-channel amplitude
//! normalization to [0,1], and length normalization by natural cubic
//! spline resampling. The pipeline order is filter → normalize → resample.

use thiserror::Error;

use crate::linalg::Matrix;

/// Multichannel time series as recorded: equal-length channels plus the
/// sampling period in seconds (5 ms for 200 Hz IMU data).
#[derive(Debug, Clone, PartialEq)]
pub struct RawSignal {
    channels: Vec<Vec<f64>>,
    pub sample_period: f64,
}

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("moving-average window must be an odd positive integer, got {0}")]
    EvenWindow(usize),
    #[error("channel {0} is constant; amplitude normalization would divide by zero")]
    ConstantChannel(usize),
    #[error("resampling target length must be at least 2, got {0}")]
    TargetTooShort(usize),
    #[error("signal must have at least 2 samples per channel, got {0}")]
    SignalTooShort(usize),
}

impl RawSignal {
    pub fn new(channels: Vec<Vec<f64>>, sample_period: f64) -> Self {
        assert!(!channels.is_empty(), "signal needs at least one channel");
        let len = channels[0].len();
        assert!(len >= 2, "signal needs at least two samples");
        assert!(
            channels.iter().all(|c| c.len() == len),
            "all channels must have equal length"
        );
        RawSignal {
            channels,
            sample_period,
        }
    }

    /// Builds a signal from a timesteps × channels sample matrix.
    pub fn from_sample_matrix(values: &Matrix, sample_period: f64) -> Self {
        let channels = (0..values.cols())
            .map(|c| (0..values.rows()).map(|t| values.get(t, c)).collect())
            .collect();
        RawSignal::new(channels, sample_period)
    }

    /// Timesteps × channels matrix, the model input layout.
    pub fn to_sample_matrix(&self) -> Matrix {
        Matrix::from_fn(self.len(), self.channel_count(), |t, c| self.channels[c][t])
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn channel(&self, i: usize) -> &[f64] {
        &self.channels[i]
    }
}

/// Centered moving average per channel. Near the edges the window is
/// truncated to the samples that exist; no padding values are invented,
/// so the output length equals the input length.
pub fn moving_average(sig: &RawSignal, window: usize) -> Result<RawSignal, PreprocessError> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(PreprocessError::EvenWindow(window));
    }
    let half = window / 2;
    let t_len = sig.len();
    let channels = sig
        .channels
        .iter()
        .map(|ch| {
            (0..t_len)
                .map(|i| {
                    let lo = i.saturating_sub(half);
                    let hi = (i + half).min(t_len - 1);
                    let sum: f64 = ch[lo..=hi].iter().sum();
                    sum / (hi - lo + 1) as f64
                })
                .collect()
        })
        .collect();
    Ok(RawSignal::new(channels, sig.sample_period))
}

/// Per-channel min-max rescaling to [0,1]:
/// `x(t) ← (x(t) - min_t x) / (max_t x - min_t x)`.
pub fn normalize_amplitude(sig: &RawSignal) -> Result<RawSignal, PreprocessError> {
    let mut channels = Vec::with_capacity(sig.channel_count());
    for (idx, ch) in sig.channels.iter().enumerate() {
        let min = ch.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = ch.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = max - min;
        if span > 0.0 {
            channels.push(ch.iter().map(|&x| (x - min) / span).collect());
        } else {
            return Err(PreprocessError::ConstantChannel(idx));
        }
    }
    Ok(RawSignal::new(channels, sig.sample_period))
}

/// Second derivatives of a natural cubic spline through `(i, y_i)`
/// (uniform unit knot spacing, zero curvature at both ends).
fn natural_spline_second_derivs(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut y2 = vec![0.0; n];
    if n < 3 {
        return y2;
    }
    let mut u = vec![0.0; n - 1];
    for i in 1..n - 1 {
        // Tridiagonal forward sweep, specialized to h = 1.
        let p = 0.5 * y2[i - 1] + 2.0;
        y2[i] = -0.5 / p;
        u[i] = (y[i + 1] - y[i]) - (y[i] - y[i - 1]);
        u[i] = (6.0 * u[i] / 2.0 - 0.5 * u[i - 1]) / p;
    }
    for k in (0..n - 2).rev() {
        y2[k + 1] = y2[k + 1] * y2[k + 2] + u[k + 1];
    }
    y2
}

fn spline_eval(y: &[f64], y2: &[f64], q: f64) -> f64 {
    let n = y.len();
    let lo = (q.floor() as usize).min(n - 2);
    let hi = lo + 1;
    let a = hi as f64 - q;
    let b = q - lo as f64;
    a * y[lo] + b * y[hi] + ((a * a * a - a) * y2[lo] + (b * b * b - b) * y2[hi]) / 6.0
}

/// Resamples every channel to `target_len` points uniformly spanning the
/// original time range, via a natural cubic spline with knots at the
/// original samples. Endpoints are reproduced exactly.
pub fn resample_spline(sig: &RawSignal, target_len: usize) -> Result<RawSignal, PreprocessError> {
    if target_len < 2 {
        return Err(PreprocessError::TargetTooShort(target_len));
    }
    let t_len = sig.len();
    if t_len < 2 {
        return Err(PreprocessError::SignalTooShort(t_len));
    }
    let span = (t_len - 1) as f64;
    let new_period = sig.sample_period * span / (target_len - 1) as f64;
    let channels = sig
        .channels
        .iter()
        .map(|ch| {
            let y2 = natural_spline_second_derivs(ch);
            (0..target_len)
                .map(|i| spline_eval(ch, &y2, i as f64 * span / (target_len - 1) as f64))
                .collect()
        })
        .collect();
    Ok(RawSignal::new(channels, new_period))
}

/// Full pipeline: moving average, amplitude normalization, spline length
/// normalization; emits the `target_len × channels` model input matrix.
pub fn preprocess_pipeline(
    sig: &RawSignal,
    window: usize,
    target_len: usize,
) -> Result<Matrix, PreprocessError> {
    let filtered = moving_average(sig, window)?;
    let normalized = normalize_amplitude(&filtered)?;
    let resampled = resample_spline(&normalized, target_len)?;
    Ok(resampled.to_sample_matrix())
}
