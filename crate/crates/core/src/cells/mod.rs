//! Recurrent cells (LSTM with peephole connections, GRU) with exact
//! analytic forward and backward passes, and the bidirectional encoder
//! that feeds the classifier.
//!
//! Forward and backward cells read the sequence in opposite directions,
//! both from zero initial state; the per-timestep feature is the
//! concatenation `[h_fwd_t ; h_bwd_t]` of length `2H`.

mod gru;
mod lstm;

pub use gru::{gru_step, GruParams, GruState};
pub use lstm::{lstm_step, LstmParams, LstmState};

use crate::linalg::{add_assign, Matrix};

/// Which recurrent unit a model is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Lstm,
    Gru,
}

impl CellKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CellKind::Lstm => "lstm",
            CellKind::Gru => "gru",
        }
    }
}

/// Parameters of one directional cell. The same shape doubles as the
/// gradient accumulator for that cell.
#[derive(Debug, Clone, PartialEq)]
pub enum CellParams {
    Lstm(LstmParams),
    Gru(GruParams),
}

impl CellParams {
    pub fn kind(&self) -> CellKind {
        match self {
            CellParams::Lstm(_) => CellKind::Lstm,
            CellParams::Gru(_) => CellKind::Gru,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            CellParams::Lstm(p) => p.input_dim,
            CellParams::Gru(p) => p.input_dim,
        }
    }

    pub fn hidden_dim(&self) -> usize {
        match self {
            CellParams::Lstm(p) => p.hidden_dim,
            CellParams::Gru(p) => p.hidden_dim,
        }
    }

    pub fn zeros(kind: CellKind, input_dim: usize, hidden_dim: usize) -> Self {
        match kind {
            CellKind::Lstm => CellParams::Lstm(LstmParams::zeros(input_dim, hidden_dim)),
            CellKind::Gru => CellParams::Gru(GruParams::zeros(input_dim, hidden_dim)),
        }
    }

    /// Standard initialization: dense matrices uniform on ±1/√H, biases and
    /// peepholes zero except the LSTM forget-gate bias at 1.0.
    pub fn init<R: rand::Rng>(
        kind: CellKind,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Self {
        match kind {
            CellKind::Lstm => CellParams::Lstm(LstmParams::init(input_dim, hidden_dim, rng)),
            CellKind::Gru => CellParams::Gru(GruParams::init(input_dim, hidden_dim, rng)),
        }
    }

    pub fn zeros_like(&self) -> Self {
        CellParams::zeros(self.kind(), self.input_dim(), self.hidden_dim())
    }

    /// Parameter blocks in canonical order (used by the optimizer and the
    /// model container; the order is part of the serialized format).
    pub fn blocks(&self) -> Vec<(&'static str, &[f64])> {
        match self {
            CellParams::Lstm(p) => p.blocks(),
            CellParams::Gru(p) => p.blocks(),
        }
    }

    pub fn blocks_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        match self {
            CellParams::Lstm(p) => p.blocks_mut(),
            CellParams::Gru(p) => p.blocks_mut(),
        }
    }
}

enum CellTrace {
    Lstm(Vec<LstmState>),
    Gru(Vec<GruState>),
}

impl CellTrace {
    fn hidden(&self, step: usize) -> &[f64] {
        match self {
            CellTrace::Lstm(states) => &states[step].h,
            CellTrace::Gru(states) => &states[step].h,
        }
    }
}

/// Everything the backward pass needs from one bidirectional encoding:
/// the per-timestep features plus the full forward/backward state traces.
pub struct EncoderOutput {
    /// `f_t = [h_fwd_t ; h_bwd_t]`, one per input timestep.
    pub features: Vec<Vec<f64>>,
    hidden_dim: usize,
    /// Input rows in forward time order.
    inputs: Vec<Vec<f64>>,
    /// States in processing order: `fwd_trace[t]` saw rows `0..=t`.
    fwd_trace: CellTrace,
    /// States in processing order: `bwd_trace[s]` saw rows `T-1-s..T`.
    bwd_trace: CellTrace,
}

impl EncoderOutput {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        2 * self.hidden_dim
    }
}

/// Gradients produced by one backward pass through the encoder.
pub struct BpttGrads {
    pub fwd: CellParams,
    pub bwd: CellParams,
    /// dL/dx_t in forward time order.
    pub inputs: Vec<Vec<f64>>,
}

fn run_cell<'a>(params: &CellParams, inputs: impl Iterator<Item = &'a [f64]>) -> CellTrace {
    match params {
        CellParams::Lstm(p) => {
            let mut state = LstmState::zero(p.hidden_dim);
            let mut trace = Vec::new();
            for x in inputs {
                state = lstm_step(p, x, &state);
                trace.push(state.clone());
            }
            CellTrace::Lstm(trace)
        }
        CellParams::Gru(p) => {
            let mut state = GruState::zero(p.hidden_dim);
            let mut trace = Vec::new();
            for x in inputs {
                state = gru_step(p, x, &state);
                trace.push(state.clone());
            }
            CellTrace::Gru(trace)
        }
    }
}

fn backward_cell(
    params: &CellParams,
    inputs: &[Vec<f64>],
    trace: &CellTrace,
    grad_h: &[Vec<f64>],
    grads: &mut CellParams,
) -> Vec<Vec<f64>> {
    match (params, trace, grads) {
        (CellParams::Lstm(p), CellTrace::Lstm(states), CellParams::Lstm(g)) => {
            lstm::lstm_backward(p, inputs, states, grad_h, g)
        }
        (CellParams::Gru(p), CellTrace::Gru(states), CellParams::Gru(g)) => {
            gru::gru_backward(p, inputs, states, grad_h, g)
        }
        _ => panic!("cell trace/gradient kind mismatch"),
    }
}

/// Runs both directional cells over the sequence (rows are timesteps) and
/// concatenates their hidden states per timestep.
pub fn encode_bidirectional(fwd: &CellParams, bwd: &CellParams, seq: &Matrix) -> EncoderOutput {
    assert!(seq.rows() >= 1, "cannot encode an empty sequence");
    assert_eq!(
        seq.cols(),
        fwd.input_dim(),
        "sequence channel count does not match encoder input dim"
    );
    assert_eq!(fwd.input_dim(), bwd.input_dim(), "direction input dims differ");
    assert_eq!(fwd.hidden_dim(), bwd.hidden_dim(), "direction hidden dims differ");
    assert_eq!(fwd.kind(), bwd.kind(), "direction cell kinds differ");

    let t_len = seq.rows();
    let hidden = fwd.hidden_dim();
    let inputs: Vec<Vec<f64>> = (0..t_len).map(|t| seq.row(t).to_vec()).collect();

    let fwd_trace = run_cell(fwd, (0..t_len).map(|t| seq.row(t)));
    let bwd_trace = run_cell(bwd, (0..t_len).rev().map(|t| seq.row(t)));

    let mut features = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let mut f = Vec::with_capacity(2 * hidden);
        f.extend_from_slice(fwd_trace.hidden(t));
        f.extend_from_slice(bwd_trace.hidden(t_len - 1 - t));
        features.push(f);
    }

    EncoderOutput {
        features,
        hidden_dim: hidden,
        inputs,
        fwd_trace,
        bwd_trace,
    }
}

/// Exact gradients of the encoder with respect to every cell parameter and
/// every input entry, given upstream per-timestep feature gradients.
pub fn backward_bptt(
    fwd: &CellParams,
    bwd: &CellParams,
    cache: &EncoderOutput,
    grad_f: &[Vec<f64>],
) -> BpttGrads {
    let t_len = cache.len();
    assert_eq!(
        grad_f.len(),
        t_len,
        "upstream gradient count does not match cached sequence length"
    );
    let hidden = cache.hidden_dim;
    for g in grad_f {
        assert_eq!(g.len(), 2 * hidden, "upstream gradient has wrong feature dim");
    }

    let mut fwd_grads = fwd.zeros_like();
    let mut bwd_grads = bwd.zeros_like();

    // Forward direction sees the first half of each feature gradient.
    let grad_h_fwd: Vec<Vec<f64>> = grad_f.iter().map(|g| g[..hidden].to_vec()).collect();
    let dx_fwd = backward_cell(fwd, &cache.inputs, &cache.fwd_trace, &grad_h_fwd, &mut fwd_grads);

    // Backward direction processes reversed time; align its upstream
    // gradients and inputs to processing order.
    let rev_inputs: Vec<Vec<f64>> = cache.inputs.iter().rev().cloned().collect();
    let grad_h_bwd: Vec<Vec<f64>> = (0..t_len)
        .map(|s| grad_f[t_len - 1 - s][hidden..].to_vec())
        .collect();
    let dx_bwd = backward_cell(bwd, &rev_inputs, &cache.bwd_trace, &grad_h_bwd, &mut bwd_grads);

    let mut input_grads = dx_fwd;
    for (t, grads) in input_grads.iter_mut().enumerate() {
        add_assign(grads, &dx_bwd[t_len - 1 - t]);
    }

    BpttGrads {
        fwd: fwd_grads,
        bwd: bwd_grads,
        inputs: input_grads,
    }
}

#[cfg(test)]
mod tests;
