//! Peephole LSTM cell.
//!
//! Per-step update (σ is the logistic function, ⊙ elementwise product;
//! peephole weights `w_c*` are diagonal and stored as vectors):
//!
//! ```text
//! i_t = σ(W_xi x_t + W_hi h_{t-1} + w_ci ⊙ c_{t-1} + b_i)
//! f_t = σ(W_xf x_t + W_hf h_{t-1} + w_cf ⊙ c_{t-1} + b_f)
//! g_t = tanh(W_xc x_t + W_hc h_{t-1} + b_c)
//! c_t = f_t ⊙ c_{t-1} + i_t ⊙ g_t
//! o_t = σ(W_xo x_t + W_ho h_{t-1} + w_co ⊙ c_t + b_o)
//! h_t = o_t ⊙ tanh(c_t)
//! ```

use rand::Rng;

use crate::linalg::{add_assign, sigmoid, Matrix};

/// All trainable weights and biases of one directional LSTM cell.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w_xi: Matrix,
    pub w_hi: Matrix,
    pub w_ci: Vec<f64>,
    pub b_i: Vec<f64>,
    pub w_xf: Matrix,
    pub w_hf: Matrix,
    pub w_cf: Vec<f64>,
    pub b_f: Vec<f64>,
    pub w_xc: Matrix,
    pub w_hc: Matrix,
    pub b_c: Vec<f64>,
    pub w_xo: Matrix,
    pub w_ho: Matrix,
    pub w_co: Vec<f64>,
    pub b_o: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let h = hidden_dim;
        LstmParams {
            input_dim,
            hidden_dim,
            w_xi: Matrix::zeros(h, input_dim),
            w_hi: Matrix::zeros(h, h),
            w_ci: vec![0.0; h],
            b_i: vec![0.0; h],
            w_xf: Matrix::zeros(h, input_dim),
            w_hf: Matrix::zeros(h, h),
            w_cf: vec![0.0; h],
            b_f: vec![0.0; h],
            w_xc: Matrix::zeros(h, input_dim),
            w_hc: Matrix::zeros(h, h),
            b_c: vec![0.0; h],
            w_xo: Matrix::zeros(h, input_dim),
            w_ho: Matrix::zeros(h, h),
            w_co: vec![0.0; h],
            b_o: vec![0.0; h],
        }
    }

    /// Dense matrices uniform on ±1/√H; peepholes and biases zero except
    /// the forget-gate bias, initialized to 1.0 to aid gradient flow.
    pub fn init<R: Rng>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden_dim as f64).sqrt();
        let mut p = LstmParams::zeros(input_dim, hidden_dim);
        for m in [
            &mut p.w_xi, &mut p.w_hi, &mut p.w_xf, &mut p.w_hf, &mut p.w_xc, &mut p.w_hc,
            &mut p.w_xo, &mut p.w_ho,
        ] {
            for v in m.as_mut_slice() {
                *v = rng.random_range(-bound..bound);
            }
        }
        p.b_f.fill(1.0);
        p
    }

    pub fn blocks(&self) -> Vec<(&'static str, &[f64])> {
        vec![
            ("w_xi", self.w_xi.as_slice()),
            ("w_hi", self.w_hi.as_slice()),
            ("w_ci", &self.w_ci),
            ("b_i", &self.b_i),
            ("w_xf", self.w_xf.as_slice()),
            ("w_hf", self.w_hf.as_slice()),
            ("w_cf", &self.w_cf),
            ("b_f", &self.b_f),
            ("w_xc", self.w_xc.as_slice()),
            ("w_hc", self.w_hc.as_slice()),
            ("b_c", &self.b_c),
            ("w_xo", self.w_xo.as_slice()),
            ("w_ho", self.w_ho.as_slice()),
            ("w_co", &self.w_co),
            ("b_o", &self.b_o),
        ]
    }

    pub fn blocks_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![
            ("w_xi", self.w_xi.as_mut_slice()),
            ("w_hi", self.w_hi.as_mut_slice()),
            ("w_ci", &mut self.w_ci),
            ("b_i", &mut self.b_i),
            ("w_xf", self.w_xf.as_mut_slice()),
            ("w_hf", self.w_hf.as_mut_slice()),
            ("w_cf", &mut self.w_cf),
            ("b_f", &mut self.b_f),
            ("w_xc", self.w_xc.as_mut_slice()),
            ("w_hc", self.w_hc.as_mut_slice()),
            ("b_c", &mut self.b_c),
            ("w_xo", self.w_xo.as_mut_slice()),
            ("w_ho", self.w_ho.as_mut_slice()),
            ("w_co", &mut self.w_co),
            ("b_o", &mut self.b_o),
        ]
    }
}

/// Cell state, hidden output, and the gate activations cached for BPTT.
#[derive(Debug, Clone)]
pub struct LstmState {
    pub c: Vec<f64>,
    pub h: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub o: Vec<f64>,
    /// Candidate activation `g_t = tanh(W_xc x_t + W_hc h_{t-1} + b_c)`.
    pub g: Vec<f64>,
}

impl LstmState {
    pub fn zero(hidden_dim: usize) -> Self {
        LstmState {
            c: vec![0.0; hidden_dim],
            h: vec![0.0; hidden_dim],
            i: vec![0.0; hidden_dim],
            f: vec![0.0; hidden_dim],
            o: vec![0.0; hidden_dim],
            g: vec![0.0; hidden_dim],
        }
    }
}

/// One forward step of the peephole LSTM.
pub fn lstm_step(p: &LstmParams, x: &[f64], prev: &LstmState) -> LstmState {
    assert_eq!(x.len(), p.input_dim, "input dim mismatch");
    assert_eq!(prev.h.len(), p.hidden_dim, "state dim mismatch");
    let h = p.hidden_dim;

    let mut a_i = p.w_xi.matvec(x);
    add_assign(&mut a_i, &p.w_hi.matvec(&prev.h));
    for k in 0..h {
        a_i[k] += p.w_ci[k] * prev.c[k];
    }
    add_assign(&mut a_i, &p.b_i);
    let i: Vec<f64> = a_i.iter().map(|&v| sigmoid(v)).collect();

    let mut a_f = p.w_xf.matvec(x);
    add_assign(&mut a_f, &p.w_hf.matvec(&prev.h));
    for k in 0..h {
        a_f[k] += p.w_cf[k] * prev.c[k];
    }
    add_assign(&mut a_f, &p.b_f);
    let f: Vec<f64> = a_f.iter().map(|&v| sigmoid(v)).collect();

    let mut a_g = p.w_xc.matvec(x);
    add_assign(&mut a_g, &p.w_hc.matvec(&prev.h));
    add_assign(&mut a_g, &p.b_c);
    let g: Vec<f64> = a_g.iter().map(|&v| v.tanh()).collect();

    let mut c = vec![0.0; h];
    for k in 0..h {
        c[k] = f[k] * prev.c[k] + i[k] * g[k];
    }

    let mut a_o = p.w_xo.matvec(x);
    add_assign(&mut a_o, &p.w_ho.matvec(&prev.h));
    for k in 0..h {
        a_o[k] += p.w_co[k] * c[k];
    }
    add_assign(&mut a_o, &p.b_o);
    let o: Vec<f64> = a_o.iter().map(|&v| sigmoid(v)).collect();

    let mut h_out = vec![0.0; h];
    for k in 0..h {
        h_out[k] = o[k] * c[k].tanh();
    }

    LstmState { c, h: h_out, i, f, o, g }
}

/// BPTT through one directional LSTM run. `inputs`, `states` and `grad_h`
/// are in processing order; parameter gradients accumulate into `grads`
/// and the per-step input gradients are returned (processing order).
///
/// The peephole terms route gradient both into the current cell state
/// (output gate) and into the previous one (input/forget gates).
pub(super) fn lstm_backward(
    p: &LstmParams,
    inputs: &[Vec<f64>],
    states: &[LstmState],
    grad_h: &[Vec<f64>],
    grads: &mut LstmParams,
) -> Vec<Vec<f64>> {
    let t_len = states.len();
    assert_eq!(inputs.len(), t_len, "input/state length mismatch");
    assert_eq!(grad_h.len(), t_len, "gradient/state length mismatch");
    let h = p.hidden_dim;
    let zero_state = LstmState::zero(h);

    let mut dx = vec![vec![0.0; p.input_dim]; t_len];
    let mut dh_rec = vec![0.0; h];
    let mut dc_rec = vec![0.0; h];

    for t in (0..t_len).rev() {
        let st = &states[t];
        let prev = if t == 0 { &zero_state } else { &states[t - 1] };
        let x = &inputs[t];

        let mut dh = grad_h[t].clone();
        add_assign(&mut dh, &dh_rec);

        let mut da_i = vec![0.0; h];
        let mut da_f = vec![0.0; h];
        let mut da_g = vec![0.0; h];
        let mut da_o = vec![0.0; h];
        let mut dc = vec![0.0; h];

        for k in 0..h {
            let tanh_c = st.c[k].tanh();
            let d_o = dh[k] * tanh_c;
            da_o[k] = d_o * st.o[k] * (1.0 - st.o[k]);
            // Cell-state gradient: through h_t, through the next step's
            // recurrences, and through the output-gate peephole.
            dc[k] = dh[k] * st.o[k] * (1.0 - tanh_c * tanh_c) + dc_rec[k] + da_o[k] * p.w_co[k];
            let d_i = dc[k] * st.g[k];
            da_i[k] = d_i * st.i[k] * (1.0 - st.i[k]);
            let d_f = dc[k] * prev.c[k];
            da_f[k] = d_f * st.f[k] * (1.0 - st.f[k]);
            let d_g = dc[k] * st.i[k];
            da_g[k] = d_g * (1.0 - st.g[k] * st.g[k]);
        }

        grads.w_xi.add_outer(&da_i, x);
        grads.w_hi.add_outer(&da_i, &prev.h);
        grads.w_xf.add_outer(&da_f, x);
        grads.w_hf.add_outer(&da_f, &prev.h);
        grads.w_xc.add_outer(&da_g, x);
        grads.w_hc.add_outer(&da_g, &prev.h);
        grads.w_xo.add_outer(&da_o, x);
        grads.w_ho.add_outer(&da_o, &prev.h);
        for k in 0..h {
            grads.w_ci[k] += da_i[k] * prev.c[k];
            grads.w_cf[k] += da_f[k] * prev.c[k];
            grads.w_co[k] += da_o[k] * st.c[k];
            grads.b_i[k] += da_i[k];
            grads.b_f[k] += da_f[k];
            grads.b_c[k] += da_g[k];
            grads.b_o[k] += da_o[k];
        }

        let mut dxt = p.w_xi.matvec_t(&da_i);
        add_assign(&mut dxt, &p.w_xf.matvec_t(&da_f));
        add_assign(&mut dxt, &p.w_xc.matvec_t(&da_g));
        add_assign(&mut dxt, &p.w_xo.matvec_t(&da_o));
        dx[t] = dxt;

        dh_rec = p.w_hi.matvec_t(&da_i);
        add_assign(&mut dh_rec, &p.w_hf.matvec_t(&da_f));
        add_assign(&mut dh_rec, &p.w_hc.matvec_t(&da_g));
        add_assign(&mut dh_rec, &p.w_ho.matvec_t(&da_o));

        for k in 0..h {
            dc_rec[k] = dc[k] * st.f[k] + da_i[k] * p.w_ci[k] + da_f[k] * p.w_cf[k];
        }
    }

    dx
}
