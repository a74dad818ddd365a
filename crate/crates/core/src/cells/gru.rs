//! Gated recurrent unit.
//!
//! ```text
//! z_t = σ(W_z x_t + U_z h_{t-1} + b_z)
//! r_t = σ(W_r x_t + U_r h_{t-1} + b_r)
//! h̃_t = tanh(W_h x_t + U_h (r_t ⊙ h_{t-1}) + b_h)
//! h_t = (1 - z_t) ⊙ h_{t-1} + z_t ⊙ h̃_t
//! ```
//!
//! The new activation is a linear interpolation between the previous
//! activation and the candidate, steered by the update gate.

use rand::Rng;

use crate::linalg::{add_assign, sigmoid, Matrix};

/// All trainable weights and biases of one directional GRU cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w_z: Matrix,
    pub u_z: Matrix,
    pub b_z: Vec<f64>,
    pub w_r: Matrix,
    pub u_r: Matrix,
    pub b_r: Vec<f64>,
    pub w_h: Matrix,
    pub u_h: Matrix,
    pub b_h: Vec<f64>,
}

impl GruParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let h = hidden_dim;
        GruParams {
            input_dim,
            hidden_dim,
            w_z: Matrix::zeros(h, input_dim),
            u_z: Matrix::zeros(h, h),
            b_z: vec![0.0; h],
            w_r: Matrix::zeros(h, input_dim),
            u_r: Matrix::zeros(h, h),
            b_r: vec![0.0; h],
            w_h: Matrix::zeros(h, input_dim),
            u_h: Matrix::zeros(h, h),
            b_h: vec![0.0; h],
        }
    }

    /// Dense matrices uniform on ±1/√H, biases zero.
    pub fn init<R: Rng>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden_dim as f64).sqrt();
        let mut p = GruParams::zeros(input_dim, hidden_dim);
        for m in [
            &mut p.w_z, &mut p.u_z, &mut p.w_r, &mut p.u_r, &mut p.w_h, &mut p.u_h,
        ] {
            for v in m.as_mut_slice() {
                *v = rng.random_range(-bound..bound);
            }
        }
        p
    }

    pub fn blocks(&self) -> Vec<(&'static str, &[f64])> {
        vec![
            ("w_z", self.w_z.as_slice()),
            ("u_z", self.u_z.as_slice()),
            ("b_z", &self.b_z),
            ("w_r", self.w_r.as_slice()),
            ("u_r", self.u_r.as_slice()),
            ("b_r", &self.b_r),
            ("w_h", self.w_h.as_slice()),
            ("u_h", self.u_h.as_slice()),
            ("b_h", &self.b_h),
        ]
    }

    pub fn blocks_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        vec![
            ("w_z", self.w_z.as_mut_slice()),
            ("u_z", self.u_z.as_mut_slice()),
            ("b_z", &mut self.b_z),
            ("w_r", self.w_r.as_mut_slice()),
            ("u_r", self.u_r.as_mut_slice()),
            ("b_r", &mut self.b_r),
            ("w_h", self.w_h.as_mut_slice()),
            ("u_h", self.u_h.as_mut_slice()),
            ("b_h", &mut self.b_h),
        ]
    }
}

/// Hidden activation plus the gate values cached for BPTT.
#[derive(Debug, Clone)]
pub struct GruState {
    pub h: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub h_tilde: Vec<f64>,
}

impl GruState {
    pub fn zero(hidden_dim: usize) -> Self {
        GruState {
            h: vec![0.0; hidden_dim],
            z: vec![0.0; hidden_dim],
            r: vec![0.0; hidden_dim],
            h_tilde: vec![0.0; hidden_dim],
        }
    }
}

/// One forward step of the GRU.
pub fn gru_step(p: &GruParams, x: &[f64], prev: &GruState) -> GruState {
    assert_eq!(x.len(), p.input_dim, "input dim mismatch");
    assert_eq!(prev.h.len(), p.hidden_dim, "state dim mismatch");
    let h = p.hidden_dim;

    let mut a_z = p.w_z.matvec(x);
    add_assign(&mut a_z, &p.u_z.matvec(&prev.h));
    add_assign(&mut a_z, &p.b_z);
    let z: Vec<f64> = a_z.iter().map(|&v| sigmoid(v)).collect();

    let mut a_r = p.w_r.matvec(x);
    add_assign(&mut a_r, &p.u_r.matvec(&prev.h));
    add_assign(&mut a_r, &p.b_r);
    let r: Vec<f64> = a_r.iter().map(|&v| sigmoid(v)).collect();

    let gated: Vec<f64> = (0..h).map(|k| r[k] * prev.h[k]).collect();
    let mut a_h = p.w_h.matvec(x);
    add_assign(&mut a_h, &p.u_h.matvec(&gated));
    add_assign(&mut a_h, &p.b_h);
    let h_tilde: Vec<f64> = a_h.iter().map(|&v| v.tanh()).collect();

    let mut h_out = vec![0.0; h];
    for k in 0..h {
        h_out[k] = (1.0 - z[k]) * prev.h[k] + z[k] * h_tilde[k];
    }

    GruState { h: h_out, z, r, h_tilde }
}

/// BPTT through one directional GRU run; same conventions as
/// `lstm_backward`.
pub(super) fn gru_backward(
    p: &GruParams,
    inputs: &[Vec<f64>],
    states: &[GruState],
    grad_h: &[Vec<f64>],
    grads: &mut GruParams,
) -> Vec<Vec<f64>> {
    let t_len = states.len();
    assert_eq!(inputs.len(), t_len, "input/state length mismatch");
    assert_eq!(grad_h.len(), t_len, "gradient/state length mismatch");
    let h = p.hidden_dim;
    let zero_state = GruState::zero(h);

    let mut dx = vec![vec![0.0; p.input_dim]; t_len];
    let mut dh_rec = vec![0.0; h];

    for t in (0..t_len).rev() {
        let st = &states[t];
        let prev = if t == 0 { &zero_state } else { &states[t - 1] };
        let x = &inputs[t];

        let mut dh = grad_h[t].clone();
        add_assign(&mut dh, &dh_rec);

        let mut da_z = vec![0.0; h];
        let mut da_h = vec![0.0; h];
        for k in 0..h {
            let d_z = dh[k] * (st.h_tilde[k] - prev.h[k]);
            da_z[k] = d_z * st.z[k] * (1.0 - st.z[k]);
            let d_ht = dh[k] * st.z[k];
            da_h[k] = d_ht * (1.0 - st.h_tilde[k] * st.h_tilde[k]);
        }

        // Gradient into the reset-gated hidden product r ⊙ h_{t-1}.
        let dm = p.u_h.matvec_t(&da_h);
        let mut da_r = vec![0.0; h];
        for k in 0..h {
            let d_r = dm[k] * prev.h[k];
            da_r[k] = d_r * st.r[k] * (1.0 - st.r[k]);
        }

        let gated: Vec<f64> = (0..h).map(|k| st.r[k] * prev.h[k]).collect();
        grads.w_z.add_outer(&da_z, x);
        grads.u_z.add_outer(&da_z, &prev.h);
        grads.w_r.add_outer(&da_r, x);
        grads.u_r.add_outer(&da_r, &prev.h);
        grads.w_h.add_outer(&da_h, x);
        grads.u_h.add_outer(&da_h, &gated);
        for k in 0..h {
            grads.b_z[k] += da_z[k];
            grads.b_r[k] += da_r[k];
            grads.b_h[k] += da_h[k];
        }

        let mut dxt = p.w_z.matvec_t(&da_z);
        add_assign(&mut dxt, &p.w_r.matvec_t(&da_r));
        add_assign(&mut dxt, &p.w_h.matvec_t(&da_h));
        dx[t] = dxt;

        dh_rec = p.u_z.matvec_t(&da_z);
        add_assign(&mut dh_rec, &p.u_r.matvec_t(&da_r));
        for k in 0..h {
            dh_rec[k] += dh[k] * (1.0 - st.z[k]) + dm[k] * st.r[k];
        }
    }

    dx
}
