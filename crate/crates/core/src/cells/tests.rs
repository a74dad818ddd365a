use super::*;
use crate::linalg::{dot, Matrix};
use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent naive re-implementation used as a duplicate oracle.
/// Plain nested loops over `Vec<Vec<f64>>`, mirroring the defining
/// equations term by term so results are bit-identical in f64.
mod naive {
    pub fn rows(m: &crate::linalg::Matrix) -> Vec<Vec<f64>> {
        (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
    }

    fn dot(row: &[f64], v: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (j, x) in v.iter().enumerate() {
            acc += row[j] * x;
        }
        acc
    }

    fn sigmoid(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    pub struct LstmWeights {
        pub w_xi: Vec<Vec<f64>>,
        pub w_hi: Vec<Vec<f64>>,
        pub w_ci: Vec<f64>,
        pub b_i: Vec<f64>,
        pub w_xf: Vec<Vec<f64>>,
        pub w_hf: Vec<Vec<f64>>,
        pub w_cf: Vec<f64>,
        pub b_f: Vec<f64>,
        pub w_xc: Vec<Vec<f64>>,
        pub w_hc: Vec<Vec<f64>>,
        pub b_c: Vec<f64>,
        pub w_xo: Vec<Vec<f64>>,
        pub w_ho: Vec<Vec<f64>>,
        pub w_co: Vec<f64>,
        pub b_o: Vec<f64>,
    }

    pub fn lstm_step(
        w: &LstmWeights,
        x: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
    ) -> (Vec<f64>, Vec<f64>) {
        let h = h_prev.len();
        let mut c = vec![0.0; h];
        let mut h_out = vec![0.0; h];
        let mut i_gate = vec![0.0; h];
        let mut f_gate = vec![0.0; h];
        let mut g_cand = vec![0.0; h];
        for k in 0..h {
            i_gate[k] =
                sigmoid(dot(&w.w_xi[k], x) + dot(&w.w_hi[k], h_prev) + w.w_ci[k] * c_prev[k] + w.b_i[k]);
            f_gate[k] =
                sigmoid(dot(&w.w_xf[k], x) + dot(&w.w_hf[k], h_prev) + w.w_cf[k] * c_prev[k] + w.b_f[k]);
            g_cand[k] = (dot(&w.w_xc[k], x) + dot(&w.w_hc[k], h_prev) + w.b_c[k]).tanh();
        }
        for k in 0..h {
            c[k] = f_gate[k] * c_prev[k] + i_gate[k] * g_cand[k];
        }
        for k in 0..h {
            let o = sigmoid(dot(&w.w_xo[k], x) + dot(&w.w_ho[k], h_prev) + w.w_co[k] * c[k] + w.b_o[k]);
            h_out[k] = o * c[k].tanh();
        }
        (h_out, c)
    }

    pub struct GruWeights {
        pub w_z: Vec<Vec<f64>>,
        pub u_z: Vec<Vec<f64>>,
        pub b_z: Vec<f64>,
        pub w_r: Vec<Vec<f64>>,
        pub u_r: Vec<Vec<f64>>,
        pub b_r: Vec<f64>,
        pub w_h: Vec<Vec<f64>>,
        pub u_h: Vec<Vec<f64>>,
        pub b_h: Vec<f64>,
    }

    pub fn gru_step(w: &GruWeights, x: &[f64], h_prev: &[f64]) -> Vec<f64> {
        let h = h_prev.len();
        let mut z = vec![0.0; h];
        let mut r = vec![0.0; h];
        for k in 0..h {
            z[k] = sigmoid(dot(&w.w_z[k], x) + dot(&w.u_z[k], h_prev) + w.b_z[k]);
            r[k] = sigmoid(dot(&w.w_r[k], x) + dot(&w.u_r[k], h_prev) + w.b_r[k]);
        }
        let gated: Vec<f64> = (0..h).map(|k| r[k] * h_prev[k]).collect();
        let mut h_out = vec![0.0; h];
        for k in 0..h {
            let cand = (dot(&w.w_h[k], x) + dot(&w.u_h[k], &gated) + w.b_h[k]).tanh();
            h_out[k] = (1.0 - z[k]) * h_prev[k] + z[k] * cand;
        }
        h_out
    }
}

fn randomize_all_blocks(p: &mut CellParams, scale: f64, rng: &mut ChaCha8Rng) {
    for (_, block) in p.blocks_mut() {
        for v in block {
            *v = rng.random_range(-scale..scale);
        }
    }
}

fn random_seq(t_len: usize, n: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(t_len, n, |_, _| rng.random_range(-1.0..1.0))
}

fn naive_lstm_weights(p: &LstmParams) -> naive::LstmWeights {
    naive::LstmWeights {
        w_xi: naive::rows(&p.w_xi),
        w_hi: naive::rows(&p.w_hi),
        w_ci: p.w_ci.clone(),
        b_i: p.b_i.clone(),
        w_xf: naive::rows(&p.w_xf),
        w_hf: naive::rows(&p.w_hf),
        w_cf: p.w_cf.clone(),
        b_f: p.b_f.clone(),
        w_xc: naive::rows(&p.w_xc),
        w_hc: naive::rows(&p.w_hc),
        b_c: p.b_c.clone(),
        w_xo: naive::rows(&p.w_xo),
        w_ho: naive::rows(&p.w_ho),
        w_co: p.w_co.clone(),
        b_o: p.b_o.clone(),
    }
}

fn naive_gru_weights(p: &GruParams) -> naive::GruWeights {
    naive::GruWeights {
        w_z: naive::rows(&p.w_z),
        u_z: naive::rows(&p.u_z),
        b_z: p.b_z.clone(),
        w_r: naive::rows(&p.w_r),
        u_r: naive::rows(&p.u_r),
        b_r: p.b_r.clone(),
        w_h: naive::rows(&p.w_h),
        u_h: naive::rows(&p.u_h),
        b_h: p.b_h.clone(),
    }
}

#[test]
fn lstm_step_zero_params_fixed_point() {
    let p = LstmParams::zeros(2, 3);
    let prev = LstmState::zero(3);
    let st = lstm_step(&p, &[0.7, -0.3], &prev);
    for k in 0..3 {
        assert_eq!(st.i[k], 0.5);
        assert_eq!(st.f[k], 0.5);
        assert_eq!(st.o[k], 0.5);
        assert_eq!(st.c[k], 0.0);
        assert_eq!(st.h[k], 0.0);
    }
}

#[test]
fn lstm_step_scalar_hand_case() {
    // Gates saturated open via biases; candidate path carries tanh(0.5),
    // so c ≈ tanh(0.5) = 0.46212 and h ≈ tanh(tanh(0.5)) = 0.43181.
    let mut p = LstmParams::zeros(1, 1);
    p.b_i[0] = 50.0;
    p.b_f[0] = 50.0;
    p.b_o[0] = 50.0;
    p.w_xc.set(0, 0, 1.0);
    let st = lstm_step(&p, &[0.5], &LstmState::zero(1));
    assert!((st.c[0] - 0.46212).abs() < 1e-4, "c = {}", st.c[0]);
    assert!((st.h[0] - 0.43181).abs() < 1e-4, "h = {}", st.h[0]);
}

#[test]
fn lstm_step_matches_naive_duplicate_bit_for_bit() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut p = CellParams::zeros(CellKind::Lstm, 4, 3);
    randomize_all_blocks(&mut p, 0.6, &mut rng);
    let CellParams::Lstm(p) = p else { unreachable!() };

    let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut prev = LstmState::zero(3);
    prev.h = (0..3).map(|_| rng.random_range(-0.9..0.9)).collect();
    prev.c = (0..3).map(|_| rng.random_range(-0.9..0.9)).collect();

    let st = lstm_step(&p, &x, &prev);
    let (h_naive, c_naive) = naive::lstm_step(&naive_lstm_weights(&p), &x, &prev.h, &prev.c);
    assert_eq!(st.h, h_naive);
    assert_eq!(st.c, c_naive);
}

#[test]
fn gru_step_closed_update_gate_copies_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut p = CellParams::zeros(CellKind::Gru, 2, 3);
    randomize_all_blocks(&mut p, 0.5, &mut rng);
    let CellParams::Gru(mut p) = p else { unreachable!() };
    p.b_z.fill(-50.0);

    let mut prev = GruState::zero(3);
    prev.h = vec![0.3, -0.6, 0.9];
    let st = gru_step(&p, &[1.0, -1.0], &prev);
    for k in 0..3 {
        assert!((st.h[k] - prev.h[k]).abs() < 1e-12);
    }
}

#[test]
fn gru_step_open_update_gate_is_candidate() {
    let mut p = GruParams::zeros(2, 3);
    p.b_z.fill(50.0);
    p.w_h.set(0, 0, 0.8);
    p.w_h.set(1, 1, -0.4);
    p.b_h = vec![0.1, 0.2, -0.3];
    let x = [0.5, 1.5];
    let mut prev = GruState::zero(3);
    prev.h = vec![0.2, 0.4, -0.8];
    let st = gru_step(&p, &x, &prev);
    let expect = [
        (0.8 * 0.5 + 0.1_f64).tanh(),
        (-0.4 * 1.5 + 0.2_f64).tanh(),
        (-0.3_f64).tanh(),
    ];
    for k in 0..3 {
        assert!((st.h[k] - expect[k]).abs() < 1e-12, "unit {k}");
    }
}

#[test]
fn gru_step_matches_naive_duplicate_bit_for_bit() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut p = CellParams::zeros(CellKind::Gru, 4, 3);
    randomize_all_blocks(&mut p, 0.6, &mut rng);
    let CellParams::Gru(p) = p else { unreachable!() };

    let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut prev = GruState::zero(3);
    prev.h = (0..3).map(|_| rng.random_range(-0.9..0.9)).collect();

    let st = gru_step(&p, &x, &prev);
    let h_naive = naive::gru_step(&naive_gru_weights(&p), &x, &prev.h);
    assert_eq!(st.h, h_naive);
}

fn random_pair(kind: CellKind, n: usize, h: usize, seed: u64) -> (CellParams, CellParams) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fwd = CellParams::zeros(kind, n, h);
    let mut bwd = CellParams::zeros(kind, n, h);
    randomize_all_blocks(&mut fwd, 0.5, &mut rng);
    randomize_all_blocks(&mut bwd, 0.5, &mut rng);
    (fwd, bwd)
}

#[test]
fn encoder_reversal_symmetry() {
    for kind in [CellKind::Lstm, CellKind::Gru] {
        let (fwd, bwd) = random_pair(kind, 3, 4, 21);
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let seq = random_seq(6, 3, &mut rng);
        let rev = Matrix::from_fn(6, 3, |r, c| seq.get(5 - r, c));

        let out = encode_bidirectional(&fwd, &bwd, &seq);
        // Swapped directions on the reversed input: features come out
        // time-reversed with halves swapped.
        let out_rev = encode_bidirectional(&bwd, &fwd, &rev);
        for t in 0..6 {
            let f = &out.features[t];
            let g = &out_rev.features[5 - t];
            assert_eq!(&f[..4], &g[4..]);
            assert_eq!(&f[4..], &g[..4]);
        }
    }
}

#[test]
fn encoder_single_step_sees_same_frame() {
    let (fwd, bwd) = random_pair(CellKind::Lstm, 3, 4, 31);
    let seq = Matrix::from_rows(&[vec![0.4, -0.2, 0.9]]);
    let out = encode_bidirectional(&fwd, &bwd, &seq);
    assert_eq!(out.len(), 1);
    // Both directions consumed exactly the single frame from zero state.
    let fwd_only = encode_bidirectional(&fwd, &fwd, &seq);
    assert_eq!(&out.features[0][..4], &fwd_only.features[0][..4]);
}

#[test]
fn encoder_matches_naive_duplicate_bit_for_bit() {
    let (fwd, bwd) = random_pair(CellKind::Lstm, 3, 3, 41);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let seq = random_seq(5, 3, &mut rng);
    let out = encode_bidirectional(&fwd, &bwd, &seq);

    let (CellParams::Lstm(fp), CellParams::Lstm(bp)) = (&fwd, &bwd) else {
        unreachable!()
    };
    let fw = naive_lstm_weights(fp);
    let bw = naive_lstm_weights(bp);

    let mut h_f = vec![0.0; 3];
    let mut c_f = vec![0.0; 3];
    let mut fwd_h = Vec::new();
    for t in 0..5 {
        let (h, c) = naive::lstm_step(&fw, seq.row(t), &h_f, &c_f);
        h_f = h;
        c_f = c;
        fwd_h.push(h_f.clone());
    }
    let mut h_b = vec![0.0; 3];
    let mut c_b = vec![0.0; 3];
    let mut bwd_h_proc = Vec::new();
    for t in (0..5).rev() {
        let (h, c) = naive::lstm_step(&bw, seq.row(t), &h_b, &c_b);
        h_b = h;
        c_b = c;
        bwd_h_proc.push(h_b.clone());
    }
    for t in 0..5 {
        let mut expect = fwd_h[t].clone();
        expect.extend_from_slice(&bwd_h_proc[4 - t]);
        assert_eq!(out.features[t], expect, "timestep {t}");
    }
}

#[test]
fn encoder_is_deterministic() {
    let (fwd, bwd) = random_pair(CellKind::Gru, 3, 4, 51);
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    let seq = random_seq(7, 3, &mut rng);
    let a = encode_bidirectional(&fwd, &bwd, &seq);
    let b = encode_bidirectional(&fwd, &bwd, &seq);
    assert_eq!(a.features, b.features);
}

#[test]
#[should_panic(expected = "dimensions must be positive")]
fn empty_sequence_is_unrepresentable() {
    Matrix::zeros(0, 3);
}

#[test]
#[should_panic(expected = "channel count")]
fn encoder_rejects_channel_mismatch() {
    let (fwd, bwd) = random_pair(CellKind::Gru, 3, 4, 61);
    let seq = Matrix::zeros(5, 4);
    encode_bidirectional(&fwd, &bwd, &seq);
}

#[test]
fn bptt_zero_upstream_gives_zero_grads() {
    for kind in [CellKind::Lstm, CellKind::Gru] {
        let (fwd, bwd) = random_pair(kind, 3, 4, 71);
        let mut rng = ChaCha8Rng::seed_from_u64(72);
        let seq = random_seq(5, 3, &mut rng);
        let cache = encode_bidirectional(&fwd, &bwd, &seq);
        let grad_f = vec![vec![0.0; 8]; 5];
        let grads = backward_bptt(&fwd, &bwd, &cache, &grad_f);
        for (_, block) in grads.fwd.blocks().iter().chain(grads.bwd.blocks().iter()) {
            assert!(block.iter().all(|&g| g == 0.0));
        }
        assert!(grads.inputs.iter().flatten().all(|&g| g == 0.0));
    }
}

#[test]
fn bptt_is_linear_in_upstream_gradient() {
    let (fwd, bwd) = random_pair(CellKind::Lstm, 3, 4, 81);
    let mut rng = ChaCha8Rng::seed_from_u64(82);
    let seq = random_seq(6, 3, &mut rng);
    let cache = encode_bidirectional(&fwd, &bwd, &seq);
    let grad_f: Vec<Vec<f64>> = (0..6)
        .map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let doubled: Vec<Vec<f64>> = grad_f
        .iter()
        .map(|g| g.iter().map(|x| 2.0 * x).collect())
        .collect();

    let g1 = backward_bptt(&fwd, &bwd, &cache, &grad_f);
    let g2 = backward_bptt(&fwd, &bwd, &cache, &doubled);
    for ((_, a), (_, b)) in g1.fwd.blocks().iter().zip(g2.fwd.blocks().iter()) {
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((2.0 * x - y).abs() <= 1e-12 * (1.0 + y.abs()));
        }
    }
}

/// Scalar probe objective for finite differencing: a fixed random linear
/// functional of the encoder features.
fn probe_objective(fwd: &CellParams, bwd: &CellParams, seq: &Matrix, probe: &[Vec<f64>]) -> f64 {
    let out = encode_bidirectional(fwd, bwd, seq);
    out.features
        .iter()
        .zip(probe)
        .map(|(f, w)| dot(f, w))
        .sum()
}

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-5)
}

fn check_bptt_against_fd(kind: CellKind, seed: u64) {
    const STEP: f64 = 1e-5;
    let (n, h, t_len) = (3, 4, 7);
    let (fwd, bwd) = random_pair(kind, n, h, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xf00d);
    let seq = random_seq(t_len, n, &mut rng);
    let probe: Vec<Vec<f64>> = (0..t_len)
        .map(|_| (0..2 * h).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();

    let cache = encode_bidirectional(&fwd, &bwd, &seq);
    let analytic = backward_bptt(&fwd, &bwd, &cache, &probe);

    let mut worst = 0.0f64;
    for dir in 0..2 {
        let analytic_dir = if dir == 0 { &analytic.fwd } else { &analytic.bwd };
        let n_blocks = analytic_dir.blocks().len();
        for b in 0..n_blocks {
            let block_len = analytic_dir.blocks()[b].1.len();
            for i in 0..block_len {
                let mut plus = (fwd.clone(), bwd.clone());
                let mut minus = (fwd.clone(), bwd.clone());
                {
                    let target = if dir == 0 { &mut plus.0 } else { &mut plus.1 };
                    target.blocks_mut()[b].1[i] += STEP;
                }
                {
                    let target = if dir == 0 { &mut minus.0 } else { &mut minus.1 };
                    target.blocks_mut()[b].1[i] -= STEP;
                }
                let fd = (probe_objective(&plus.0, &plus.1, &seq, &probe)
                    - probe_objective(&minus.0, &minus.1, &seq, &probe))
                    / (2.0 * STEP);
                let a = analytic_dir.blocks()[b].1[i];
                worst = worst.max(rel_err(a, fd));
            }
        }
    }

    // Input gradients through the same probe.
    for t in 0..t_len {
        for c in 0..n {
            let mut plus = seq.clone();
            plus.set(t, c, plus.get(t, c) + STEP);
            let mut minus = seq.clone();
            minus.set(t, c, minus.get(t, c) - STEP);
            let fd = (probe_objective(&fwd, &bwd, &plus, &probe)
                - probe_objective(&fwd, &bwd, &minus, &probe))
                / (2.0 * STEP);
            worst = worst.max(rel_err(analytic.inputs[t][c], fd));
        }
    }

    assert!(worst <= 1e-4, "{kind:?} seed {seed}: max rel err {worst:.3e}");
}

#[test]
fn lstm_bptt_matches_finite_differences() {
    for seed in 0..10 {
        check_bptt_against_fd(CellKind::Lstm, 900 + seed);
    }
}

#[test]
fn gru_bptt_matches_finite_differences() {
    for seed in 0..10 {
        check_bptt_against_fd(CellKind::Gru, 700 + seed);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn lstm_gates_open_unit_interval_and_h_bounded(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = CellParams::zeros(CellKind::Lstm, 3, 4);
        randomize_all_blocks(&mut p, 1.0, &mut rng);
        let CellParams::Lstm(p) = p else { unreachable!() };
        let mut st = LstmState::zero(4);
        for _ in 0..6 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            st = lstm_step(&p, &x, &st);
            for k in 0..4 {
                prop_assert!(st.i[k] > 0.0 && st.i[k] < 1.0);
                prop_assert!(st.f[k] > 0.0 && st.f[k] < 1.0);
                prop_assert!(st.o[k] > 0.0 && st.o[k] < 1.0);
                prop_assert!(st.h[k] > -1.0 && st.h[k] < 1.0);
            }
        }
    }

    #[test]
    fn gru_hidden_stays_in_open_unit_ball(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = CellParams::zeros(CellKind::Gru, 3, 4);
        randomize_all_blocks(&mut p, 1.0, &mut rng);
        let CellParams::Gru(p) = p else { unreachable!() };
        let mut st = GruState::zero(4);
        st.h = (0..4).map(|_| rng.random_range(-0.99..0.99)).collect();
        for _ in 0..6 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            st = gru_step(&p, &x, &st);
            for k in 0..4 {
                prop_assert!(st.h[k] > -1.0 && st.h[k] < 1.0);
            }
        }
    }
}
