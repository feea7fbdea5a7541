//! Parameters, forward pass and backpropagation for both architectures.

use rand::Rng;

use super::{Architecture, EncoderConfig};
use crate::linalg::{axpy, sigmoid, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// `4H × (E + H)`, gate blocks ordered input, forget, cell, output.
    pub w: Matrix,
    /// `1 × 4H`
    pub b: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub embedding: Matrix,
    pub lstm: Option<[LstmParams; 2]>,
    pub proj_w: Matrix,
    pub proj_b: Matrix,
}

pub(crate) const BLOCK_NAMES_BOW: [&str; 3] = ["embedding", "proj.w", "proj.b"];
pub(crate) const BLOCK_NAMES_BILSTM: [&str; 7] = [
    "embedding",
    "lstm.fwd.w",
    "lstm.fwd.b",
    "lstm.bwd.w",
    "lstm.bwd.b",
    "proj.w",
    "proj.b",
];

impl Params {
    pub fn init<R: Rng>(config: &EncoderConfig, vocab: usize, rng: &mut R) -> Self {
        let e = config.token_dim;
        let h = config.hidden_dim;
        let p = config.pooled_dim();
        let o = config.output_dim;
        let mut uniform = |rows: usize, cols: usize, scale: f64| {
            let mut m = Matrix::zeros(rows, cols);
            m.data.iter_mut().for_each(|v| *v = rng.gen_range(-scale..scale));
            m
        };
        let embedding = uniform(vocab, e, 0.5);
        let lstm = match config.arch {
            Architecture::BiLstm => {
                let scale = 1.0 / (h as f64).sqrt();
                let mut make = || {
                    let w = uniform(4 * h, e + h, scale);
                    let mut b = Matrix::zeros(1, 4 * h);
                    b.data[h..2 * h].iter_mut().for_each(|v| *v = 1.0);
                    LstmParams { w, b }
                };
                Some([make(), make()])
            }
            Architecture::BagOfSubwords => None,
        };
        let proj_w = uniform(o, p, 1.0 / (p as f64).sqrt());
        let proj_b = Matrix::zeros(1, o);
        Params {
            embedding,
            lstm,
            proj_w,
            proj_b,
        }
    }

    pub fn zeros_like(&self) -> Self {
        let z = |m: &Matrix| Matrix::zeros(m.rows, m.cols);
        Params {
            embedding: z(&self.embedding),
            lstm: self.lstm.as_ref().map(|[f, b]| {
                [
                    LstmParams { w: z(&f.w), b: z(&f.b) },
                    LstmParams { w: z(&b.w), b: z(&b.b) },
                ]
            }),
            proj_w: z(&self.proj_w),
            proj_b: z(&self.proj_b),
        }
    }

    /// Named parameter blocks in file order.
    pub fn blocks(&self) -> Vec<(&'static str, &Matrix)> {
        match &self.lstm {
            None => BLOCK_NAMES_BOW
                .into_iter()
                .zip([&self.embedding, &self.proj_w, &self.proj_b])
                .collect(),
            Some([f, b]) => BLOCK_NAMES_BILSTM
                .into_iter()
                .zip([&self.embedding, &f.w, &f.b, &b.w, &b.b, &self.proj_w, &self.proj_b])
                .collect(),
        }
    }

    pub fn blocks_mut(&mut self) -> Vec<(&'static str, &mut Matrix)> {
        match &mut self.lstm {
            None => BLOCK_NAMES_BOW
                .into_iter()
                .zip([&mut self.embedding, &mut self.proj_w, &mut self.proj_b])
                .collect(),
            Some([f, b]) => BLOCK_NAMES_BILSTM
                .into_iter()
                .zip([
                    &mut self.embedding,
                    &mut f.w,
                    &mut f.b,
                    &mut b.w,
                    &mut b.b,
                    &mut self.proj_w,
                    &mut self.proj_b,
                ])
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|(_, m)| m.is_finite())
    }
}

/// Per-step values of one LSTM direction kept for backpropagation.
struct LstmTrace {
    /// `[x_t; h_{t-1}]`
    inputs: Vec<Vec<f64>>,
    /// Activated gates `[i; f; g; o]`.
    gates: Vec<Vec<f64>>,
    cells: Vec<Vec<f64>>,
    hidden_mean: Vec<f64>,
}

fn lstm_forward(p: &LstmParams, xs: &[&[f64]], hidden: usize, keep: bool) -> LstmTrace {
    let h = hidden;
    let mut hprev = vec![0.0; h];
    let mut cprev = vec![0.0; h];
    let mut trace = LstmTrace {
        inputs: Vec::new(),
        gates: Vec::new(),
        cells: Vec::new(),
        hidden_mean: vec![0.0; h],
    };
    let mut z = vec![0.0; 4 * h];
    for x in xs {
        let mut inp = Vec::with_capacity(x.len() + h);
        inp.extend_from_slice(x);
        inp.extend_from_slice(&hprev);
        p.w.matvec_into(&inp, &mut z);
        for (zi, bi) in z.iter_mut().zip(&p.b.data) {
            *zi += bi;
        }
        for j in 0..h {
            z[j] = sigmoid(z[j]);
            z[h + j] = sigmoid(z[h + j]);
            z[2 * h + j] = z[2 * h + j].tanh();
            z[3 * h + j] = sigmoid(z[3 * h + j]);
        }
        let mut c = vec![0.0; h];
        for j in 0..h {
            c[j] = z[h + j] * cprev[j] + z[j] * z[2 * h + j];
            hprev[j] = z[3 * h + j] * c[j].tanh();
        }
        axpy(1.0, &hprev, &mut trace.hidden_mean);
        if keep {
            trace.inputs.push(inp);
            trace.gates.push(z.clone());
            trace.cells.push(c.clone());
        }
        cprev = c;
    }
    let inv = 1.0 / xs.len() as f64;
    trace.hidden_mean.iter_mut().for_each(|v| *v *= inv);
    trace
}

/// Backpropagates a gradient that reaches every hidden state equally
/// (`dh_t = d_hidden_each` for all t). Returns `dL/dx_t` per step.
fn lstm_backward(
    p: &LstmParams,
    trace: &LstmTrace,
    d_hidden_each: &[f64],
    grad: &mut LstmParams,
    input_dim: usize,
) -> Vec<Vec<f64>> {
    let h = d_hidden_each.len();
    let steps = trace.inputs.len();
    let mut dxs = vec![Vec::new(); steps];
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut dz = vec![0.0; 4 * h];
    for t in (0..steps).rev() {
        let g = &trace.gates[t];
        let c = &trace.cells[t];
        for j in 0..h {
            let (i, f, gg, o) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
            let tc = c[j].tanh();
            let dh = d_hidden_each[j] + dh_next[j];
            let d_o = dh * tc;
            let dc = dh * o * (1.0 - tc * tc) + dc_next[j];
            let c_prev = if t > 0 { trace.cells[t - 1][j] } else { 0.0 };
            dz[j] = dc * gg * i * (1.0 - i);
            dz[h + j] = dc * c_prev * f * (1.0 - f);
            dz[2 * h + j] = dc * i * (1.0 - gg * gg);
            dz[3 * h + j] = d_o * o * (1.0 - o);
            dc_next[j] = dc * f;
        }
        grad.w.add_outer(&dz, &trace.inputs[t]);
        axpy(1.0, &dz, &mut grad.b.data);
        let mut dinp = vec![0.0; input_dim + h];
        p.w.matvec_t_acc(&dz, &mut dinp);
        dh_next.copy_from_slice(&dinp[input_dim..]);
        dinp.truncate(input_dim);
        dxs[t] = dinp;
    }
    dxs
}

/// Cached forward pass for one token sequence.
pub struct Forward {
    pub output: Vec<f64>,
    pooled: Vec<f64>,
    traces: Option<[LstmTrace; 2]>,
}

pub fn forward(params: &Params, config: &EncoderConfig, ids: &[u32], keep: bool) -> Forward {
    assert!(!ids.is_empty(), "forward needs at least one token");
    let xs: Vec<&[f64]> = ids.iter().map(|&t| params.embedding.row(t as usize)).collect();
    let (pooled, traces) = match &params.lstm {
        None => {
            let mut pooled = vec![0.0; config.token_dim];
            for x in &xs {
                axpy(1.0, x, &mut pooled);
            }
            let inv = 1.0 / xs.len() as f64;
            pooled.iter_mut().for_each(|v| *v *= inv);
            (pooled, None)
        }
        Some([fwd, bwd]) => {
            let tf = lstm_forward(fwd, &xs, config.hidden_dim, keep);
            let rev: Vec<&[f64]> = xs.iter().rev().copied().collect();
            let tb = lstm_forward(bwd, &rev, config.hidden_dim, keep);
            let mut pooled = tf.hidden_mean.clone();
            pooled.extend_from_slice(&tb.hidden_mean);
            (pooled, keep.then_some([tf, tb]))
        }
    };
    let mut output = params.proj_b.data.clone();
    for (r, o) in output.iter_mut().enumerate() {
        *o += crate::linalg::dot(params.proj_w.row(r), &pooled);
    }
    Forward { output, pooled, traces }
}

/// Accumulates `∂L/∂θ` into `grad` given `d_output = ∂L/∂output`.
pub fn backward(
    params: &Params,
    config: &EncoderConfig,
    ids: &[u32],
    fwd: &Forward,
    d_output: &[f64],
    grad: &mut Params,
) {
    grad.proj_w.add_outer(d_output, &fwd.pooled);
    axpy(1.0, d_output, &mut grad.proj_b.data);
    let mut d_pooled = vec![0.0; fwd.pooled.len()];
    params.proj_w.matvec_t_acc(d_output, &mut d_pooled);
    let inv = 1.0 / ids.len() as f64;
    match (&params.lstm, &mut grad.lstm) {
        (None, _) => {
            for &t in ids {
                axpy(inv, &d_pooled, grad.embedding.row_mut(t as usize));
            }
        }
        (Some([pf, pb]), Some([gf, gb])) => {
            let traces = fwd.traces.as_ref().expect("forward pass kept its trace");
            let h = config.hidden_dim;
            let e = config.token_dim;
            let dh_f: Vec<f64> = d_pooled[..h].iter().map(|v| v * inv).collect();
            let dh_b: Vec<f64> = d_pooled[h..].iter().map(|v| v * inv).collect();
            let dx_f = lstm_backward(pf, &traces[0], &dh_f, gf, e);
            let dx_b = lstm_backward(pb, &traces[1], &dh_b, gb, e);
            let n = ids.len();
            for (t, &tok) in ids.iter().enumerate() {
                let row = grad.embedding.row_mut(tok as usize);
                axpy(1.0, &dx_f[t], row);
                axpy(1.0, &dx_b[n - 1 - t], row);
            }
        }
        (Some(_), None) => unreachable!("gradient buffer shape matches parameters"),
    }
}
