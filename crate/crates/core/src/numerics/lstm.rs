use rand::Rng;
use serde::{Deserialize, Serialize};

use super::activation::sigmoid;
use super::matrix::DenseMatrix;
use super::mlp::INIT_SCALE;
use super::params::ParamSet;
use crate::error::{shape_err, Result};

/// Default hidden size of each LSTM direction.
pub const DEFAULT_HIDDEN_DIM: usize = 32;

/// How the cell state is carried between steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum CellUpdate {
    /// `c_t = f_t ⊙ c_{t−1} + i_t ⊙ g_t`
    #[default]
    Standard,
    /// `c_t = f_t ⊙ x_t + i_t ⊙ g_t`; requires `input_dim == hidden_dim`.
    Literal,
}

/// Peephole LSTM weights for one direction. Peephole terms `w_c*` are diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmWeights {
    pub w_xi: DenseMatrix,
    pub w_hi: DenseMatrix,
    pub w_ci: Vec<f64>,
    pub b_i: Vec<f64>,
    pub w_xf: DenseMatrix,
    pub w_hf: DenseMatrix,
    pub w_cf: Vec<f64>,
    pub b_f: Vec<f64>,
    pub w_xc: DenseMatrix,
    pub w_hc: DenseMatrix,
    pub b_c: Vec<f64>,
    pub w_xo: DenseMatrix,
    pub w_ho: DenseMatrix,
    pub w_co: Vec<f64>,
    pub b_o: Vec<f64>,
}

impl LstmWeights {
    fn build(
        input_dim: usize,
        hidden: usize,
        mut mat: impl FnMut(usize, usize) -> DenseMatrix,
    ) -> Self {
        let mut vec = |n: usize| mat(1, n).as_slice().to_vec();
        let w_ci = vec(hidden);
        let b_i = vec(hidden);
        let w_cf = vec(hidden);
        let b_f = vec(hidden);
        let b_c = vec(hidden);
        let w_co = vec(hidden);
        let b_o = vec(hidden);
        Self {
            w_xi: mat(hidden, input_dim),
            w_hi: mat(hidden, hidden),
            w_ci,
            b_i,
            w_xf: mat(hidden, input_dim),
            w_hf: mat(hidden, hidden),
            w_cf,
            b_f,
            w_xc: mat(hidden, input_dim),
            w_hc: mat(hidden, hidden),
            b_c,
            w_xo: mat(hidden, input_dim),
            w_ho: mat(hidden, hidden),
            w_co,
            b_o,
        }
    }

    fn hidden_dim(&self) -> usize {
        self.b_i.len()
    }

    fn slices(&self) -> Vec<&[f64]> {
        vec![
            self.w_xi.as_slice(),
            self.w_hi.as_slice(),
            &self.w_ci,
            &self.b_i,
            self.w_xf.as_slice(),
            self.w_hf.as_slice(),
            &self.w_cf,
            &self.b_f,
            self.w_xc.as_slice(),
            self.w_hc.as_slice(),
            &self.b_c,
            self.w_xo.as_slice(),
            self.w_ho.as_slice(),
            &self.w_co,
            &self.b_o,
        ]
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w_xi.as_mut_slice(),
            self.w_hi.as_mut_slice(),
            &mut self.w_ci,
            &mut self.b_i,
            self.w_xf.as_mut_slice(),
            self.w_hf.as_mut_slice(),
            &mut self.w_cf,
            &mut self.b_f,
            self.w_xc.as_mut_slice(),
            self.w_hc.as_mut_slice(),
            &mut self.b_c,
            self.w_xo.as_mut_slice(),
            self.w_ho.as_mut_slice(),
            &mut self.w_co,
            &mut self.b_o,
        ]
    }
}

/// Bidirectional LSTM: one [`LstmWeights`] per direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiLstmParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub cell_update: CellUpdate,
    pub forward: LstmWeights,
    pub backward: LstmWeights,
}

impl BiLstmParams {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let mut init = |r, c| DenseMatrix::uniform(r, c, INIT_SCALE, rng);
        let forward = LstmWeights::build(input_dim, hidden_dim, &mut init);
        let backward = LstmWeights::build(input_dim, hidden_dim, &mut init);
        Self {
            input_dim,
            hidden_dim,
            cell_update: CellUpdate::Standard,
            forward,
            backward,
        }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            cell_update: CellUpdate::Standard,
            forward: LstmWeights::build(input_dim, hidden_dim, DenseMatrix::zeros),
            backward: LstmWeights::build(input_dim, hidden_dim, DenseMatrix::zeros),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = Self::zeros(self.input_dim, self.hidden_dim);
        z.cell_update = self.cell_update;
        z
    }

    pub fn output_dim(&self) -> usize {
        2 * self.hidden_dim
    }
}

impl ParamSet for BiLstmParams {
    fn param_slices(&self) -> Vec<&[f64]> {
        let mut out = self.forward.slices();
        out.extend(self.backward.slices());
        out
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.forward.slices_mut();
        out.extend(self.backward.slices_mut());
        out
    }
}

/// Activations of one step of one direction.
#[derive(Debug, Clone)]
pub struct StepState {
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub c: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

/// Recorded forward pass over a sequence. Backward-direction steps are stored
/// in processing order (last position first).
#[derive(Debug, Clone)]
pub struct BiLstmState {
    pub inputs: Vec<Vec<f64>>,
    pub forward: Vec<StepState>,
    pub backward: Vec<StepState>,
}

fn affine(w_x: &DenseMatrix, w_h: &DenseMatrix, b: &[f64], x: &[f64], h: &[f64]) -> Vec<f64> {
    let mut z = b.to_vec();
    w_x.matvec_acc(x, &mut z);
    w_h.matvec_acc(h, &mut z);
    z
}

fn run_direction<'a>(
    w: &LstmWeights,
    mode: CellUpdate,
    xs: impl Iterator<Item = &'a Vec<f64>>,
) -> Vec<StepState> {
    let hd = w.hidden_dim();
    let mut h_prev = vec![0.0; hd];
    let mut c_prev = vec![0.0; hd];
    let mut steps = Vec::new();
    for x in xs {
        let mut ai = affine(&w.w_xi, &w.w_hi, &w.b_i, x, &h_prev);
        let mut af = affine(&w.w_xf, &w.w_hf, &w.b_f, x, &h_prev);
        let ag = affine(&w.w_xc, &w.w_hc, &w.b_c, x, &h_prev);
        for k in 0..hd {
            ai[k] += w.w_ci[k] * c_prev[k];
            af[k] += w.w_cf[k] * c_prev[k];
        }
        let i: Vec<f64> = ai.iter().map(|&v| sigmoid(v)).collect();
        let f: Vec<f64> = af.iter().map(|&v| sigmoid(v)).collect();
        let g: Vec<f64> = ag.iter().map(|&v| v.tanh()).collect();
        let carried = match mode {
            CellUpdate::Standard => &c_prev,
            CellUpdate::Literal => x,
        };
        let c: Vec<f64> = (0..hd).map(|k| f[k] * carried[k] + i[k] * g[k]).collect();
        let mut ao = affine(&w.w_xo, &w.w_ho, &w.b_o, x, &h_prev);
        for k in 0..hd {
            ao[k] += w.w_co[k] * c[k];
        }
        let o: Vec<f64> = ao.iter().map(|&v| sigmoid(v)).collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let h: Vec<f64> = o.iter().zip(&tanh_c).map(|(a, b)| a * b).collect();
        steps.push(StepState {
            i,
            f,
            g,
            o,
            c: c.clone(),
            c_prev: std::mem::replace(&mut c_prev, c),
            h_prev: std::mem::replace(&mut h_prev, h.clone()),
            tanh_c,
            h,
        });
    }
    steps
}

fn check_sequence(params: &BiLstmParams, sequence: &[Vec<f64>]) -> Result<()> {
    if sequence.is_empty() {
        return shape_err("bilstm over an empty sequence");
    }
    if let Some(bad) = sequence.iter().find(|x| x.len() != params.input_dim) {
        return shape_err(format!(
            "bilstm input of length {}, expected {}",
            bad.len(),
            params.input_dim
        ));
    }
    if params.cell_update == CellUpdate::Literal && params.input_dim != params.hidden_dim {
        return shape_err("literal cell update needs input_dim == hidden_dim");
    }
    Ok(())
}

/// Runs both directions and returns `h_t = →h_t ⊕ ←h_t` per position.
pub fn bilstm_forward(
    params: &BiLstmParams,
    sequence: &[Vec<f64>],
) -> Result<(Vec<Vec<f64>>, BiLstmState)> {
    check_sequence(params, sequence)?;
    let forward = run_direction(&params.forward, params.cell_update, sequence.iter());
    let backward = run_direction(&params.backward, params.cell_update, sequence.iter().rev());
    let n = sequence.len();
    let outputs = (0..n)
        .map(|t| {
            let mut h = forward[t].h.clone();
            h.extend_from_slice(&backward[n - 1 - t].h);
            h
        })
        .collect();
    Ok((
        outputs,
        BiLstmState {
            inputs: sequence.to_vec(),
            forward,
            backward,
        },
    ))
}

/// Backpropagation through time for one direction. `dh` and `xs` are in
/// processing order; returns input gradients in processing order.
fn backprop_direction(
    w: &LstmWeights,
    mode: CellUpdate,
    steps: &[StepState],
    xs: &[&Vec<f64>],
    dh: &[&[f64]],
    grads: &mut LstmWeights,
) -> Vec<Vec<f64>> {
    let hd = w.hidden_dim();
    let n = steps.len();
    let mut dxs = vec![Vec::new(); n];
    let mut dh_next = vec![0.0; hd];
    let mut dc_next = vec![0.0; hd];
    for t in (0..n).rev() {
        let s = &steps[t];
        let x = xs[t];
        let dh_t: Vec<f64> = (0..hd).map(|k| dh[t][k] + dh_next[k]).collect();
        let mut da_o = vec![0.0; hd];
        let mut dc = vec![0.0; hd];
        for k in 0..hd {
            let d_o = dh_t[k] * s.tanh_c[k];
            da_o[k] = d_o * s.o[k] * (1.0 - s.o[k]);
            dc[k] = dc_next[k]
                + dh_t[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k])
                + da_o[k] * w.w_co[k];
        }
        let carried: &[f64] = match mode {
            CellUpdate::Standard => &s.c_prev,
            CellUpdate::Literal => x,
        };
        let mut da_i = vec![0.0; hd];
        let mut da_f = vec![0.0; hd];
        let mut da_g = vec![0.0; hd];
        for k in 0..hd {
            da_f[k] = dc[k] * carried[k] * s.f[k] * (1.0 - s.f[k]);
            da_i[k] = dc[k] * s.g[k] * s.i[k] * (1.0 - s.i[k]);
            da_g[k] = dc[k] * s.i[k] * (1.0 - s.g[k] * s.g[k]);
        }
        for k in 0..hd {
            grads.w_co[k] += da_o[k] * s.c[k];
            grads.w_ci[k] += da_i[k] * s.c_prev[k];
            grads.w_cf[k] += da_f[k] * s.c_prev[k];
            grads.b_i[k] += da_i[k];
            grads.b_f[k] += da_f[k];
            grads.b_c[k] += da_g[k];
            grads.b_o[k] += da_o[k];
        }
        grads.w_xi.add_outer(&da_i, x);
        grads.w_xf.add_outer(&da_f, x);
        grads.w_xc.add_outer(&da_g, x);
        grads.w_xo.add_outer(&da_o, x);
        grads.w_hi.add_outer(&da_i, &s.h_prev);
        grads.w_hf.add_outer(&da_f, &s.h_prev);
        grads.w_hc.add_outer(&da_g, &s.h_prev);
        grads.w_ho.add_outer(&da_o, &s.h_prev);

        let mut dx = vec![0.0; x.len()];
        w.w_xi.matvec_t_acc(&da_i, &mut dx);
        w.w_xf.matvec_t_acc(&da_f, &mut dx);
        w.w_xc.matvec_t_acc(&da_g, &mut dx);
        w.w_xo.matvec_t_acc(&da_o, &mut dx);

        let mut dh_prev = vec![0.0; hd];
        w.w_hi.matvec_t_acc(&da_i, &mut dh_prev);
        w.w_hf.matvec_t_acc(&da_f, &mut dh_prev);
        w.w_hc.matvec_t_acc(&da_g, &mut dh_prev);
        w.w_ho.matvec_t_acc(&da_o, &mut dh_prev);

        let mut dc_prev = vec![0.0; hd];
        for k in 0..hd {
            dc_prev[k] = da_i[k] * w.w_ci[k] + da_f[k] * w.w_cf[k];
            match mode {
                CellUpdate::Standard => dc_prev[k] += dc[k] * s.f[k],
                CellUpdate::Literal => dx[k] += dc[k] * s.f[k],
            }
        }
        dxs[t] = dx;
        dh_next = dh_prev;
        dc_next = dc_prev;
    }
    dxs
}

/// Backpropagates per-position gradients `dL/dh_t` (length `2·hidden_dim`).
///
/// Parameter gradients are accumulated into `grads`; input gradients are
/// returned per position in the original order.
pub fn bilstm_backward(
    params: &BiLstmParams,
    state: &BiLstmState,
    upstream: &[Vec<f64>],
    grads: &mut BiLstmParams,
) -> Result<Vec<Vec<f64>>> {
    let n = state.inputs.len();
    let hd = params.hidden_dim;
    if upstream.len() != n || upstream.iter().any(|u| u.len() != 2 * hd) {
        return shape_err("bilstm upstream gradients do not match the cached sequence");
    }
    if state.forward.len() != n || state.forward.first().is_some_and(|s| s.h.len() != hd) {
        return shape_err("bilstm state does not match parameters");
    }
    if grads.shape_signature() != params.shape_signature() {
        return shape_err("bilstm gradient buffer does not match parameters");
    }
    let fwd_x: Vec<&Vec<f64>> = state.inputs.iter().collect();
    let fwd_dh: Vec<&[f64]> = upstream.iter().map(|u| &u[..hd]).collect();
    let dx_fwd = backprop_direction(
        &params.forward,
        params.cell_update,
        &state.forward,
        &fwd_x,
        &fwd_dh,
        &mut grads.forward,
    );
    let bwd_x: Vec<&Vec<f64>> = state.inputs.iter().rev().collect();
    let bwd_dh: Vec<&[f64]> = upstream.iter().rev().map(|u| &u[hd..]).collect();
    let dx_bwd = backprop_direction(
        &params.backward,
        params.cell_update,
        &state.backward,
        &bwd_x,
        &bwd_dh,
        &mut grads.backward,
    );
    Ok((0..n)
        .map(|t| {
            dx_fwd[t]
                .iter()
                .zip(&dx_bwd[n - 1 - t])
                .map(|(a, b)| a + b)
                .collect()
        })
        .collect())
}
