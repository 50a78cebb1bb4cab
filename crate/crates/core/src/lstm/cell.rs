//! A single LSTM layer: gate parameters, one-step forward and its adjoint.
//!
//! The four gate matrices act on the concatenation `[h_prev; x]` and are
//! stored stacked as one `(4H, H + I)` matrix in the order forget, input,
//! candidate, output. Batched operations carry one sample per column.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Forget,
    Input,
    Candidate,
    Output,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Forget, Gate::Input, Gate::Candidate, Gate::Output];

    fn index(self) -> usize {
        self as usize
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayerParams {
    input_size: usize,
    hidden_size: usize,
    pub(crate) weights: Array2<f64>,
    pub(crate) bias: Array1<f64>,
}

impl LstmLayerParams {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        Self {
            input_size,
            hidden_size,
            weights: Array2::zeros((4 * hidden_size, hidden_size + input_size)),
            bias: Array1::zeros(4 * hidden_size),
        }
    }

    /// Glorot-uniform weights per gate, zero biases except the forget gate at 1.
    pub fn init<R: Rng + ?Sized>(input_size: usize, hidden_size: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(input_size, hidden_size);
        let fan_in = hidden_size + input_size;
        let limit = (6.0 / (fan_in + hidden_size) as f64).sqrt();
        p.weights
            .iter_mut()
            .for_each(|w| *w = rng.gen_range(-limit..limit));
        p.gate_bias_mut(Gate::Forget).fill(1.0);
        p
    }

    /// Assembles a layer from separate gate matrices `(H, H + I)` and biases `(H)`.
    pub fn from_gates(
        input_size: usize,
        hidden_size: usize,
        weights: [Array2<f64>; 4],
        biases: [Array1<f64>; 4],
    ) -> Result<Self> {
        let mut p = Self::zeros(input_size, hidden_size);
        for (g, (w, b)) in Gate::ALL.iter().zip(weights.iter().zip(biases.iter())) {
            if w.dim() != (hidden_size, hidden_size + input_size) || b.len() != hidden_size {
                return Err(Error::Shape(format!(
                    "{g:?} gate: expected ({hidden_size}, {}) weights and {hidden_size} biases, got {:?} and {}",
                    hidden_size + input_size,
                    w.dim(),
                    b.len()
                )));
            }
            p.gate_weights_mut(*g).assign(w);
            p.gate_bias_mut(*g).assign(b);
        }
        if !p.is_finite() {
            return Err(Error::Validation("layer parameters must be finite".into()));
        }
        Ok(p)
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden_size
    }

    pub fn gate_weights(&self, gate: Gate) -> ArrayView2<'_, f64> {
        let h = self.hidden_size;
        self.weights
            .slice(s![gate.index() * h..(gate.index() + 1) * h, ..])
    }

    pub fn gate_weights_mut(&mut self, gate: Gate) -> ndarray::ArrayViewMut2<'_, f64> {
        let h = self.hidden_size;
        self.weights
            .slice_mut(s![gate.index() * h..(gate.index() + 1) * h, ..])
    }

    pub fn gate_bias(&self, gate: Gate) -> ArrayView1<'_, f64> {
        let h = self.hidden_size;
        self.bias
            .slice(s![gate.index() * h..(gate.index() + 1) * h])
    }

    pub fn gate_bias_mut(&mut self, gate: Gate) -> ndarray::ArrayViewMut1<'_, f64> {
        let h = self.hidden_size;
        self.bias
            .slice_mut(s![gate.index() * h..(gate.index() + 1) * h])
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(self.bias.iter())
            .all(|v| v.is_finite())
    }
}

/// Hidden and cell state of one layer for a single sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Array1<f64>,
    pub c: Array1<f64>,
}

impl LstmState {
    pub fn zeros(hidden_size: usize) -> Self {
        Self {
            h: Array1::zeros(hidden_size),
            c: Array1::zeros(hidden_size),
        }
    }
}

/// Gate activations of one step, one column per sample.
#[derive(Debug, Clone)]
pub struct CellCache {
    /// `[h_prev; x]`
    pub concat: Array2<f64>,
    pub forget: Array2<f64>,
    pub input: Array2<f64>,
    pub candidate: Array2<f64>,
    pub output: Array2<f64>,
    pub c_prev: Array2<f64>,
    pub c: Array2<f64>,
    pub tanh_c: Array2<f64>,
    pub h: Array2<f64>,
}

/// One step for a single sample.
pub fn cell_forward(
    x: ArrayView1<'_, f64>,
    state: &LstmState,
    params: &LstmLayerParams,
) -> Result<(LstmState, CellCache)> {
    let hs = params.hidden_size;
    if x.len() != params.input_size || state.h.len() != hs || state.c.len() != hs {
        return Err(Error::Shape(format!(
            "cell expects input {} and state {hs}, got input {} and state ({}, {})",
            params.input_size,
            x.len(),
            state.h.len(),
            state.c.len()
        )));
    }
    let col = |v: ArrayView1<'_, f64>| v.insert_axis(Axis(1)).to_owned();
    let cache = step_forward(
        params,
        col(x).view(),
        col(state.h.view()).view(),
        col(state.c.view()).view(),
    );
    let next = LstmState {
        h: cache.h.column(0).to_owned(),
        c: cache.c.column(0).to_owned(),
    };
    Ok((next, cache))
}

/// Batched step. Shapes: `x (I, B)`, `h_prev (H, B)`, `c_prev (H, B)`.
pub(crate) fn step_forward(
    params: &LstmLayerParams,
    x: ArrayView2<'_, f64>,
    h_prev: ArrayView2<'_, f64>,
    c_prev: ArrayView2<'_, f64>,
) -> CellCache {
    let hs = params.hidden_size;
    let batch = x.ncols();
    let mut concat = Array2::zeros((hs + params.input_size, batch));
    concat.slice_mut(s![..hs, ..]).assign(&h_prev);
    concat.slice_mut(s![hs.., ..]).assign(&x);

    let mut z = params.weights.dot(&concat);
    z += &params.bias.view().insert_axis(Axis(1));

    let forget = z.slice(s![..hs, ..]).mapv(sigmoid);
    let input = z.slice(s![hs..2 * hs, ..]).mapv(sigmoid);
    let candidate = z.slice(s![2 * hs..3 * hs, ..]).mapv(f64::tanh);
    let output = z.slice(s![3 * hs.., ..]).mapv(sigmoid);

    let mut c = Array2::zeros((hs, batch));
    Zip::from(&mut c)
        .and(&input)
        .and(&candidate)
        .and(&forget)
        .and(&c_prev)
        .for_each(|c, &i, &g, &f, &cp| *c = i * g + f * cp);
    let tanh_c = c.mapv(f64::tanh);
    let h = &output * &tanh_c;

    CellCache {
        concat,
        forget,
        input,
        candidate,
        output,
        c_prev: c_prev.to_owned(),
        c,
        tanh_c,
        h,
    }
}

/// Accumulates parameter gradients for one step and returns
/// `(d h_prev, d c_prev, d x)` given the gradients flowing into `h` and `c`.
pub(crate) fn step_backward(
    params: &LstmLayerParams,
    cache: &CellCache,
    dh: ArrayView2<'_, f64>,
    dc_next: ArrayView2<'_, f64>,
    dweights: &mut Array2<f64>,
    dbias: &mut Array1<f64>,
) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    let hs = params.hidden_size;
    let batch = dh.ncols();

    let mut dz = Array2::zeros((4 * hs, batch));
    let mut dc_prev = Array2::zeros((hs, batch));
    {
        let (mut dzf, rest) = dz.view_mut().split_at(Axis(0), hs);
        let (mut dzi, rest) = rest.split_at(Axis(0), hs);
        let (mut dzg, mut dzo) = rest.split_at(Axis(0), hs);
        for j in 0..hs {
            for b in 0..batch {
                let f = cache.forget[[j, b]];
                let i = cache.input[[j, b]];
                let g = cache.candidate[[j, b]];
                let o = cache.output[[j, b]];
                let tc = cache.tanh_c[[j, b]];
                let d_h = dh[[j, b]];
                let dc = dc_next[[j, b]] + d_h * o * (1.0 - tc * tc);
                dzo[[j, b]] = d_h * tc * o * (1.0 - o);
                dzf[[j, b]] = dc * cache.c_prev[[j, b]] * f * (1.0 - f);
                dzi[[j, b]] = dc * g * i * (1.0 - i);
                dzg[[j, b]] = dc * i * (1.0 - g * g);
                dc_prev[[j, b]] = dc * f;
            }
        }
    }

    ndarray::linalg::general_mat_mul(1.0, &dz, &cache.concat.t(), 1.0, dweights);
    *dbias += &dz.sum_axis(Axis(1));
    let dconcat = params.weights.t().dot(&dz);
    let dh_prev = dconcat.slice(s![..hs, ..]).to_owned();
    let dx = dconcat.slice(s![hs.., ..]).to_owned();
    (dh_prev, dc_prev, dx)
}
