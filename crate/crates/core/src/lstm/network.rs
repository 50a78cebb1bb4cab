//! Stacked LSTM with inverted dropout after every layer and a linear head
//! on the final hidden state.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cell::{step_backward, step_forward, CellCache, LstmLayerParams};
use crate::error::{Error, Result};
use crate::features::ScalerParams;
use crate::series::Resolution;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Layer count, width and dropout of a stacked model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub num_layers: usize,
    pub hidden_size: usize,
    pub dropout_rate: f64,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            num_layers: 4,
            hidden_size: 50,
            dropout_rate: 0.2,
        }
    }
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 || self.hidden_size == 0 {
            return Err(Error::Validation(
                "architecture needs at least one layer and one unit".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Validation(format!(
                "dropout_rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

/// Linear map from the last hidden state to one standardized demand value.
#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    pub weights: Array1<f64>,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    pub layers: Vec<LstmLayerParams>,
    pub dropout_rate: f64,
    pub head: Head,
    pub scaler: ScalerParams,
    pub lookback: usize,
    pub resolution: Resolution,
}

impl LstmModel {
    /// Randomly initialised model for inputs of `scaler.width()` columns.
    pub fn init<R: Rng + ?Sized>(
        arch: Architecture,
        scaler: ScalerParams,
        lookback: usize,
        resolution: Resolution,
        rng: &mut R,
    ) -> Result<Self> {
        arch.validate()?;
        if lookback == 0 {
            return Err(Error::Validation("lookback must be positive".into()));
        }
        let mut layers = Vec::with_capacity(arch.num_layers);
        let mut input = scaler.width();
        for _ in 0..arch.num_layers {
            layers.push(LstmLayerParams::init(input, arch.hidden_size, rng));
            input = arch.hidden_size;
        }
        let limit = (6.0 / (arch.hidden_size + 1) as f64).sqrt();
        let head = Head {
            weights: Array1::from_iter((0..arch.hidden_size).map(|_| rng.gen_range(-limit..limit))),
            bias: 0.0,
        };
        Self::from_parts(
            layers,
            arch.dropout_rate,
            head,
            scaler,
            lookback,
            resolution,
        )
    }

    /// Assembles a model, checking that the layer chain is consistent.
    pub fn from_parts(
        layers: Vec<LstmLayerParams>,
        dropout_rate: f64,
        head: Head,
        scaler: ScalerParams,
        lookback: usize,
        resolution: Resolution,
    ) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::Shape("model needs at least one layer".into()))?;
        if first.input_size() != scaler.width() {
            return Err(Error::Shape(format!(
                "first layer takes {} inputs but the scaler has {} columns",
                first.input_size(),
                scaler.width()
            )));
        }
        for pair in layers.windows(2) {
            if pair[1].input_size() != pair[0].hidden_size() {
                return Err(Error::Shape(format!(
                    "layer input {} does not match previous hidden size {}",
                    pair[1].input_size(),
                    pair[0].hidden_size()
                )));
            }
        }
        let last_hidden = layers.last().unwrap().hidden_size();
        if head.weights.len() != last_hidden {
            return Err(Error::Shape(format!(
                "head has {} weights for hidden size {last_hidden}",
                head.weights.len()
            )));
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(Error::Validation(format!(
                "dropout_rate must lie in [0, 1), got {dropout_rate}"
            )));
        }
        Ok(Self {
            layers,
            dropout_rate,
            head,
            scaler,
            lookback,
            resolution,
        })
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].input_size()
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            num_layers: self.layers.len(),
            hidden_size: self.layers[0].hidden_size(),
            dropout_rate: self.dropout_rate,
        }
    }

    /// Prediction for one window of `lookback` input rows.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        window: &[Vec<f64>],
        mode: Mode,
        rng: &mut R,
    ) -> Result<(f64, ForwardCache)> {
        let (pred, cache) = self.forward_batch(&[window], mode, rng)?;
        Ok((pred[0], cache))
    }

    /// Deterministic inference on a single window.
    pub fn predict(&self, window: &[Vec<f64>]) -> Result<f64> {
        let mut unused = rand::rngs::mock::StepRng::new(0, 0);
        Ok(self.forward(window, Mode::Infer, &mut unused)?.0)
    }

    /// Runs every window of a batch through the stack from zero initial state.
    pub fn forward_batch<R: Rng + ?Sized>(
        &self,
        windows: &[&[Vec<f64>]],
        mode: Mode,
        rng: &mut R,
    ) -> Result<(Vec<f64>, ForwardCache)> {
        let batch = windows.len();
        if batch == 0 {
            return Err(Error::EmptyData("no windows to evaluate".into()));
        }
        for w in windows {
            if w.len() != self.lookback {
                return Err(Error::Shape(format!(
                    "window length {} does not match lookback {}",
                    w.len(),
                    self.lookback
                )));
            }
            if let Some(row) = w.iter().find(|r| r.len() != self.input_size()) {
                return Err(Error::Shape(format!(
                    "input row has {} columns, model expects {}",
                    row.len(),
                    self.input_size()
                )));
            }
        }

        // Time-major input: one (I, B) matrix per step.
        let mut inputs: Vec<Array2<f64>> = (0..self.lookback)
            .map(|t| {
                let mut x = Array2::zeros((self.input_size(), batch));
                for (b, w) in windows.iter().enumerate() {
                    for (i, v) in w[t].iter().enumerate() {
                        x[[i, b]] = *v;
                    }
                }
                x
            })
            .collect();

        let apply_dropout = mode == Mode::Train && self.dropout_rate > 0.0;
        let keep_scale = 1.0 / (1.0 - self.dropout_rate);
        let mut layer_caches = Vec::with_capacity(self.layers.len());

        for layer in &self.layers {
            let hs = layer.hidden_size();
            let mut h = Array2::zeros((hs, batch));
            let mut c = Array2::zeros((hs, batch));
            let mut steps = Vec::with_capacity(self.lookback);
            let mut outputs = Vec::with_capacity(self.lookback);
            let mut masks = Vec::new();
            for x in &inputs {
                let cache = step_forward(layer, x.view(), h.view(), c.view());
                h = cache.h.clone();
                c = cache.c.clone();
                let out = if apply_dropout {
                    let mask = Array2::from_shape_fn((hs, batch), |_| {
                        if rng.gen::<f64>() < self.dropout_rate {
                            0.0
                        } else {
                            keep_scale
                        }
                    });
                    let out = &cache.h * &mask;
                    masks.push(mask);
                    out
                } else {
                    cache.h.clone()
                };
                outputs.push(out);
                steps.push(cache);
            }
            layer_caches.push(LayerCache {
                steps,
                masks: if apply_dropout { Some(masks) } else { None },
            });
            inputs = outputs;
        }

        let top = inputs.last().expect("lookback is positive");
        let mut preds = self.head.weights.dot(top);
        preds += self.head.bias;
        let preds = preds.to_vec();
        Ok((
            preds.clone(),
            ForwardCache {
                layers: layer_caches,
                top_output: top.clone(),
                predictions: preds,
            },
        ))
    }

    /// Backpropagation through time. `loss_grads[b]` is dLoss/dprediction
    /// for sample `b` of the cached batch.
    pub fn backward(&self, cache: &ForwardCache, loss_grads: &[f64]) -> Result<Gradients> {
        let batch = cache.predictions.len();
        if loss_grads.len() != batch {
            return Err(Error::State(format!(
                "{} loss gradients for a batch of {batch}",
                loss_grads.len()
            )));
        }
        if cache.layers.len() != self.layers.len()
            || cache.layers.iter().zip(&self.layers).any(|(lc, l)| {
                lc.steps.len() != self.lookback || lc.steps[0].h.nrows() != l.hidden_size()
            })
        {
            return Err(Error::State(
                "forward cache was produced by a different model".into(),
            ));
        }

        let mut grads = Gradients::zeros_like(self);
        let dpred = Array1::from(loss_grads.to_vec());
        grads.head_weights = cache.top_output.dot(&dpred);
        grads.head_bias = dpred.sum();

        // Gradient w.r.t. each post-dropout output of the current layer.
        let top_hidden = self.layers.last().unwrap().hidden_size();
        let mut d_outputs: Vec<Array2<f64>> =
            vec![Array2::zeros((top_hidden, batch)); self.lookback];
        d_outputs[self.lookback - 1] = self
            .head
            .weights
            .view()
            .insert_axis(Axis(1))
            .dot(&dpred.view().insert_axis(Axis(0)));

        for (li, layer) in self.layers.iter().enumerate().rev() {
            let lc = &cache.layers[li];
            let hs = layer.hidden_size();
            let lg = &mut grads.layers[li];
            let mut dh_next = Array2::zeros((hs, batch));
            let mut dc_next = Array2::zeros((hs, batch));
            let mut d_inputs = vec![Array2::zeros((layer.input_size(), batch)); self.lookback];
            for t in (0..self.lookback).rev() {
                let mut dh = match &lc.masks {
                    Some(m) => &d_outputs[t] * &m[t],
                    None => d_outputs[t].clone(),
                };
                dh += &dh_next;
                let (dh_prev, dc_prev, dx) = step_backward(
                    layer,
                    &lc.steps[t],
                    dh.view(),
                    dc_next.view(),
                    &mut lg.weights,
                    &mut lg.bias,
                );
                dh_next = dh_prev;
                dc_next = dc_prev;
                d_inputs[t] = dx;
            }
            d_outputs = d_inputs;
        }
        Ok(grads)
    }

    /// Mutable flat views of every parameter tensor in declared order.
    pub(crate) fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(2 * self.layers.len() + 2);
        for l in &mut self.layers {
            out.push(l.weights.as_slice_mut().expect("standard layout"));
            out.push(l.bias.as_slice_mut().expect("standard layout"));
        }
        out.push(self.head.weights.as_slice_mut().expect("standard layout"));
        out.push(std::slice::from_mut(&mut self.head.bias));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum::<usize>()
            + self.head.weights.len()
            + 1
    }
}

#[derive(Debug, Clone)]
pub struct LayerCache {
    pub steps: Vec<CellCache>,
    /// Scaled keep-masks, one `(H, B)` matrix per step, when dropout was active.
    pub masks: Option<Vec<Array2<f64>>>,
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub layers: Vec<LayerCache>,
    /// Post-dropout final-layer output at the last step, `(H, B)`.
    pub top_output: Array2<f64>,
    pub predictions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradients>,
    pub head_weights: Array1<f64>,
    pub head_bias: f64,
}

impl Gradients {
    pub fn zeros_like(model: &LstmModel) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| LayerGradients {
                    weights: Array2::zeros(l.weights.dim()),
                    bias: Array1::zeros(l.bias.len()),
                })
                .collect(),
            head_weights: Array1::zeros(model.head.weights.len()),
            head_bias: 0.0,
        }
    }

    /// Flat views in the same order as the model's parameters.
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(2 * self.layers.len() + 2);
        for l in &self.layers {
            out.push(l.weights.as_slice().expect("standard layout"));
            out.push(l.bias.as_slice().expect("standard layout"));
        }
        out.push(self.head_weights.as_slice().expect("standard layout"));
        out.push(std::slice::from_ref(&self.head_bias));
        out
    }

    pub fn global_norm(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales so the global L2 norm is at most `max_norm`. Returns the pre-clip norm.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm && norm.is_finite() {
            let k = max_norm / norm;
            for l in &mut self.layers {
                l.weights.mapv_inplace(|g| g * k);
                l.bias.mapv_inplace(|g| g * k);
            }
            self.head_weights.mapv_inplace(|g| g * k);
            self.head_bias *= k;
        }
        norm
    }
}
