//! JSON model file. Gate tensors are stored separately, row-major, in the
//! order forget, input, candidate, output.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::cell::{Gate, LstmLayerParams};
use super::network::{Head, LstmModel};
use crate::error::{Error, Result};
use crate::features::ScalerParams;
use crate::series::Resolution;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    resolution: Resolution,
    lookback: usize,
    dropout_rate: f64,
    scaler: ScalerParams,
    layers: Vec<LayerFile>,
    head: HeadFile,
}

#[derive(Debug, Serialize, Deserialize)]
struct LayerFile {
    input_size: usize,
    hidden_size: usize,
    w_f: Vec<f64>,
    w_i: Vec<f64>,
    w_c: Vec<f64>,
    w_o: Vec<f64>,
    b_f: Vec<f64>,
    b_i: Vec<f64>,
    b_c: Vec<f64>,
    b_o: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct HeadFile {
    weights: Vec<f64>,
    bias: f64,
}

#[derive(Debug, Deserialize)]
struct VersionProbe {
    format_version: u32,
}

fn gate_vec(p: &LstmLayerParams, g: Gate) -> Vec<f64> {
    p.gate_weights(g).iter().copied().collect()
}

fn bias_vec(p: &LstmLayerParams, g: Gate) -> Vec<f64> {
    p.gate_bias(g).to_vec()
}

pub fn model_to_json(model: &LstmModel) -> Result<String> {
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        resolution: model.resolution,
        lookback: model.lookback,
        dropout_rate: model.dropout_rate,
        scaler: model.scaler.clone(),
        layers: model
            .layers
            .iter()
            .map(|l| LayerFile {
                input_size: l.input_size(),
                hidden_size: l.hidden_size(),
                w_f: gate_vec(l, Gate::Forget),
                w_i: gate_vec(l, Gate::Input),
                w_c: gate_vec(l, Gate::Candidate),
                w_o: gate_vec(l, Gate::Output),
                b_f: bias_vec(l, Gate::Forget),
                b_i: bias_vec(l, Gate::Input),
                b_c: bias_vec(l, Gate::Candidate),
                b_o: bias_vec(l, Gate::Output),
            })
            .collect(),
        head: HeadFile {
            weights: model.head.weights.to_vec(),
            bias: model.head.bias,
        },
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn model_from_json(text: &str) -> Result<LstmModel> {
    let probe: VersionProbe = serde_json::from_str(text)?;
    if probe.format_version != FORMAT_VERSION {
        return Err(Error::FormatVersion {
            found: probe.format_version,
            expected: FORMAT_VERSION,
        });
    }
    let file: ModelFile = serde_json::from_str(text)?;
    let layers = file
        .layers
        .into_iter()
        .map(|l| {
            let shape = (l.hidden_size, l.hidden_size + l.input_size);
            let mat = |v: Vec<f64>| {
                Array2::from_shape_vec(shape, v)
                    .map_err(|e| Error::Shape(format!("gate matrix: {e}")))
            };
            LstmLayerParams::from_gates(
                l.input_size,
                l.hidden_size,
                [mat(l.w_f)?, mat(l.w_i)?, mat(l.w_c)?, mat(l.w_o)?],
                [
                    Array1::from(l.b_f),
                    Array1::from(l.b_i),
                    Array1::from(l.b_c),
                    Array1::from(l.b_o),
                ],
            )
        })
        .collect::<Result<Vec<_>>>()?;
    if file.scaler.means.len() != file.scaler.stds.len()
        || file.scaler.stds.iter().any(|&s| !(s > 0.0))
    {
        return Err(Error::Validation("scaler stds must be positive".into()));
    }
    LstmModel::from_parts(
        layers,
        file.dropout_rate,
        Head {
            weights: Array1::from(file.head.weights),
            bias: file.head.bias,
        },
        file.scaler,
        file.lookback,
        file.resolution,
    )
}
