//! From-scratch stacked LSTM forecaster.

pub mod cell;
pub mod forecast;
pub mod network;
pub mod optim;
pub mod persist;
pub mod train;

pub use cell::{cell_forward, CellCache, Gate, LstmLayerParams, LstmState};
pub use forecast::{forecast, horizon_dates};
pub use network::{Architecture, ForwardCache, Gradients, Head, LstmModel, Mode};
pub use optim::{adam_step, lr_schedule, AdamHyper, AdamMoments};
pub use persist::{model_from_json, model_to_json, FORMAT_VERSION};
pub use train::{
    mse, predict_windows, train, validation_mse, EarlyStopping, TrainConfig, TrainReport,
};
