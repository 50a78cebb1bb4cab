//! Glue from a gap-free load series to a trained model and a rollout.

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::features::{
    add_time_features, apply_scaler, fit_scaler, make_windows, FeatureRow, ScalerParams, WindowSet,
};
use crate::lstm::{forecast, horizon_dates, train, LstmModel, TrainConfig, TrainReport};
use crate::series::{LoadSeries, Resolution};

#[derive(Debug, Clone)]
pub struct TrainingData {
    /// Unscaled rows of the whole series.
    pub rows: Vec<FeatureRow>,
    pub scaler: ScalerParams,
    pub train: WindowSet,
    pub validation: WindowSet,
}

/// Builds scaled train/validation windows. The scaler only sees rows whose
/// demand is an input or target of a training window, never a validation
/// target.
pub fn prepare_training(
    series: &LoadSeries,
    lookback: usize,
    validation_fraction: f64,
) -> Result<TrainingData> {
    let rows = add_time_features(series)?;
    if rows.len() <= lookback + 1 {
        return Err(Error::InsufficientData {
            needed: lookback + 2,
            got: rows.len(),
        });
    }
    let n_windows = rows.len() - lookback;
    let n_val = ((n_windows as f64 * validation_fraction).round() as usize).max(1);
    if n_val >= n_windows {
        return Err(Error::InsufficientData {
            needed: n_val + 1,
            got: n_windows,
        });
    }
    let scaler = fit_scaler(&rows[..rows.len() - n_val])?;
    let scaled = apply_scaler(&rows, &scaler)?;
    let (train, validation) = make_windows(&scaled, lookback)?.split_tail(validation_fraction)?;
    Ok(TrainingData {
        rows,
        scaler,
        train,
        validation,
    })
}

pub fn fit_forecaster(
    series: &LoadSeries,
    lookback: usize,
    config: &TrainConfig,
) -> Result<(LstmModel, TrainReport)> {
    let data = prepare_training(series, lookback, config.validation_fraction)?;
    train(
        &data.train,
        &data.validation,
        data.scaler,
        series.resolution(),
        config,
    )
}

/// Rolls the model forward `days` days past the end of `history`.
pub fn forecast_after(model: &LstmModel, history: &LoadSeries, days: usize) -> Result<LoadSeries> {
    if history.resolution() != Resolution::Daily {
        return Err(Error::Resolution {
            expected: Resolution::Daily,
            found: history.resolution(),
        });
    }
    let rows = add_time_features(history)?;
    if rows.len() < model.lookback {
        return Err(Error::InsufficientData {
            needed: model.lookback,
            got: rows.len(),
        });
    }
    let seed = &rows[rows.len() - model.lookback..];
    let next = seed[seed.len() - 1]
        .date()
        .succ_opt()
        .ok_or_else(|| Error::Calendar("date overflow".into()))?;
    forecast(model, seed, &horizon_dates(next, days))
}

/// Rolls the model forward from the end of `history` through `end`.
pub fn forecast_through(
    model: &LstmModel,
    history: &LoadSeries,
    end: NaiveDate,
) -> Result<LoadSeries> {
    let last = history
        .last_timestamp()
        .ok_or_else(|| Error::EmptyData("history is empty".into()))?
        .date();
    if end <= last {
        return Err(Error::Calendar(format!(
            "forecast end {end} is not after history end {last}"
        )));
    }
    forecast_after(model, history, (end - last).num_days() as usize)
}
