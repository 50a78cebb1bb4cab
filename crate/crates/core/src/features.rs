//! Calendar features, z-score scaling and sliding windows.
//!
//! A model row is `[demand, year, month_sin, month_cos, doy_sin, doy_cos]`,
//! with `hour_sin, hour_cos` appended for hourly data. Column 0 is always
//! the demand, which is both the prediction target and an input.

use std::f64::consts::TAU;

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{LoadSeries, Resolution};

/// Default lookback, in daily steps.
pub const DEFAULT_LOOKBACK: usize = 30;

const DAYS_PER_YEAR: f64 = 365.25;

/// Names of the model columns for a given resolution, demand first.
pub fn column_names(resolution: Resolution) -> Vec<&'static str> {
    let mut names = vec![
        "demand",
        "year",
        "month_sin",
        "month_cos",
        "doy_sin",
        "doy_cos",
    ];
    if resolution == Resolution::Hourly {
        names.extend(["hour_sin", "hour_cos"]);
    }
    names
}

/// Number of calendar features (excluding the demand column).
pub fn feature_count(resolution: Resolution) -> usize {
    column_names(resolution).len() - 1
}

/// Unscaled calendar features for a timestamp.
pub fn calendar_features(ts: NaiveDateTime, resolution: Resolution) -> Vec<f64> {
    let month = ts.month() as f64 * TAU / 12.0;
    let doy = ts.ordinal() as f64 * TAU / DAYS_PER_YEAR;
    let mut f = vec![
        ts.year() as f64,
        month.sin(),
        month.cos(),
        doy.sin(),
        doy.cos(),
    ];
    if resolution == Resolution::Hourly {
        let hour = ts.hour() as f64 * TAU / 24.0;
        f.extend([hour.sin(), hour.cos()]);
    }
    f
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub timestamp: NaiveDateTime,
    /// Demand, raw MW before scaling and a z-score after.
    pub target: f64,
    pub features: Vec<f64>,
}

impl FeatureRow {
    pub fn date(&self) -> NaiveDate {
        self.timestamp.date()
    }

    /// The model input vector: demand followed by the features.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.features.len() + 1);
        v.push(self.target);
        v.extend_from_slice(&self.features);
        v
    }

    fn width(&self) -> usize {
        self.features.len() + 1
    }
}

/// One feature row per record of a gap-free series.
pub fn add_time_features(series: &LoadSeries) -> Result<Vec<FeatureRow>> {
    let demands = series.demands()?;
    Ok(series
        .records()
        .iter()
        .zip(demands)
        .map(|(r, d)| FeatureRow {
            timestamp: r.timestamp,
            target: d,
            features: calendar_features(r.timestamp, series.resolution()),
        })
        .collect())
}

/// Splits rows into those strictly before `date` and the rest.
pub fn split_at_date(rows: &[FeatureRow], date: NaiveDate) -> (Vec<FeatureRow>, Vec<FeatureRow>) {
    let cut = rows.partition_point(|r| r.date() < date);
    (rows[..cut].to_vec(), rows[cut..].to_vec())
}

/// Per-column z-score parameters. Column 0 is the demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl ScalerParams {
    pub fn width(&self) -> usize {
        self.means.len()
    }

    pub fn scale(&self, col: usize, v: f64) -> f64 {
        (v - self.means[col]) / self.stds[col]
    }

    pub fn unscale(&self, col: usize, z: f64) -> f64 {
        z * self.stds[col] + self.means[col]
    }

    fn check_width(&self, row: &FeatureRow) -> Result<()> {
        if row.width() != self.width() {
            return Err(Error::Shape(format!(
                "row has {} columns, scaler has {}",
                row.width(),
                self.width()
            )));
        }
        Ok(())
    }
}

/// Fits column means and population standard deviations (two-pass).
/// Columns with no spread keep std = 1 so they pass through centred.
pub fn fit_scaler(rows: &[FeatureRow]) -> Result<ScalerParams> {
    if rows.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 1,
            got: rows.len(),
        });
    }
    let width = rows[0].width();
    if rows.iter().any(|r| r.width() != width) {
        return Err(Error::Shape("rows have differing column counts".into()));
    }
    let n = rows.len() as f64;
    let mut means = vec![0.0; width];
    for r in rows {
        for (m, v) in means.iter_mut().zip(r.to_vec()) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);

    let mut vars = vec![0.0; width];
    for r in rows {
        for ((acc, v), m) in vars.iter_mut().zip(r.to_vec()).zip(&means) {
            let d = v - m;
            *acc += d * d;
        }
    }
    let stds = vars
        .iter()
        .zip(&means)
        .map(|(&ss, &m)| {
            let sd = (ss / n).sqrt();
            if sd <= 1e-12 * m.abs().max(1.0) {
                1.0
            } else {
                sd
            }
        })
        .collect();
    Ok(ScalerParams { means, stds })
}

pub fn apply_scaler(rows: &[FeatureRow], params: &ScalerParams) -> Result<Vec<FeatureRow>> {
    rows.iter()
        .map(|r| {
            params.check_width(r)?;
            Ok(FeatureRow {
                timestamp: r.timestamp,
                target: params.scale(0, r.target),
                features: r
                    .features
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| params.scale(j + 1, v))
                    .collect(),
            })
        })
        .collect()
}

pub fn invert_scaler(rows: &[FeatureRow], params: &ScalerParams) -> Result<Vec<FeatureRow>> {
    rows.iter()
        .map(|r| {
            params.check_width(r)?;
            Ok(FeatureRow {
                timestamp: r.timestamp,
                target: params.unscale(0, r.target),
                features: r
                    .features
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| params.unscale(j + 1, v))
                    .collect(),
            })
        })
        .collect()
}

/// Sliding windows over a row matrix. Window `k` covers rows
/// `starts[k] .. starts[k] + lookback` and its target is the demand of the
/// row immediately after.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    rows: Vec<Vec<f64>>,
    starts: Vec<usize>,
    lookback: usize,
}

impl WindowSet {
    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn lookback(&self) -> usize {
        self.lookback
    }

    /// Width of each input vector (demand plus features).
    pub fn input_width(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn window(&self, k: usize) -> &[Vec<f64>] {
        let s = self.starts[k];
        &self.rows[s..s + self.lookback]
    }

    pub fn target(&self, k: usize) -> f64 {
        self.rows[self.starts[k] + self.lookback][0]
    }

    pub fn targets(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.target(k)).collect()
    }

    /// Chronological split: the last `fraction` of windows (at least one)
    /// become the second set.
    pub fn split_tail(&self, fraction: f64) -> Result<(WindowSet, WindowSet)> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::Validation(format!(
                "validation fraction must be in [0, 1), got {fraction}"
            )));
        }
        let n_tail = ((self.len() as f64 * fraction).round() as usize).max(1);
        if n_tail >= self.len() {
            return Err(Error::InsufficientData {
                needed: n_tail,
                got: self.len(),
            });
        }
        let cut = self.len() - n_tail;
        let head = WindowSet {
            rows: self.rows.clone(),
            starts: self.starts[..cut].to_vec(),
            lookback: self.lookback,
        };
        let tail = WindowSet {
            rows: self.rows.clone(),
            starts: self.starts[cut..].to_vec(),
            lookback: self.lookback,
        };
        Ok((head, tail))
    }
}

pub fn make_windows(rows: &[FeatureRow], lookback: usize) -> Result<WindowSet> {
    if lookback == 0 {
        return Err(Error::Validation("lookback must be positive".into()));
    }
    if rows.len() <= lookback {
        return Err(Error::InsufficientData {
            needed: lookback,
            got: rows.len(),
        });
    }
    Ok(WindowSet {
        rows: rows.iter().map(FeatureRow::to_vec).collect(),
        starts: (0..rows.len() - lookback).collect(),
        lookback,
    })
}
