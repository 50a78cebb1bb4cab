use chrono::NaiveDate;

use super::network::LstmModel;
use crate::error::{Error, Result};
use crate::features::{calendar_features, FeatureRow};
use crate::series::{daily_series, LoadSeries, Resolution};

/// Autoregressive daily rollout.
///
/// `seed_rows` are the last `lookback` observed rows in MW (unscaled). Each
/// horizon date is predicted from the current window, then appended to it
/// with its true calendar features and the predicted demand.
pub fn forecast(
    model: &LstmModel,
    seed_rows: &[FeatureRow],
    horizon: &[NaiveDate],
) -> Result<LoadSeries> {
    if model.resolution != Resolution::Daily {
        return Err(Error::Resolution {
            expected: Resolution::Daily,
            found: model.resolution,
        });
    }
    if seed_rows.len() != model.lookback {
        return Err(Error::Shape(format!(
            "seed window has {} rows, model lookback is {}",
            seed_rows.len(),
            model.lookback
        )));
    }
    if horizon.is_empty() {
        return Ok(LoadSeries::empty(Resolution::Daily));
    }

    let mut expected = seed_rows[seed_rows.len() - 1].date();
    for pair in seed_rows.windows(2) {
        if pair[1].date() != pair[0].date().succ_opt().unwrap() {
            return Err(Error::Calendar(format!(
                "seed window is not contiguous at {}",
                pair[1].date()
            )));
        }
    }
    for &d in horizon {
        expected = expected.succ_opt().unwrap();
        if d != expected {
            return Err(Error::Calendar(format!(
                "horizon date {d} does not follow contiguously (expected {expected})"
            )));
        }
    }

    let scaler = &model.scaler;
    let scale_row = |target: f64, features: &[f64]| -> Result<Vec<f64>> {
        if features.len() + 1 != scaler.width() {
            return Err(Error::Shape(format!(
                "row has {} columns, scaler has {}",
                features.len() + 1,
                scaler.width()
            )));
        }
        let mut v = Vec::with_capacity(scaler.width());
        v.push(scaler.scale(0, target));
        v.extend(
            features
                .iter()
                .enumerate()
                .map(|(j, &x)| scaler.scale(j + 1, x)),
        );
        Ok(v)
    };

    let mut window: Vec<Vec<f64>> = seed_rows
        .iter()
        .map(|r| scale_row(r.target, &r.features))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(horizon.len());
    for &d in horizon {
        let z = model.predict(&window)?;
        let ts = d.and_hms_opt(0, 0, 0).unwrap();
        let mut row = Vec::with_capacity(scaler.width());
        row.push(z);
        row.extend(
            calendar_features(ts, Resolution::Daily)
                .iter()
                .enumerate()
                .map(|(j, &x)| scaler.scale(j + 1, x)),
        );
        window.remove(0);
        window.push(row);
        // Negative MW is not a valid demand; clamp the rare excursion.
        out.push((d, scaler.unscale(0, z).max(0.0)));
    }
    daily_series(out)
}

/// `days` consecutive dates starting at `start`.
pub fn horizon_dates(start: NaiveDate, days: usize) -> Vec<NaiveDate> {
    start.iter_days().take(days).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::ScalerParams;
    use crate::lstm::network::Architecture;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(lookback: usize, resolution: Resolution) -> LstmModel {
        let width = crate::features::feature_count(resolution) + 1;
        let scaler = ScalerParams {
            means: vec![5000.0; width],
            stds: vec![500.0; width],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let arch = Architecture {
            num_layers: 2,
            hidden_size: 5,
            dropout_rate: 0.2,
        };
        LstmModel::init(arch, scaler, lookback, resolution, &mut rng).unwrap()
    }

    fn seed(start: NaiveDate, n: usize) -> Vec<FeatureRow> {
        horizon_dates(start, n)
            .into_iter()
            .map(|d| {
                let ts = d.and_hms_opt(0, 0, 0).unwrap();
                FeatureRow {
                    timestamp: ts,
                    target: 5000.0,
                    features: calendar_features(ts, Resolution::Daily),
                }
            })
            .collect()
    }

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    #[test]
    fn empty_horizon_gives_empty_series() {
        let m = model(4, Resolution::Daily);
        let out = forecast(&m, &seed(date(2019, 12, 28), 4), &[]).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn rolls_forward_one_value_per_date() {
        let m = model(4, Resolution::Daily);
        let dates = horizon_dates(date(2020, 1, 1), 10);
        let out = forecast(&m, &seed(date(2019, 12, 28), 4), &dates).unwrap();
        assert_eq!(out.len(), 10);
        assert_eq!(out.records()[0].date(), date(2020, 1, 1));
        assert!(out.records().iter().all(|r| r.demand.unwrap().is_finite()));
        // deterministic
        assert_eq!(
            out,
            forecast(&m, &seed(date(2019, 12, 28), 4), &dates).unwrap()
        );
    }

    #[test]
    fn calendar_and_shape_errors() {
        let m = model(4, Resolution::Daily);
        let s = seed(date(2019, 12, 28), 4);
        let gap = vec![date(2020, 1, 2)];
        assert!(matches!(forecast(&m, &s, &gap), Err(Error::Calendar(_))));
        let holes = vec![date(2020, 1, 1), date(2020, 1, 3)];
        assert!(matches!(forecast(&m, &s, &holes), Err(Error::Calendar(_))));
        assert!(matches!(
            forecast(&m, &s[..3], &[date(2020, 1, 1)]),
            Err(Error::Shape(_))
        ));
        let hourly = model(4, Resolution::Hourly);
        assert!(matches!(
            forecast(&hourly, &s, &[date(2020, 1, 1)]),
            Err(Error::Resolution { .. })
        ));
    }
}
