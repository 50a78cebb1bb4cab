//! Seeded synthetic daily demand: level with linear growth, a yearly
//! sinusoid and Gaussian noise.

use std::f64::consts::TAU;

use chrono::{Datelike, NaiveDate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{daily_series, LoadSeries, Resolution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub start: NaiveDate,
    pub days: usize,
    /// Level at `start`, MW.
    pub base: f64,
    /// Sinusoid amplitude as a fraction of `base`.
    pub seasonal_amplitude: f64,
    /// Day of year at which the sinusoid peaks.
    pub peak_day: f64,
    /// Linear growth per year as a fraction of `base`.
    pub trend_per_year: f64,
    /// Noise standard deviation as a fraction of `base`.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(2017, 1, 1).unwrap(),
            days: 3 * 365,
            base: 10_000.0,
            seasonal_amplitude: 0.2,
            peak_day: 172.0,
            trend_per_year: 0.02,
            noise: 0.02,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    /// Noise-free value on `date`.
    pub fn expected(&self, date: NaiveDate) -> f64 {
        let years = (date - self.start).num_days() as f64 / 365.25;
        let phase = (date.ordinal() as f64 - self.peak_day) * TAU / 365.25;
        self.base * (1.0 + self.trend_per_year * years + self.seasonal_amplitude * phase.cos())
    }

    pub fn generate(&self) -> Result<LoadSeries> {
        if !(self.base > 0.0) || !(self.noise >= 0.0) {
            return Err(Error::Validation(
                "synthetic base must be positive and noise non-negative".into(),
            ));
        }
        if self.days == 0 {
            return Ok(LoadSeries::empty(Resolution::Daily));
        }
        let normal = Normal::new(0.0, self.noise * self.base)
            .map_err(|e| Error::Validation(format!("noise: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        daily_series(self.start.iter_days().take(self.days).map(|d| {
            let v = self.expected(d) + normal.sample(&mut rng);
            (d, v.max(0.0))
        }))
    }
}

/// Multiplies demand on dates in `[start, end]` by `factor`.
pub fn apply_shock(
    series: &LoadSeries,
    start: NaiveDate,
    end: NaiveDate,
    factor: f64,
) -> Result<LoadSeries> {
    if !(factor >= 0.0) {
        return Err(Error::Validation(format!(
            "shock factor must be non-negative, got {factor}"
        )));
    }
    let records = series
        .records()
        .iter()
        .map(|r| {
            let mut r = *r;
            let d = r.date();
            if d >= start && d <= end {
                r.demand = r.demand.map(|v| v * factor);
            }
            r
        })
        .collect();
    LoadSeries::new(records, series.resolution())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_shaped() {
        let spec = SyntheticSpec::default();
        let a = spec.generate().unwrap();
        assert_eq!(a, spec.generate().unwrap());
        assert_eq!(a.len(), 1095);
        let other = SyntheticSpec {
            seed: 1,
            ..spec.clone()
        };
        assert_ne!(a, other.generate().unwrap());

        let d = a.demands().unwrap();
        let resid: Vec<f64> = a
            .records()
            .iter()
            .zip(&d)
            .map(|(r, v)| v - spec.expected(r.date()))
            .collect();
        let n = resid.len() as f64;
        let mean = resid.iter().sum::<f64>() / n;
        let sd = (resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 30.0, "{mean}");
        assert!((sd - 200.0).abs() < 20.0, "{sd}");
    }

    #[test]
    fn trend_and_peak() {
        let spec = SyntheticSpec::default();
        let d = |y, m, day| NaiveDate::from_ymd_opt(y, m, day).unwrap();
        let grow = spec.expected(d(2018, 1, 1)) - spec.expected(d(2017, 1, 1));
        assert!((grow - 0.02 * 10_000.0 * 365.0 / 365.25).abs() < 1e-6);
        assert!(spec.expected(d(2017, 6, 21)) > spec.expected(d(2017, 12, 21)));
    }

    #[test]
    fn shock_only_touches_range() {
        let spec = SyntheticSpec {
            days: 120,
            ..SyntheticSpec::default()
        };
        let s = spec.generate().unwrap();
        let start = NaiveDate::from_ymd_opt(2017, 2, 1).unwrap();
        let end = NaiveDate::from_ymd_opt(2017, 2, 28).unwrap();
        let shocked = apply_shock(&s, start, end, 0.8).unwrap();
        for (a, b) in s.records().iter().zip(shocked.records()) {
            let (x, y) = (a.demand.unwrap(), b.demand.unwrap());
            if a.date() >= start && a.date() <= end {
                assert_eq!(y, x * 0.8);
            } else {
                assert_eq!(y, x);
            }
        }
        assert!(apply_shock(&s, start, end, -1.0).is_err());
    }
}
