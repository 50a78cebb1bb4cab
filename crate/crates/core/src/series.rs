//! Hourly and daily load series: CSV ingestion, gap filling and daily resampling.
//!
//! Timestamps are naive local civil time. The CSV schema is
//! `timestamp,demand_mw` with timestamps formatted `YYYY-MM-DDTHH:MM`
//! (minutes always `00`) and an empty demand field marking a missing value.

use chrono::{Duration, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "timestamp,demand_mw";
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M";

/// Longest run of consecutive missing hours that `interpolate_missing` will fill.
pub const DEFAULT_MAX_GAP_HOURS: i64 = 72;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resolution {
    Hourly,
    Daily,
}

impl Resolution {
    pub fn step(self) -> Duration {
        match self {
            Resolution::Hourly => Duration::hours(1),
            Resolution::Daily => Duration::days(1),
        }
    }

    pub fn hours(self) -> i64 {
        self.step().num_hours()
    }
}

/// One observation. `demand` is `None` for a missing value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadRecord {
    pub timestamp: NaiveDateTime,
    pub demand: Option<f64>,
}

impl LoadRecord {
    pub fn new(timestamp: NaiveDateTime, demand: Option<f64>) -> Self {
        Self { timestamp, demand }
    }

    pub fn date(&self) -> NaiveDate {
        self.timestamp.date()
    }
}

/// An ordered, uniformly spaced sequence of load records.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadSeries {
    records: Vec<LoadRecord>,
    resolution: Resolution,
}

impl LoadSeries {
    /// Builds a series, checking the grid, spacing and demand invariants.
    pub fn new(records: Vec<LoadRecord>, resolution: Resolution) -> Result<Self> {
        for r in &records {
            check_grid(r.timestamp, resolution)?;
            if let Some(d) = r.demand {
                check_demand(d, r.timestamp)?;
            }
        }
        for pair in records.windows(2) {
            let (a, b) = (pair[0].timestamp, pair[1].timestamp);
            if b <= a {
                return Err(Error::Validation(format!(
                    "timestamps not strictly increasing at {b}"
                )));
            }
            if b - a != resolution.step() {
                return Err(Error::Validation(format!(
                    "irregular spacing between {a} and {b}; absent periods must be explicit missing records"
                )));
            }
        }
        Ok(Self {
            records,
            resolution,
        })
    }

    pub fn empty(resolution: Resolution) -> Self {
        Self {
            records: Vec::new(),
            resolution,
        }
    }

    pub fn records(&self) -> &[LoadRecord] {
        &self.records
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn missing_count(&self) -> usize {
        self.records.iter().filter(|r| r.demand.is_none()).count()
    }

    pub fn first_timestamp(&self) -> Option<NaiveDateTime> {
        self.records.first().map(|r| r.timestamp)
    }

    pub fn last_timestamp(&self) -> Option<NaiveDateTime> {
        self.records.last().map(|r| r.timestamp)
    }

    /// Demand values, failing if any record is missing.
    pub fn demands(&self) -> Result<Vec<f64>> {
        self.records
            .iter()
            .map(|r| {
                r.demand.ok_or_else(|| {
                    Error::Validation(format!(
                        "missing demand at {}; interpolate first",
                        r.timestamp.format(TIMESTAMP_FORMAT)
                    ))
                })
            })
            .collect()
    }

    /// Records with timestamps in `[start, end)`.
    pub fn slice_between(&self, start: NaiveDateTime, end: NaiveDateTime) -> LoadSeries {
        let records = self
            .records
            .iter()
            .filter(|r| r.timestamp >= start && r.timestamp < end)
            .copied()
            .collect();
        LoadSeries {
            records,
            resolution: self.resolution,
        }
    }

    /// Serializes to the CSV schema accepted by [`parse_load_csv`].
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(24 * (self.records.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.timestamp.format(TIMESTAMP_FORMAT).to_string());
            out.push(',');
            if let Some(d) = r.demand {
                out.push_str(&d.to_string());
            }
            out.push('\n');
        }
        out
    }
}

fn check_grid(ts: NaiveDateTime, resolution: Resolution) -> Result<()> {
    if ts.minute() != 0 || ts.second() != 0 || ts.nanosecond() != 0 {
        return Err(Error::Validation(format!("{ts} is not on the hourly grid")));
    }
    if resolution == Resolution::Daily && ts.hour() != 0 {
        return Err(Error::Validation(format!(
            "{ts} is not at midnight in a daily series"
        )));
    }
    Ok(())
}

fn check_demand(d: f64, ts: NaiveDateTime) -> Result<()> {
    if !d.is_finite() || d < 0.0 {
        return Err(Error::Validation(format!(
            "demand at {ts} must be finite and non-negative, got {d}"
        )));
    }
    Ok(())
}

pub fn parse_timestamp(s: &str) -> std::result::Result<NaiveDateTime, chrono::ParseError> {
    NaiveDateTime::parse_from_str(s, TIMESTAMP_FORMAT)
}

/// Parses a load CSV document. The header line is optional.
///
/// Rows are sorted by timestamp. Resolution is inferred: a series whose
/// stamps are all midnight and one day apart is daily, anything else hourly.
pub fn parse_load_csv(text: &str) -> Result<LoadSeries> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut rows: Vec<(usize, LoadRecord)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let raw = raw.trim_end_matches('\r');
        if raw.trim().is_empty() {
            continue;
        }
        if idx == 0 && raw.trim() == CSV_HEADER {
            continue;
        }
        let mut fields = raw.split(',');
        let (ts_field, demand_field) = match (fields.next(), fields.next(), fields.next()) {
            (Some(t), Some(d), None) => (t.trim(), d.trim()),
            _ => {
                return Err(Error::Parse {
                    line,
                    message: format!("expected 2 fields, got {:?}", raw),
                })
            }
        };
        let timestamp = parse_timestamp(ts_field).map_err(|e| Error::Parse {
            line,
            message: format!("malformed timestamp {ts_field:?}: {e}"),
        })?;
        if timestamp.minute() != 0 {
            return Err(Error::Parse {
                line,
                message: format!("timestamp {ts_field:?} is not on the hour"),
            });
        }
        let demand = if demand_field.is_empty() {
            None
        } else {
            let d: f64 = demand_field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("malformed demand {demand_field:?}"),
            })?;
            if !d.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("demand {demand_field:?} is not finite"),
                });
            }
            if d < 0.0 {
                return Err(Error::Validation(format!(
                    "line {line}: negative demand {d} MW"
                )));
            }
            Some(d)
        };
        rows.push((line, LoadRecord { timestamp, demand }));
    }

    rows.sort_by_key(|(_, r)| r.timestamp);
    for pair in rows.windows(2) {
        if pair[0].1.timestamp == pair[1].1.timestamp {
            let line = pair[0].0.max(pair[1].0);
            return Err(Error::Duplicate {
                line,
                timestamp: pair[1].1.timestamp,
            });
        }
    }

    let records: Vec<LoadRecord> = rows.into_iter().map(|(_, r)| r).collect();
    let daily = records.len() >= 2
        && records.iter().all(|r| r.timestamp.hour() == 0)
        && records[1].timestamp - records[0].timestamp == Duration::days(1);
    let resolution = if daily {
        Resolution::Daily
    } else {
        Resolution::Hourly
    };
    LoadSeries::new(records, resolution)
}

/// Fills missing values by linear interpolation between the nearest observed
/// neighbours, rejecting runs longer than [`DEFAULT_MAX_GAP_HOURS`].
pub fn interpolate_missing(series: &LoadSeries) -> Result<LoadSeries> {
    interpolate_missing_with_limit(series, DEFAULT_MAX_GAP_HOURS)
}

pub fn interpolate_missing_with_limit(
    series: &LoadSeries,
    max_gap_hours: i64,
) -> Result<LoadSeries> {
    let recs = series.records();
    if recs.iter().all(|r| r.demand.is_none()) {
        return Err(Error::EmptyData(
            "series has no observed demand values".into(),
        ));
    }
    let first = recs[0];
    let last = recs[recs.len() - 1];
    if first.demand.is_none() {
        return Err(Error::Boundary(first.timestamp));
    }
    if last.demand.is_none() {
        return Err(Error::Boundary(last.timestamp));
    }

    let step_hours = series.resolution().hours();
    let mut out = recs.to_vec();
    let mut i = 0;
    while i < out.len() {
        if out[i].demand.is_some() {
            i += 1;
            continue;
        }
        let left = i - 1;
        let mut right = i;
        while out[right].demand.is_none() {
            right += 1;
        }
        let run = (right - i) as i64;
        if run * step_hours > max_gap_hours {
            return Err(Error::GapTooLong {
                start: out[i].timestamp,
                hours: run * step_hours,
                limit: max_gap_hours,
            });
        }
        let a = out[left].demand.unwrap();
        let b = out[right].demand.unwrap();
        let span = (right - left) as f64;
        for (k, rec) in out.iter_mut().enumerate().take(right).skip(i) {
            let frac = (k - left) as f64 / span;
            rec.demand = Some(a + (b - a) * frac);
        }
        i = right + 1;
    }
    LoadSeries::new(out, series.resolution())
}

/// Averages a gap-free hourly series to one value per calendar day.
/// Partial days at either end are dropped.
pub fn resample_daily(series: &LoadSeries) -> Result<LoadSeries> {
    if series.resolution() != Resolution::Hourly {
        return Err(Error::Resolution {
            expected: Resolution::Hourly,
            found: series.resolution(),
        });
    }
    let demands = series.demands()?;
    let recs = series.records();

    let mut out = Vec::new();
    let mut i = 0;
    while i < recs.len() {
        if recs[i].timestamp.hour() != 0 || i + 24 > recs.len() {
            i += 1;
            continue;
        }
        // Uniform hourly spacing guarantees the next 24 records are the whole day.
        let sum: f64 = demands[i..i + 24].iter().sum();
        out.push(LoadRecord::new(recs[i].timestamp, Some(sum / 24.0)));
        i += 24;
    }
    LoadSeries::new(out, Resolution::Daily)
}

/// Builds a daily series from `(date, value)` pairs.
pub fn daily_series(values: impl IntoIterator<Item = (NaiveDate, f64)>) -> Result<LoadSeries> {
    let records = values
        .into_iter()
        .map(|(d, v)| LoadRecord::new(d.and_hms_opt(0, 0, 0).unwrap(), Some(v)))
        .collect();
    LoadSeries::new(records, Resolution::Daily)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ts(s: &str) -> NaiveDateTime {
        parse_timestamp(s).unwrap()
    }

    fn hourly(start: &str, values: &[Option<f64>]) -> LoadSeries {
        let t0 = ts(start);
        let recs = values
            .iter()
            .enumerate()
            .map(|(k, v)| LoadRecord::new(t0 + Duration::hours(k as i64), *v))
            .collect();
        LoadSeries::new(recs, Resolution::Hourly).unwrap()
    }

    #[test]
    fn parses_minimal_document() {
        let s = parse_load_csv("2019-01-01T00:00,8123.5\n2019-01-01T01:00,7990.0").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.resolution(), Resolution::Hourly);
        assert_eq!(s.records()[0].demand, Some(8123.5));
        assert_eq!(s.records()[1].demand, Some(7990.0));
    }

    #[test]
    fn rejects_half_hour_stamp() {
        let err = parse_load_csv("timestamp,demand_mw\n2019-01-01T00:30,100").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn one_day_with_one_missing_value() {
        let mut doc = String::from("timestamp,demand_mw\r\n");
        for h in 0..24 {
            if h == 13 {
                doc.push_str(&format!("2019-03-04T{h:02}:00,\r\n"));
            } else {
                doc.push_str(&format!("2019-03-04T{h:02}:00,{}\r\n", 5000 + h));
            }
        }
        let s = parse_load_csv(&doc).unwrap();
        assert_eq!(s.len(), 24);
        assert_eq!(s.missing_count(), 1);
        assert_eq!(s.records()[13].demand, None);
    }

    #[test]
    fn sorts_rows_and_reports_duplicates() {
        let s = parse_load_csv("2019-01-01T01:00,2\n2019-01-01T00:00,1\n").unwrap();
        assert_eq!(s.records()[0].demand, Some(1.0));

        let err = parse_load_csv("2019-01-01T00:00,1\n2019-01-01T01:00,2\n2019-01-01T00:00,3\n")
            .unwrap_err();
        assert!(matches!(err, Error::Duplicate { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn negative_demand_is_a_validation_error() {
        let err = parse_load_csv("2019-01-01T00:00,-5\n").unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err:?}");
    }

    #[test]
    fn malformed_timestamp_names_the_line() {
        let err = parse_load_csv("timestamp,demand_mw\n2019-01-01T00:00,1\n2019/01/01 01:00,2\n")
            .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn absent_rows_are_rejected() {
        let err = parse_load_csv("2019-01-01T00:00,1\n2019-01-01T02:00,2\n").unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err:?}");
    }

    #[test]
    fn daily_resolution_is_inferred() {
        let s = parse_load_csv("2019-01-01T00:00,1\n2019-01-02T00:00,2\n").unwrap();
        assert_eq!(s.resolution(), Resolution::Daily);
    }

    #[test]
    fn interpolates_midpoint_and_equal_spacing() {
        let s = hourly("2019-01-01T00:00", &[Some(100.0), None, Some(200.0)]);
        let f = interpolate_missing(&s).unwrap();
        assert_eq!(f.demands().unwrap(), vec![100.0, 150.0, 200.0]);

        let s = hourly("2019-01-01T00:00", &[Some(100.0), None, None, Some(400.0)]);
        let f = interpolate_missing(&s).unwrap();
        assert_eq!(f.demands().unwrap(), vec![100.0, 200.0, 300.0, 400.0]);
    }

    #[test]
    fn interpolation_errors() {
        let s = hourly("2019-01-01T00:00", &[None, Some(1.0)]);
        assert!(matches!(interpolate_missing(&s), Err(Error::Boundary(_))));
        let s = hourly("2019-01-01T00:00", &[Some(1.0), None]);
        assert!(matches!(interpolate_missing(&s), Err(Error::Boundary(_))));
        let s = hourly("2019-01-01T00:00", &[None, None]);
        assert!(matches!(interpolate_missing(&s), Err(Error::EmptyData(_))));

        let mut v = vec![Some(1.0)];
        v.extend(std::iter::repeat_n(None, 73));
        v.push(Some(2.0));
        let s = hourly("2019-01-01T00:00", &v);
        assert!(matches!(
            interpolate_missing(&s),
            Err(Error::GapTooLong { hours: 73, .. })
        ));
        // exactly 72 missing hours is still filled
        v.remove(1);
        assert!(interpolate_missing(&hourly("2019-01-01T00:00", &v)).is_ok());
    }

    #[test]
    fn masked_values_lie_on_the_two_point_line() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 2000;
        let truth: Vec<f64> = (0..n).map(|_| rng.gen_range(3000.0..9000.0)).collect();
        let mut masked: Vec<Option<f64>> = truth.iter().map(|&v| Some(v)).collect();
        for slot in masked.iter_mut().take(n - 1).skip(1) {
            if rng.gen_bool(0.05) {
                *slot = None;
            }
        }
        let s = hourly("2018-06-01T00:00", &masked);
        let f = interpolate_missing(&s).unwrap();
        let recs = f.records();
        for k in 0..n {
            match masked[k] {
                Some(v) => assert_eq!(recs[k].demand, Some(v)),
                None => {
                    let l = (0..k).rev().find(|&j| masked[j].is_some()).unwrap();
                    let r = (k + 1..n).find(|&j| masked[j].is_some()).unwrap();
                    let (t0, t1, t) = (
                        recs[l].timestamp.and_utc().timestamp(),
                        recs[r].timestamp.and_utc().timestamp(),
                        recs[k].timestamp.and_utc().timestamp(),
                    );
                    let (a, b) = (masked[l].unwrap(), masked[r].unwrap());
                    let expected = a + (b - a) * ((t - t0) as f64 / (t1 - t0) as f64);
                    assert_eq!(recs[k].demand, Some(expected), "index {k}");
                }
            }
        }
    }

    #[test]
    fn resample_constant_and_ramp() {
        let s = hourly("2019-01-01T00:00", &[Some(5000.0); 24]);
        let d = resample_daily(&s).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.records()[0].demand, Some(5000.0));
        assert_eq!(d.resolution(), Resolution::Daily);

        let ramp: Vec<Option<f64>> = (0..24).map(|h| Some(h as f64)).collect();
        let d = resample_daily(&hourly("2019-01-01T00:00", &ramp)).unwrap();
        assert_eq!(d.records()[0].demand, Some(11.5));
    }

    #[test]
    fn resample_random_two_days_and_partial_ends() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let vals: Vec<f64> = (0..48).map(|_| rng.gen_range(0.0..10000.0)).collect();
        let opt: Vec<Option<f64>> = vals.iter().map(|&v| Some(v)).collect();
        let d = resample_daily(&hourly("2019-05-01T00:00", &opt)).unwrap();
        assert_eq!(d.len(), 2);
        for day in 0..2 {
            let mut sum = 0.0;
            for v in &vals[day * 24..day * 24 + 24] {
                sum += v;
            }
            let got = d.records()[day].demand.unwrap();
            assert!((got - sum / 24.0).abs() <= 1e-9 * sum.abs());
        }

        // start at 05:00 and run 50 hours: only one complete day survives
        let opt: Vec<Option<f64>> = (0..50).map(|h| Some(h as f64)).collect();
        let d = resample_daily(&hourly("2019-05-01T05:00", &opt)).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.records()[0].timestamp, ts("2019-05-02T00:00"));
    }

    #[test]
    fn resample_rejects_daily_input() {
        let d = daily_series([(NaiveDate::from_ymd_opt(2019, 1, 1).unwrap(), 1.0)]).unwrap();
        assert!(matches!(resample_daily(&d), Err(Error::Resolution { .. })));
    }

    fn series_strategy() -> impl Strategy<Value = Vec<Option<f64>>> {
        prop::collection::vec(
            prop_oneof![
                4 => (0.0f64..1e5).prop_map(Some),
                1 => Just(None),
            ],
            2..200,
        )
        .prop_map(|mut v| {
            let n = v.len();
            v[0] = Some(1000.0);
            v[n - 1] = Some(2000.0);
            v
        })
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_identical(values in series_strategy()) {
            let s = hourly("2020-02-28T20:00", &values);
            let text = s.to_csv();
            let back = parse_load_csv(&text).unwrap();
            prop_assert_eq!(&back, &s);
            prop_assert_eq!(back.to_csv(), text);
        }

        #[test]
        fn interpolation_is_idempotent_and_preserves_observations(values in series_strategy()) {
            let s = hourly("2020-01-01T00:00", &values);
            let once = interpolate_missing(&s).unwrap();
            let twice = interpolate_missing(&once).unwrap();
            prop_assert_eq!(&once, &twice);
            for (a, b) in s.records().iter().zip(once.records()) {
                if let Some(v) = a.demand {
                    prop_assert_eq!(b.demand, Some(v));
                }
            }
        }

        #[test]
        fn daily_mean_within_day_range(start_hour in 0i64..24, values in prop::collection::vec(0.0f64..1e4, 24..120)) {
            let opt: Vec<Option<f64>> = values.iter().map(|&v| Some(v)).collect();
            let t0 = ts("2021-07-01T00:00") + Duration::hours(start_hour);
            let recs = opt.iter().enumerate()
                .map(|(k, v)| LoadRecord::new(t0 + Duration::hours(k as i64), *v)).collect();
            let s = LoadSeries::new(recs, Resolution::Hourly).unwrap();
            let d = resample_daily(&s).unwrap();
            let skip = ((24 - start_hour) % 24) as usize;
            let complete = (values.len() - skip.min(values.len())) / 24;
            prop_assert_eq!(d.len(), complete);
            for (k, rec) in d.records().iter().enumerate() {
                let day = &values[skip + 24 * k..skip + 24 * k + 24];
                let lo = day.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = day.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let m = rec.demand.unwrap();
                prop_assert!(m >= lo - 1e-9 && m <= hi + 1e-9);
            }
        }
    }
}
