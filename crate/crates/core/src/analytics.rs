//! Descriptive load statistics: hourly-average daily profiles, yearly daily
//! averages, weekday/weekend splits, load factor and monthly energy.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::{Datelike, NaiveDate, Timelike, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{LoadSeries, Resolution};

/// Friday and Saturday, the weekly holidays in Bangladesh.
pub const DEFAULT_WEEKEND: [Weekday; 2] = [Weekday::Fri, Weekday::Sat];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyProfile {
    pub year: i32,
    pub month: u32,
    /// Mean demand (MW) for hours 0..24.
    pub hourly_means: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearlyProfile {
    pub year: i32,
    pub daily_means: Vec<(NaiveDate, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadFactorResult {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub average_load: f64,
    pub peak_load: f64,
    pub load_factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationDelta {
    pub year: i32,
    pub month: u32,
    /// GWh versus the same month of the previous year.
    pub delta: f64,
}

fn require_hourly(series: &LoadSeries) -> Result<()> {
    if series.resolution() != Resolution::Hourly {
        return Err(Error::Resolution {
            expected: Resolution::Hourly,
            found: series.resolution(),
        });
    }
    Ok(())
}

fn check_month(month: u32) -> Result<()> {
    if !(1..=12).contains(&month) {
        return Err(Error::Validation(format!(
            "month must be 1..=12, got {month}"
        )));
    }
    Ok(())
}

fn days_in_month(year: i32, month: u32) -> Result<u32> {
    check_month(month)?;
    let first = NaiveDate::from_ymd_opt(year, month, 1)
        .ok_or_else(|| Error::Calendar(format!("invalid year {year}")))?;
    let next = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1)
    }
    .ok_or_else(|| Error::Calendar(format!("invalid year {year}")))?;
    Ok((next - first).num_days() as u32)
}

/// Mean demand at each hour of the day across one month.
pub fn hourly_average_profile(series: &LoadSeries, month: u32, year: i32) -> Result<DailyProfile> {
    require_hourly(series)?;
    check_month(month)?;
    let mut sums = [0.0f64; 24];
    let mut counts = [0usize; 24];
    for r in series.records() {
        if r.timestamp.year() != year || r.timestamp.month() != month {
            continue;
        }
        if let Some(d) = r.demand {
            let h = r.timestamp.hour() as usize;
            sums[h] += d;
            counts[h] += 1;
        }
    }
    if let Some(h) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Coverage(format!(
            "no observations at hour {h:02}:00 in {year}-{month:02}"
        )));
    }
    Ok(DailyProfile {
        year,
        month,
        hourly_means: sums.iter().zip(counts).map(|(s, c)| s / c as f64).collect(),
    })
}

/// Observed values grouped by calendar date; only days with all 24 hours
/// observed are returned.
fn complete_days(series: &LoadSeries) -> BTreeMap<NaiveDate, Vec<f64>> {
    let mut days: BTreeMap<NaiveDate, Vec<f64>> = BTreeMap::new();
    for r in series.records() {
        if let Some(d) = r.demand {
            days.entry(r.date()).or_default().push(d);
        }
    }
    days.retain(|_, v| v.len() == 24);
    days
}

/// Mean demand for every complete day of `year`.
pub fn yearly_daily_average(series: &LoadSeries, year: i32) -> Result<YearlyProfile> {
    require_hourly(series)?;
    let daily_means: Vec<(NaiveDate, f64)> = complete_days(series)
        .into_iter()
        .filter(|(d, _)| d.year() == year)
        .map(|(d, v)| (d, v.iter().sum::<f64>() / 24.0))
        .collect();
    if daily_means.is_empty() {
        return Err(Error::EmptyData(format!("no complete days in {year}")));
    }
    Ok(YearlyProfile { year, daily_means })
}

/// Partitions a profile into `(weekend, weekday)` entries.
pub fn weekday_weekend_split(
    profile: &YearlyProfile,
    weekend: &[Weekday],
) -> (YearlyProfile, YearlyProfile) {
    let (we, wd): (Vec<_>, Vec<_>) = profile
        .daily_means
        .iter()
        .partition(|(d, _)| weekend.contains(&d.weekday()));
    (
        YearlyProfile {
            year: profile.year,
            daily_means: we,
        },
        YearlyProfile {
            year: profile.year,
            daily_means: wd,
        },
    )
}

/// Average over peak demand for observations dated within `[start, end]`.
pub fn load_factor(
    series: &LoadSeries,
    start: NaiveDate,
    end: NaiveDate,
) -> Result<LoadFactorResult> {
    if end < start {
        return Err(Error::Calendar(format!(
            "period end {end} precedes start {start}"
        )));
    }
    let values: Vec<f64> = series
        .records()
        .iter()
        .filter(|r| r.date() >= start && r.date() <= end)
        .filter_map(|r| r.demand)
        .collect();
    if values.is_empty() {
        return Err(Error::EmptyData(format!(
            "no observations between {start} and {end}"
        )));
    }
    let peak = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if peak <= 0.0 {
        return Err(Error::Validation(format!(
            "peak load must be positive, got {peak} MW"
        )));
    }
    // Summation rounding must not move a flat series off 1.0 or past its peak.
    let average = if values.iter().all(|&v| v == peak) {
        peak
    } else {
        (values.iter().sum::<f64>() / values.len() as f64).min(peak)
    };
    Ok(LoadFactorResult {
        start,
        end,
        average_load: average,
        peak_load: peak,
        load_factor: average / peak,
    })
}

/// Energy delivered in one month, in GWh (MW x 1 h per sample / 1000).
pub fn monthly_energy(series: &LoadSeries, month: u32, year: i32) -> Result<f64> {
    require_hourly(series)?;
    let expected = days_in_month(year, month)? as usize * 24;
    let mut total = 0.0;
    let mut observed = 0usize;
    for r in series.records() {
        if r.timestamp.year() == year && r.timestamp.month() == month {
            if let Some(d) = r.demand {
                total += d;
                observed += 1;
            }
        }
    }
    if observed != expected {
        return Err(Error::Coverage(format!(
            "{year}-{month:02} has {observed} of {expected} hourly observations"
        )));
    }
    Ok(total / 1000.0)
}

pub fn generation_delta(
    year: i32,
    month: u32,
    this_year: f64,
    prev_year: f64,
) -> Result<GenerationDelta> {
    check_month(month)?;
    if !this_year.is_finite() || !prev_year.is_finite() {
        return Err(Error::Validation("energies must be finite".into()));
    }
    Ok(GenerationDelta {
        year,
        month,
        delta: this_year - prev_year,
    })
}

/// `100 * (current - reference) / reference`.
pub fn percent_change(current: f64, reference: f64) -> Result<f64> {
    if reference == 0.0 {
        return Err(Error::Division(
            "percent change against a zero reference".into(),
        ));
    }
    Ok(100.0 * (current - reference) / reference)
}

/// Document shape shared by every analytics export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportDoc {
    pub kind: String,
    pub period: String,
    pub values: Vec<ExportValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportValue {
    pub key: String,
    pub value: f64,
}

impl ExportDoc {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,period,key,value\n");
        for v in &self.values {
            let _ = writeln!(out, "{},{},{},{}", self.kind, self.period, v.key, v.value);
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

impl DailyProfile {
    pub fn export(&self) -> ExportDoc {
        ExportDoc {
            kind: "hourly_profile".into(),
            period: format!("{}-{:02}", self.year, self.month),
            values: self
                .hourly_means
                .iter()
                .enumerate()
                .map(|(h, &v)| ExportValue {
                    key: format!("{h:02}:00"),
                    value: v,
                })
                .collect(),
        }
    }
}

impl YearlyProfile {
    pub fn export(&self, kind: &str) -> ExportDoc {
        ExportDoc {
            kind: kind.into(),
            period: self.year.to_string(),
            values: self
                .daily_means
                .iter()
                .map(|(d, v)| ExportValue {
                    key: d.to_string(),
                    value: *v,
                })
                .collect(),
        }
    }
}

impl LoadFactorResult {
    pub fn export(&self) -> ExportDoc {
        ExportDoc {
            kind: "load_factor".into(),
            period: format!("{}/{}", self.start, self.end),
            values: vec![
                ExportValue {
                    key: "average_load_mw".into(),
                    value: self.average_load,
                },
                ExportValue {
                    key: "peak_load_mw".into(),
                    value: self.peak_load,
                },
                ExportValue {
                    key: "load_factor".into(),
                    value: self.load_factor,
                },
            ],
        }
    }
}
