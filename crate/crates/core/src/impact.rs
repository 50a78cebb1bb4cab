//! Actual-versus-counterfactual demand comparison by calendar month.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{LoadSeries, Resolution};

/// Inclusive date range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateWindow {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if end < start {
            return Err(Error::Calendar(format!(
                "window end {end} precedes start {start}"
            )));
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        d >= self.start && d <= self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapOptions {
    /// Consecutive days with actual >= forecast needed to call a crossover.
    pub crossover_run_days: usize,
    /// Months whose common coverage falls below this fraction are flagged.
    pub min_coverage: f64,
}

impl Default for GapOptions {
    fn default() -> Self {
        Self {
            crossover_run_days: 1,
            min_coverage: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonthlyGap {
    pub year: i32,
    pub month: u32,
    pub actual_mean: Option<f64>,
    pub forecast_mean: Option<f64>,
    pub gap_percent: Option<f64>,
    /// Dates in the window present in both series.
    pub days_covered: u32,
    pub days_in_month: u32,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactReport {
    pub window: DateWindow,
    pub months: Vec<MonthlyGap>,
    pub crossover_date: Option<NaiveDate>,
}

fn daily_map(series: &LoadSeries) -> Result<BTreeMap<NaiveDate, f64>> {
    if series.resolution() != Resolution::Daily {
        return Err(Error::Resolution {
            expected: Resolution::Daily,
            found: series.resolution(),
        });
    }
    Ok(series
        .records()
        .iter()
        .filter_map(|r| r.demand.map(|d| (r.date(), d)))
        .collect())
}

fn month_length(year: i32, month: u32) -> u32 {
    let first = NaiveDate::from_ymd_opt(year, month, 1).expect("valid month");
    let next = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1)
    }
    .expect("valid month");
    (next - first).num_days() as u32
}

/// Per-month mean levels and percentage gaps of `actual` relative to
/// `forecast` over `window`, using only dates present in both series.
pub fn counterfactual_gap(
    actual: &LoadSeries,
    forecast: &LoadSeries,
    window: DateWindow,
    options: &GapOptions,
) -> Result<ImpactReport> {
    let actual = daily_map(actual)?;
    let forecast = daily_map(forecast)?;

    let common: BTreeMap<NaiveDate, (f64, f64)> = actual
        .iter()
        .filter_map(|(d, &a)| forecast.get(d).map(|&f| (*d, (a, f))))
        .collect();
    if !common.keys().any(|d| window.contains(*d)) {
        return Err(Error::Coverage(format!(
            "actual and forecast share no dates between {} and {}",
            window.start, window.end
        )));
    }

    let mut months = Vec::new();
    let (mut y, mut m) = (window.start.year(), window.start.month());
    while (y, m) <= (window.end.year(), window.end.month()) {
        let (mut sa, mut sf, mut n) = (0.0, 0.0, 0u32);
        for (_, (a, f)) in common
            .iter()
            .filter(|(d, _)| window.contains(**d) && d.year() == y && d.month() == m)
        {
            sa += a;
            sf += f;
            n += 1;
        }
        let days_in_month = month_length(y, m);
        let (actual_mean, forecast_mean, gap_percent) = if n == 0 {
            (None, None, None)
        } else {
            let (am, fm) = (sa / n as f64, sf / n as f64);
            if fm <= 0.0 {
                return Err(Error::Validation(format!(
                    "forecast mean for {y}-{m:02} is {fm}, must be positive"
                )));
            }
            (Some(am), Some(fm), Some(100.0 * (am - fm) / fm))
        };
        months.push(MonthlyGap {
            year: y,
            month: m,
            actual_mean,
            forecast_mean,
            gap_percent,
            days_covered: n,
            days_in_month,
            flagged: (n as f64) < options.min_coverage * days_in_month as f64,
        });
        (y, m) = if m == 12 { (y + 1, 1) } else { (y, m + 1) };
    }

    let crossover_date = find_crossover(&months, &common, options.crossover_run_days.max(1));
    Ok(ImpactReport {
        window,
        months,
        crossover_date,
    })
}

/// First date, from the start of the deepest-gap month onwards, that begins
/// a run of `run` consecutive days with actual >= forecast.
fn find_crossover(
    months: &[MonthlyGap],
    common: &BTreeMap<NaiveDate, (f64, f64)>,
    run: usize,
) -> Option<NaiveDate> {
    let deepest = months
        .iter()
        .filter_map(|mg| mg.gap_percent.map(|g| (g, mg)))
        .fold(None::<(f64, &MonthlyGap)>, |best, (g, mg)| match best {
            Some((bg, _)) if bg <= g => best,
            _ => Some((g, mg)),
        })?
        .1;
    let from = NaiveDate::from_ymd_opt(deepest.year, deepest.month, 1)?;

    let mut run_start: Option<NaiveDate> = None;
    let mut run_len = 0;
    let mut prev: Option<NaiveDate> = None;
    for (&d, &(a, f)) in common.range(from..) {
        let contiguous = prev.is_none_or(|p| p.succ_opt() == Some(d));
        if a >= f && contiguous && run_len > 0 {
            run_len += 1;
        } else if a >= f {
            run_start = Some(d);
            run_len = 1;
        } else {
            run_len = 0;
        }
        if run_len >= run {
            return run_start;
        }
        prev = Some(d);
    }
    None
}

pub const REPORT_CSV_HEADER: &str =
    "month,actual_mean_mw,forecast_mean_mw,gap_percent,days_covered,days_in_month,flagged";

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_default()
}

fn round2(v: Option<f64>) -> Option<f64> {
    v.map(|x| (x * 100.0).round() / 100.0)
}

/// Rendered forms of an [`ImpactReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportDocuments {
    pub csv: String,
    pub json: String,
    pub text: String,
}

pub fn render_report(report: &ImpactReport) -> Result<ReportDocuments> {
    let mut csv = String::from(REPORT_CSV_HEADER);
    csv.push('\n');
    for m in &report.months {
        let _ = writeln!(
            csv,
            "{}-{:02},{},{},{},{},{},{}",
            m.year,
            m.month,
            fmt_opt(m.actual_mean),
            fmt_opt(m.forecast_mean),
            fmt_opt(m.gap_percent),
            m.days_covered,
            m.days_in_month,
            m.flagged
        );
    }

    let rounded = ImpactReport {
        window: report.window,
        months: report
            .months
            .iter()
            .map(|m| MonthlyGap {
                actual_mean: round2(m.actual_mean),
                forecast_mean: round2(m.forecast_mean),
                gap_percent: round2(m.gap_percent),
                ..*m
            })
            .collect(),
        crossover_date: report.crossover_date,
    };
    let json = serde_json::to_string_pretty(&rounded)?;

    let mut text = String::new();
    let _ = writeln!(
        text,
        "Demand gap, {} to {}",
        report.window.start, report.window.end
    );
    let _ = writeln!(
        text,
        "{:<8} {:>14} {:>14} {:>9} {:>9}",
        "month", "actual MW", "forecast MW", "gap %", "coverage"
    );
    for m in &report.months {
        let _ = writeln!(
            text,
            "{:<8} {:>14} {:>14} {:>9} {:>5}/{:<3}{}",
            format!("{}-{:02}", m.year, m.month),
            fmt_opt(m.actual_mean),
            fmt_opt(m.forecast_mean),
            fmt_opt(m.gap_percent),
            m.days_covered,
            m.days_in_month,
            if m.flagged { " *" } else { "" }
        );
    }
    match report.crossover_date {
        Some(d) => {
            let _ = writeln!(text, "crossover: {d}");
        }
        None => text.push_str("crossover: none\n"),
    }

    Ok(ReportDocuments { csv, json, text })
}

/// Reads the month rows back from the CSV form of a report.
pub fn parse_report_csv(text: &str) -> Result<Vec<MonthlyGap>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if idx == 0 {
            if line.trim() != REPORT_CSV_HEADER {
                return Err(Error::Parse {
                    line: 1,
                    message: "unexpected report header".into(),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let perr = |message: String| Error::Parse {
            line: lineno,
            message,
        };
        if f.len() != 7 {
            return Err(perr(format!("expected 7 fields, got {}", f.len())));
        }
        let (y, m) = f[0]
            .split_once('-')
            .ok_or_else(|| perr(format!("bad month {:?}", f[0])))?;
        let num = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse()
                    .map(Some)
                    .map_err(|_| perr(format!("bad number {s:?}")))
            }
        };
        out.push(MonthlyGap {
            year: y.parse().map_err(|_| perr(format!("bad year {y:?}")))?,
            month: m.parse().map_err(|_| perr(format!("bad month {m:?}")))?,
            actual_mean: num(f[1])?,
            forecast_mean: num(f[2])?,
            gap_percent: num(f[3])?,
            days_covered: f[4].parse().map_err(|_| perr("bad days_covered".into()))?,
            days_in_month: f[5].parse().map_err(|_| perr("bad days_in_month".into()))?,
            flagged: f[6].parse().map_err(|_| perr("bad flagged".into()))?,
        });
    }
    Ok(out)
}
