use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Parser, Subcommand};

use loadcast::analytics::{
    generation_delta, hourly_average_profile, load_factor, monthly_energy, weekday_weekend_split,
    yearly_daily_average, ExportDoc, ExportValue,
};
use loadcast::config::Config;
use loadcast::emissions::{emission_report, parse_mix_csv, reports_to_csv, reports_to_json};
use loadcast::impact::{counterfactual_gap, render_report, DateWindow};
use loadcast::lstm::{model_from_json, model_to_json};
use loadcast::pipeline::{fit_forecaster, forecast_after, forecast_through};
use loadcast::series::{
    interpolate_missing_with_limit, parse_load_csv, resample_daily, LoadSeries, Resolution,
};
use loadcast::{Error, Result};

#[derive(Parser)]
#[command(
    name = "loadcast",
    version,
    about = "Load forecasting and grid analytics"
)]
struct Cli {
    /// TOML config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the training seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a load CSV, fill short gaps and write hourly and daily copies.
    Ingest { input: PathBuf },
    /// Train a forecaster on a load CSV (resampled to daily).
    Train { input: PathBuf },
    /// Roll a trained model forward past the end of a history CSV.
    Forecast {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        history: PathBuf,
        /// Number of days to forecast.
        #[arg(long, conflicts_with = "through", required_unless_present = "through")]
        days: Option<usize>,
        /// Forecast through this date (inclusive).
        #[arg(long)]
        through: Option<NaiveDate>,
    },
    /// Load profiles, load factor and monthly energy.
    Analyze {
        #[command(subcommand)]
        what: Analysis,
    },
    /// CO2 emissions for generation mixes.
    Emissions {
        /// CSV with one generation mix per period.
        mix: PathBuf,
    },
    /// Monthly gap between actual and forecast demand.
    Impact {
        #[arg(long)]
        actual: PathBuf,
        #[arg(long)]
        forecast: PathBuf,
        #[arg(long)]
        start: NaiveDate,
        #[arg(long)]
        end: NaiveDate,
    },
}

#[derive(Subcommand)]
enum Analysis {
    /// Mean demand per hour of day for one month.
    Profile {
        input: PathBuf,
        #[arg(long)]
        year: i32,
        #[arg(long)]
        month: u32,
    },
    /// Daily mean demand for one year, also split into weekdays and weekends.
    Yearly {
        input: PathBuf,
        #[arg(long)]
        year: i32,
    },
    /// Average over peak demand for an inclusive date range.
    LoadFactor {
        input: PathBuf,
        #[arg(long)]
        start: NaiveDate,
        #[arg(long)]
        end: NaiveDate,
    },
    /// Monthly energy and the change against the same month a year earlier.
    Energy {
        input: PathBuf,
        #[arg(long)]
        year: i32,
        #[arg(long)]
        month: u32,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        config.train.seed = seed;
    }
    fs::create_dir_all(&cli.out)?;
    let out = Output { dir: cli.out };

    match cli.command {
        Command::Ingest { input } => {
            let raw = read_series(&input)?;
            let clean = interpolate_missing_with_limit(&raw, config.max_gap_hours)?;
            println!(
                "{} records ({:?}), {} missing values filled",
                raw.len(),
                raw.resolution(),
                raw.missing_count()
            );
            match clean.resolution() {
                Resolution::Hourly => {
                    out.write("clean_hourly.csv", &clean.to_csv())?;
                    out.write("daily.csv", &resample_daily(&clean)?.to_csv())?;
                }
                Resolution::Daily => out.write("daily.csv", &clean.to_csv())?,
            }
        }
        Command::Train { input } => {
            let series = training_series(&input, &config)?;
            let (model, report) = fit_forecaster(&series, config.lookback, &config.train)?;
            println!(
                "trained {} epochs on {} days; best epoch {} (validation MSE {:.6})",
                report.epochs.len(),
                series.len(),
                report.best_epoch,
                report.best_val_mse()
            );
            out.write("model.json", &model_to_json(&model)?)?;
            out.write("train_report.csv", &report.to_csv())?;
        }
        Command::Forecast {
            model,
            history,
            days,
            through,
        } => {
            let model = model_from_json(&fs::read_to_string(&model)?)?;
            let history = training_series(&history, &config)?;
            let forecast = match (days, through) {
                (_, Some(end)) => forecast_through(&model, &history, end)?,
                (Some(n), None) => forecast_after(&model, &history, n)?,
                (None, None) => unreachable!("clap requires --days or --through"),
            };
            println!("forecast {} days", forecast.len());
            out.write("forecast.csv", &forecast.to_csv())?;
        }
        Command::Analyze { what } => analyze(what, &config, &out)?,
        Command::Emissions { mix } => {
            let registry = config.registry()?;
            let reports = parse_mix_csv(&fs::read_to_string(&mix)?)?
                .iter()
                .map(|m| emission_report(m, &registry))
                .collect::<Result<Vec<_>>>()?;
            for r in &reports {
                println!("{}: {:.3} kt CO2", r.period, r.total_kt);
            }
            out.write("emissions.csv", &reports_to_csv(&reports))?;
            out.write("emissions.json", &reports_to_json(&reports)?)?;
        }
        Command::Impact {
            actual,
            forecast,
            start,
            end,
        } => {
            let actual = daily_clean(&read_series(&actual)?, &config)?;
            let forecast = daily_clean(&read_series(&forecast)?, &config)?;
            let report = counterfactual_gap(
                &actual,
                &forecast,
                DateWindow::new(start, end)?,
                &config.impact,
            )?;
            let docs = render_report(&report)?;
            print!("{}", docs.text);
            out.write("impact.csv", &docs.csv)?;
            out.write("impact.json", &docs.json)?;
            out.write("impact.txt", &docs.text)?;
        }
    }
    Ok(())
}

fn analyze(what: Analysis, config: &Config, out: &Output) -> Result<()> {
    match what {
        Analysis::Profile { input, year, month } => {
            let series = read_series(&input)?;
            let doc = hourly_average_profile(&series, month, year)?.export();
            out.export(&format!("profile_{year}_{month:02}"), &doc)
        }
        Analysis::Yearly { input, year } => {
            let series = read_series(&input)?;
            let profile = yearly_daily_average(&series, year)?;
            let (weekend, weekday) = weekday_weekend_split(&profile, &config.weekend_days()?);
            println!(
                "{year}: {} days ({} weekday, {} weekend)",
                profile.daily_means.len(),
                weekday.daily_means.len(),
                weekend.daily_means.len()
            );
            out.export(&format!("yearly_{year}"), &profile.export("daily_average"))?;
            out.export(
                &format!("yearly_{year}_weekday"),
                &weekday.export("weekday_average"),
            )?;
            out.export(
                &format!("yearly_{year}_weekend"),
                &weekend.export("weekend_average"),
            )
        }
        Analysis::LoadFactor { input, start, end } => {
            let series = read_series(&input)?;
            let lf = load_factor(&series, start, end)?;
            println!("load factor {start}..{end}: {:.4}", lf.load_factor);
            out.export(&format!("load_factor_{start}_{end}"), &lf.export())
        }
        Analysis::Energy { input, year, month } => {
            let series = read_series(&input)?;
            let this_year = monthly_energy(&series, month, year)?;
            let mut values = vec![ExportValue {
                key: "energy_gwh".into(),
                value: this_year,
            }];
            // The comparison month is optional; report it only when covered.
            match monthly_energy(&series, month, year - 1) {
                Ok(prev) => {
                    let delta = generation_delta(year, month, this_year, prev)?;
                    values.push(ExportValue {
                        key: "previous_year_gwh".into(),
                        value: prev,
                    });
                    values.push(ExportValue {
                        key: "delta_gwh".into(),
                        value: delta.delta,
                    });
                }
                Err(Error::Coverage(_)) => {}
                Err(e) => return Err(e),
            }
            println!("{year}-{month:02}: {this_year:.3} GWh");
            let doc = ExportDoc {
                kind: "monthly_energy".into(),
                period: format!("{year}-{month:02}"),
                values,
            };
            out.export(&format!("energy_{year}_{month:02}"), &doc)
        }
    }
}

fn read_series(path: &Path) -> Result<LoadSeries> {
    parse_load_csv(&fs::read_to_string(path)?)
}

/// Gap-filled daily series; hourly input is averaged per day.
fn daily_clean(series: &LoadSeries, config: &Config) -> Result<LoadSeries> {
    let filled = interpolate_missing_with_limit(series, config.max_gap_hours)?;
    match filled.resolution() {
        Resolution::Hourly => resample_daily(&filled),
        Resolution::Daily => Ok(filled),
    }
}

/// Daily series restricted to dates before `train_until` when configured.
fn training_series(path: &Path, config: &Config) -> Result<LoadSeries> {
    let daily = daily_clean(&read_series(path)?, config)?;
    match config.train_until {
        Some(cut) => {
            let keep = daily.records().partition_point(|r| r.date() < cut);
            LoadSeries::new(daily.records()[..keep].to_vec(), Resolution::Daily)
        }
        None => Ok(daily),
    }
}

struct Output {
    dir: PathBuf,
}

impl Output {
    fn write(&self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents)?;
        println!("wrote {}", path.display());
        Ok(())
    }

    fn export(&self, stem: &str, doc: &ExportDoc) -> Result<()> {
        self.write(&format!("{stem}.csv"), &doc.to_csv())?;
        self.write(&format!("{stem}.json"), &doc.to_json()?)
    }
}
