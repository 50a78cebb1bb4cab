//! TOML configuration shared by the command-line tools.
//!
//! ```toml
//! lookback = 30
//! max_gap_hours = 72
//! weekend = ["Fri", "Sat"]
//! cef_registry = "factors.csv"   # optional; bundled defaults otherwise
//! train_until = "2020-01-01"     # optional; train on dates before this
//!
//! [train]
//! learning_rate = 0.001
//! max_epochs = 200
//!
//! [impact]
//! crossover_run_days = 1
//! ```

use std::path::{Path, PathBuf};

use chrono::{NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::analytics::DEFAULT_WEEKEND;
use crate::emissions::CefRegistry;
use crate::error::{Error, Result};
use crate::features::DEFAULT_LOOKBACK;
use crate::impact::GapOptions;
use crate::lstm::TrainConfig;
use crate::series::DEFAULT_MAX_GAP_HOURS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub lookback: usize,
    pub max_gap_hours: i64,
    pub weekend: Vec<String>,
    pub cef_registry: Option<PathBuf>,
    pub train_until: Option<NaiveDate>,
    pub train: TrainConfig,
    pub impact: GapOptions,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            lookback: DEFAULT_LOOKBACK,
            max_gap_hours: DEFAULT_MAX_GAP_HOURS,
            weekend: DEFAULT_WEEKEND.iter().map(|d| d.to_string()).collect(),
            cef_registry: None,
            train_until: None,
            train: TrainConfig::default(),
            impact: GapOptions::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file. Relative registry paths resolve against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml(&std::fs::read_to_string(path)?)?;
        if let (Some(reg), Some(dir)) = (&cfg.cef_registry, path.parent()) {
            if reg.is_relative() {
                cfg.cef_registry = Some(dir.join(reg));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.lookback == 0 {
            return Err(Error::Config("lookback must be positive".into()));
        }
        if self.max_gap_hours < 0 {
            return Err(Error::Config("max_gap_hours must be non-negative".into()));
        }
        if self.impact.crossover_run_days == 0 {
            return Err(Error::Config(
                "crossover_run_days must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.impact.min_coverage) {
            return Err(Error::Config("min_coverage must be in [0, 1]".into()));
        }
        self.weekend_days()?;
        self.train
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn weekend_days(&self) -> Result<Vec<Weekday>> {
        self.weekend
            .iter()
            .map(|s| {
                s.parse::<Weekday>()
                    .map_err(|_| Error::Config(format!("unknown weekday {s:?}")))
            })
            .collect()
    }

    pub fn registry(&self) -> Result<CefRegistry> {
        match &self.cef_registry {
            Some(path) => CefRegistry::from_csv(&std::fs::read_to_string(path)?),
            None => Ok(CefRegistry::default()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = Config::from_toml("").unwrap();
        assert_eq!(cfg, Config::default());
        assert_eq!(
            cfg.weekend_days().unwrap(),
            vec![Weekday::Fri, Weekday::Sat]
        );
        assert_eq!(cfg.train.learning_rate, 0.001);
    }

    #[test]
    fn overrides() {
        let cfg = Config::from_toml(
            "lookback = 14\nweekend = [\"Sat\", \"Sunday\"]\ntrain_until = \"2020-01-01\"\n\
             [train]\nmax_epochs = 5\nseed = 9\n[impact]\ncrossover_run_days = 3\n",
        )
        .unwrap();
        assert_eq!(cfg.lookback, 14);
        assert_eq!(
            cfg.weekend_days().unwrap(),
            vec![Weekday::Sat, Weekday::Sun]
        );
        assert_eq!(cfg.train.max_epochs, 5);
        assert_eq!(cfg.train.seed, 9);
        assert_eq!(cfg.train.batch_size, 32);
        assert_eq!(cfg.impact.crossover_run_days, 3);
        assert_eq!(cfg.train_until, NaiveDate::from_ymd_opt(2020, 1, 1));
    }

    #[test]
    fn round_trips() {
        let mut cfg = Config::default();
        cfg.train.hidden_size = 8;
        cfg.cef_registry = Some("f.csv".into());
        assert_eq!(Config::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_values() {
        for doc in [
            "lookback = 0",
            "weekend = [\"Funday\"]",
            "unknown_key = 1",
            "[train]\nlearning_rate = -1.0",
            "[impact]\ncrossover_run_days = 0",
            "[train]\nlearning_rat = 0.1",
            "lookback = ",
        ] {
            assert!(
                matches!(Config::from_toml(doc), Err(Error::Config(_))),
                "{doc}"
            );
        }
    }
}
