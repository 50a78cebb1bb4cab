//! Load-forecasting and grid analytics toolkit.
//!
//! Ingests hourly demand series, trains a stacked LSTM forecaster to build
//! counterfactual demand, and reports demand gaps, load profiles, load
//! factors and fuel-mix CO2 emissions.

pub mod analytics;
pub mod config;
pub mod emissions;
pub mod error;
pub mod features;
pub mod impact;
pub mod lstm;
pub mod pipeline;
pub mod series;
pub mod synthetic;

pub use error::{Error, Result};
