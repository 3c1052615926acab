//! Forecast scoring, horizon profiles, result tables and the experiment drivers.

pub mod experiment;
pub mod metrics;
pub mod tables;

pub use experiment::{ExperimentConfig, ExperimentData, Recipe};
pub use metrics::{bias, evaluate_model, evaluate_per_station, rmse, ForecastReport, HorizonProfile};
pub use tables::{
    comparison_row, extreme_day_report, sensitivity_row, spatial_error_table, station_means, ComparisonRow,
    DayScore, ExtremeDayReport, HistogramBin, SensitivityRow, SpatialRow,
};

use crate::data::DataError;
use crate::lstm::ModelError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no data for test window {station} at {t0}")]
    MissingWindow { station: String, t0: String },
    #[error("unknown station {0}")]
    UnknownStation(String),
    #[error("nothing to aggregate: {0}")]
    Empty(String),
    #[error("{model} returned {got} values, expected {expected}")]
    ForecastLength { model: String, expected: usize, got: usize },
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
