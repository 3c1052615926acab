//! Comparison predictors. Every predictor maps a 48-hour window to a 24-hour forecast.

pub mod arima;
pub mod fnn;
pub mod simple;

use rayon::prelude::*;

pub use arima::{
    arima_auto, arima_auto_with, arima_fit, arima_forecast, ArimaError, ArimaForecaster, ArimaModel, ArimaOrder,
    InformationCriterion,
};
pub use fnn::{train_fnn, FnnModel, FnnParams};
pub use simple::{historical_average_forecast, persistence_forecast, HistoricalAverage, Persistence, PersistenceVariant};

use crate::lstm::{LstmModel, ModelError};

/// Anything that turns raw 48-hour windows into raw 24-hour forecasts.
pub trait Forecaster: Sync {
    /// Short label used in result tables.
    fn label(&self) -> String;

    fn forecast(&self, window: &[f64]) -> Result<Vec<f64>, ModelError>;

    fn forecast_batch(&self, windows: &[&[f64]]) -> Result<Vec<Vec<f64>>, ModelError> {
        windows.par_iter().map(|w| self.forecast(w)).collect()
    }
}

impl Forecaster for LstmModel {
    fn label(&self) -> String {
        "lstm".into()
    }

    fn forecast(&self, window: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.predict(window)
    }

    fn forecast_batch(&self, windows: &[&[f64]]) -> Result<Vec<Vec<f64>>, ModelError> {
        let parts: Vec<_> = windows.par_chunks(64).map(|c| self.predict_many(c)).collect();
        let mut out = Vec::with_capacity(windows.len());
        for part in parts {
            out.extend(part?);
        }
        Ok(out)
    }
}

impl Forecaster for FnnModel {
    fn label(&self) -> String {
        "fnn".into()
    }

    fn forecast(&self, window: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.predict(window)
    }

    fn forecast_batch(&self, windows: &[&[f64]]) -> Result<Vec<Vec<f64>>, ModelError> {
        self.predict_many(windows)
    }
}

/// Wraps a forecaster under a different table label.
pub struct Labeled<'a> {
    pub label: String,
    pub inner: &'a dyn Forecaster,
}

impl Forecaster for Labeled<'_> {
    fn label(&self) -> String {
        self.label.clone()
    }

    fn forecast(&self, window: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.inner.forecast(window)
    }

    fn forecast_batch(&self, windows: &[&[f64]]) -> Result<Vec<Vec<f64>>, ModelError> {
        self.inner.forecast_batch(windows)
    }
}
