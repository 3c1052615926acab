//! Python bindings: scenario generation, baselines, metrics and checkpoint inference.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use urbantemp::baselines::{self, PersistenceVariant};
use urbantemp::data::geohash;
use urbantemp::eval;
use urbantemp::lstm::{load_checkpoint, ModelError, SavedModel};
use urbantemp::synth::{emit_datasets, WeatherScenario};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn model_err(e: ModelError) -> PyErr {
    match e {
        ModelError::Io(io) => PyIOError::new_err(io.to_string()),
        other => value_err(other),
    }
}

/// Writes a synthetic city to `out_dir`; returns the written paths.
///
/// `scenario` is the text of a scenario file; `None` uses the defaults.
#[pyfunction]
#[pyo3(signature = (out_dir, scenario=None, seed=None))]
fn synth(out_dir: PathBuf, scenario: Option<&str>, seed: Option<u64>) -> PyResult<Vec<String>> {
    let mut scen = match scenario {
        Some(text) => WeatherScenario::parse(text).map_err(value_err)?,
        None => WeatherScenario::default(),
    };
    if let Some(s) = seed {
        scen.seed = s;
    }
    let written = emit_datasets(&scen, &out_dir).map_err(|e| PyIOError::new_err(e.to_string()))?;
    Ok(written.into_iter().map(|p| p.display().to_string()).collect())
}

#[pyfunction]
fn rmse(prediction: Vec<f64>, truth: Vec<f64>) -> PyResult<f64> {
    check_pair(&prediction, &truth)?;
    Ok(eval::rmse(&prediction, &truth))
}

#[pyfunction]
fn bias(prediction: Vec<f64>, truth: Vec<f64>) -> PyResult<f64> {
    check_pair(&prediction, &truth)?;
    Ok(eval::bias(&prediction, &truth))
}

fn check_pair(a: &[f64], b: &[f64]) -> PyResult<()> {
    if a.is_empty() || a.len() != b.len() {
        return Err(value_err(format!("need equal non-empty lengths, got {} and {}", a.len(), b.len())));
    }
    Ok(())
}

fn check_window(window: &[f64]) -> PyResult<()> {
    if window.len() != urbantemp::IN_LEN {
        return Err(value_err(format!("window must hold {} hours, got {}", urbantemp::IN_LEN, window.len())));
    }
    Ok(())
}

/// 24-hour persistence forecast; `cycle=True` repeats the last day instead of holding the last hour.
#[pyfunction]
#[pyo3(signature = (window, cycle=false))]
fn persistence(window: Vec<f64>, cycle: bool) -> PyResult<Vec<f64>> {
    check_window(&window)?;
    let variant = if cycle { PersistenceVariant::Cycle } else { PersistenceVariant::Hold };
    Ok(baselines::persistence_forecast(&window, urbantemp::OUT_LEN, variant))
}

#[pyfunction]
fn historical_average(window: Vec<f64>) -> PyResult<Vec<f64>> {
    check_window(&window)?;
    Ok(baselines::historical_average_forecast(&window))
}

/// Auto-ARIMA fitted on `series`, forecasting `horizon` hours; returns `(order, forecast)`.
#[pyfunction]
#[pyo3(signature = (series, horizon=24))]
fn arima(series: Vec<f64>, horizon: usize) -> PyResult<((usize, usize, usize), Vec<f64>)> {
    let model = baselines::arima_auto(&series).map_err(value_err)?;
    let forecast = baselines::arima_forecast(&model, &series, horizon).map_err(value_err)?;
    Ok(((model.order.p, model.order.d, model.order.q), forecast))
}

#[pyfunction]
#[pyo3(signature = (lat, lon, precision=7))]
fn geohash_encode(lat: f64, lon: f64, precision: usize) -> PyResult<String> {
    geohash::encode(lat, lon, precision).map_err(value_err)
}

/// `(center_lat, center_lon, lat_error, lon_error)`.
#[pyfunction]
fn geohash_decode(hash: &str) -> PyResult<(f64, f64, f64, f64)> {
    geohash::decode(hash).map_err(value_err)
}

/// A trained LSTM or FNN loaded from a checkpoint.
#[pyclass(frozen)]
struct Model {
    inner: SavedModel,
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: load_checkpoint(&path).map_err(model_err)?,
        })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner {
            SavedModel::Lstm(_) => "lstm",
            SavedModel::Fnn(_) => "fnn",
        }
    }

    fn predict(&self, window: Vec<f64>) -> PyResult<Vec<f64>> {
        match &self.inner {
            SavedModel::Lstm(m) => m.predict(&window),
            SavedModel::Fnn(m) => m.predict(&window),
        }
        .map_err(model_err)
    }

    fn __repr__(&self) -> String {
        let cfg = match &self.inner {
            SavedModel::Lstm(m) => &m.config,
            SavedModel::Fnn(m) => &m.config,
        };
        format!(
            "Model(kind={:?}, layers={}, hidden={}, in_len={}, out_len={})",
            self.kind(),
            cfg.num_layers,
            cfg.hidden,
            cfg.in_len,
            cfg.out_len
        )
    }
}

#[pymodule]
fn urbantemp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("IN_LEN", urbantemp::IN_LEN)?;
    m.add("OUT_LEN", urbantemp::OUT_LEN)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(rmse, m)?)?;
    m.add_function(wrap_pyfunction!(bias, m)?)?;
    m.add_function(wrap_pyfunction!(persistence, m)?)?;
    m.add_function(wrap_pyfunction!(historical_average, m)?)?;
    m.add_function(wrap_pyfunction!(arima, m)?)?;
    m.add_function(wrap_pyfunction!(geohash_encode, m)?)?;
    m.add_function(wrap_pyfunction!(geohash_decode, m)?)?;
    m.add_class::<Model>()?;
    Ok(())
}
