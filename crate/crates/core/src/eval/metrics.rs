use std::collections::BTreeMap;

use chrono::{DateTime, NaiveDate, Utc};

use super::EvalError;
use crate::baselines::Forecaster;
use crate::data::{format_timestamp, Dataset, TestWindow};

/// Root mean squared error over the whole vector.
pub fn rmse(pred: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(pred.len(), truth.len(), "rmse: length mismatch");
    let sq: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum();
    (sq / pred.len() as f64).sqrt()
}

/// Mean signed error `pred - truth`.
pub fn bias(pred: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(pred.len(), truth.len(), "bias: length mismatch");
    pred.iter().zip(truth).map(|(p, t)| p - t).sum::<f64>() / pred.len() as f64
}

/// One forecast for one (station, test window).
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastReport {
    pub model: String,
    pub station_id: String,
    /// First input hour.
    pub t0: DateTime<Utc>,
    /// Calendar day covered by the target hours.
    pub day: NaiveDate,
    pub prediction: Vec<f64>,
    pub truth: Vec<f64>,
    pub rmse: f64,
    pub bias: f64,
}

impl ForecastReport {
    pub fn new(model: impl Into<String>, window: &TestWindow, prediction: Vec<f64>, truth: Vec<f64>) -> Self {
        let rmse = rmse(&prediction, &truth);
        let bias = bias(&prediction, &truth);
        Self {
            model: model.into(),
            station_id: window.station_id.clone(),
            t0: window.t0,
            day: window.day,
            prediction,
            truth,
            rmse,
            bias,
        }
    }

    pub fn errors(&self) -> impl Iterator<Item = f64> + '_ {
        self.prediction.iter().zip(&self.truth).map(|(p, t)| p - t)
    }
}

/// Per-hour scores over many reports: squared errors are pooled before the root.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonProfile {
    pub rmse: Vec<f64>,
    pub bias: Vec<f64>,
}

impl HorizonProfile {
    pub fn from_reports(reports: &[ForecastReport]) -> Result<Self, EvalError> {
        let len = reports
            .first()
            .ok_or_else(|| EvalError::Empty("horizon profile of no reports".into()))?
            .prediction
            .len();
        let mut sq = vec![0.0; len];
        let mut sum = vec![0.0; len];
        for r in reports {
            if r.prediction.len() != len {
                return Err(EvalError::ForecastLength {
                    model: r.model.clone(),
                    expected: len,
                    got: r.prediction.len(),
                });
            }
            for (h, e) in r.errors().enumerate() {
                sq[h] += e * e;
                sum[h] += e;
            }
        }
        let n = reports.len() as f64;
        Ok(Self {
            rmse: sq.iter().map(|s| (s / n).sqrt()).collect(),
            bias: sum.iter().map(|s| s / n).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.rmse.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rmse.is_empty()
    }
}

fn window_values(dataset: &Dataset, w: &TestWindow, span: usize) -> Result<Vec<f64>, EvalError> {
    let series = dataset
        .get(&w.station_id)
        .ok_or_else(|| EvalError::UnknownStation(w.station_id.clone()))?;
    series.dense_range(w.t0, span).ok_or_else(|| EvalError::MissingWindow {
        station: w.station_id.clone(),
        t0: format_timestamp(w.t0),
    })
}

/// Scores `forecaster` on every test window, in the order given.
pub fn evaluate_model(
    forecaster: &dyn Forecaster,
    tests: &[TestWindow],
    dataset: &Dataset,
    in_len: usize,
    out_len: usize,
) -> Result<Vec<ForecastReport>, EvalError> {
    let label = forecaster.label();
    let values: Vec<Vec<f64>> = tests
        .iter()
        .map(|w| window_values(dataset, w, in_len + out_len))
        .collect::<Result<_, _>>()?;
    let inputs: Vec<&[f64]> = values.iter().map(|v| &v[..in_len]).collect();
    let predictions = forecaster.forecast_batch(&inputs)?;
    tests
        .iter()
        .zip(values.iter().zip(predictions))
        .map(|(w, (v, pred))| {
            if pred.len() != out_len {
                return Err(EvalError::ForecastLength {
                    model: label.clone(),
                    expected: out_len,
                    got: pred.len(),
                });
            }
            Ok(ForecastReport::new(label.clone(), w, pred, v[in_len..].to_vec()))
        })
        .collect()
}

/// Like [`evaluate_model`], with one forecaster per station; reports keep the
/// order of `tests` and are labelled `label`.
pub fn evaluate_per_station(
    label: &str,
    forecasters: &BTreeMap<String, &dyn Forecaster>,
    tests: &[TestWindow],
    dataset: &Dataset,
    in_len: usize,
    out_len: usize,
) -> Result<Vec<ForecastReport>, EvalError> {
    let mut out: Vec<Option<ForecastReport>> = vec![None; tests.len()];
    for (station, f) in forecasters {
        let idx: Vec<usize> = (0..tests.len()).filter(|&i| &tests[i].station_id == station).collect();
        let subset: Vec<TestWindow> = idx.iter().map(|&i| tests[i].clone()).collect();
        for (i, mut r) in idx.into_iter().zip(evaluate_model(*f, &subset, dataset, in_len, out_len)?) {
            r.model = label.to_string();
            out[i] = Some(r);
        }
    }
    out.into_iter()
        .zip(tests)
        .map(|(r, w)| r.ok_or_else(|| EvalError::UnknownStation(w.station_id.clone())))
        .collect()
}
