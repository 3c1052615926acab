use ndarray::{Array2, ArrayView2};

use super::config::ModelConfig;
use super::network::{mse_grad, ForwardCache};
use super::params::LstmParams;
use super::train::{train, SampleMatrix, Trainable, TrainHistory, TrainOptions};
use super::ModelError;
use crate::data::{fit_norm_stats, DataError, NormStats, Sample};
use crate::rng::SeedTree;

impl Trainable for LstmParams {
    fn predict_batch(&self, inputs: ArrayView2<'_, f64>) -> Result<Array2<f64>, ModelError> {
        LstmParams::predict_batch(self, inputs)
    }

    fn loss_and_grad(
        &self,
        inputs: ArrayView2<'_, f64>,
        targets: ArrayView2<'_, f64>,
        scale: f64,
    ) -> Result<(f64, Self), ModelError> {
        let (pred, cache) = self.forward(inputs)?;
        let loss = scale * pred.iter().zip(targets.iter()).map(|(p, y)| (p - y).powi(2)).sum::<f64>()
            / targets.ncols() as f64;
        let d_out = mse_grad(pred.view(), targets, scale);
        Ok((loss, self.backward(&cache, d_out.view())))
    }

    fn tensors(&self) -> Vec<&[f64]> {
        LstmParams::tensors(self)
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        LstmParams::tensors_mut(self)
    }
}

/// Forward pass of one normalized window.
pub fn forward(params: &LstmParams, input: &[f64]) -> Result<(Vec<f64>, ForwardCache), ModelError> {
    let x = Array2::from_shape_vec((1, input.len()), input.to_vec()).expect("row vector");
    let (out, cache) = params.forward(x.view())?;
    Ok((out.into_raw_vec_and_offset().0, cache))
}

/// A trained network together with the normalization it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    pub config: ModelConfig,
    pub params: LstmParams,
    pub norm: NormStats,
}

impl LstmModel {
    /// Freshly initialized model with identity normalization.
    pub fn new(config: ModelConfig) -> Result<Self, ModelError> {
        config.validate().map_err(ModelError::Config)?;
        let mut rng = SeedTree::new(config.seed).rng("lstm-init", 0);
        let params = LstmParams::random(&config, &mut rng);
        Ok(Self {
            config,
            params,
            norm: NormStats::identity(),
        })
    }

    /// Raw temperatures in, raw temperatures out.
    pub fn predict(&self, window: &[f64]) -> Result<Vec<f64>, ModelError> {
        Ok(self.predict_many(&[window])?.pop().expect("one row"))
    }

    pub fn predict_many(&self, windows: &[&[f64]]) -> Result<Vec<Vec<f64>>, ModelError> {
        predict_normalized(windows, self.config.in_len, &self.norm, |x| self.params.predict_batch(x))
    }
}

pub(crate) fn predict_normalized(
    windows: &[&[f64]],
    in_len: usize,
    norm: &NormStats,
    run: impl Fn(ArrayView2<'_, f64>) -> Result<Array2<f64>, ModelError>,
) -> Result<Vec<Vec<f64>>, ModelError> {
    if let Some(w) = windows.iter().find(|w| w.len() != in_len) {
        return Err(ModelError::InputLength {
            expected: in_len,
            got: w.len(),
        });
    }
    let x = Array2::from_shape_fn((windows.len(), in_len), |(r, c)| norm.normalize(windows[r][c]));
    let out = run(x.view())?;
    Ok(out
        .rows()
        .into_iter()
        .map(|row| row.iter().map(|&z| norm.denormalize(z)).collect())
        .collect())
}

/// Normalization for a training run. A constant training set keeps its mean
/// but falls back to unit scale, so degenerate signals remain trainable.
pub fn training_norm(samples: &[Sample]) -> Result<NormStats, ModelError> {
    match fit_norm_stats(samples) {
        Ok(n) => Ok(n),
        Err(DataError::ZeroVariance) => {
            let n: usize = samples.iter().map(|s| s.input.len() + s.target.len()).sum();
            let sum: f64 = samples.iter().flat_map(|s| s.input.iter().chain(&s.target)).sum();
            Ok(NormStats::new(sum / n as f64, 1.0)?)
        }
        Err(e) => Err(e.into()),
    }
}

pub(crate) fn train_options(config: &ModelConfig, n_samples: usize, n_stations: usize) -> TrainOptions {
    TrainOptions {
        learning_rate: config.learning_rate,
        batch_size: config.resolve_batch_size(n_samples, n_stations),
        max_epochs: config.max_epochs,
        early_stop_factor: config.early_stop_factor,
        clip_norm: config.clip_norm,
        seed: SeedTree::new(config.seed).child("train", 0),
    }
}

/// Fits normalization on `train_samples`, then trains a fresh model.
pub fn train_lstm(
    train_samples: &[Sample],
    val_samples: &[Sample],
    config: &ModelConfig,
    n_stations: usize,
) -> Result<(LstmModel, TrainHistory), ModelError> {
    let mut model = LstmModel::new(config.clone())?;
    if train_samples.is_empty() || val_samples.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    model.norm = training_norm(train_samples)?;
    let train_m = SampleMatrix::from_samples(train_samples, &model.norm)?;
    let val_m = SampleMatrix::from_samples(val_samples, &model.norm)?;
    let opts = train_options(config, train_samples.len(), n_stations);
    log::info!(
        "training lstm: {} train / {} val samples, batch {}",
        train_m.len(),
        val_m.len(),
        opts.batch_size
    );
    let (params, history) = train(model.params.clone(), &train_m, &val_m, &opts)?;
    model.params = params;
    Ok((model, history))
}
