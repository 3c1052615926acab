//! Multi-output feed-forward network: one tanh hidden layer, linear outputs.

use ndarray::{linalg::general_mat_mul, Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use crate::data::{NormStats, Sample};
use crate::lstm::checkpoint::{expect_block, Block, Checkpointable, ModelKind};
use crate::lstm::model::{predict_normalized, train_options, training_norm};
use crate::lstm::network::mse_grad;
use crate::lstm::{train, ModelConfig, ModelError, SampleMatrix, Trainable, TrainHistory};
use crate::rng::SeedTree;

#[derive(Debug, Clone, PartialEq)]
pub struct FnnParams {
    /// `(hidden, in_len)`
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    /// `(out_len, hidden)`
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl FnnParams {
    pub fn zeros(in_len: usize, hidden: usize, out_len: usize) -> Self {
        Self {
            w1: Array2::zeros((hidden, in_len)),
            b1: Array1::zeros(hidden),
            w2: Array2::zeros((out_len, hidden)),
            b2: Array1::zeros(out_len),
        }
    }

    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` per layer.
    pub fn random<R: Rng>(in_len: usize, hidden: usize, out_len: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(in_len, hidden, out_len);
        let b1 = 1.0 / (in_len as f64).sqrt();
        let b2 = 1.0 / (hidden as f64).sqrt();
        p.w1.mapv_inplace(|_| rng.random_range(-b1..=b1));
        p.b1.mapv_inplace(|_| rng.random_range(-b1..=b1));
        p.w2.mapv_inplace(|_| rng.random_range(-b2..=b2));
        p.b2.mapv_inplace(|_| rng.random_range(-b2..=b2));
        p
    }

    fn hidden_layer(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>, ModelError> {
        if x.ncols() != self.w1.ncols() {
            return Err(ModelError::InputLength {
                expected: self.w1.ncols(),
                got: x.ncols(),
            });
        }
        let mut z = Array2::zeros((x.nrows(), self.w1.nrows()));
        general_mat_mul(1.0, &x, &self.w1.t(), 0.0, &mut z);
        z += &self.b1;
        z.mapv_inplace(f64::tanh);
        Ok(z)
    }

    fn output(&self, h: &Array2<f64>) -> Result<Array2<f64>, ModelError> {
        let mut y = Array2::zeros((h.nrows(), self.w2.nrows()));
        general_mat_mul(1.0, h, &self.w2.t(), 0.0, &mut y);
        y += &self.b2;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite { timestep: 0 });
        }
        Ok(y)
    }
}

impl Trainable for FnnParams {
    fn predict_batch(&self, inputs: ArrayView2<'_, f64>) -> Result<Array2<f64>, ModelError> {
        let h = self.hidden_layer(inputs)?;
        self.output(&h)
    }

    fn loss_and_grad(
        &self,
        inputs: ArrayView2<'_, f64>,
        targets: ArrayView2<'_, f64>,
        scale: f64,
    ) -> Result<(f64, Self), ModelError> {
        let h = self.hidden_layer(inputs)?;
        let y = self.output(&h)?;
        let loss = scale * y.iter().zip(targets.iter()).map(|(p, t)| (p - t).powi(2)).sum::<f64>()
            / targets.ncols() as f64;
        let dy = mse_grad(y.view(), targets, scale);

        let mut g = Self::zeros(self.w1.ncols(), self.w1.nrows(), self.w2.nrows());
        general_mat_mul(1.0, &dy.t(), &h, 0.0, &mut g.w2);
        g.b2 = dy.sum_axis(Axis(0));
        let mut dz = Array2::zeros(h.raw_dim());
        general_mat_mul(1.0, &dy, &self.w2, 0.0, &mut dz);
        dz.zip_mut_with(&h, |d, &hv| *d *= 1.0 - hv * hv);
        general_mat_mul(1.0, &dz.t(), &inputs, 0.0, &mut g.w1);
        g.b1 = dz.sum_axis(Axis(0));
        Ok((loss, g))
    }

    fn tensors(&self) -> Vec<&[f64]> {
        [&self.w1.as_slice(), &self.b1.as_slice(), &self.w2.as_slice(), &self.b2.as_slice()]
            .into_iter()
            .map(|s| s.expect("standard layout"))
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w1.as_slice_mut().expect("standard layout"),
            self.b1.as_slice_mut().expect("standard layout"),
            self.w2.as_slice_mut().expect("standard layout"),
            self.b2.as_slice_mut().expect("standard layout"),
        ]
    }
}

/// FNN with its normalization. Uses `hidden`, `in_len`, `out_len` and the
/// training fields of `config`; `num_layers` is ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct FnnModel {
    pub config: ModelConfig,
    pub params: FnnParams,
    pub norm: NormStats,
}

impl FnnModel {
    pub fn new(config: ModelConfig) -> Result<Self, ModelError> {
        config.validate().map_err(ModelError::Config)?;
        let mut rng = SeedTree::new(config.seed).rng("fnn-init", 0);
        let params = FnnParams::random(config.in_len, config.hidden, config.out_len, &mut rng);
        Ok(Self {
            config,
            params,
            norm: NormStats::identity(),
        })
    }

    pub fn predict(&self, window: &[f64]) -> Result<Vec<f64>, ModelError> {
        Ok(self.predict_many(&[window])?.pop().expect("one row"))
    }

    pub fn predict_many(&self, windows: &[&[f64]]) -> Result<Vec<Vec<f64>>, ModelError> {
        predict_normalized(windows, self.config.in_len, &self.norm, |x| self.params.predict_batch(x))
    }
}

pub fn train_fnn(
    train_samples: &[Sample],
    val_samples: &[Sample],
    config: &ModelConfig,
    n_stations: usize,
) -> Result<(FnnModel, TrainHistory), ModelError> {
    let mut model = FnnModel::new(config.clone())?;
    if train_samples.is_empty() || val_samples.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    model.norm = training_norm(train_samples)?;
    let train_m = SampleMatrix::from_samples(train_samples, &model.norm)?;
    let val_m = SampleMatrix::from_samples(val_samples, &model.norm)?;
    let opts = train_options(config, train_samples.len(), n_stations);
    let (params, history) = train(model.params.clone(), &train_m, &val_m, &opts)?;
    model.params = params;
    Ok((model, history))
}

impl Checkpointable for FnnModel {
    const KIND: ModelKind = ModelKind::Fnn;

    fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn norm(&self) -> NormStats {
        self.norm
    }

    fn blocks(&self) -> Vec<Block> {
        let p = &self.params;
        vec![
            Block { name: "W1".into(), shape: p.w1.shape().to_vec(), data: p.w1.iter().copied().collect() },
            Block { name: "b1".into(), shape: p.b1.shape().to_vec(), data: p.b1.to_vec() },
            Block { name: "W2".into(), shape: p.w2.shape().to_vec(), data: p.w2.iter().copied().collect() },
            Block { name: "b2".into(), shape: p.b2.shape().to_vec(), data: p.b2.to_vec() },
        ]
    }

    fn from_blocks(config: ModelConfig, norm: NormStats, blocks: Vec<Block>) -> Result<Self, ModelError> {
        config.validate().map_err(ModelError::Config)?;
        let (i, h, o) = (config.in_len, config.hidden, config.out_len);
        let mut it = blocks.into_iter();
        let w1 = expect_block(&mut it, "W1", &[h, i])?;
        let b1 = expect_block(&mut it, "b1", &[h])?;
        let w2 = expect_block(&mut it, "W2", &[o, h])?;
        let b2 = expect_block(&mut it, "b2", &[o])?;
        if it.next().is_some() {
            return Err(ModelError::Checkpoint("corrupt checkpoint: unexpected extra blocks".into()));
        }
        let params = FnnParams {
            w1: Array2::from_shape_vec((h, i), w1).expect("shape checked"),
            b1: Array1::from(b1),
            w2: Array2::from_shape_vec((o, h), w2).expect("shape checked"),
            b2: Array1::from(b2),
        };
        Ok(Self { config, params, norm })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lstm::gradient_check;

    #[test]
    fn zero_model_predicts_output_bias() {
        let mut p = FnnParams::zeros(6, 4, 3);
        p.b2 = Array1::from(vec![1.0, -2.0, 0.5]);
        let y = p.predict_batch(Array2::from_elem((1, 6), 0.7).view()).unwrap();
        assert_eq!(y.row(0).to_vec(), vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = SeedTree::new(11).rng("fnn-test", 0);
        let p = FnnParams::random(6, 5, 3, &mut rng);
        let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = gradient_check(&p, &x, &y, 1e-5).unwrap();
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }

    #[test]
    fn outputs_are_independent_given_hidden_layer() {
        let mut rng = SeedTree::new(2).rng("fnn-test", 1);
        let p = FnnParams::random(6, 5, 3, &mut rng);
        let x = Array2::from_shape_fn((2, 6), |(r, c)| (r * 6 + c) as f64 * 0.1);
        let before = p.predict_batch(x.view()).unwrap();
        let mut q = p.clone();
        q.w2.row_mut(1).fill(0.0);
        q.b2[1] = 0.0;
        let after = q.predict_batch(x.view()).unwrap();
        for r in 0..2 {
            assert_eq!(after[(r, 1)], 0.0);
            assert_eq!(after[(r, 0)], before[(r, 0)]);
            assert_eq!(after[(r, 2)], before[(r, 2)]);
        }
    }
}
