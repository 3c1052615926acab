//! Mini-batch training with Adam and loss-ratio early stopping, shared by
//! every network in the crate.

use std::io::Write;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::adam::{clip_global_norm, AdamState};
use super::ModelError;
use crate::data::{NormStats, Sample};
use crate::rng::SeedTree;

/// Rows per gradient work unit. Fixed so results do not depend on thread count.
const CHUNK_ROWS: usize = 128;

/// A model trainable by [`train`].
pub trait Trainable: Clone + Send + Sync {
    fn predict_batch(&self, inputs: ArrayView2<'_, f64>) -> Result<Array2<f64>, ModelError>;

    /// Loss and gradients for a chunk, each row weighted by `scale`.
    fn loss_and_grad(
        &self,
        inputs: ArrayView2<'_, f64>,
        targets: ArrayView2<'_, f64>,
        scale: f64,
    ) -> Result<(f64, Self), ModelError>;

    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }
}

/// Normalized inputs and targets, one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    pub inputs: Array2<f64>,
    pub targets: Array2<f64>,
}

impl SampleMatrix {
    pub fn from_samples(samples: &[Sample], norm: &NormStats) -> Result<Self, ModelError> {
        let in_len = samples.first().map_or(0, |s| s.input.len());
        let out_len = samples.first().map_or(0, |s| s.target.len());
        if samples.iter().any(|s| s.input.len() != in_len || s.target.len() != out_len) {
            return Err(ModelError::Shape("samples have differing window lengths".into()));
        }
        let inputs = Array2::from_shape_fn((samples.len(), in_len), |(r, c)| norm.normalize(samples[r].input[c]));
        let targets = Array2::from_shape_fn((samples.len(), out_len), |(r, c)| norm.normalize(samples[r].target[c]));
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_factor: f64,
    pub clip_norm: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxEpochs,
    /// Validation loss exceeded the factor times the best loss at this epoch.
    EarlyStop { epoch: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub best_val_loss: f64,
    pub stop: StopReason,
}

impl TrainHistory {
    fn new() -> Self {
        Self {
            epochs: Vec::new(),
            best_epoch: None,
            best_val_loss: f64::INFINITY,
            stop: StopReason::MaxEpochs,
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "epoch,train_loss,val_loss")?;
        for e in &self.epochs {
            writeln!(w, "{},{},{}", e.epoch, e.train_loss, e.val_loss)?;
        }
        Ok(())
    }
}

/// Loss-ratio early stopping: the best loss starts at infinity and training
/// stops on the first epoch whose loss exceeds `factor` times the best so far.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    factor: f64,
    best: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Improved,
    Continue,
    Stop,
}

impl EarlyStopping {
    pub fn new(factor: f64) -> Self {
        Self {
            factor,
            best: f64::INFINITY,
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn observe(&mut self, loss: f64) -> Verdict {
        if loss > self.factor * self.best {
            Verdict::Stop
        } else if loss < self.best {
            self.best = loss;
            Verdict::Improved
        } else {
            Verdict::Continue
        }
    }
}

/// Mean loss over `data` in forward-only chunks.
pub fn evaluate_loss<P: Trainable>(model: &P, data: &SampleMatrix) -> Result<f64, ModelError> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for start in (0..data.len()).step_by(CHUNK_ROWS * 4) {
        let end = (start + CHUNK_ROWS * 4).min(data.len());
        let pred = model.predict_batch(data.inputs.slice(ndarray::s![start..end, ..]))?;
        let tgt = data.targets.slice(ndarray::s![start..end, ..]);
        total += pred.iter().zip(tgt.iter()).map(|(p, y)| (p - y).powi(2)).sum::<f64>();
    }
    Ok(total / data.targets.len() as f64)
}

fn batch_gradient<P: Trainable>(model: &P, data: &SampleMatrix, rows: &[usize]) -> Result<(f64, P), ModelError> {
    let scale = 1.0 / rows.len() as f64;
    let parts: Vec<Result<(f64, P), ModelError>> = rows
        .par_chunks(CHUNK_ROWS)
        .map(|chunk| {
            let x = data.inputs.select(Axis(0), chunk);
            let y = data.targets.select(Axis(0), chunk);
            model.loss_and_grad(x.view(), y.view(), scale)
        })
        .collect();
    let mut parts = parts.into_iter();
    let (mut loss, mut grad) = parts.next().expect("non-empty batch")?;
    for part in parts {
        let (l, g) = part?;
        loss += l;
        grad.add_assign(&g);
    }
    Ok((loss, grad))
}

/// Trains `model` and returns the parameters with the best validation loss.
pub fn train<P: Trainable>(
    model: P,
    train_set: &SampleMatrix,
    val_set: &SampleMatrix,
    opts: &TrainOptions,
) -> Result<(P, TrainHistory), ModelError> {
    train_with_hook(model, train_set, val_set, opts, &mut |_, _| {})
}

/// [`train`] with a hook that sees (and may rewrite) each epoch's losses
/// before the stopping rule is applied.
pub fn train_with_hook<P: Trainable>(
    mut model: P,
    train_set: &SampleMatrix,
    val_set: &SampleMatrix,
    opts: &TrainOptions,
    hook: &mut dyn FnMut(usize, &mut EpochRecord),
) -> Result<(P, TrainHistory), ModelError> {
    if train_set.is_empty() || val_set.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    let batch_size = opts.batch_size.max(1);
    let mut adam = AdamState::new(&model.tensors());
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut rng = SeedTree::new(opts.seed).rng("train-shuffle", 0);
    let mut stopper = EarlyStopping::new(opts.early_stop_factor);
    let mut history = TrainHistory::new();
    let mut best = model.clone();

    let diverged = |epoch: usize, history: &TrainHistory| ModelError::Diverged {
        epoch,
        history: Box::new(history.clone()),
    };

    for epoch in 0..opts.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for rows in order.chunks(batch_size) {
            let (loss, mut grad) = match batch_gradient(&model, train_set, rows) {
                Ok(v) => v,
                Err(ModelError::NonFinite { .. }) => return Err(diverged(epoch, &history)),
                Err(e) => return Err(e),
            };
            if !loss.is_finite() {
                return Err(diverged(epoch, &history));
            }
            total += loss * rows.len() as f64;
            if let Some(max_norm) = opts.clip_norm {
                clip_global_norm(grad.tensors_mut(), max_norm);
            }
            adam.step(model.tensors_mut(), grad.tensors(), opts.learning_rate);
        }
        let val_loss = match evaluate_loss(&model, val_set) {
            Ok(v) => v,
            Err(ModelError::NonFinite { .. }) => f64::NAN,
            Err(e) => return Err(e),
        };
        let mut record = EpochRecord {
            epoch,
            train_loss: total / train_set.len() as f64,
            val_loss,
        };
        hook(epoch, &mut record);
        history.epochs.push(record);
        if !record.train_loss.is_finite() || !record.val_loss.is_finite() {
            return Err(diverged(epoch, &history));
        }
        log::debug!(
            "epoch {epoch}: train {:.6} val {:.6}",
            record.train_loss,
            record.val_loss
        );
        match stopper.observe(record.val_loss) {
            Verdict::Improved => {
                best = model.clone();
                history.best_epoch = Some(epoch);
                history.best_val_loss = record.val_loss;
            }
            Verdict::Continue => {}
            Verdict::Stop => {
                history.stop = StopReason::EarlyStop { epoch };
                break;
            }
        }
    }
    Ok((best, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn early_stopping_rule() {
        let mut es = EarlyStopping::new(10.0);
        assert_eq!(es.observe(1e12), Verdict::Improved);
        assert_eq!(es.observe(1.0), Verdict::Improved);
        assert_eq!(es.observe(5.0), Verdict::Continue);
        assert_eq!(es.observe(10.0), Verdict::Continue);
        assert_eq!(es.observe(10.1), Verdict::Stop);
        assert_eq!(es.best(), 1.0);
    }
}
