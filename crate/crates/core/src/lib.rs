//! Day-ahead hourly air-temperature forecasting for gridded urban sensor data.
//!
//! The crate covers the whole pipeline:
//!
//! - [`data`]: station/grid CSV ingest, geohash cells, missing-ratio filtering,
//!   temporal interpolation, nearest-k spatial averaging and 48+24 hour windowing.
//! - [`lstm`]: a stacked LSTM with a fully connected head, hand-derived
//!   backpropagation through time, Adam, early stopping and checkpoints.
//! - [`baselines`]: persistence, historical average, auto-ARIMA and a
//!   multi-output feed-forward network.
//! - [`eval`]: RMSE/bias scoring, horizon profiles and the experiment drivers.
//! - [`synth`]: a deterministic synthetic city used in place of proprietary data.

pub mod baselines;
pub mod data;
pub mod eval;
pub mod kv;
pub mod lstm;
pub mod rng;
pub mod synth;

pub use data::{Dataset, GridCell, NormStats, Sample, TimeSeries};



/// Length of the input window, in hours.
pub const IN_LEN: usize = 48;
/// Length of the forecast horizon, in hours.
pub const OUT_LEN: usize = 24;
