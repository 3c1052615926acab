use std::fmt;
use std::str::FromStr;

use crate::kv::{KvError, KvMap};

/// What the fully connected head reads from the top LSTM layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadInput {
    /// Hidden state of the final timestep, shape `(hidden,)`.
    LastState,
    /// Hidden states of all timesteps flattened, shape `(in_len * hidden,)`.
    AllSteps,
}

impl fmt::Display for HeadInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HeadInput::LastState => "last",
            HeadInput::AllSteps => "all",
        })
    }
}

impl FromStr for HeadInput {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "last" => Ok(HeadInput::LastState),
            "all" => Ok(HeadInput::AllSteps),
            _ => Err(format!("expected `last` or `all`, got {s:?}")),
        }
    }
}

/// Architecture and training hyperparameters.
///
/// Shared by the LSTM and the FNN baseline; the FNN uses `hidden` as its
/// hidden width and ignores the recurrent-only fields.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub num_layers: usize,
    pub hidden: usize,
    pub in_len: usize,
    pub out_len: usize,
    pub learning_rate: f64,
    /// `None` derives `ceil(samples per station / 8)`.
    pub batch_size: Option<usize>,
    pub max_epochs: usize,
    pub early_stop_factor: f64,
    pub seed: u64,
    pub forget_bias: f64,
    pub head_input: HeadInput,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub train_fraction: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            num_layers: 2,
            hidden: 48,
            in_len: crate::IN_LEN,
            out_len: crate::OUT_LEN,
            learning_rate: 0.005,
            batch_size: None,
            max_epochs: 200,
            early_stop_factor: 10.0,
            seed: 0,
            forget_bias: 1.0,
            head_input: HeadInput::LastState,
            clip_norm: None,
            train_fraction: 0.9,
        }
    }
}

/// Batches per station per epoch when the batch size is derived.
pub const BATCHES_PER_STATION: usize = 8;
/// Clip threshold used when clipping is switched on without a value.
pub const DEFAULT_CLIP_NORM: f64 = 5.0;

pub const CONFIG_KEYS: &[&str] = &[
    "num_layers",
    "hidden",
    "in_len",
    "out_len",
    "learning_rate",
    "batch_size",
    "max_epochs",
    "early_stop_factor",
    "seed",
    "forget_bias",
    "head_input",
    "clip_norm",
    "train_fraction",
];

impl ModelConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.num_layers < 1 {
            return Err("num_layers must be >= 1".into());
        }
        if self.hidden < 1 || self.in_len < 1 || self.out_len < 1 {
            return Err("hidden, in_len and out_len must be >= 1".into());
        }
        if !(self.early_stop_factor > 1.0) {
            return Err("early_stop_factor must be > 1".into());
        }
        if !(self.learning_rate > 0.0) {
            return Err("learning_rate must be > 0".into());
        }
        if self.batch_size == Some(0) {
            return Err("batch_size must be >= 1".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err("train_fraction must be in (0, 1)".into());
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err("clip_norm must be > 0".into());
            }
        }
        Ok(())
    }

    /// Batch size for `n_samples` drawn from `n_stations` stations.
    pub fn resolve_batch_size(&self, n_samples: usize, n_stations: usize) -> usize {
        self.batch_size.unwrap_or_else(|| {
            let per_station = n_samples.div_ceil(n_stations.max(1));
            per_station.div_ceil(BATCHES_PER_STATION).max(1)
        })
    }

    /// Overrides fields present in `kv`; unknown keys are ignored here.
    pub fn apply_kv(&mut self, kv: &KvMap) -> Result<(), KvError> {
        self.num_layers = kv.get_or("num_layers", self.num_layers)?;
        self.hidden = kv.get_or("hidden", self.hidden)?;
        self.in_len = kv.get_or("in_len", self.in_len)?;
        self.out_len = kv.get_or("out_len", self.out_len)?;
        self.learning_rate = kv.get_or("learning_rate", self.learning_rate)?;
        self.max_epochs = kv.get_or("max_epochs", self.max_epochs)?;
        self.early_stop_factor = kv.get_or("early_stop_factor", self.early_stop_factor)?;
        self.seed = kv.get_or("seed", self.seed)?;
        self.forget_bias = kv.get_or("forget_bias", self.forget_bias)?;
        self.head_input = kv.get_or("head_input", self.head_input)?;
        self.train_fraction = kv.get_or("train_fraction", self.train_fraction)?;
        if let Some(v) = kv.get_str("batch_size") {
            self.batch_size = parse_optional(v, "batch_size")?;
        }
        if let Some(v) = kv.get_str("clip_norm") {
            self.clip_norm = parse_optional(v, "clip_norm")?;
        }
        Ok(())
    }

    pub fn from_kv(kv: &KvMap) -> Result<Self, KvError> {
        let mut cfg = Self::default();
        cfg.apply_kv(kv)?;
        Ok(cfg)
    }

    pub fn to_kv(&self) -> KvMap {
        let mut kv = KvMap::new();
        kv.insert("num_layers", self.num_layers);
        kv.insert("hidden", self.hidden);
        kv.insert("in_len", self.in_len);
        kv.insert("out_len", self.out_len);
        kv.insert("learning_rate", self.learning_rate);
        kv.insert("batch_size", fmt_optional(self.batch_size));
        kv.insert("max_epochs", self.max_epochs);
        kv.insert("early_stop_factor", self.early_stop_factor);
        kv.insert("seed", self.seed);
        kv.insert("forget_bias", self.forget_bias);
        kv.insert("head_input", self.head_input);
        kv.insert("clip_norm", fmt_optional(self.clip_norm));
        kv.insert("train_fraction", self.train_fraction);
        kv
    }
}

fn parse_optional<T: FromStr>(v: &str, key: &str) -> Result<Option<T>, KvError>
where
    T::Err: fmt::Display,
{
    if v == "auto" || v == "none" {
        return Ok(None);
    }
    v.parse().map(Some).map_err(|e: T::Err| KvError::Value {
        key: key.into(),
        value: v.into(),
        reason: e.to_string(),
    })
}

fn fmt_optional<T: fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}
