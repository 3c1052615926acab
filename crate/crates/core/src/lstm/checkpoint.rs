//! Versioned binary checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "UTMPCKPT"
//! version    u32
//! header     u32 length + UTF-8 `key = value` text (kind, config, seed, norm stats)
//! blocks     u32 count, then per block:
//!              u16 name length + name, u8 rank, u64 per dimension,
//!              f64 values in row-major order
//! checksum   32-byte SHA-256 of every preceding byte
//! ```
//!
//! LSTM blocks come per layer as `W_f, W_i, W_C, W_o, b_f, b_i, b_C, b_o`,
//! then the head `fc.W`, `fc.b`. FNN blocks are `W1, b1, W2, b2`.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::config::ModelConfig;
use super::params::{Gate, LstmParams};
use super::{LstmModel, ModelError};
use crate::baselines::fnn::FnnModel;
use crate::data::NormStats;
use crate::kv::KvMap;

pub const MAGIC: &[u8; 8] = b"UTMPCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Lstm,
    Fnn,
}

impl ModelKind {
    pub fn tag(self) -> &'static str {
        match self {
            ModelKind::Lstm => "lstm",
            ModelKind::Fnn => "fnn",
        }
    }
}

/// A named parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Models that can be written to a checkpoint.
pub trait Checkpointable: Sized {
    const KIND: ModelKind;
    fn config(&self) -> &ModelConfig;
    fn norm(&self) -> NormStats;
    fn blocks(&self) -> Vec<Block>;
    fn from_blocks(config: ModelConfig, norm: NormStats, blocks: Vec<Block>) -> Result<Self, ModelError>;
}

#[derive(Debug, Clone, PartialEq)]
pub enum SavedModel {
    Lstm(LstmModel),
    Fnn(FnnModel),
}

pub fn encode<M: Checkpointable>(model: &M) -> Vec<u8> {
    let mut header = model.config().to_kv();
    header.insert("kind", M::KIND.tag());
    header.insert("norm_mean", model.norm().mean);
    header.insert("norm_std", model.norm().std);
    let header = header.to_string();
    let blocks = model.blocks();

    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
    buf.extend_from_slice(header.as_bytes());
    buf.extend_from_slice(&(blocks.len() as u32).to_le_bytes());
    for block in &blocks {
        buf.extend_from_slice(&(block.name.len() as u16).to_le_bytes());
        buf.extend_from_slice(block.name.as_bytes());
        buf.push(block.shape.len() as u8);
        for &d in &block.shape {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in &block.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    buf
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| corrupt("truncated"))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, ModelError> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, ModelError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }
    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

fn corrupt(msg: &str) -> ModelError {
    ModelError::Checkpoint(format!("corrupt checkpoint: {msg}"))
}

pub fn decode(bytes: &[u8]) -> Result<SavedModel, ModelError> {
    if bytes.len() < MAGIC.len() + 4 + 32 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(corrupt("bad magic or truncated"));
    }
    let mut cur = Cursor {
        buf: bytes,
        pos: MAGIC.len(),
    };
    let version = cur.u32()?;
    if version != FORMAT_VERSION {
        return Err(ModelError::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let (payload, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(payload).as_slice() != digest {
        return Err(corrupt("checksum mismatch"));
    }
    cur.buf = payload;

    let header_len = cur.u32()? as usize;
    let header = std::str::from_utf8(cur.take(header_len)?).map_err(|_| corrupt("header is not UTF-8"))?;
    let header = KvMap::parse(header).map_err(|e| corrupt(&e.to_string()))?;
    let config = ModelConfig::from_kv(&header).map_err(|e| corrupt(&e.to_string()))?;
    let mean: f64 = header.get("norm_mean").ok().flatten().ok_or_else(|| corrupt("missing norm_mean"))?;
    let std: f64 = header.get("norm_std").ok().flatten().ok_or_else(|| corrupt("missing norm_std"))?;
    let norm = NormStats::new(mean, std).map_err(|_| corrupt("invalid norm stats"))?;

    let n_blocks = cur.u32()? as usize;
    let mut blocks = Vec::with_capacity(n_blocks.min(1024));
    for _ in 0..n_blocks {
        let name_len = cur.u16()? as usize;
        let name = String::from_utf8(cur.take(name_len)?.to_vec()).map_err(|_| corrupt("block name"))?;
        let rank = cur.u8()? as usize;
        let shape = (0..rank).map(|_| cur.u64().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        let count: usize = shape.iter().product();
        let raw = cur.take(count.checked_mul(8).ok_or_else(|| corrupt("block size"))?)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        blocks.push(Block { name, shape, data });
    }
    if cur.pos != payload.len() {
        return Err(corrupt("trailing bytes"));
    }
    match header.get_str("kind") {
        Some("lstm") => Ok(SavedModel::Lstm(LstmModel::from_blocks(config, norm, blocks)?)),
        Some("fnn") => Ok(SavedModel::Fnn(FnnModel::from_blocks(config, norm, blocks)?)),
        other => Err(corrupt(&format!("unknown model kind {other:?}"))),
    }
}

pub fn save_checkpoint<M: Checkpointable>(model: &M, path: &Path) -> Result<(), ModelError> {
    fs::write(path, encode(model))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<SavedModel, ModelError> {
    decode(&fs::read(path)?)
}

/// Pops the next block, checking its name and shape.
pub(crate) fn expect_block(
    blocks: &mut std::vec::IntoIter<Block>,
    name: &str,
    shape: &[usize],
) -> Result<Vec<f64>, ModelError> {
    let block = blocks.next().ok_or_else(|| corrupt(&format!("missing block {name}")))?;
    if block.name != name || block.shape != shape {
        return Err(corrupt(&format!(
            "expected block {name} {shape:?}, found {} {:?}",
            block.name, block.shape
        )));
    }
    if block.data.iter().any(|v| !v.is_finite()) {
        return Err(corrupt(&format!("non-finite values in {name}")));
    }
    Ok(block.data)
}

impl Checkpointable for LstmModel {
    const KIND: ModelKind = ModelKind::Lstm;

    fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn norm(&self) -> NormStats {
        self.norm
    }

    fn blocks(&self) -> Vec<Block> {
        self.params
            .named_blocks()
            .into_iter()
            .map(|(name, shape, data)| Block { name, shape, data })
            .collect()
    }

    fn from_blocks(config: ModelConfig, norm: NormStats, blocks: Vec<Block>) -> Result<Self, ModelError> {
        config.validate().map_err(ModelError::Config)?;
        let mut params = LstmParams::zeros(&config);
        let mut it = blocks.into_iter();
        let hidden = config.hidden;
        for (l, layer) in params.layers.iter_mut().enumerate() {
            let cols = hidden + layer.input_size;
            for gate in Gate::ALL {
                let data = expect_block(&mut it, &format!("layer{l}.W_{}", gate.suffix()), &[hidden, cols])?;
                layer
                    .gate_weights_mut(gate)
                    .assign(&ndarray::ArrayView2::from_shape((hidden, cols), &data).expect("shape checked"));
            }
            for gate in Gate::ALL {
                let data = expect_block(&mut it, &format!("layer{l}.b_{}", gate.suffix()), &[hidden])?;
                layer
                    .gate_bias_mut(gate)
                    .assign(&ndarray::ArrayView1::from(&data[..]));
            }
        }
        let (rows, cols) = params.head.weights.dim();
        let w = expect_block(&mut it, "fc.W", &[rows, cols])?;
        params.head.weights = ndarray::Array2::from_shape_vec((rows, cols), w).expect("shape checked");
        let b = expect_block(&mut it, "fc.b", &[rows])?;
        params.head.bias = ndarray::Array1::from(b);
        if it.next().is_some() {
            return Err(corrupt("unexpected extra blocks"));
        }
        Ok(LstmModel { config, params, norm })
    }
}
