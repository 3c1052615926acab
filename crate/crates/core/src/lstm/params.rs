use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;

use super::config::{HeadInput, ModelConfig};

/// The four gate blocks, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Forget = 0,
    Input = 1,
    Candidate = 2,
    Output = 3,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Forget, Gate::Input, Gate::Candidate, Gate::Output];

    pub fn suffix(self) -> &'static str {
        match self {
            Gate::Forget => "f",
            Gate::Input => "i",
            Gate::Candidate => "C",
            Gate::Output => "o",
        }
    }
}

/// Weights of one LSTM layer.
///
/// `weights` stacks `W_f, W_i, W_C, W_o` row-wise; each block has shape
/// `(hidden, hidden + input)` and multiplies the concatenation `[h_{t-1}, x_t]`.
/// `bias` stacks `b_f, b_i, b_C, b_o` the same way.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayerParams {
    pub input_size: usize,
    pub hidden: usize,
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl LstmLayerParams {
    pub fn zeros(input_size: usize, hidden: usize) -> Self {
        Self {
            input_size,
            hidden,
            weights: Array2::zeros((4 * hidden, hidden + input_size)),
            bias: Array1::zeros(4 * hidden),
        }
    }

    /// Uniform weights in `[-1/sqrt(hidden), 1/sqrt(hidden)]`; forget-gate bias set to `forget_bias`.
    pub fn random<R: Rng>(input_size: usize, hidden: usize, forget_bias: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(input_size, hidden);
        let bound = 1.0 / (hidden as f64).sqrt();
        p.weights.mapv_inplace(|_| rng.random_range(-bound..=bound));
        p.bias.mapv_inplace(|_| rng.random_range(-bound..=bound));
        p.bias.slice_mut(s![0..hidden]).fill(forget_bias);
        p
    }

    pub fn gate_weights(&self, gate: Gate) -> ArrayView2<'_, f64> {
        let h = self.hidden;
        let g = gate as usize;
        self.weights.slice(s![g * h..(g + 1) * h, ..])
    }

    pub fn gate_bias(&self, gate: Gate) -> ArrayView1<'_, f64> {
        let h = self.hidden;
        let g = gate as usize;
        self.bias.slice(s![g * h..(g + 1) * h])
    }

    pub fn gate_bias_mut(&mut self, gate: Gate) -> ndarray::ArrayViewMut1<'_, f64> {
        let h = self.hidden;
        let g = gate as usize;
        self.bias.slice_mut(s![g * h..(g + 1) * h])
    }

    pub fn gate_weights_mut(&mut self, gate: Gate) -> ndarray::ArrayViewMut2<'_, f64> {
        let h = self.hidden;
        let g = gate as usize;
        self.weights.slice_mut(s![g * h..(g + 1) * h, ..])
    }
}

/// Fully connected output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct FcParams {
    /// `(out_len, head input size)`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl FcParams {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weights: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn random<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let mut p = Self::zeros(inputs, outputs);
        p.weights.mapv_inplace(|_| rng.random_range(-bound..=bound));
        p.bias.mapv_inplace(|_| rng.random_range(-bound..=bound));
        p
    }
}

/// Stacked LSTM layers plus the FC head. Also used to hold gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub in_len: usize,
    pub head_input: HeadInput,
    pub layers: Vec<LstmLayerParams>,
    pub head: FcParams,
}

impl LstmParams {
    pub fn zeros(config: &ModelConfig) -> Self {
        let layers = (0..config.num_layers)
            .map(|l| LstmLayerParams::zeros(if l == 0 { 1 } else { config.hidden }, config.hidden))
            .collect();
        Self {
            in_len: config.in_len,
            head_input: config.head_input,
            layers,
            head: FcParams::zeros(head_size(config), config.out_len),
        }
    }

    pub fn random<R: Rng>(config: &ModelConfig, rng: &mut R) -> Self {
        let layers = (0..config.num_layers)
            .map(|l| {
                let input = if l == 0 { 1 } else { config.hidden };
                LstmLayerParams::random(input, config.hidden, config.forget_bias, rng)
            })
            .collect();
        Self {
            in_len: config.in_len,
            head_input: config.head_input,
            layers,
            head: FcParams::random(head_size(config), config.out_len, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.layers[0].hidden
    }

    pub fn out_len(&self) -> usize {
        self.head.bias.len()
    }

    /// Parameter tensors in checkpoint order: per layer `W_f, W_i, W_C, W_o,
    /// b_f, b_i, b_C, b_o`; then FC `W`, `b`.
    pub fn named_blocks(&self) -> Vec<(String, Vec<usize>, Vec<f64>)> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            for gate in Gate::ALL {
                let w = layer.gate_weights(gate);
                out.push((
                    format!("layer{l}.W_{}", gate.suffix()),
                    w.shape().to_vec(),
                    w.iter().copied().collect(),
                ));
            }
            for gate in Gate::ALL {
                let b = layer.gate_bias(gate);
                out.push((
                    format!("layer{l}.b_{}", gate.suffix()),
                    b.shape().to_vec(),
                    b.to_vec(),
                ));
            }
        }
        out.push((
            "fc.W".into(),
            self.head.weights.shape().to_vec(),
            self.head.weights.iter().copied().collect(),
        ));
        out.push(("fc.b".into(), self.head.bias.shape().to_vec(), self.head.bias.to_vec()));
        out
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(2 * self.layers.len() + 2);
        for layer in &self.layers {
            out.push(layer.weights.as_slice().expect("standard layout"));
            out.push(layer.bias.as_slice().expect("standard layout"));
        }
        out.push(self.head.weights.as_slice().expect("standard layout"));
        out.push(self.head.bias.as_slice().expect("standard layout"));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(2 * self.layers.len() + 2);
        for layer in &mut self.layers {
            out.push(layer.weights.as_slice_mut().expect("standard layout"));
            out.push(layer.bias.as_slice_mut().expect("standard layout"));
        }
        out.push(self.head.weights.as_slice_mut().expect("standard layout"));
        out.push(self.head.bias.as_slice_mut().expect("standard layout"));
        out
    }
}

pub(crate) fn head_size(config: &ModelConfig) -> usize {
    match config.head_input {
        HeadInput::LastState => config.hidden,
        HeadInput::AllSteps => config.hidden * config.in_len,
    }
}
