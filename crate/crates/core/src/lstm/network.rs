//! Batched forward pass and backpropagation through time for the stacked network.

use ndarray::{linalg::general_mat_mul, s, Array2, ArrayView2, Axis};

use super::cell::{step, StepCache};
use super::config::HeadInput;
use super::params::LstmParams;
use super::ModelError;

/// Everything the backward pass needs from a forward call.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `steps[layer][t]`
    pub steps: Vec<Vec<StepCache>>,
    pub head_in: Array2<f64>,
    pub output: Array2<f64>,
}

impl LstmParams {
    fn check_input(&self, inputs: ArrayView2<'_, f64>) -> Result<(), ModelError> {
        if inputs.ncols() != self.in_len {
            return Err(ModelError::InputLength {
                expected: self.in_len,
                got: inputs.ncols(),
            });
        }
        Ok(())
    }

    fn run(&self, inputs: ArrayView2<'_, f64>, keep: bool) -> Result<(Array2<f64>, Option<ForwardCache>), ModelError> {
        self.check_input(inputs)?;
        let batch = inputs.nrows();
        let hidden = self.hidden();
        let steps_n = self.in_len;

        let mut steps: Vec<Vec<StepCache>> = Vec::with_capacity(if keep { self.layers.len() } else { 0 });
        // Layer input sequence; starts as the scalar series.
        let mut seq: Vec<Array2<f64>> = (0..steps_n)
            .map(|t| inputs.slice(s![.., t..t + 1]).to_owned())
            .collect();
        for layer in &self.layers {
            let mut h = Array2::zeros((batch, hidden));
            let mut c = Array2::zeros((batch, hidden));
            let mut layer_cache = Vec::with_capacity(if keep { steps_n } else { 0 });
            let mut outputs = Vec::with_capacity(steps_n);
            for (t, x) in seq.iter().enumerate() {
                let (h_next, c_next, cache) = step(layer, x.view(), h.view(), c.view())?;
                if !h_next.iter().chain(c_next.iter()).all(|v| v.is_finite()) {
                    return Err(ModelError::NonFinite { timestep: t });
                }
                h = h_next;
                c = c_next;
                outputs.push(h.clone());
                if keep {
                    layer_cache.push(cache);
                }
            }
            if keep {
                steps.push(layer_cache);
            }
            seq = outputs;
        }

        let head_in = match self.head_input {
            HeadInput::LastState => seq.pop().expect("in_len >= 1"),
            HeadInput::AllSteps => {
                let views: Vec<ArrayView2<'_, f64>> = seq.iter().map(|a| a.view()).collect();
                ndarray::concatenate(Axis(1), &views).expect("equal rows")
            }
        };
        let mut output = head_in.dot(&self.head.weights.t());
        output += &self.head.bias.view().insert_axis(Axis(0));
        if !output.iter().all(|v| v.is_finite()) {
            return Err(ModelError::NonFinite { timestep: steps_n });
        }
        let cache = keep.then(|| ForwardCache {
            steps,
            head_in,
            output: output.clone(),
        });
        Ok((output, cache))
    }

    /// Forward pass over a batch of normalized windows, shape `(batch, in_len)`.
    pub fn forward(&self, inputs: ArrayView2<'_, f64>) -> Result<(Array2<f64>, ForwardCache), ModelError> {
        let (out, cache) = self.run(inputs, true)?;
        Ok((out, cache.expect("cache requested")))
    }

    /// Forward pass without keeping intermediates.
    pub fn predict_batch(&self, inputs: ArrayView2<'_, f64>) -> Result<Array2<f64>, ModelError> {
        Ok(self.run(inputs, false)?.0)
    }

    /// Gradients of a loss with `d_out = dL/d(output)` through the cached forward pass.
    pub fn backward(&self, cache: &ForwardCache, d_out: ArrayView2<'_, f64>) -> LstmParams {
        let mut grads = self.zeros_like();
        let batch = d_out.nrows();
        let hidden = self.hidden();
        let steps_n = self.in_len;

        general_mat_mul(1.0, &d_out.t(), &cache.head_in, 0.0, &mut grads.head.weights);
        grads.head.bias = d_out.sum_axis(Axis(0));
        let d_head_in = d_out.dot(&self.head.weights);

        // Gradient flowing into each timestep's output from above.
        let mut d_above: Vec<Option<Array2<f64>>> = vec![None; steps_n];
        match self.head_input {
            HeadInput::LastState => d_above[steps_n - 1] = Some(d_head_in),
            HeadInput::AllSteps => {
                for (t, slot) in d_above.iter_mut().enumerate() {
                    *slot = Some(d_head_in.slice(s![.., t * hidden..(t + 1) * hidden]).to_owned());
                }
            }
        }

        for (l, layer) in self.layers.iter().enumerate().rev() {
            let grad = &mut grads.layers[l];
            let mut d_below: Vec<Option<Array2<f64>>> = vec![None; steps_n];
            let mut dh_next = Array2::<f64>::zeros((batch, hidden));
            let mut dc_next = Array2::<f64>::zeros((batch, hidden));
            let mut d_pre = Array2::<f64>::zeros((batch, 4 * hidden));
            for t in (0..steps_n).rev() {
                let sc = &cache.steps[l][t];
                if let Some(d) = &d_above[t] {
                    dh_next += d;
                }
                for b in 0..batch {
                    let g = sc.gates.row(b);
                    let g = g.as_slice().expect("row-major");
                    let mut dp = d_pre.row_mut(b);
                    let dp = dp.as_slice_mut().expect("row-major");
                    for j in 0..hidden {
                        let f = g[j];
                        let i = g[hidden + j];
                        let cand = g[2 * hidden + j];
                        let o = g[3 * hidden + j];
                        let tc = sc.tanh_c[[b, j]];
                        let dh = dh_next[[b, j]];
                        let dc = dc_next[[b, j]] + dh * o * (1.0 - tc * tc);
                        let d_o = dh * tc;
                        let d_f = dc * sc.c_prev[[b, j]];
                        let d_i = dc * cand;
                        let d_cand = dc * i;
                        dc_next[[b, j]] = dc * f;
                        dp[j] = d_f * f * (1.0 - f);
                        dp[hidden + j] = d_i * i * (1.0 - i);
                        dp[2 * hidden + j] = d_cand * (1.0 - cand * cand);
                        dp[3 * hidden + j] = d_o * o * (1.0 - o);
                    }
                }
                general_mat_mul(1.0, &d_pre.t(), &sc.z, 1.0, &mut grad.weights);
                grad.bias += &d_pre.sum_axis(Axis(0));
                let dz = d_pre.dot(&layer.weights);
                dh_next = dz.slice(s![.., ..hidden]).to_owned();
                if l > 0 {
                    d_below[t] = Some(dz.slice(s![.., hidden..]).to_owned());
                }
            }
            d_above = d_below;
        }
        grads
    }

    pub fn zeros_like(&self) -> LstmParams {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }
}

/// Mean over rows of the per-row mean squared error.
pub fn mse_loss(pred: ArrayView2<'_, f64>, target: ArrayView2<'_, f64>) -> f64 {
    let n = pred.len();
    if n == 0 {
        return 0.0;
    }
    pred.iter().zip(target.iter()).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / n as f64
}

/// Per-vector MSE.
pub fn mse(pred: &[f64], target: &[f64]) -> f64 {
    assert_eq!(pred.len(), target.len(), "mse: length mismatch");
    pred.iter().zip(target).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / pred.len() as f64
}

/// `dL/d(pred)` of the batch-mean MSE, scaled by `scale`.
pub fn mse_grad(pred: ArrayView2<'_, f64>, target: ArrayView2<'_, f64>, scale: f64) -> Array2<f64> {
    let k = 2.0 * scale / pred.ncols() as f64;
    (&pred - &target).mapv(|d| d * k)
}
