//! One LSTM timestep, batched over rows.
//!
//! ```text
//! f_t = sigmoid(W_f [h_{t-1}, x_t] + b_f)
//! i_t = sigmoid(W_i [h_{t-1}, x_t] + b_i)
//! C~_t = tanh(W_C [h_{t-1}, x_t] + b_C)
//! C_t = f_t * C_{t-1} + i_t * C~_t
//! o_t = sigmoid(W_o [h_{t-1}, x_t] + b_o)
//! h_t = o_t * tanh(C_t)
//! ```

use ndarray::{s, Array2, ArrayView2, Axis};

use super::params::LstmLayerParams;
use super::ModelError;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Intermediates of one step, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct StepCache {
    /// `[h_{t-1}, x_t]`, shape `(batch, hidden + input)`.
    pub z: Array2<f64>,
    /// Activated gates `[f, i, C~, o]`, shape `(batch, 4 * hidden)`.
    pub gates: Array2<f64>,
    pub c_prev: Array2<f64>,
    pub tanh_c: Array2<f64>,
}

/// Runs one step for a batch and returns `(h_t, C_t, cache)`.
pub fn step(
    layer: &LstmLayerParams,
    x: ArrayView2<'_, f64>,
    h_prev: ArrayView2<'_, f64>,
    c_prev: ArrayView2<'_, f64>,
) -> Result<(Array2<f64>, Array2<f64>, StepCache), ModelError> {
    let hidden = layer.hidden;
    let batch = x.nrows();
    if x.ncols() != layer.input_size
        || h_prev.dim() != (batch, hidden)
        || c_prev.dim() != (batch, hidden)
    {
        return Err(ModelError::Shape(format!(
            "cell expects x (b, {}), h/C (b, {hidden}); got x {:?}, h {:?}, C {:?}",
            layer.input_size,
            x.dim(),
            h_prev.dim(),
            c_prev.dim()
        )));
    }

    let mut z = Array2::zeros((batch, hidden + layer.input_size));
    z.slice_mut(s![.., ..hidden]).assign(&h_prev);
    z.slice_mut(s![.., hidden..]).assign(&x);

    let mut gates = z.dot(&layer.weights.t());
    gates += &layer.bias.view().insert_axis(Axis(0));

    let mut c = Array2::zeros((batch, hidden));
    let mut tanh_c = Array2::zeros((batch, hidden));
    let mut h = Array2::zeros((batch, hidden));
    for b in 0..batch {
        let mut row = gates.row_mut(b);
        let g = row.as_slice_mut().expect("row-major");
        let (f, rest) = g.split_at_mut(hidden);
        let (i, rest) = rest.split_at_mut(hidden);
        let (cand, o) = rest.split_at_mut(hidden);
        for j in 0..hidden {
            f[j] = sigmoid(f[j]);
            i[j] = sigmoid(i[j]);
            cand[j] = cand[j].tanh();
            o[j] = sigmoid(o[j]);
            let cj = f[j] * c_prev[[b, j]] + i[j] * cand[j];
            let tc = cj.tanh();
            c[[b, j]] = cj;
            tanh_c[[b, j]] = tc;
            h[[b, j]] = o[j] * tc;
        }
    }

    let cache = StepCache {
        z,
        gates,
        c_prev: c_prev.to_owned(),
        tanh_c,
    };
    Ok((h, c, cache))
}

/// Single-vector form of [`step`].
pub fn lstm_cell_forward(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    layer: &LstmLayerParams,
) -> Result<(Vec<f64>, Vec<f64>, StepCache), ModelError> {
    let row = |v: &[f64]| Array2::from_shape_vec((1, v.len()), v.to_vec()).expect("row vector");
    let (h, c, cache) = step(layer, row(x).view(), row(h_prev).view(), row(c_prev).view())?;
    Ok((h.into_raw_vec_and_offset().0, c.into_raw_vec_and_offset().0, cache))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lstm::params::Gate;
    use crate::rng::SeedTree;

    #[test]
    fn zero_cell_outputs_zero() {
        let layer = LstmLayerParams::zeros(1, 4);
        let (h, c, cache) = lstm_cell_forward(&[0.0], &[0.0; 4], &[0.0; 4], &layer).unwrap();
        assert_eq!(h, vec![0.0; 4]);
        assert_eq!(c, vec![0.0; 4]);
        // f, i, o at 0.5 and candidate at 0.
        assert_eq!(cache.gates.row(0).to_vec(), [vec![0.5; 8], vec![0.0; 4], vec![0.5; 4]].concat());
    }

    #[test]
    fn saturated_forget_gate_keeps_cell() {
        let mut layer = LstmLayerParams::zeros(1, 3);
        layer.gate_bias_mut(Gate::Forget).fill(20.0);
        let c_prev = [0.7, -1.3, 2.0];
        let (_, c, _) = lstm_cell_forward(&[0.0], &[0.0; 3], &c_prev, &layer).unwrap();
        for (a, b) in c.iter().zip(&c_prev) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn shape_mismatch() {
        let layer = LstmLayerParams::zeros(2, 3);
        assert!(matches!(
            lstm_cell_forward(&[0.0], &[0.0; 3], &[0.0; 3], &layer),
            Err(ModelError::Shape(_))
        ));
    }

    #[test]
    fn gates_bounded() {
        let mut rng = SeedTree::new(11).rng("t", 0);
        let mut layer = LstmLayerParams::random(2, 5, 1.0, &mut rng);
        layer.weights.mapv_inplace(|w| w * 3.0);
        let (h, _, cache) = lstm_cell_forward(&[3.0, -4.0], &[0.9; 5], &[5.0; 5], &layer).unwrap();
        assert!(h.iter().all(|v| v.abs() < 1.0));
        let g = cache.gates.row(0);
        for (j, &v) in g.iter().enumerate() {
            if (10..15).contains(&j) {
                assert!(v > -1.0 && v < 1.0);
            } else {
                assert!(v > 0.0 && v < 1.0);
            }
        }
    }
}
