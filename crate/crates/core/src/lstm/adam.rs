/// Adam moment estimates for a list of parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(shapes: &[&[f64]]) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: shapes.iter().map(|t| vec![0.0; t.len()]).collect(),
            v: shapes.iter().map(|t| vec![0.0; t.len()]).collect(),
            step_count: 0,
        }
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: Vec<&[f64]>, lr: f64) {
        assert_eq!(params.len(), self.m.len(), "adam: tensor count mismatch");
        assert_eq!(grads.len(), self.m.len(), "adam: tensor count mismatch");
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            assert_eq!(p.len(), g.len(), "adam: shape mismatch");
            for k in 0..p.len() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g[k];
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g[k] * g[k];
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                p[k] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
    }
}

/// Rescales `grads` so their joint L2 norm is at most `max_norm`; returns the norm before clipping.
pub fn clip_global_norm(grads: Vec<&mut [f64]>, max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .flat_map(|g| g.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let k = max_norm / norm;
        for g in grads {
            g.iter_mut().for_each(|x| *x *= k);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = vec![1.0, -2.0, 3.0];
        let g = vec![0.0; 3];
        let mut adam = AdamState::new(&[&p]);
        for _ in 0..5 {
            adam.step(vec![&mut p], vec![&g], 0.1);
        }
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
        assert!(adam.m[0].iter().chain(&adam.v[0]).all(|&x| x == 0.0));
        assert_eq!(adam.step_count, 5);
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        let g = vec![0.3, -2.0, 1e-3];
        let mut p = vec![0.0; 3];
        let mut adam = AdamState::new(&[&p]);
        adam.step(vec![&mut p], vec![&g], 0.01);
        // Bias correction makes m_hat = g and v_hat = g^2 on step one.
        for (x, gk) in p.iter().zip(&g) {
            let expected = -0.01 * gk / (gk.abs() + 1e-8);
            assert!((x - expected).abs() < 1e-15, "{x} vs {expected}");
            assert!((x + 0.01 * gk.signum()).abs() < 1e-7);
        }
    }

    #[test]
    fn constant_gradient_step_approaches_lr() {
        let g = vec![0.5, -4.0];
        let mut p = vec![0.0; 2];
        let mut adam = AdamState::new(&[&p]);
        let mut prev = p.clone();
        for _ in 0..2000 {
            adam.step(vec![&mut p], vec![&g], 1e-3);
            for k in 0..2 {
                let step = (p[k] - prev[k]).abs();
                assert!((step - 1e-3).abs() < 1e-9);
            }
            prev = p.clone();
        }
        assert!(adam.v[0].iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn clipping() {
        let mut a = vec![3.0];
        let mut b = vec![4.0];
        let n = clip_global_norm(vec![&mut a, &mut b], 1.0);
        assert_eq!(n, 5.0);
        assert!((a[0] - 0.6).abs() < 1e-15 && (b[0] - 0.8).abs() < 1e-15);
        let mut c = vec![0.1];
        clip_global_norm(vec![&mut c], 1.0);
        assert_eq!(c, vec![0.1]);
    }
}
