//! ARIMA(p, d, q) by conditional sum of squares, with exhaustive AICc order search.
//!
//! After `d`-fold differencing `w` follows
//! `w_t = c + sum_i phi_i w_{t-i} + e_t + sum_j theta_j e_{t-j}`,
//! where the intercept `c` is only estimated when `d = 0`. Residuals are
//! conditioned on the first `p` observations with pre-sample shocks set to zero.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::Forecaster;
use crate::lstm::ModelError;
use crate::OUT_LEN;

pub const MAX_P: usize = 3;
pub const MAX_D: usize = 2;
pub const MAX_Q: usize = 3;
const MAX_ITER: usize = 200;
/// Order search discards fits with an inverse AR or MA root above this modulus.
const MAX_SEARCH_ROOT: f64 = 0.99;
/// Lag-1 autocorrelation at or above which another difference is taken.
const UNIT_ROOT_ACF: f64 = 0.99;
/// Reflection coefficients must stay this far inside the unit circle.
const BOUNDARY_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ArimaOrder {
    pub const fn new(p: usize, d: usize, q: usize) -> Self {
        Self { p, d, q }
    }

    /// Shortest series this order may be fitted to.
    pub fn min_len(&self) -> usize {
        10 * (self.p + self.q + self.d + 1) + 1
    }
}

impl fmt::Display for ArimaOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.p, self.d, self.q)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ArimaError {
    #[error("ARIMA{order} needs more than {} points, got {got}", .needed - 1)]
    InsufficientData { order: ArimaOrder, needed: usize, got: usize },
    #[error("ARIMA{order} did not converge in {iterations} iterations")]
    NonConvergence { order: ArimaOrder, iterations: usize },
    #[error("ARIMA{order} estimate is not stationary")]
    NonStationary { order: ArimaOrder },
    #[error("ARIMA{order} estimate is not invertible")]
    NonInvertible { order: ArimaOrder },
    #[error("series contains non-finite values")]
    NonFinite,
    #[error("no candidate order could be fitted")]
    NoCandidate,
    #[error("forecast needs at least {needed} trailing values, got {got}")]
    ShortHistory { needed: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArimaModel {
    pub order: ArimaOrder,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub intercept: f64,
    pub sigma2: f64,
    /// Conditional sum of squares at the optimum.
    pub css: f64,
    /// Number of residuals entering `css`.
    pub n_eff: usize,
    /// Leading differenced points the objective was conditioned on.
    pub n_cond: usize,
}

impl ArimaModel {
    /// Estimated coefficients, intercept included when fitted.
    pub fn n_coeffs(&self) -> usize {
        self.order.p + self.order.q + usize::from(self.order.d == 0)
    }

    /// Small-sample corrected AIC; `sigma2` counts as a parameter.
    pub fn aicc(&self) -> f64 {
        let n = self.n_eff as f64;
        let k = (self.n_coeffs() + 1) as f64;
        if n - k - 1.0 <= 0.0 {
            return f64::INFINITY;
        }
        n * self.sigma2.ln() + 2.0 * k + 2.0 * k * (k + 1.0) / (n - k - 1.0)
    }

    /// Schwarz criterion on the same footing as [`ArimaModel::aicc`].
    pub fn bic(&self) -> f64 {
        let n = self.n_eff as f64;
        let k = (self.n_coeffs() + 1) as f64;
        n * self.sigma2.ln() + k * n.ln()
    }

    pub fn criterion(&self, ic: InformationCriterion) -> f64 {
        match ic {
            InformationCriterion::Aicc => self.aicc(),
            InformationCriterion::Bic => self.bic(),
        }
    }

    /// Residuals of `series` under this model, one per differenced point
    /// (the first `p` are zero by conditioning).
    pub fn residuals(&self, series: &[f64]) -> Vec<f64> {
        let w = difference(series, self.order.d);
        let beta = self.beta();
        let spec = Spec::conditioned(self.order, self.n_cond);
        residuals(&w, &spec, &beta)
    }

    fn beta(&self) -> Vec<f64> {
        let mut b = Vec::with_capacity(self.n_coeffs());
        if self.order.d == 0 {
            b.push(self.intercept);
        }
        b.extend(&self.ar);
        b.extend(&self.ma);
        b
    }
}

/// Order-selection criterion for [`arima_auto_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InformationCriterion {
    #[default]
    Aicc,
    Bic,
}

/// `d`-fold first differences.
pub fn difference(series: &[f64], d: usize) -> Vec<f64> {
    let mut w = series.to_vec();
    for _ in 0..d {
        w = w.windows(2).map(|p| p[1] - p[0]).collect();
    }
    w
}

fn variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n
}

/// Lag-1 sample autocorrelation; zero for a constant series.
pub fn acf1(x: &[f64]) -> f64 {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    let den: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
    if den == 0.0 {
        return 0.0;
    }
    x.windows(2).map(|p| (p[0] - m) * (p[1] - m)).sum::<f64>() / den
}

/// True when all roots of `1 - sum a_i z^i` lie outside the unit circle,
/// checked through the step-down (reflection coefficient) recursion.
pub fn is_stationary(a: &[f64]) -> bool {
    let mut a = a.to_vec();
    while let Some(&k) = a.last() {
        if !k.is_finite() || k.abs() >= 1.0 - BOUNDARY_MARGIN {
            return false;
        }
        let p = a.len();
        let denom = 1.0 - k * k;
        a = (0..p - 1).map(|i| (a[i] + k * a[p - 2 - i]) / denom).collect();
    }
    true
}

/// Largest modulus among the inverse roots of `1 - sum a_i z^i`
/// (the eigenvalues of its companion matrix); zero for an empty polynomial.
pub fn max_inverse_root(a: &[f64]) -> f64 {
    let p = a.len();
    if p == 0 {
        return 0.0;
    }
    let companion = DMatrix::from_fn(p, p, |r, c| if r == 0 { a[c] } else if r == c + 1 { 1.0 } else { 0.0 });
    companion
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// True when all roots of `1 + sum b_j z^j` lie outside the unit circle.
pub fn is_invertible(b: &[f64]) -> bool {
    is_stationary(&b.iter().map(|v| -v).collect::<Vec<_>>())
}

/// Parameter layout `[c?, phi_1..p, theta_1..q]`.
struct Spec {
    p: usize,
    q: usize,
    with_c: bool,
    /// Residuals start at this index; at least `p`.
    n_cond: usize,
}

impl Spec {
    fn conditioned(order: ArimaOrder, n_cond: usize) -> Self {
        Self {
            p: order.p,
            q: order.q,
            with_c: order.d == 0,
            n_cond: n_cond.max(order.p),
        }
    }

    fn k(&self) -> usize {
        self.p + self.q + usize::from(self.with_c)
    }

    fn split<'a>(&self, beta: &'a [f64]) -> (f64, &'a [f64], &'a [f64]) {
        let off = usize::from(self.with_c);
        let c = if self.with_c { beta[0] } else { 0.0 };
        (c, &beta[off..off + self.p], &beta[off + self.p..])
    }

    fn valid(&self, beta: &[f64]) -> bool {
        let (_, ar, ma) = self.split(beta);
        beta.iter().all(|v| v.is_finite()) && is_stationary(ar) && is_invertible(ma)
    }
}

fn residuals(w: &[f64], spec: &Spec, beta: &[f64]) -> Vec<f64> {
    let (c, ar, ma) = spec.split(beta);
    let mut e = vec![0.0; w.len()];
    for t in spec.n_cond..w.len() {
        let mut v = w[t] - c;
        for (i, phi) in ar.iter().enumerate() {
            v -= phi * w[t - 1 - i];
        }
        for (j, theta) in ma.iter().enumerate() {
            if t > j {
                v -= theta * e[t - 1 - j];
            }
        }
        e[t] = v;
    }
    e
}

/// Residuals and their Jacobian with respect to `beta`, rows `p..n`.
fn residuals_and_jacobian(w: &[f64], spec: &Spec, beta: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let n = w.len();
    let k = spec.k();
    let (_, _, ma) = spec.split(beta);
    let e = residuals(w, spec, beta);
    let off = usize::from(spec.with_c);
    let mut jac = DMatrix::zeros(n, k);
    for t in spec.n_cond..n {
        for col in 0..k {
            let mut v = if spec.with_c && col == 0 {
                -1.0
            } else if col < off + spec.p {
                -w[t - 1 - (col - off)]
            } else {
                let j = col - off - spec.p;
                if t > j {
                    -e[t - 1 - j]
                } else {
                    0.0
                }
            };
            for (j, theta) in ma.iter().enumerate() {
                if t > j {
                    v -= theta * jac[(t - 1 - j, col)];
                }
            }
            jac[(t, col)] = v;
        }
    }
    let rows = n - spec.n_cond;
    (e[spec.n_cond..].to_vec(), jac.rows(spec.n_cond, rows).into_owned())
}

fn sum_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Starting point: least squares of `w_t` on its own lags, MA terms zero.
fn initial_beta(w: &[f64], spec: &Spec) -> Vec<f64> {
    let mut beta = vec![0.0; spec.k()];
    let rows = w.len() - spec.n_cond;
    let cols = spec.p + usize::from(spec.with_c);
    if cols > 0 {
        let x = DMatrix::from_fn(rows, cols, |r, col| {
            let t = r + spec.n_cond;
            if spec.with_c && col == 0 {
                1.0
            } else {
                w[t - 1 - (col - usize::from(spec.with_c))]
            }
        });
        let y = DVector::from_fn(rows, |r, _| w[r + spec.n_cond]);
        let xtx = x.transpose() * &x;
        if let Some(chol) = xtx.cholesky() {
            let sol = chol.solve(&(x.transpose() * y));
            beta[..cols].copy_from_slice(sol.as_slice());
        } else if spec.with_c {
            beta[0] = w.iter().sum::<f64>() / w.len() as f64;
        }
    }
    // Pull an explosive AR start back inside the stationary region.
    let off = usize::from(spec.with_c);
    let mut shrink = 0;
    while !is_stationary(&beta[off..off + spec.p]) && shrink < 200 {
        for v in &mut beta[off..off + spec.p] {
            *v *= 0.9;
        }
        shrink += 1;
    }
    if !is_stationary(&beta[off..off + spec.p]) {
        beta[off..off + spec.p].fill(0.0);
    }
    beta
}

/// Fits `order` to `series` by minimizing the conditional sum of squares
/// with a Levenberg–Marquardt damped Gauss–Newton iteration restricted to the
/// stationary and invertible region.
pub fn arima_fit(series: &[f64], order: ArimaOrder) -> Result<ArimaModel, ArimaError> {
    arima_fit_conditioned(series, order, order.p)
}

/// [`arima_fit`] with the first `n_cond` differenced points (at least `p`)
/// held out of the objective, so orders fitted with the same `n_cond` share
/// one residual sample and their AICc values are comparable.
pub fn arima_fit_conditioned(series: &[f64], order: ArimaOrder, n_cond: usize) -> Result<ArimaModel, ArimaError> {
    if order.p > MAX_P || order.d > MAX_D || order.q > MAX_Q {
        return Err(ArimaError::NoCandidate);
    }
    if series.len() < order.min_len() {
        return Err(ArimaError::InsufficientData {
            order,
            needed: order.min_len(),
            got: series.len(),
        });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(ArimaError::NonFinite);
    }
    let w = difference(series, order.d);
    let spec = Spec::conditioned(order, n_cond);
    if w.len() <= spec.n_cond + spec.k() {
        return Err(ArimaError::InsufficientData {
            order,
            needed: series.len() + 1,
            got: series.len(),
        });
    }
    let mut beta = initial_beta(&w, &spec);
    let (mut e, mut jac) = residuals_and_jacobian(&w, &spec, &beta);
    let mut css = sum_sq(&e);

    if spec.k() > 0 {
        let mut lambda = 1e-3;
        let mut converged = false;
        for _ in 0..MAX_ITER {
            let jt = jac.transpose();
            let a = &jt * &jac;
            let g = &jt * DVector::from_column_slice(&e);
            let mut accepted = None;
            while lambda <= 1e12 {
                let mut damped = a.clone();
                for i in 0..damped.nrows() {
                    damped[(i, i)] += lambda * a[(i, i)].max(1e-12);
                }
                let Some(delta) = damped.cholesky().map(|c| c.solve(&(-&g))) else {
                    lambda *= 10.0;
                    continue;
                };
                let cand: Vec<f64> = beta.iter().zip(delta.iter()).map(|(b, d)| b + d).collect();
                if spec.valid(&cand) {
                    let cand_e = residuals(&w, &spec, &cand);
                    let cand_css = sum_sq(&cand_e[spec.n_cond..]);
                    if cand_css <= css {
                        accepted = Some((cand, cand_css, delta.norm()));
                        break;
                    }
                }
                lambda *= 10.0;
            }
            let Some((cand, cand_css, step)) = accepted else {
                // No damped step improves the objective: at a (constrained) minimum.
                converged = true;
                break;
            };
            let gain = css - cand_css;
            let scale = 1.0 + beta.iter().map(|v| v * v).sum::<f64>().sqrt();
            beta = cand;
            (e, jac) = residuals_and_jacobian(&w, &spec, &beta);
            css = cand_css;
            lambda = (lambda / 10.0).max(1e-12);
            if gain <= 1e-12 * css.max(f64::MIN_POSITIVE) || step <= 1e-10 * scale {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(ArimaError::NonConvergence {
                order,
                iterations: MAX_ITER,
            });
        }
    }

    let (c, ar, ma) = spec.split(&beta);
    if !is_stationary(ar) {
        return Err(ArimaError::NonStationary { order });
    }
    if !is_invertible(ma) {
        return Err(ArimaError::NonInvertible { order });
    }
    let n_eff = w.len() - spec.n_cond;
    Ok(ArimaModel {
        order,
        ar: ar.to_vec(),
        ma: ma.to_vec(),
        intercept: c,
        sigma2: css / n_eff as f64,
        css,
        n_eff,
        n_cond: spec.n_cond,
    })
}

/// Differencing order from repeated lag-1 autocorrelation tests.
pub fn select_d(series: &[f64]) -> usize {
    let mut w = series.to_vec();
    let mut d = 0;
    while d < MAX_D && w.len() > 2 && variance(&w) > 0.0 && acf1(&w).abs() >= UNIT_ROOT_ACF {
        w = difference(&w, 1);
        d += 1;
    }
    d
}

/// Chooses `d` by differencing tests, then `(p, q)` by minimum AICc over every
/// order the series is long enough for, all conditioned on the same leading
/// points. Fits with an AR or MA root within 0.01 of the unit circle are
/// skipped. Ties prefer smaller `p + q`, then smaller `p`.
pub fn arima_auto(series: &[f64]) -> Result<ArimaModel, ArimaError> {
    arima_auto_with(series, InformationCriterion::Aicc)
}

/// [`arima_auto`] with a choice of selection criterion.
pub fn arima_auto_with(series: &[f64], ic: InformationCriterion) -> Result<ArimaModel, ArimaError> {
    if series.iter().any(|v| !v.is_finite()) {
        return Err(ArimaError::NonFinite);
    }
    if series.len() < 2 || variance(series) == 0.0 {
        return arima_fit(series, ArimaOrder::new(0, 1, 0));
    }
    let d = select_d(series);
    if variance(&difference(series, d)) == 0.0 {
        return arima_fit(series, ArimaOrder::new(0, d, 0));
    }
    let candidates: Vec<ArimaOrder> = (0..=MAX_P)
        .flat_map(|p| (0..=MAX_Q).map(move |q| ArimaOrder::new(p, d, q)))
        .filter(|o| series.len() >= o.min_len())
        .collect();
    let n_cond = candidates.iter().map(|o| o.p).max().unwrap_or(0);
    let mut best: Option<ArimaModel> = None;
    for order in candidates {
        {
            let Ok(model) = arima_fit_conditioned(series, order, n_cond) else {
                continue;
            };
            let neg_ma: Vec<f64> = model.ma.iter().map(|v| -v).collect();
            if max_inverse_root(&model.ar) > MAX_SEARCH_ROOT || max_inverse_root(&neg_ma) > MAX_SEARCH_ROOT {
                continue;
            }
            let better = match &best {
                None => true,
                Some(b) => {
                    let key = |m: &ArimaModel| (m.order.p + m.order.q, m.order.p);
                    match model.criterion(ic).total_cmp(&b.criterion(ic)) {
                        std::cmp::Ordering::Less => true,
                        std::cmp::Ordering::Equal => key(&model) < key(b),
                        std::cmp::Ordering::Greater => false,
                    }
                }
            };
            if better {
                best = Some(model);
            }
        }
    }
    best.ok_or(ArimaError::NoCandidate)
}

/// Iterated forecasts with future shocks set to zero, integrated back `d` times.
pub fn arima_forecast(model: &ArimaModel, history: &[f64], horizon: usize) -> Result<Vec<f64>, ArimaError> {
    let ArimaOrder { p, d, q } = model.order;
    let needed = d + p.max(q).max(1);
    if history.len() < needed {
        return Err(ArimaError::ShortHistory {
            needed,
            got: history.len(),
        });
    }
    let mut w = difference(history, d);
    let mut e = model.residuals(history);
    // Last value of each differencing level 0..d.
    let mut last: Vec<f64> = (0..d).map(|k| *difference(history, k).last().expect("non-empty")).collect();
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let t = w.len();
        let mut v = model.intercept;
        for (i, phi) in model.ar.iter().enumerate() {
            v += phi * w[t - 1 - i];
        }
        for (j, theta) in model.ma.iter().enumerate() {
            if t > j {
                v += theta * e[t - 1 - j];
            }
        }
        w.push(v);
        e.push(0.0);
        let mut level = v;
        for k in (0..d).rev() {
            last[k] += level;
            level = last[k];
        }
        out.push(level);
    }
    Ok(out)
}

/// Auto-ARIMA as a forecaster.
///
/// Without a fixed model every window gets its own order search on its 48 hours;
/// with one, that model forecasts from every window.
#[derive(Debug, Clone, Default)]
pub struct ArimaForecaster {
    pub fixed: Option<ArimaModel>,
}

impl Forecaster for ArimaForecaster {
    fn label(&self) -> String {
        "arima".into()
    }

    fn forecast(&self, window: &[f64]) -> Result<Vec<f64>, ModelError> {
        let model = match &self.fixed {
            Some(m) => m.clone(),
            None => arima_auto(window)?,
        };
        Ok(arima_forecast(&model, window, OUT_LEN)?)
    }

    fn forecast_batch(&self, windows: &[&[f64]]) -> Result<Vec<Vec<f64>>, ModelError> {
        windows.par_iter().map(|w| self.forecast(w)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;
    use rand_distr::{Distribution, Normal};

    fn simulate(ar: &[f64], ma: &[f64], c: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = SeedTree::new(seed).rng("arma-sim", 0);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let burn = 500;
        let mut x = vec![0.0; n + burn];
        let mut e = vec![0.0; n + burn];
        for t in 0..n + burn {
            e[t] = noise.sample(&mut rng);
            let mut v = c + e[t];
            for (i, phi) in ar.iter().enumerate() {
                if t > i {
                    v += phi * x[t - 1 - i];
                }
            }
            for (j, theta) in ma.iter().enumerate() {
                if t > j {
                    v += theta * e[t - 1 - j];
                }
            }
            x[t] = v;
        }
        x.split_off(burn)
    }

    #[test]
    fn step_down_stationarity() {
        assert!(is_stationary(&[]));
        assert!(is_stationary(&[0.8]));
        assert!(!is_stationary(&[1.0]));
        assert!(is_stationary(&[0.5, 0.3]));
        assert!(!is_stationary(&[0.5, 0.6]));
        assert!(is_stationary(&[1.8, -0.9]));
        assert!(!is_stationary(&[0.2, 1.1]));
        assert!(is_invertible(&[0.6]));
        assert!((max_inverse_root(&[0.5]) - 0.5).abs() < 1e-12);
        // 1 - 1.8z + 0.9z^2 has inverse roots of modulus sqrt(0.9).
        assert!((max_inverse_root(&[1.8, -0.9]) - 0.9f64.sqrt()).abs() < 1e-12);
        assert!(!is_invertible(&[-1.2]));
    }

    #[test]
    fn ar1_coefficient_recovered() {
        let x = simulate(&[0.8], &[], 0.0, 2000, 3);
        let m = arima_fit(&x, ArimaOrder::new(1, 0, 0)).unwrap();
        assert!((m.ar[0] - 0.8).abs() < 0.05, "phi = {}", m.ar[0]);
    }

    #[test]
    fn ma1_coefficient_recovered() {
        let x = simulate(&[], &[0.5], 0.0, 3000, 5);
        let m = arima_fit(&x, ArimaOrder::new(0, 0, 1)).unwrap();
        assert!((m.ma[0] - 0.5).abs() < 0.06, "theta = {}", m.ma[0]);
    }

    #[test]
    fn white_noise_mean_and_variance() {
        let x = simulate(&[], &[], 3.0, 1000, 9);
        let m = arima_fit(&x, ArimaOrder::new(0, 0, 0)).unwrap();
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        assert!((m.intercept - mean).abs() < 1e-9);
        assert!((m.sigma2 - variance(&x)).abs() < 1e-9);
    }

    #[test]
    fn random_walk_has_no_parameters_and_holds() {
        let x = simulate(&[], &[], 0.0, 100, 1);
        let m = arima_fit(&x, ArimaOrder::new(0, 1, 0)).unwrap();
        assert!(m.ar.is_empty() && m.ma.is_empty() && m.intercept == 0.0);
        let fc = arima_forecast(&m, &x, 24).unwrap();
        assert!(fc.iter().all(|&v| v == *x.last().unwrap()));
    }

    #[test]
    fn ar1_forecast_decays_geometrically() {
        let m = ArimaModel {
            order: ArimaOrder::new(1, 0, 0),
            ar: vec![0.5],
            ma: vec![],
            intercept: 0.0,
            sigma2: 1.0,
            css: 0.0,
            n_eff: 0,
            n_cond: 0,
        };
        let fc = arima_forecast(&m, &[1.0, 8.0], 4).unwrap();
        assert_eq!(fc, vec![4.0, 2.0, 1.0, 0.5]);
    }

    #[test]
    fn one_step_forecast_matches_fitted_recursion() {
        let x = simulate(&[0.6], &[0.3], 1.0, 400, 2);
        let m = arima_fit(&x, ArimaOrder::new(1, 0, 1)).unwrap();
        let n = x.len();
        // Independent recursion over the raw series.
        let mut e = vec![0.0; n];
        for t in 1..n {
            e[t] = x[t] - m.intercept - m.ar[0] * x[t - 1] - m.ma[0] * e[t - 1];
        }
        let expected = m.intercept + m.ar[0] * x[n - 1] + m.ma[0] * e[n - 1];
        let fc = arima_forecast(&m, &x, 1).unwrap();
        assert!((fc[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn second_difference_integrates_back() {
        let m = ArimaModel {
            order: ArimaOrder::new(0, 2, 0),
            ar: vec![],
            ma: vec![],
            intercept: 0.0,
            sigma2: 1.0,
            css: 0.0,
            n_eff: 0,
            n_cond: 0,
        };
        // A straight line continues as a straight line.
        let fc = arima_forecast(&m, &[1.0, 3.0, 5.0], 3).unwrap();
        assert_eq!(fc, vec![7.0, 9.0, 11.0]);
    }

    #[test]
    fn constant_series_forces_random_walk() {
        let m = arima_auto(&[4.0; 48]).unwrap();
        assert_eq!(m.order, ArimaOrder::new(0, 1, 0));
    }

    #[test]
    fn short_series_is_rejected() {
        let err = arima_fit(&[1.0; 20], ArimaOrder::new(1, 0, 1)).unwrap_err();
        assert!(matches!(err, ArimaError::InsufficientData { needed: 31, got: 20, .. }));
    }

    #[test]
    fn auto_on_window_uses_small_orders() {
        let x: Vec<f64> = (0..48)
            .map(|t| 10.0 + 5.0 * (2.0 * std::f64::consts::PI * t as f64 / 24.0).sin() + 0.1 * ((t * 7) % 5) as f64)
            .collect();
        let m = arima_auto(&x).unwrap();
        assert!(m.order.p + m.order.q + m.order.d <= 3);
        assert_eq!(arima_forecast(&m, &x, 24).unwrap().len(), 24);
    }
}
