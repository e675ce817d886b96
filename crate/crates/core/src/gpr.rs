//! Exact Gaussian process regression with an RBF signal kernel and
//! i.i.d. observation noise.
//!
//! The model is fitted once through a Cholesky factorization of
//! `K + σ_n² I` and then answers posterior mean / variance queries without
//! further mutation, so a fitted [`GpModel`] can be shared between readers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// First diagonal jitter, relative to the signal variance.
const JITTER_START: f64 = 1e-10;
/// Largest diagonal jitter tried before giving up.
const JITTER_MAX: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    /// `σ_f²`
    pub signal_variance: f64,
    /// `l`
    pub length_scale: f64,
    /// `σ_n²`
    pub noise_variance: f64,
}

impl KernelParams {
    pub fn new(signal_variance: f64, length_scale: f64, noise_variance: f64) -> Result<Self> {
        let p = Self { signal_variance, length_scale, noise_variance };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.signal_variance.is_finite() && self.length_scale.is_finite() && self.noise_variance.is_finite();
        if !finite || self.signal_variance <= 0.0 || self.length_scale <= 0.0 || self.noise_variance < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "kernel parameters need σ_f² > 0, l > 0, σ_n² >= 0; got {self:?}"
            )));
        }
        Ok(())
    }

    #[inline]
    fn signal(&self, sq_dist: f64) -> f64 {
        self.signal_variance * (-sq_dist / (2.0 * self.length_scale * self.length_scale)).exp()
    }
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `σ_f² exp(−‖a−b‖² / 2l²)`, plus `σ_n²` when `same_point_noise` marks a
/// diagonal entry.
pub fn rbf_kernel(a: &[f64], b: &[f64], params: &KernelParams, same_point_noise: bool) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    let k = params.signal(squared_distance(a, b));
    Ok(if same_point_noise { k + params.noise_variance } else { k })
}

/// Whether targets are shifted to zero mean before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Centering {
    /// Plain zero-mean prior.
    #[default]
    None,
    /// Subtract `mean(y)` before fitting and add it back to the posterior mean.
    Mean,
}

#[derive(Debug, Clone)]
pub struct GpModel {
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    params: KernelParams,
    /// Lower-triangular factor of `K + σ_n² I + jitter·I`, row-major `n × n`.
    factor: Vec<f64>,
    alpha: Vec<f64>,
    offset: f64,
    jitter: f64,
}

impl GpModel {
    /// Fits a zero-mean GP.
    pub fn fit(inputs: &[Vec<f64>], targets: &[f64], params: KernelParams) -> Result<Self> {
        Self::fit_with(inputs, targets, params, Centering::None)
    }

    pub fn fit_with(inputs: &[Vec<f64>], targets: &[f64], params: KernelParams, centering: Centering) -> Result<Self> {
        params.validate()?;
        let n = inputs.len();
        if n == 0 {
            return Err(Error::InvalidParameter("GP needs at least one training point".into()));
        }
        if targets.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: targets.len() });
        }
        let dim = inputs[0].len();
        for row in inputs {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!("non-finite training input {row:?}")));
            }
        }
        if targets.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite training target".into()));
        }

        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            gram[i * n + i] = params.signal_variance + params.noise_variance;
            for j in 0..i {
                let k = params.signal(squared_distance(&inputs[i], &inputs[j]));
                gram[i * n + j] = k;
                gram[j * n + i] = k;
            }
        }

        let mut jitter = JITTER_START * params.signal_variance;
        let ceiling = JITTER_MAX * params.signal_variance * (1.0 + 1e-9);
        let factor = loop {
            if let Some(l) = cholesky(&gram, n, jitter) {
                break l;
            }
            jitter *= 10.0;
            if jitter > ceiling {
                return Err(Error::NotPositiveDefinite);
            }
        };

        let offset = match centering {
            Centering::None => 0.0,
            Centering::Mean => targets.iter().sum::<f64>() / n as f64,
        };
        let mut alpha: Vec<f64> = targets.iter().map(|y| y - offset).collect();
        forward_substitute(&factor, n, &mut alpha);
        backward_substitute_transposed(&factor, n, &mut alpha);

        Ok(Self { inputs: inputs.to_vec(), targets: targets.to_vec(), params, factor, alpha, offset, jitter })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// `(K + σ_n² I)^{-1} (y − offset)`.
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Prior mean added back to every prediction (0 without centering).
    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Diagonal jitter the factorization ended up using.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// The Cholesky factor as a row-major `n × n` lower-triangular matrix.
    pub fn factor(&self) -> &[f64] {
        &self.factor
    }

    fn cross_covariance(&self, query: &[f64]) -> Vec<f64> {
        assert_eq!(query.len(), self.dim(), "query dimension must match the training inputs");
        self.inputs.iter().map(|x| self.params.signal(squared_distance(query, x))).collect()
    }

    /// `μ(a) = k(a, X) (K + σ_n² I)^{-1} y`.
    ///
    /// # Panics
    /// If `query` has the wrong dimension.
    pub fn posterior_mean(&self, query: &[f64]) -> f64 {
        assert_eq!(query.len(), self.dim(), "query dimension must match the training inputs");
        self.offset
            + self
                .inputs
                .iter()
                .zip(&self.alpha)
                .map(|(x, a)| a * self.params.signal(squared_distance(query, x)))
                .sum::<f64>()
    }

    /// `σ²(a) = k(a, a) − k(a, X) (K + σ_n² I)^{-1} k(X, a)`, clamped at 0.
    pub fn posterior_variance(&self, query: &[f64]) -> f64 {
        let mut v = self.cross_covariance(query);
        forward_substitute(&self.factor, self.len(), &mut v);
        let explained: f64 = v.iter().map(|x| x * x).sum();
        (self.params.signal_variance - explained).max(0.0)
    }
}

/// Cholesky factor of `a + jitter·I`, or `None` if a pivot is not positive.
fn cholesky(a: &[f64], n: usize, jitter: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            if i == j {
                sum += jitter;
            }
            sum -= l[i * n..i * n + j].iter().zip(&l[j * n..j * n + j]).map(|(x, y)| x * y).sum::<f64>();
            if i == j {
                if !(sum > 0.0) || !sum.is_finite() {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Solves `L x = b` in place.
fn forward_substitute(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let s: f64 = l[i * n..i * n + i].iter().zip(&b[..i]).map(|(x, y)| x * y).sum();
        b[i] = (b[i] - s) / l[i * n + i];
    }
}

/// Solves `Lᵀ x = b` in place.
fn backward_substitute_transposed(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit(noise: f64) -> KernelParams {
        KernelParams::new(1.0, 1.0, noise).unwrap()
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(rbf_kernel(&[0.3, 0.1], &[0.3, 0.1], &unit(0.0), false).unwrap(), 1.0);
        assert_abs_diff_eq!(rbf_kernel(&[0.0], &[2.0], &unit(0.0), false).unwrap(), (-2.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(rbf_kernel(&[0.0], &[2.0], &unit(0.0), false).unwrap(), 0.13534, epsilon = 1e-5);
        assert_eq!(rbf_kernel(&[0.0], &[0.0], &unit(0.5), true).unwrap(), 1.5);
        assert!(rbf_kernel(&[0.0], &[1e3], &unit(0.0), false).unwrap() < 1e-300);
        assert!(matches!(rbf_kernel(&[0.0], &[0.0, 1.0], &unit(0.0), false), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn kernel_decays_monotonically() {
        let p = unit(0.0);
        let mut last = f64::INFINITY;
        for i in 0..50 {
            let k = rbf_kernel(&[0.0], &[i as f64 * 0.2], &p, false).unwrap();
            assert!(k <= last);
            last = k;
        }
    }

    #[test]
    fn single_point_fit() {
        let m = GpModel::fit(&[vec![0.0]], &[2.0], unit(1.0)).unwrap();
        assert_abs_diff_eq!(m.alpha()[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.posterior_mean(&[0.0]), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.posterior_variance(&[0.0]), 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(m.posterior_mean(&[100.0]), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.posterior_variance(&[100.0]), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn duplicate_rows_with_noise() {
        let x = vec![vec![0.5, 0.5]; 5];
        let m = GpModel::fit(&x, &[1.0, 2.0, 3.0, 4.0, 5.0], unit(0.1)).unwrap();
        assert!(m.posterior_mean(&[0.5, 0.5]).is_finite());
    }

    #[test]
    fn duplicate_rows_without_noise_use_jitter() {
        let x = vec![vec![0.0]; 3];
        let m = GpModel::fit(&x, &[1.0, 1.0, 1.0], unit(0.0)).unwrap();
        assert!(m.jitter() >= JITTER_START);
        assert!(m.posterior_mean(&[0.0]).is_finite());
        assert!(m.posterior_variance(&[0.0]) >= 0.0);
    }

    #[test]
    fn zero_targets_give_zero_mean() {
        let x = vec![vec![0.0], vec![0.4], vec![1.3]];
        let m = GpModel::fit(&x, &[0.0; 3], unit(0.2)).unwrap();
        assert!(m.alpha().iter().all(|a| *a == 0.0));
        assert_eq!(m.posterior_mean(&[0.77]), 0.0);
    }

    #[test]
    fn noise_free_interpolation() {
        let x = vec![vec![0.0], vec![0.7], vec![1.9], vec![3.0]];
        let y = [1.0, -2.0, 0.5, 4.0];
        let m = GpModel::fit(&x, &y, unit(0.0)).unwrap();
        for (xi, yi) in x.iter().zip(y) {
            assert_abs_diff_eq!(m.posterior_mean(xi), yi, epsilon = 1e-6);
        }
    }

    #[test]
    fn centering_reverts_to_sample_mean() {
        let x = vec![vec![0.0], vec![0.5]];
        let m = GpModel::fit_with(&x, &[3.0, 5.0], unit(0.1), Centering::Mean).unwrap();
        assert_eq!(m.offset(), 4.0);
        assert_abs_diff_eq!(m.posterior_mean(&[1e4]), 4.0, epsilon = 1e-12);
        let plain = GpModel::fit(&x, &[3.0, 5.0], unit(0.1)).unwrap();
        assert_abs_diff_eq!(m.posterior_variance(&[0.2]), plain.posterior_variance(&[0.2]), epsilon = 1e-15);
    }

    #[test]
    fn factor_reconstructs_gram() {
        let x: Vec<Vec<f64>> = (0..12).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()]).collect();
        let y: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let p = KernelParams::new(0.7, 0.8, 0.05).unwrap();
        let m = GpModel::fit(&x, &y, p).unwrap();
        let n = x.len();
        let l = m.factor();
        let (mut err, mut norm) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let llt: f64 = (0..n).map(|k| l[i * n + k] * l[j * n + k]).sum();
                let k = rbf_kernel(&x[i], &x[j], &p, i == j).unwrap();
                err += (llt - k).powi(2);
                norm += k * k;
            }
        }
        assert!((err / norm).sqrt() < 1e-8);
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(KernelParams::new(0.0, 1.0, 0.0).is_err());
        assert!(KernelParams::new(1.0, -1.0, 0.0).is_err());
        assert!(KernelParams::new(1.0, 1.0, -0.1).is_err());
        assert!(GpModel::fit(&[], &[], unit(0.0)).is_err());
        assert!(GpModel::fit(&[vec![0.0], vec![1.0, 2.0]], &[0.0, 0.0], unit(0.0)).is_err());
        assert!(GpModel::fit(&[vec![0.0]], &[f64::NAN], unit(0.0)).is_err());
    }
}
