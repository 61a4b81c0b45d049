use serde::{Deserialize, Serialize};

use super::OptError;

const JITTER: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub signal_variance: f64,
    pub lengthscale: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        Self { signal_variance: 1.0, lengthscale: 0.5 }
    }
}

impl KernelParams {
    pub fn validate(&self) -> Result<(), OptError> {
        if !(self.signal_variance > 0.0 && self.lengthscale > 0.0) {
            return Err(OptError::NonPositiveHyperparameter);
        }
        Ok(())
    }
}

/// Matérn 5/2 kernel on Euclidean distance.
pub fn matern52(x: &[f64], x2: &[f64], params: &KernelParams) -> Result<f64, OptError> {
    params.validate()?;
    if x.len() != x2.len() {
        return Err(OptError::DimensionMismatch { expected: x.len(), got: x2.len() });
    }
    Ok(matern_unchecked(x, x2, params))
}

fn matern_unchecked(x: &[f64], x2: &[f64], p: &KernelParams) -> f64 {
    let r = x.iter().zip(x2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let s = 5f64.sqrt() * r / p.lengthscale;
    p.signal_variance * (1.0 + s + s * s / 3.0) * (-s).exp()
}

/// Lower Cholesky factor of a dense row-major matrix, or `None` if a pivot
/// is not positive.
pub fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if !(d > 0.0) || !d.is_finite() {
                    return None;
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

fn forward_sub(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; b.len()];
    for i in 0..b.len() {
        let s: f64 = (0..i).map(|k| l[i][k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i][i];
    }
    y
}

fn backward_sub(l: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k][i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i][i];
    }
    x
}

/// Fitted GP regressor. Immutable after `gp_fit`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianProcessModel {
    pub x: Vec<Vec<f64>>,
    /// Targets minus `y_mean`.
    pub y: Vec<f64>,
    pub y_mean: f64,
    pub kernel: KernelParams,
    pub noise_variance: f64,
    /// Diagonal term actually added, noise plus any jitter.
    pub diag: f64,
    chol: Vec<Vec<f64>>,
    alpha: Vec<f64>,
}

pub fn gp_fit(x: &[Vec<f64>], y: &[f64], kernel: KernelParams, noise_variance: f64) -> Result<GaussianProcessModel, OptError> {
    kernel.validate()?;
    if x.is_empty() {
        return Err(OptError::NoData);
    }
    if y.len() != x.len() {
        return Err(OptError::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    let d = x[0].len();
    if let Some(r) = x.iter().find(|r| r.len() != d) {
        return Err(OptError::DimensionMismatch { expected: d, got: r.len() });
    }
    if !(noise_variance >= 0.0) || y.iter().chain(x.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(OptError::NonFinite);
    }
    // Duplicate inputs with exact interpolation have no solution; jitter
    // would only hide that.
    if noise_variance == 0.0 {
        for i in 0..x.len() {
            if x[..i].contains(&x[i]) {
                return Err(OptError::FactorizationFailure);
            }
        }
    }
    let n = x.len();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let v = matern_unchecked(&x[i], &x[j], &kernel);
            k[i][j] = v;
            k[j][i] = v;
        }
    }
    let with_diag = |extra: f64| {
        let mut m = k.clone();
        for (i, row) in m.iter_mut().enumerate() {
            row[i] += extra;
        }
        m
    };
    let (chol, diag) = match cholesky(&with_diag(noise_variance)) {
        Some(l) => (l, noise_variance),
        None => {
            let extra = noise_variance + JITTER;
            (cholesky(&with_diag(extra)).ok_or(OptError::FactorizationFailure)?, extra)
        }
    };
    let alpha = backward_sub(&chol, &forward_sub(&chol, &yc));
    Ok(GaussianProcessModel { x: x.to_vec(), y: yc, y_mean, kernel, noise_variance, diag, chol, alpha })
}

impl GaussianProcessModel {
    pub fn dim(&self) -> usize {
        self.x[0].len()
    }

    /// Posterior mean and latent variance at `q`.
    pub fn posterior(&self, q: &[f64]) -> Result<(f64, f64), OptError> {
        if q.len() != self.dim() {
            return Err(OptError::DimensionMismatch { expected: self.dim(), got: q.len() });
        }
        let ks: Vec<f64> = self.x.iter().map(|r| matern_unchecked(r, q, &self.kernel)).collect();
        let mean = self.y_mean + ks.iter().zip(&self.alpha).map(|(a, b)| a * b).sum::<f64>();
        let v = forward_sub(&self.chol, &ks);
        let var = self.kernel.signal_variance - v.iter().map(|a| a * a).sum::<f64>();
        Ok((mean, var.max(0.0)))
    }
}

/// Upper confidence bound `mean + kappa * sqrt(variance)`.
pub fn ucb(mean: f64, variance: f64, kappa: f64) -> Result<f64, OptError> {
    if variance < 0.0 {
        return Err(OptError::NegativeVariance(variance));
    }
    Ok(mean + kappa * variance.sqrt())
}
