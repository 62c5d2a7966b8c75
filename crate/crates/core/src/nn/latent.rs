//! Gaussian latent parameters and the reparameterization `z = μ + σ ⊙ ε`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::scalar::Real;

/// Latent dimensionality shared by the autoencoder and the inverse network.
pub const LATENT_DIM: usize = 100;
pub const LOG_VAR_MIN: f64 = -20.0;
pub const LOG_VAR_MAX: f64 = 10.0;

/// Mean and log-variance; `σ = exp(log_var / 2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianLatentParams<T> {
    pub mu: Vec<T>,
    pub log_var: Vec<T>,
}

impl<T: Real> GaussianLatentParams<T> {
    pub fn sigma(&self) -> Vec<T> {
        self.log_var.iter().map(|&lv| clamp_log_var(lv).mul(T::lit(0.5)).exp()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentVector<T>(pub Vec<T>);

impl<T: Real> LatentVector<T> {
    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn clamp_log_var<T: Real>(lv: T) -> T {
    lv.max(T::lit(LOG_VAR_MIN)).min(T::lit(LOG_VAR_MAX))
}

/// Standard-normal draws from the caller's seeded generator.
pub fn standard_normal<T: Real, R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<T> {
    (0..n)
        .map(|_| T::lit(rng.sample::<f64, _>(StandardNormal)))
        .collect()
}

pub fn reparameterize<T: Real>(params: &GaussianLatentParams<T>, eps: &[T]) -> LatentVector<T> {
    LatentVector(
        params
            .mu
            .iter()
            .zip(params.sigma())
            .zip(eps)
            .map(|((&m, s), &e)| m + s * e)
            .collect(),
    )
}

/// Batch reparameterization. Returns `z` and `∂z/∂log_var = ½σε`
/// (zero where the log-variance is clamped). `∂z/∂μ` is the identity.
pub fn reparameterize_batch<T: Real>(mu: &Matrix<T>, log_var: &Matrix<T>, eps: &Matrix<T>) -> (Matrix<T>, Matrix<T>) {
    let half = T::lit(0.5);
    let mut z = Matrix::zeros(mu.rows(), mu.cols());
    let mut dz_dlv = Matrix::zeros(mu.rows(), mu.cols());
    for (((zv, dv), (&m, &lv)), &e) in z
        .as_mut_slice()
        .iter_mut()
        .zip(dz_dlv.as_mut_slice().iter_mut())
        .zip(mu.as_slice().iter().zip(log_var.as_slice()))
        .zip(eps.as_slice())
    {
        let clamped = clamp_log_var(lv);
        let sigma = (clamped * half).exp();
        *zv = m + sigma * e;
        *dv = if clamped == lv { half * sigma * e } else { T::zero() };
    }
    (z, dz_dlv)
}
