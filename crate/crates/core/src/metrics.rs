//! Image and far-field error metrics, and their aggregation into reports.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::loss::loss_bce;
use crate::scalar::Real;

pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
/// Guard in the relative-error denominator.
pub const RELATIVE_EPS: f64 = 1e-8;
pub const HISTOGRAM_BINS: usize = 32;

/// Global SSIM with `α = β = γ = 1`, `c₃ = c₂/2` and dynamic range `L = 1`:
///
/// `(2μ_xμ_y + c₁)(2σ_xy + c₂) / ((μ_x² + μ_y² + c₁)(σ_x² + σ_y² + c₂))`
///
/// Variances and covariance use the `N − 1` normalization.
pub fn ssim<T: Real>(x: &[T], y: &[T]) -> Result<T> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Shape(format!("ssim needs equal lengths ≥ 2, got {} and {}", x.len(), y.len())));
    }
    // accumulate in f64 so f32 images get the same answer
    let n = x.len() as f64;
    let (xs, ys): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a.to_f64().unwrap(), b.to_f64().unwrap()))
        .unzip();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    for (a, b) in xs.iter().zip(&ys) {
        let (dx, dy) = (a - mx, b - my);
        vx += dx * dx;
        vy += dy * dy;
        cxy += dx * dy;
    }
    let (vx, vy, cxy) = (vx / (n - 1.0), vy / (n - 1.0), cxy / (n - 1.0));
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let value = (2.0 * mx * my + c1) * (2.0 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    Ok(T::lit(value))
}

/// Mean clamped cross-entropy of `prediction` against a binary `target`.
pub fn bce_error<T: Real>(target: &[T], prediction: &[T]) -> Result<T> {
    Ok(loss_bce(target, prediction)?.value)
}

/// `mean_i |F_i − F̂_i| / (|F_i| + ε)`.
pub fn relative_abs_error<T: Real>(target: &[T], prediction: &[T]) -> Result<T> {
    if target.len() != prediction.len() || target.is_empty() {
        return Err(Error::Shape(format!(
            "relative error needs equal nonempty lengths, got {} and {}",
            target.len(),
            prediction.len()
        )));
    }
    let eps = T::lit(RELATIVE_EPS);
    let sum: T = target
        .iter()
        .zip(prediction)
        .map(|(&f, &p)| (f - p).abs() / (f.abs() + eps))
        .sum();
    Ok(sum / T::from_usize(target.len()).unwrap())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub min: f64,
    pub max: f64,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub metric: String,
    pub split: String,
    pub values: Vec<f64>,
    pub mean: f64,
    pub median: f64,
    pub histogram: Histogram,
}

/// Mean, median and a 32-bin histogram over `[min, max]`.
pub fn aggregate(metric: &str, values: &[f64], split: &str) -> Result<MetricsReport> {
    if values.is_empty() {
        return Err(Error::Shape(format!("no values to aggregate for {metric} on {split}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("non-finite {metric} value on {split}")));
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    };
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    let mut counts = vec![0; HISTOGRAM_BINS];
    let width = (max - min) / HISTOGRAM_BINS as f64;
    for &v in values {
        let bin = if width > 0.0 {
            (((v - min) / width) as usize).min(HISTOGRAM_BINS - 1)
        } else {
            0
        };
        counts[bin] += 1;
    }
    Ok(MetricsReport {
        metric: metric.to_string(),
        split: split.to_string(),
        values: values.to_vec(),
        mean,
        median,
        histogram: Histogram { min, max, counts },
    })
}
