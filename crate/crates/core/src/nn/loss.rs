//! Training losses. Every loss returns its value and the gradient with respect
//! to the prediction (or the latent parameters), averaged the same way as the value.

use super::latent::{GaussianLatentParams, LOG_VAR_MAX, LOG_VAR_MIN};
use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Probability clamp for cross-entropy.
pub const BCE_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct LossValue<T> {
    pub value: T,
    pub gradient: Vec<T>,
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("length mismatch: {a} vs {b}")));
    }
    Ok(())
}

fn clamp_probability<T: Real>(p: T) -> T {
    let eps = T::lit(BCE_CLAMP);
    p.max(eps).min(T::one() - eps)
}

/// `-(1/N) Σ [y log ŷ + (1-y) log(1-ŷ)]` with `ŷ` clamped to `[ε, 1-ε]`.
pub fn loss_bce<T: Real>(target: &[T], predicted: &[T]) -> Result<LossValue<T>> {
    check_lengths(target.len(), predicted.len())?;
    let n = T::from_usize(target.len().max(1)).unwrap();
    let eps = T::lit(BCE_CLAMP);
    let mut value = T::zero();
    let gradient = target
        .iter()
        .zip(predicted)
        .map(|(&y, &p)| {
            let q = clamp_probability(p);
            value -= y * q.ln() + (T::one() - y) * (T::one() - q).ln();
            if p <= eps || p >= T::one() - eps {
                T::zero()
            } else {
                (q - y) / (q * (T::one() - q)) / n
            }
        })
        .collect();
    Ok(LossValue {
        value: value / n,
        gradient,
    })
}

/// Cross-entropy of sigmoid outputs with the gradient taken with respect to
/// the logits, `(ŷ - y)/N`. Saturated sigmoids keep a useful gradient.
pub fn loss_bce_logits<T: Real>(target: &Matrix<T>, predicted: &Matrix<T>) -> Result<(T, Matrix<T>)> {
    check_lengths(target.as_slice().len(), predicted.as_slice().len())?;
    let n = T::from_usize(target.as_slice().len().max(1)).unwrap();
    let mut value = T::zero();
    let grad: Vec<T> = target
        .as_slice()
        .iter()
        .zip(predicted.as_slice())
        .map(|(&y, &p)| {
            let q = clamp_probability(p);
            value -= y * q.ln() + (T::one() - y) * (T::one() - q).ln();
            (p - y) / n
        })
        .collect();
    Ok((value / n, Matrix::from_vec(predicted.rows(), predicted.cols(), grad)?))
}

/// `(1/N) Σ (F - F̂)²`.
pub fn loss_mse<T: Real>(target: &[T], predicted: &[T]) -> Result<LossValue<T>> {
    check_lengths(target.len(), predicted.len())?;
    let n = T::from_usize(target.len().max(1)).unwrap();
    let two = T::lit(2.0);
    let mut value = T::zero();
    let gradient = target
        .iter()
        .zip(predicted)
        .map(|(&f, &p)| {
            let d = p - f;
            value += d * d;
            two * d / n
        })
        .collect();
    Ok(LossValue {
        value: value / n,
        gradient,
    })
}

/// `(1/N) Σ |F - F̂|`, subgradient 0 at ties.
pub fn loss_mae<T: Real>(target: &[T], predicted: &[T]) -> Result<LossValue<T>> {
    check_lengths(target.len(), predicted.len())?;
    let n = T::from_usize(target.len().max(1)).unwrap();
    let mut value = T::zero();
    let gradient = target
        .iter()
        .zip(predicted)
        .map(|(&f, &p)| {
            let d = p - f;
            value += d.abs();
            if d > T::zero() {
                T::one() / n
            } else if d < T::zero() {
                -T::one() / n
            } else {
                T::zero()
            }
        })
        .collect();
    Ok(LossValue {
        value: value / n,
        gradient,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KlValue<T> {
    pub value: T,
    pub d_mu: Vec<T>,
    pub d_log_var: Vec<T>,
}

/// `-½ Σ_p (1 + log σ² − μ² − σ²)`; zero exactly at `μ = 0, σ = 1`.
pub fn loss_kl<T: Real>(params: &GaussianLatentParams<T>) -> KlValue<T> {
    let half = T::lit(0.5);
    let (lo, hi) = (T::lit(LOG_VAR_MIN), T::lit(LOG_VAR_MAX));
    let mut value = T::zero();
    let mut d_log_var = Vec::with_capacity(params.log_var.len());
    for (&m, &lv_raw) in params.mu.iter().zip(&params.log_var) {
        let lv = lv_raw.max(lo).min(hi);
        let var = lv.exp();
        value -= half * (T::one() + lv - m * m - var);
        d_log_var.push(if lv_raw < lo || lv_raw > hi {
            T::zero()
        } else {
            half * (var - T::one())
        });
    }
    KlValue {
        value,
        d_mu: params.mu.clone(),
        d_log_var,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnLoss<T> {
    pub value: T,
    pub mae: T,
    pub kl: T,
    pub d_predicted: Vec<T>,
    pub d_mu: Vec<T>,
    pub d_log_var: Vec<T>,
}

/// Per-sample `L_MAE + α·L_KL`.
pub fn loss_inn<T: Real>(
    target: &[T],
    predicted: &[T],
    params: &GaussianLatentParams<T>,
    alpha: T,
) -> Result<InnLoss<T>> {
    if alpha < T::zero() {
        return Err(Error::Config("KL weight must be non-negative".into()));
    }
    let mae = loss_mae(target, predicted)?;
    let kl = loss_kl(params);
    Ok(InnLoss {
        value: mae.value + alpha * kl.value,
        mae: mae.value,
        kl: kl.value,
        d_predicted: mae.gradient,
        d_mu: kl.d_mu.into_iter().map(|g| g * alpha).collect(),
        d_log_var: kl.d_log_var.into_iter().map(|g| g * alpha).collect(),
    })
}

/// Batch form of [`loss_inn`]: rows are samples, the value and every gradient
/// are averaged over the batch.
pub fn loss_inn_batch<T: Real>(
    target: &Matrix<T>,
    predicted: &Matrix<T>,
    mu: &Matrix<T>,
    log_var: &Matrix<T>,
    alpha: T,
) -> Result<(InnLoss<T>, Matrix<T>, Matrix<T>, Matrix<T>)> {
    let rows = target.rows();
    let scale = T::one() / T::from_usize(rows.max(1)).unwrap();
    let mut total = InnLoss {
        value: T::zero(),
        mae: T::zero(),
        kl: T::zero(),
        d_predicted: vec![],
        d_mu: vec![],
        d_log_var: vec![],
    };
    let mut d_pred = Matrix::zeros(rows, predicted.cols());
    let mut d_mu = Matrix::zeros(rows, mu.cols());
    let mut d_lv = Matrix::zeros(rows, log_var.cols());
    for i in 0..rows {
        let params = GaussianLatentParams {
            mu: mu.row(i).to_vec(),
            log_var: log_var.row(i).to_vec(),
        };
        let l = loss_inn(target.row(i), predicted.row(i), &params, alpha)?;
        total.value += l.value * scale;
        total.mae += l.mae * scale;
        total.kl += l.kl * scale;
        for (d, g) in d_pred.row_mut(i).iter_mut().zip(&l.d_predicted) {
            *d = *g * scale;
        }
        for (d, g) in d_mu.row_mut(i).iter_mut().zip(&l.d_mu) {
            *d = *g * scale;
        }
        for (d, g) in d_lv.row_mut(i).iter_mut().zip(&l.d_log_var) {
            *d = *g * scale;
        }
    }
    Ok((total, d_pred, d_mu, d_lv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn params(mu: &[f64], log_var: &[f64]) -> GaussianLatentParams<f64> {
        GaussianLatentParams {
            mu: mu.to_vec(),
            log_var: log_var.to_vec(),
        }
    }

    #[test]
    fn bce_examples() {
        assert!(loss_bce(&[1.0], &[1.0]).unwrap().value < 1e-6);
        assert!((loss_bce(&[1.0], &[0.5]).unwrap().value - LN_2).abs() < 1e-12);
        assert!((loss_bce(&[0.0], &[0.5]).unwrap().value - LN_2).abs() < 1e-12);
    }

    #[test]
    fn mse_and_mae_examples() {
        assert_eq!(loss_mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap().value, 0.0);
        assert_eq!(loss_mse(&[1.0, 2.0], &[1.0, 0.0]).unwrap().value, 2.0);
        let scaled = loss_mse(&[3.0, 6.0], &[3.0, 0.0]).unwrap().value;
        assert_eq!(scaled, 9.0 * 2.0);
        assert_eq!(loss_mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap().value, 0.0);
        assert_eq!(loss_mae(&[1.0, 2.0], &[1.0, 0.0]).unwrap().value, 1.0);
        assert!(matches!(loss_mae(&[1.0], &[1.0, 2.0]), Err(Error::Shape(_))));
        assert!(matches!(loss_mse(&[1.0], &[]), Err(Error::Shape(_))));
    }

    #[test]
    fn kl_examples() {
        assert_eq!(loss_kl(&params(&[0.0; 4], &[0.0; 4])).value, 0.0);
        assert!((loss_kl(&params(&[1.0], &[0.0])).value - 0.5).abs() < 1e-15);
        let v = loss_kl(&params(&[0.0], &[2.0f64.ln()])).value;
        assert!((v - (0.5 - LN_2 / 2.0)).abs() < 1e-12);
        assert!((v - 0.153426).abs() < 1e-6);
    }

    #[test]
    fn inn_examples() {
        let p = params(&[0.3], &[0.1]);
        let with_zero = loss_inn(&[1.0, 2.0], &[0.5, 2.5], &p, 0.0).unwrap();
        assert_eq!(with_zero.value, loss_mae(&[1.0, 2.0], &[0.5, 2.5]).unwrap().value);
        assert_eq!(loss_inn(&[1.0], &[1.0], &params(&[0.0], &[0.0]), 1e-5).unwrap().value, 0.0);
        let v = loss_inn(&[1.0], &[0.0], &params(&[1.0], &[0.0]), 1e-5).unwrap().value;
        assert!((v - (1.0 + 0.5e-5)).abs() < 1e-14);
    }

    fn central<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], i: usize) -> f64 {
        let h = 1e-5;
        let mut a = x.to_vec();
        let mut b = x.to_vec();
        a[i] += h;
        b[i] -= h;
        (f(&a) - f(&b)) / (2.0 * h)
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-4 * a.abs().max(b.abs()).max(1e-6)
    }

    #[test]
    fn loss_gradients_match_central_differences() {
        let y = [1.0, 0.0, 1.0, 0.3];
        let p = [0.7, 0.2, 0.45, 0.9];
        let g = loss_bce(&y, &p).unwrap().gradient;
        for i in 0..4 {
            assert!(close(g[i], central(|q| loss_bce(&y, q).unwrap().value, &p, i)));
        }
        let g = loss_mse(&y, &p).unwrap().gradient;
        for i in 0..4 {
            assert!(close(g[i], central(|q| loss_mse(&y, q).unwrap().value, &p, i)));
        }
        let g = loss_mae(&y, &p).unwrap().gradient;
        for i in 0..4 {
            assert!(close(g[i], central(|q| loss_mae(&y, q).unwrap().value, &p, i)));
        }
        let mu = [0.4, -1.1, 0.0];
        let lv = [0.2, -0.7, 1.3];
        let kl = loss_kl(&params(&mu, &lv));
        for i in 0..3 {
            let dm = central(|m| loss_kl(&params(m, &lv)).value, &mu, i);
            let dl = central(|l| loss_kl(&params(&mu, l)).value, &lv, i);
            assert!(close(kl.d_mu[i], dm));
            assert!(close(kl.d_log_var[i], dl));
        }
    }

    #[test]
    fn logit_form_matches_chain_rule() {
        let y = Matrix::<f64>::from_vec(1, 3, vec![1.0, 0.0, 1.0]).unwrap();
        let logits = [0.3, -1.2, 2.0];
        let p = Matrix::from_vec(1, 3, logits.iter().map(|&z| super::super::mlp::sigmoid(z)).collect()).unwrap();
        let (v, g) = loss_bce_logits(&y, &p).unwrap();
        let plain = loss_bce(y.as_slice(), p.as_slice()).unwrap();
        assert!((v - plain.value).abs() < 1e-15);
        for i in 0..3 {
            let q = p.as_slice()[i];
            assert!((g.as_slice()[i] - plain.gradient[i] * q * (1.0 - q)).abs() < 1e-14);
        }
    }

    #[test]
    fn batch_inn_loss_averages_samples() {
        let t = Matrix::<f64>::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let p = Matrix::from_vec(2, 2, vec![1.5, 2.0, 3.0, 3.0]).unwrap();
        let mu = Matrix::from_vec(2, 1, vec![0.0, 1.0]).unwrap();
        let lv = Matrix::from_vec(2, 1, vec![0.0, 0.0]).unwrap();
        let (l, _, dmu, _) = loss_inn_batch(&t, &p, &mu, &lv, 0.1).unwrap();
        let expect = ((0.25) + (0.5 + 0.1 * 0.5)) / 2.0;
        assert!((l.value - expect).abs() < 1e-15);
        assert!((dmu.get(1, 0) - 0.1 * 1.0 / 2.0).abs() < 1e-15);
    }
}
