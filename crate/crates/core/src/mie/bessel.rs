//! Integer-order cylinder functions of real argument.
//!
//! `J_n` comes from Miller's downward recurrence normalized with
//! `J_0 + 2 Σ J_2k = 1`; `Y_0` and `Y_1` from the Neumann series over the same
//! sequence, then upward recurrence in order. Beyond `ASYMPTOTIC_X` the
//! Hankel expansions for orders 0 and 1 seed upward recurrences instead.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const ASYMPTOTIC_X: f64 = 1.0e4;
const RESCALE: f64 = 1.0e250;

/// `J_0(x) ..= J_{n_max}(x)`, valid for `x >= 0`.
pub fn bessel_j_orders(n_max: usize, x: f64) -> Vec<f64> {
    assert!(x >= 0.0 && x.is_finite(), "bessel_j requires finite x >= 0, got {x}");
    if x == 0.0 {
        let mut j = vec![0.0; n_max + 1];
        j[0] = 1.0;
        return j;
    }
    if x > ASYMPTOTIC_X && (n_max as f64) < x {
        let (j0, _) = hankel_asymptotic(0, x);
        let (j1, _) = hankel_asymptotic(1, x);
        return upward(n_max, x, j0, j1);
    }
    let mut j = miller(n_max.max(1), x);
    j.truncate(n_max + 1);
    j
}

/// `Y_0(x) ..= Y_{n_max}(x)`, valid for `x > 0`.
pub fn bessel_y_orders(n_max: usize, x: f64) -> Result<Vec<f64>> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("Y_n is singular at x = {x}")));
    }
    let (y0, y1) = if x > ASYMPTOTIC_X {
        (hankel_asymptotic(0, x).1, hankel_asymptotic(1, x).1)
    } else {
        let j = miller(1, x);
        neumann_y01(&j, x)
    };
    Ok(upward(n_max, x, y0, y1))
}

pub fn bessel_j(n: usize, x: f64) -> f64 {
    bessel_j_orders(n, x)[n]
}

pub fn bessel_y(n: usize, x: f64) -> Result<f64> {
    Ok(bessel_y_orders(n, x)?[n])
}

/// `H_n^(1)(x) = J_n(x) + i Y_n(x)`.
pub fn hankel1(n: usize, x: f64) -> Result<Complex64> {
    let h = hankel1_orders(n, x)?;
    Ok(h[n])
}

pub fn hankel1_orders(n_max: usize, x: f64) -> Result<Vec<Complex64>> {
    let y = bessel_y_orders(n_max, x)?;
    let j = bessel_j_orders(n_max, x);
    Ok(j.iter().zip(&y).map(|(&a, &b)| Complex64::new(a, b)).collect())
}

/// Cylinder function values and first/second derivatives for orders `0..=n_max`.
///
/// Derivatives follow `C_n' = (C_{n-1} - C_{n+1}) / 2` with `C_{-1} = -C_1`,
/// and the second derivative comes from Bessel's equation,
/// `C_n'' = -C_n (1 - n^2/x^2) - C_n'/x`.
#[derive(Debug, Clone)]
pub struct CylinderValues<T> {
    pub value: Vec<T>,
    pub d1: Vec<T>,
    pub d2: Vec<T>,
}

impl<T> CylinderValues<T>
where
    T: Copy
        + std::ops::Sub<Output = T>
        + std::ops::Neg<Output = T>
        + std::ops::Mul<f64, Output = T>
        + std::ops::Add<Output = T>,
{
    fn from_orders(raw: &[T], n_max: usize, x: f64) -> Self {
        debug_assert!(raw.len() >= n_max + 2);
        let d1: Vec<T> = (0..=n_max)
            .map(|n| {
                let below = if n == 0 { -raw[1] } else { raw[n - 1] };
                (below - raw[n + 1]) * 0.5
            })
            .collect();
        let d2 = (0..=n_max)
            .map(|n| {
                let nf = n as f64;
                -(raw[n] * (1.0 - nf * nf / (x * x))) - d1[n] * (1.0 / x)
            })
            .collect();
        CylinderValues {
            value: raw[..=n_max].to_vec(),
            d1,
            d2,
        }
    }
}

/// `J_n` with derivatives; requires `x > 0` because the second derivative
/// is taken from the differential equation.
pub fn bessel_j_with_derivatives(n_max: usize, x: f64) -> Result<CylinderValues<f64>> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("J_n'' via the Bessel ODE needs x > 0, got {x}")));
    }
    let raw = bessel_j_orders(n_max + 1, x);
    Ok(CylinderValues::from_orders(&raw, n_max, x))
}

pub fn hankel1_with_derivatives(n_max: usize, x: f64) -> Result<CylinderValues<Complex64>> {
    let raw = hankel1_orders(n_max + 1, x)?;
    Ok(CylinderValues::from_orders(&raw, n_max, x))
}

fn miller(n_max: usize, x: f64) -> Vec<f64> {
    let top = n_max.max(x.ceil() as usize);
    let start = top + 20 + (40.0 * top as f64).sqrt() as usize;
    let start = start + start % 2;
    let mut out = vec![0.0; n_max + 1];
    let (mut above, mut current) = (0.0_f64, 1.0e-300_f64);
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        let below = 2.0 * k as f64 / x * current - above;
        above = current;
        current = below;
        // `current` now holds order k - 1
        let order = k - 1;
        if order <= n_max {
            out[order] = current;
        }
        if order % 2 == 0 && order > 0 {
            norm += 2.0 * current;
        }
        if current.abs() > RESCALE {
            current /= RESCALE;
            above /= RESCALE;
            norm /= RESCALE;
            for v in out.iter_mut() {
                *v /= RESCALE;
            }
        }
    }
    norm += current;
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

/// Neumann series for `Y_0` and `Y_1` over a normalized `J` sequence.
fn neumann_y01(j_small: &[f64], x: f64) -> (f64, f64) {
    let top = x.ceil() as usize;
    let start = top + 20 + (40.0 * top as f64).sqrt() as usize + 2;
    let j = if j_small.len() > start { j_small.to_vec() } else { miller(start, x) };
    let log_term = (x / 2.0).ln() + EULER_GAMMA;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut k = 1;
    while 2 * k + 1 < j.len() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let kf = k as f64;
        s0 += sign * j[2 * k] / kf;
        s1 += sign * (2.0 * kf + 1.0) / (kf * (kf + 1.0)) * j[2 * k + 1];
        k += 1;
    }
    let y0 = (2.0 / PI) * (log_term * j[0] - 2.0 * s0);
    let y1 = (2.0 / PI) * ((log_term - 1.0) * j[1] - j[0] / x - s1);
    (y0, y1)
}

fn upward(n_max: usize, x: f64, c0: f64, c1: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(c0);
    if n_max >= 1 {
        out.push(c1);
    }
    for n in 1..n_max {
        let next = 2.0 * n as f64 / x * out[n] - out[n - 1];
        out.push(next);
    }
    out
}

/// Hankel large-argument expansion, returning `(J_nu, Y_nu)`.
fn hankel_asymptotic(nu: u32, x: f64) -> (f64, f64) {
    let mu = 4.0 * (nu as f64).powi(2);
    let mut p = 0.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    for k in 0..60 {
        if k > 0 {
            let odd = (2 * k - 1) as f64;
            term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        }
        if term.abs() > last {
            break;
        }
        last = term.abs();
        match k % 4 {
            0 => p += term,
            1 => q += term,
            2 => p -= term,
            _ => q -= term,
        }
        if term.abs() < 1e-17 * p.abs().max(1e-300) {
            break;
        }
    }
    let chi = x - (nu as f64 * FRAC_PI_2 + FRAC_PI_4);
    let scale = (2.0 / (PI * x)).sqrt();
    let (s, c) = chi.sin_cos();
    (scale * (p * c - q * s), scale * (p * s + q * c))
}

#[cfg(test)]
mod tests {
    use super::*;

    // (n, x, J_n(x), Y_n(x)) from 30-digit arbitrary-precision evaluation.
    const REFERENCE: &[(usize, f64, f64, f64)] = &[
        (0, 0.5, 0.93846980724081290423, -0.44451873350670655715),
        (0, 7.3, 0.28821694763501439904, 0.062773886374037597732),
        (1, 1.0, 0.44005058574493351596, -0.78121282130028871655),
        (1, 13.2, -0.027066702764779254643, -0.21817290664552918111),
        (2, 0.1, 0.001248958658799918984, -127.64478324269015877),
        (3, 25.0, 0.10834308106150889528, 0.11792485039689295326),
        (5, 3.7, 0.09948541700833390963, -0.97906506823354205704),
        (10, 10.0, 0.2074861066333588577, -0.35981415218340272205),
        (12, 2.5, 2.6925131898897755695e-8, -1007448.6446662450323),
        (20, 45.0, 0.0047633437900312990997, -0.1255648930801544586),
        (30, 100.0, 0.081460129581172222968, 0.006138839212010033452),
        (45, 60.0, 0.12611616228068283936, 0.010725083787572536173),
        (60, 199.0, 0.057917183580702187569, -0.00090268110288284562965),
        (60, 20.0, 2.2809263887335596395e-23, -2.4670257583513079176e+20),
        (0, 180.0, -0.058862596948708744127, -0.0084827795766800131919),
        (7, 150.5, 0.051767245633752023735, 0.039430231847725304999),
    ];

    fn power_series_j(n: usize, x: f64, terms: usize) -> f64 {
        let mut term = (x / 2.0).powi(n as i32) / (1..=n).map(|k| k as f64).product::<f64>();
        let mut sum = term;
        for k in 1..terms {
            term *= -(x * x / 4.0) / (k as f64 * (k + n) as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn j0_at_zero_is_one() {
        assert_eq!(bessel_j(0, 0.0), 1.0);
        assert_eq!(bessel_j(3, 0.0), 0.0);
    }

    #[test]
    fn j1_at_one_matches_power_series() {
        let series = power_series_j(1, 1.0, 30);
        assert!((series - 0.4400505857).abs() < 1e-10);
        assert!((bessel_j(1, 1.0) - series).abs() < 1e-15);
    }

    #[test]
    fn matches_high_precision_reference() {
        for &(n, x, j_ref, y_ref) in REFERENCE {
            let j = bessel_j(n, x);
            let y = bessel_y(n, x).unwrap();
            let j_err = (j - j_ref).abs() / j_ref.abs();
            let y_err = (y - y_ref).abs() / y_ref.abs();
            assert!(j_err < 1e-12, "J_{n}({x}) = {j}, want {j_ref}, rel {j_err:e}");
            assert!(y_err < 1e-12, "Y_{n}({x}) = {y}, want {y_ref}, rel {y_err:e}");
        }
    }

    #[test]
    fn asymptotic_branch_agrees_with_recurrence_branch() {
        let x = ASYMPTOTIC_X * 0.999;
        let miller_j = bessel_j_orders(5, x);
        let (j0, y0) = hankel_asymptotic(0, x);
        let (j1, y1) = hankel_asymptotic(1, x);
        let asym_j = upward(5, x, j0, j1);
        let y = bessel_y_orders(5, x).unwrap();
        let asym_y = upward(5, x, y0, y1);
        for n in 0..=5 {
            assert!((miller_j[n] - asym_j[n]).abs() < 1e-13, "J_{n}");
            assert!((y[n] - asym_y[n]).abs() < 1e-13, "Y_{n}");
        }
    }

    #[test]
    fn wronskian_holds() {
        // deterministic pseudo-random (n, x) pairs
        let mut state = 0x2545_f491_4f6c_dd1d_u64;
        for _ in 0..200 {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            let n = (state % 40) as usize;
            let x = 0.2 + (state >> 20) as f64 / (1u64 << 44) as f64 * 150.0;
            let j = bessel_j_with_derivatives(n, x).unwrap();
            let h = hankel1_with_derivatives(n, x).unwrap();
            let w = j.value[n] * h.d1[n].im - j.d1[n] * h.value[n].im;
            let expect = 2.0 / (PI * x);
            let scale = (j.value[n] * h.d1[n].im).abs().max(expect);
            assert!((w - expect).abs() / scale < 1e-11, "n={n} x={x} w={w} want {expect}");
        }
    }

    #[test]
    fn second_derivative_satisfies_bessel_ode_by_differences() {
        let (n, x, h) = (4, 6.3, 1e-4);
        let d = bessel_j_with_derivatives(n, x).unwrap();
        let fd = (bessel_j(n, x + h) - 2.0 * bessel_j(n, x) + bessel_j(n, x - h)) / (h * h);
        assert!((d.d2[n] - fd).abs() < 1e-6);
        let fd1 = (bessel_j(n, x + h) - bessel_j(n, x - h)) / (2.0 * h);
        assert!((d.d1[n] - fd1).abs() < 1e-8);
    }

    #[test]
    fn hankel_at_zero_is_domain_error() {
        assert!(matches!(hankel1(0, 0.0), Err(Error::Domain(_))));
    }
}
