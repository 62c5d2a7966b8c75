//! Complex BiCGStab for `A x = b` with a matrix-free operator.

use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovOutcome {
    pub iterations: usize,
    /// `‖b − A x‖ / ‖b‖` from the recurrence at exit.
    pub residual: f64,
    pub converged: bool,
}

/// `Σ conj(a_i) b_i`.
pub fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Solves in place starting from the contents of `x`. The shadow residual is
/// reset whenever `ρ` or `⟨r̂, v⟩` vanishes.
pub fn bicgstab<A>(mut apply: A, b: &[Complex64], x: &mut [Complex64], tol: f64, max_iter: usize) -> KrylovOutcome
where
    A: FnMut(&[Complex64], &mut [Complex64]),
{
    let n = b.len();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = Complex64::default());
        return KrylovOutcome {
            iterations: 0,
            residual: 0.0,
            converged: true,
        };
    }
    let zero = Complex64::default();
    let mut r = vec![zero; n];
    apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut residual = norm(&r) / b_norm;
    if residual <= tol {
        return KrylovOutcome {
            iterations: 0,
            residual,
            converged: true,
        };
    }
    let mut shadow = r.clone();
    let mut p = vec![zero; n];
    let mut v = vec![zero; n];
    let mut s = vec![zero; n];
    let mut t = vec![zero; n];
    let (mut rho, mut alpha, mut omega) = (Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0));
    for it in 1..=max_iter {
        let mut rho_new = dot(&shadow, &r);
        if rho_new.norm() < 1e-300 {
            shadow.copy_from_slice(&r);
            rho_new = dot(&shadow, &r);
            p.iter_mut().for_each(|e| *e = zero);
            v.iter_mut().for_each(|e| *e = zero);
        }
        let beta = (rho_new / rho) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        apply(&p, &mut v);
        let sv = dot(&shadow, &v);
        if sv.norm() < 1e-300 {
            // breakdown: restart the shadow space on the next pass
            shadow.copy_from_slice(&r);
            rho = Complex64::new(1.0, 0.0);
            alpha = rho;
            omega = rho;
            p.iter_mut().for_each(|e| *e = zero);
            v.iter_mut().for_each(|e| *e = zero);
            continue;
        }
        alpha = rho_new / sv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) / b_norm <= tol {
            for i in 0..n {
                x[i] += alpha * p[i];
            }
            return KrylovOutcome {
                iterations: it,
                residual: norm(&s) / b_norm,
                converged: true,
            };
        }
        apply(&s, &mut t);
        let tt = dot(&t, &t);
        omega = if tt.norm() > 0.0 { dot(&t, &s) / tt } else { zero };
        for i in 0..n {
            x[i] += alpha * p[i] + omega * s[i];
            r[i] = s[i] - omega * t[i];
        }
        rho = rho_new;
        residual = norm(&r) / b_norm;
        if residual <= tol {
            return KrylovOutcome {
                iterations: it,
                residual,
                converged: true,
            };
        }
        if omega.norm() == 0.0 {
            break;
        }
    }
    KrylovOutcome {
        iterations: max_iter,
        residual,
        converged: false,
    }
}
