//! Analytic scattering series for an infinite circular cylinder in a fluid.
//!
//! Two interiors are supported: an elastic solid carrying pressure and shear
//! waves, solved order by order with Cramer's rule on the 3×3 boundary system,
//! and a penetrable fluid, which is the zero-shear reduction of the same
//! problem and serves as the oracle for the volume solver in [`crate::scatter`].
//!
//! Conventions: time factor `exp(-iωt)`, incident wave
//! `p_i = exp(-i k x) = Σ ε_n (-i)^n J_n(k r) cos nθ` of unit amplitude,
//! scattered wave `p_s = Σ c_n H_n^(1)(k r) cos nθ`. The incident wave travels
//! toward `-x`, so the forward direction is `θ = π`.

pub mod bessel;

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use bessel::{bessel_j_with_derivatives, hankel1_with_derivatives};

const SINGULAR_DET: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidMaterial {
    /// kg/m³
    pub density: f64,
    /// Pa
    pub bulk_modulus: f64,
}

impl FluidMaterial {
    pub const WATER: FluidMaterial = FluidMaterial {
        density: 1000.0,
        bulk_modulus: 2.91e9,
    };
    /// Steel treated as a fluid: bulk modulus only, no shear.
    pub const STEEL: FluidMaterial = FluidMaterial {
        density: 7850.0,
        bulk_modulus: 201e9,
    };

    pub fn new(density: f64, bulk_modulus: f64) -> Result<Self> {
        if !(density > 0.0 && bulk_modulus > 0.0) {
            return Err(Error::Config(format!(
                "fluid needs positive density and bulk modulus, got {density}, {bulk_modulus}"
            )));
        }
        Ok(Self {
            density,
            bulk_modulus,
        })
    }

    /// Fluid with a given density and sound speed.
    pub fn from_speed(density: f64, speed: f64) -> Result<Self> {
        Self::new(density, density * speed * speed)
    }

    pub fn sound_speed(&self) -> f64 {
        (self.bulk_modulus / self.density).sqrt()
    }

    pub fn wavenumber(&self, frequency: f64) -> f64 {
        2.0 * PI * frequency / self.sound_speed()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElasticMaterial {
    pub density: f64,
    /// Pressure-wave speed, m/s.
    pub p_speed: f64,
    /// Shear-wave speed, m/s.
    pub s_speed: f64,
}

impl ElasticMaterial {
    pub const STEEL: ElasticMaterial = ElasticMaterial {
        density: 7850.0,
        p_speed: 5960.0,
        s_speed: 3235.0,
    };
    pub const ALUMINUM: ElasticMaterial = ElasticMaterial {
        density: 2700.0,
        p_speed: 6420.0,
        s_speed: 3040.0,
    };

    pub fn new(density: f64, p_speed: f64, s_speed: f64) -> Result<Self> {
        if !(density > 0.0) || !(s_speed >= 0.0) || !(p_speed > s_speed * (4.0f64 / 3.0).sqrt()) {
            return Err(Error::Config(format!(
                "elastic solid needs ρ > 0, c₂ ≥ 0 and c₁ > c₂·√(4/3); got {density}, {p_speed}, {s_speed}"
            )));
        }
        Ok(Self {
            density,
            p_speed,
            s_speed,
        })
    }

    /// Shear modulus μ.
    pub fn mu(&self) -> f64 {
        self.density * self.s_speed * self.s_speed
    }

    /// First Lamé parameter λ.
    pub fn lambda(&self) -> f64 {
        self.density * (self.p_speed * self.p_speed - 2.0 * self.s_speed * self.s_speed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Interior {
    Elastic(ElasticMaterial),
    Fluid(FluidMaterial),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MieProblem {
    pub radius: f64,
    pub frequency: f64,
    pub exterior: FluidMaterial,
    pub interior: Interior,
}

impl MieProblem {
    pub fn new(radius: f64, frequency: f64, exterior: FluidMaterial, interior: Interior) -> Result<Self> {
        if !(radius > 0.0 && frequency > 0.0) {
            return Err(Error::Config(format!(
                "cylinder needs a > 0 and f > 0, got {radius}, {frequency}"
            )));
        }
        Ok(Self {
            radius,
            frequency,
            exterior,
            interior,
        })
    }

    pub fn omega(&self) -> f64 {
        2.0 * PI * self.frequency
    }

    /// Exterior wavenumber k₃.
    pub fn k_exterior(&self) -> f64 {
        self.exterior.wavenumber(self.frequency)
    }

    /// x₃ = k₃ a.
    pub fn x3(&self) -> f64 {
        self.k_exterior() * self.radius
    }

    /// (x₁, x₂) = (k₁ a, k₂ a) for an elastic interior; x₂ is 0 without shear.
    pub fn x_interior(&self) -> (f64, f64) {
        let (c1, c2) = match self.interior {
            Interior::Elastic(m) => (m.p_speed, m.s_speed),
            Interior::Fluid(m) => (m.sound_speed(), 0.0),
        };
        let x1 = self.omega() * self.radius / c1;
        let x2 = if c2 > 0.0 { self.omega() * self.radius / c2 } else { 0.0 };
        (x1, x2)
    }

    pub fn default_n_max(&self) -> usize {
        self.x3().ceil() as usize + 12
    }

    /// Elastic interiors with shear go through Cramer's rule; everything
    /// else through the fluid reduction.
    pub fn solve(&self, n_max: usize) -> Result<MieCoefficients> {
        match self.interior {
            Interior::Elastic(m) if m.s_speed > 0.0 => solve_coefficients_cramer(self, n_max),
            Interior::Elastic(m) => {
                let fluid = FluidMaterial::from_speed(m.density, m.p_speed)?;
                fluid_cylinder_coefficients(self.radius, self.frequency, self.exterior, fluid, n_max)
            }
            Interior::Fluid(m) => {
                fluid_cylinder_coefficients(self.radius, self.frequency, self.exterior, m, n_max)
            }
        }
    }
}

/// Per-order series coefficients. `a` and `b` are the interior potential
/// coefficients (compressional and shear, zero-shear interiors have `b ≡ 0`);
/// `c` are the scattering coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct MieCoefficients {
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
    pub c: Vec<Complex64>,
}

impl MieCoefficients {
    pub fn zeros(n_max: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); n_max + 1];
        Self {
            a: z.clone(),
            b: z.clone(),
            c: z,
        }
    }

    pub fn n_max(&self) -> usize {
        self.c.len().saturating_sub(1)
    }
}

/// ε_n (-i)^n, the incident-wave expansion weight of order `n`.
pub fn incident_weight(n: usize) -> Complex64 {
    let eps = if n == 0 { 1.0 } else { 2.0 };
    let phase = match n % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    };
    phase * eps
}

pub type Matrix3 = [[Complex64; 3]; 3];

struct ElasticBasis {
    j1: bessel::CylinderValues<f64>,
    j2: bessel::CylinderValues<f64>,
    j3: bessel::CylinderValues<f64>,
    h3: bessel::CylinderValues<Complex64>,
}

fn elastic_parts(problem: &MieProblem) -> Result<(ElasticMaterial, f64, f64, f64)> {
    let Interior::Elastic(solid) = problem.interior else {
        return Err(Error::Config("elastic system needs an elastic interior".into()));
    };
    let (x1, x2) = problem.x_interior();
    if x2 == 0.0 {
        return Err(Error::Domain(
            "zero shear speed: use the fluid-cylinder reduction".into(),
        ));
    }
    Ok((solid, x1, x2, problem.x3()))
}

fn elastic_basis(n_max: usize, x1: f64, x2: f64, x3: f64) -> Result<ElasticBasis> {
    Ok(ElasticBasis {
        j1: bessel_j_with_derivatives(n_max, x1)?,
        j2: bessel_j_with_derivatives(n_max, x2)?,
        j3: bessel_j_with_derivatives(n_max, x3)?,
        h3: hankel1_with_derivatives(n_max, x3)?,
    })
}

fn assemble_from_basis(
    problem: &MieProblem,
    solid: &ElasticMaterial,
    basis: &ElasticBasis,
    n: usize,
    (x1, x2, x3): (f64, f64, f64),
) -> (Matrix3, [Complex64; 3]) {
    let re = |v: f64| Complex64::new(v, 0.0);
    let nf = n as f64;
    let a2 = problem.radius * problem.radius;
    let rho_omega2 = problem.exterior.density * problem.omega().powi(2);
    let (lambda, mu) = (solid.lambda(), solid.mu());
    let (j1, dj1, ddj1) = (basis.j1.value[n], basis.j1.d1[n], basis.j1.d2[n]);
    let (j2, dj2, ddj2) = (basis.j2.value[n], basis.j2.d1[n], basis.j2.d2[n]);
    let (h3, dh3) = (basis.h3.value[n], basis.h3.d1[n]);
    let (j3, dj3) = (basis.j3.value[n], basis.j3.d1[n]);

    let m = [
        [re(-x1 * dj1), re(nf * j2), dh3 * (-x3 / rho_omega2)],
        [
            re(x1 * x1 * (-2.0 * mu * ddj1 + lambda * j1)),
            re(2.0 * mu * nf * (x2 * dj2 - j2)),
            h3 * a2,
        ],
        [
            re(2.0 * nf * (x1 * dj1 - j1)),
            re(-nf * nf * j2 + x2 * dj2 - x2 * x2 * ddj2),
            re(0.0),
        ],
    ];
    let w = incident_weight(n);
    let rhs = [w * (x3 / rho_omega2 * dj3), w * (-a2 * j3), re(0.0)];
    (m, rhs)
}

/// Boundary system `M_n (a_n, b_n, c_n)ᵀ = rhs` for order `n` of an elastic
/// cylinder. Rows: radial displacement continuity, normal-stress balance,
/// vanishing shear stress (all scaled by `a` or `a²`).
pub fn assemble_elastic_system(problem: &MieProblem, n: usize) -> Result<(Matrix3, [Complex64; 3])> {
    let (solid, x1, x2, x3) = elastic_parts(problem)?;
    let basis = elastic_basis(n, x1, x2, x3)?;
    Ok(assemble_from_basis(problem, &solid, &basis, n, (x1, x2, x3)))
}

pub fn det3(m: &Matrix3) -> Complex64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn replace_column(m: &Matrix3, col: usize, v: &[Complex64; 3]) -> Matrix3 {
    let mut out = *m;
    for (row, value) in out.iter_mut().zip(v) {
        row[col] = *value;
    }
    out
}

/// Gaussian elimination with partial pivoting; the independent check on Cramer's rule.
pub fn solve3(m: &Matrix3, rhs: &[Complex64; 3]) -> Result<[Complex64; 3]> {
    // Row equilibration first: the rows differ by ~20 orders of magnitude.
    let mut a = *m;
    let mut b = *rhs;
    for (row, bi) in a.iter_mut().zip(b.iter_mut()) {
        let scale = row.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if scale > 0.0 {
            for v in row.iter_mut() {
                *v /= scale;
            }
            *bi /= scale;
        }
    }
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm()))
            .unwrap();
        if a[pivot][col].norm() < SINGULAR_DET {
            return Err(Error::Singular {
                order: 0,
                det: a[pivot][col].norm(),
            });
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let factor = a[row][col] / a[col][col];
            for k in col..3 {
                let sub = factor * a[col][k];
                a[row][k] -= sub;
            }
            let sub = factor * b[col];
            b[row] -= sub;
        }
    }
    let mut x = [Complex64::new(0.0, 0.0); 3];
    for row in (0..3).rev() {
        let mut acc = b[row];
        for k in row + 1..3 {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

/// Elastic-cylinder coefficients by Cramer's rule, `c_n = det V_n / det M_n`
/// with `V_n` the matrix whose last column is replaced by the right-hand side.
pub fn solve_coefficients_cramer(problem: &MieProblem, n_max: usize) -> Result<MieCoefficients> {
    let (solid, x1, x2, x3) = elastic_parts(problem)?;
    let basis = elastic_basis(n_max, x1, x2, x3)?;
    let mut out = MieCoefficients::zeros(n_max);
    for n in 0..=n_max {
        let (m, rhs) = assemble_from_basis(problem, &solid, &basis, n, (x1, x2, x3));
        let det = det3(&m);
        if !(det.norm() >= SINGULAR_DET) {
            return Err(Error::Singular {
                order: n,
                det: det.norm(),
            });
        }
        out.a[n] = det3(&replace_column(&m, 0, &rhs)) / det;
        out.b[n] = det3(&replace_column(&m, 1, &rhs)) / det;
        out.c[n] = det3(&replace_column(&m, 2, &rhs)) / det;
    }
    Ok(out)
}

/// Penetrable fluid cylinder: continuity of pressure and normal velocity at
/// `r = a`. `a_n` holds the interior coefficient `d_n` of `J_n(k₁ r) cos nθ`.
pub fn fluid_cylinder_coefficients(
    radius: f64,
    frequency: f64,
    exterior: FluidMaterial,
    interior: FluidMaterial,
    n_max: usize,
) -> Result<MieCoefficients> {
    let k0 = exterior.wavenumber(frequency);
    let k1 = interior.wavenumber(frequency);
    let (x0, x1) = (k0 * radius, k1 * radius);
    let j0 = bessel_j_with_derivatives(n_max, x0)?;
    let h0 = hankel1_with_derivatives(n_max, x0)?;
    let j1 = bessel_j_with_derivatives(n_max, x1)?;
    let outer = k0 / exterior.density;
    let inner = k1 / interior.density;
    let mut out = MieCoefficients::zeros(n_max);
    for n in 0..=n_max {
        let w = incident_weight(n);
        let num = outer * j0.d1[n] * j1.value[n] - inner * j0.value[n] * j1.d1[n];
        let den = h0.d1[n] * (outer * j1.value[n]) - h0.value[n] * (inner * j1.d1[n]);
        if !(den.norm() >= SINGULAR_DET) {
            return Err(Error::Singular {
                order: n,
                det: den.norm(),
            });
        }
        let c = -w * num / den;
        out.c[n] = c;
        out.a[n] = if j1.value[n] != 0.0 {
            (w * j0.value[n] + c * h0.value[n]) / j1.value[n]
        } else {
            Complex64::new(0.0, 0.0)
        };
    }
    Ok(out)
}

/// Complex far-field amplitude `f(θ) = √(2/(πk)) e^{-iπ/4} Σ c_n (-i)^n cos nθ`,
/// defined by `p_s ≈ f(θ) e^{ikr}/√r`.
pub fn far_field_complex(coeffs: &MieCoefficients, k: f64, angles: &[f64]) -> Vec<Complex64> {
    let prefactor = (2.0 / (PI * k)).sqrt() * Complex64::from_polar(1.0, -FRAC_PI_4);
    let weighted: Vec<Complex64> = coeffs
        .c
        .iter()
        .enumerate()
        .map(|(n, &c)| c * incident_minus_i_power(n))
        .collect();
    angles
        .iter()
        .map(|&theta| {
            let sum: Complex64 = weighted
                .iter()
                .enumerate()
                .map(|(n, &w)| w * (n as f64 * theta).cos())
                .sum();
            prefactor * sum
        })
        .collect()
}

fn incident_minus_i_power(n: usize) -> Complex64 {
    match n % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    }
}

/// Phaseless far-field amplitudes `|f(θ)|`.
pub fn far_field_from_coefficients(coeffs: &MieCoefficients, k: f64, angles: &[f64]) -> Vec<f64> {
    far_field_complex(coeffs, k, angles)
        .into_iter()
        .map(|f| f.norm())
        .collect()
}

/// `σ = ∫|f|² dθ = (2/k) Σ (2/ε_n) |c_n|²`, in metres.
pub fn scattering_cross_section(coeffs: &MieCoefficients, k: f64) -> f64 {
    let sum: f64 = coeffs
        .c
        .iter()
        .enumerate()
        .map(|(n, c)| if n == 0 { 2.0 } else { 1.0 } * c.norm_sqr())
        .sum();
    2.0 / k * sum
}

/// Trapezoidal quadrature of `|f(θ)|²` over the circle; exact for the
/// truncated series once `points > 2 n_max`.
pub fn scattering_cross_section_quadrature(coeffs: &MieCoefficients, k: f64, points: usize) -> f64 {
    let angles: Vec<f64> = (0..points).map(|m| 2.0 * PI * m as f64 / points as f64).collect();
    let step = 2.0 * PI / points as f64;
    far_field_complex(coeffs, k, &angles)
        .iter()
        .map(|f| f.norm_sqr() * step)
        .sum()
}

/// Extinction from the forward amplitude, `σ_ext = -√(8π/k) Re[f(θ_fwd) e^{iπ/4}]`.
/// Equals the scattering cross-section for lossless scatterers.
pub fn extinction_cross_section(forward_amplitude: Complex64, k: f64) -> f64 {
    -(8.0 * PI / k).sqrt() * (forward_amplitude * Complex64::from_polar(1.0, FRAC_PI_4)).re
}

/// Forward direction of the incident wave used by this module.
pub const FORWARD_ANGLE: f64 = PI;

/// A (ka, σ) sweep, for cross-section curves.
pub fn cross_section_sweep(
    radius: f64,
    exterior: FluidMaterial,
    interior: Interior,
    ka_values: &[f64],
) -> Result<Vec<(f64, f64)>> {
    ka_values
        .iter()
        .map(|&ka| {
            let k = ka / radius;
            let frequency = k * exterior.sound_speed() / (2.0 * PI);
            let problem = MieProblem::new(radius, frequency, exterior, interior)?;
            let coeffs = problem.solve(problem.default_n_max())?;
            Ok((ka, scattering_cross_section(&coeffs, k)))
        })
        .collect()
}
