//! Scalar-Helmholtz forward solver on the pixel grid.
//!
//! The total pressure satisfies the Lippmann–Schwinger equation
//! `p = p_i + k² A(χ p)`, where `A` convolves with the pixel-integrated
//! Green's function `(i/4) H₀⁽¹⁾(k r)`. Each pixel is replaced by the disk of
//! equal area, radius `a_e = h/√π`, which gives closed-form weights. The
//! convolution runs on a zero-padded `2n × 2n` FFT grid and the system is
//! solved with BiCGStab.
//!
//! Incidence is `p_i = exp(i k (x cos α + y sin α))`, default `α = 0` (+x).
//! Only the sound-speed contrast enters, density contrast and shear waves
//! are ignored.

pub mod bicgstab;

use std::f64::consts::{FRAC_PI_4, PI};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BinaryImage, GRID, PIXEL_PITCH};
use crate::mie::bessel::hankel1_orders;
use crate::mie::{far_field_from_coefficients, fluid_cylinder_coefficients, FluidMaterial};

pub use bicgstab::{bicgstab, KrylovOutcome};

/// Default frequencies (Hz); far-field vectors are stored frequency-major.
pub const FREQUENCIES_HZ: [f64; 5] = [1000.0, 1500.0, 2000.0, 2500.0, 3000.0];
/// Angles per frequency block.
pub const ANGLES: usize = 87;

/// `θ_m = 2πm/87`, `m = 0..86`.
pub fn standard_angles() -> Vec<f64> {
    uniform_angles(ANGLES)
}

pub fn uniform_angles(count: usize) -> Vec<f64> {
    (0..count).map(|m| 2.0 * PI * m as f64 / count as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// radians, 0 is +x
    pub incidence_angle: f64,
    pub background: FluidMaterial,
    pub object: FluidMaterial,
    pub frequencies_hz: Vec<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 2000,
            incidence_angle: 0.0,
            background: FluidMaterial::WATER,
            object: FluidMaterial::STEEL,
            frequencies_hz: FREQUENCIES_HZ.to_vec(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(Error::Config(format!(
                "solver: tolerance {} and max_iterations {} must be positive",
                self.tolerance, self.max_iterations
            )));
        }
        if self.frequencies_hz.is_empty() || self.frequencies_hz.iter().any(|f| !(*f > 0.0)) {
            return Err(Error::Config("solver: frequencies must be a nonempty list of positive values".into()));
        }
        FluidMaterial::new(self.background.density, self.background.bulk_modulus)?;
        FluidMaterial::new(self.object.density, self.object.bulk_modulus)?;
        Ok(())
    }
}

/// `χ = (c_bg / c_obj)² − 1`.
pub fn contrast_value(background: &FluidMaterial, object: &FluidMaterial) -> f64 {
    (background.sound_speed() / object.sound_speed()).powi(2) - 1.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastGrid {
    /// pixels per side
    pub n: usize,
    /// m
    pub h: f64,
    /// background wavenumber, 1/m
    pub k: f64,
    pub frequency: f64,
    /// row-major `n × n`
    pub chi: Vec<Complex64>,
}

impl ContrastGrid {
    /// Contrast `chi_value` on every set entry of the row-major `n × n` mask.
    pub fn from_mask(mask: &[u8], n: usize, h: f64, chi_value: f64, k: f64, frequency: f64) -> Result<Self> {
        if mask.len() != n * n {
            return Err(Error::Shape(format!("mask has {} entries, expected {}", mask.len(), n * n)));
        }
        Ok(Self {
            n,
            h,
            k,
            frequency,
            chi: mask
                .iter()
                .map(|&m| Complex64::new(if m != 0 { chi_value } else { 0.0 }, 0.0))
                .collect(),
        })
    }

    pub fn is_zero(&self) -> bool {
        self.chi.iter().all(|c| c.norm() == 0.0)
    }

    /// Center of pixel `(i, j)`: `x` from the column, `y` from the row.
    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        let lo = -(self.n as f64) * self.h / 2.0;
        (lo + (j as f64 + 0.5) * self.h, lo + (i as f64 + 0.5) * self.h)
    }
}

pub fn build_contrast(image: &BinaryImage, background: &FluidMaterial, object: &FluidMaterial, frequency: f64) -> ContrastGrid {
    ContrastGrid::from_mask(
        image.pixels(),
        GRID,
        PIXEL_PITCH,
        contrast_value(background, object),
        background.wavenumber(frequency),
        frequency,
    )
    .expect("binary images always hold GRID² pixels")
}

/// Green's-function weights of an equal-area disk pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelGreen {
    pub k: f64,
    pub h: f64,
    pub a_e: f64,
}

impl PixelGreen {
    pub fn new(k: f64, h: f64) -> Self {
        Self { k, h, a_e: h / PI.sqrt() }
    }

    /// `(iπa_e/(2k)) H₁⁽¹⁾(k a_e) − 1/k²`: the disk integral around its own center.
    pub fn self_term(&self) -> Complex64 {
        let h = hankel1_orders(1, self.k * self.a_e).expect("k a_e > 0");
        Complex64::new(0.0, PI * self.a_e / (2.0 * self.k)) * h[1] - 1.0 / (self.k * self.k)
    }

    /// `(iπa_e/(2k)) J₁(k a_e) H₀⁽¹⁾(k r)` for a disk at center distance `r > a_e`.
    pub fn off_diagonal(&self, r: f64) -> Complex64 {
        let j1 = hankel1_orders(1, self.k * self.a_e).expect("k a_e > 0")[1].re;
        let h0 = hankel1_orders(0, self.k * r).expect("r > 0")[0];
        Complex64::new(0.0, PI * self.a_e / (2.0 * self.k) * j1) * h0
    }
}

/// FFT-accelerated `u ↦ G * u` on an `n × n` grid. Immutable once built, so
/// one instance can serve many threads; scratch space lives in [`Workspace`].
pub struct GreenOperator {
    n: usize,
    h: f64,
    k: f64,
    /// FFT of the `2n × 2n` circulant embedding (transposed layout).
    kernel_hat: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for GreenOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GreenOperator")
            .field("n", &self.n)
            .field("h", &self.h)
            .field("k", &self.k)
            .finish()
    }
}

/// Per-caller buffers for [`GreenOperator`].
#[derive(Debug, Clone)]
pub struct Workspace {
    buf: Vec<Complex64>,
    tmp: Vec<Complex64>,
    fft_scratch: Vec<Complex64>,
    weighted: Vec<Complex64>,
}

impl GreenOperator {
    pub fn new(n: usize, h: f64, k: f64) -> Result<Self> {
        if n == 0 || !(h > 0.0) || !(k > 0.0) {
            return Err(Error::Domain(format!("operator needs n > 0, h > 0, k > 0 (got {n}, {h}, {k})")));
        }
        let m = 2 * n;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        let green = PixelGreen::new(k, h);
        // G depends on |Δ| only, so tabulate one quadrant of offsets
        let mut quadrant = vec![Complex64::default(); n * n];
        for dy in 0..n {
            for dx in 0..n {
                quadrant[dy * n + dx] = if dx == 0 && dy == 0 {
                    green.self_term()
                } else {
                    green.off_diagonal(h * (dx as f64).hypot(dy as f64))
                };
            }
        }
        let offset = |i: usize| -> Option<usize> {
            match i {
                _ if i < n => Some(i),
                _ if i == n => None,
                _ => Some(m - i),
            }
        };
        let mut kernel_hat = vec![Complex64::default(); m * m];
        for r in 0..m {
            for c in 0..m {
                if let (Some(dy), Some(dx)) = (offset(r), offset(c)) {
                    kernel_hat[r * m + c] = quadrant[dy * n + dx];
                }
            }
        }
        let op = Self {
            n,
            h,
            k,
            kernel_hat: Vec::new(),
            forward,
            inverse,
        };
        let mut ws = op.workspace();
        fft2_transposed(&*op.forward, &mut kernel_hat, &mut ws.tmp, &mut ws.fft_scratch, m);
        Ok(Self { kernel_hat, ..op })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn workspace(&self) -> Workspace {
        let m = 2 * self.n;
        let scratch = self
            .forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len());
        Workspace {
            buf: vec![Complex64::default(); m * m],
            tmp: vec![Complex64::default(); m * m],
            fft_scratch: vec![Complex64::default(); scratch],
            weighted: vec![Complex64::default(); self.n * self.n],
        }
    }

    /// `out = G * u` (weights already include the pixel area).
    pub fn convolve(&self, u: &[Complex64], out: &mut [Complex64], ws: &mut Workspace) {
        let (n, m) = (self.n, 2 * self.n);
        ws.buf.iter_mut().for_each(|v| *v = Complex64::default());
        for i in 0..n {
            ws.buf[i * m..i * m + n].copy_from_slice(&u[i * n..(i + 1) * n]);
        }
        fft2_transposed(&*self.forward, &mut ws.buf, &mut ws.tmp, &mut ws.fft_scratch, m);
        for (b, g) in ws.buf.iter_mut().zip(&self.kernel_hat) {
            *b *= g;
        }
        ifft2_from_transposed(&*self.inverse, &mut ws.buf, &mut ws.tmp, &mut ws.fft_scratch, m);
        let scale = 1.0 / (m * m) as f64;
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = ws.buf[i * m + j] * scale;
            }
        }
    }

    /// `out = v − k² G * (χ v)`.
    pub fn apply(&self, chi: &[Complex64], v: &[Complex64], out: &mut [Complex64], ws: &mut Workspace) {
        let mut weighted = std::mem::take(&mut ws.weighted);
        for ((w, c), x) in weighted.iter_mut().zip(chi).zip(v) {
            *w = c * x;
        }
        self.convolve(&weighted, out, ws);
        ws.weighted = weighted;
        let k2 = self.k * self.k;
        for (o, x) in out.iter_mut().zip(v) {
            *o = x - *o * k2;
        }
    }

    fn check(&self, contrast: &ContrastGrid) -> Result<()> {
        if contrast.n != self.n || contrast.h != self.h || contrast.k != self.k {
            return Err(Error::Shape(format!(
                "contrast grid (n={}, h={}, k={}) does not match operator (n={}, h={}, k={})",
                contrast.n, contrast.h, contrast.k, self.n, self.h, self.k
            )));
        }
        Ok(())
    }

    /// `‖p − p_i − k² A(χ p)‖ / ‖p_i‖`.
    pub fn residual(&self, contrast: &ContrastGrid, field: &[Complex64], incident: &[Complex64], ws: &mut Workspace) -> f64 {
        let mut lhs = vec![Complex64::default(); field.len()];
        self.apply(&contrast.chi, field, &mut lhs, ws);
        let diff: Vec<Complex64> = lhs.iter().zip(incident).map(|(a, b)| a - b).collect();
        bicgstab::norm(&diff) / bicgstab::norm(incident)
    }

    /// BiCGStab from `p = p_i`, restarted while the true residual exceeds `tol`.
    pub fn solve(&self, contrast: &ContrastGrid, incidence_angle: f64, tol: f64, max_iter: usize) -> Result<FieldGrid> {
        self.check(contrast)?;
        if !(tol > 0.0) {
            return Err(Error::Config(format!("solver tolerance must be positive, got {tol}")));
        }
        let incident = incident_field(contrast, incidence_angle);
        let mut p = incident.clone();
        if contrast.is_zero() {
            return Ok(FieldGrid {
                n: contrast.n,
                frequency: contrast.frequency,
                values: p,
                iterations: 0,
                residual: 0.0,
            });
        }
        let mut ws = self.workspace();
        let mut iterations = 0;
        loop {
            let budget = max_iter - iterations;
            let outcome = bicgstab(
                |v, out| self.apply(&contrast.chi, v, out, &mut ws),
                &incident,
                &mut p,
                tol,
                budget,
            );
            iterations += outcome.iterations;
            let residual = self.residual(contrast, &p, &incident, &mut ws);
            if !p.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::NoConvergence {
                    iterations,
                    residual: f64::NAN,
                });
            }
            if residual <= tol {
                return Ok(FieldGrid {
                    n: contrast.n,
                    frequency: contrast.frequency,
                    values: p,
                    iterations,
                    residual,
                });
            }
            if iterations >= max_iter || outcome.iterations == 0 {
                return Err(Error::NoConvergence { iterations, residual });
            }
        }
    }
}

/// Row FFTs, transpose, row FFTs: the 2D transform left in transposed layout.
fn fft2_transposed(fft: &dyn Fft<f64>, buf: &mut Vec<Complex64>, tmp: &mut Vec<Complex64>, scratch: &mut [Complex64], m: usize) {
    fft.process_with_scratch(buf, scratch);
    transpose(buf, tmp, m);
    std::mem::swap(buf, tmp);
    fft.process_with_scratch(buf, scratch);
}

/// Inverse of [`fft2_transposed`] without the `1/m²` factor.
fn ifft2_from_transposed(ifft: &dyn Fft<f64>, buf: &mut Vec<Complex64>, tmp: &mut Vec<Complex64>, scratch: &mut [Complex64], m: usize) {
    ifft.process_with_scratch(buf, scratch);
    transpose(buf, tmp, m);
    std::mem::swap(buf, tmp);
    ifft.process_with_scratch(buf, scratch);
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], m: usize) {
    const BLOCK: usize = 16;
    for ib in (0..m).step_by(BLOCK) {
        for jb in (0..m).step_by(BLOCK) {
            for i in ib..(ib + BLOCK).min(m) {
                for j in jb..(jb + BLOCK).min(m) {
                    dst[j * m + i] = src[i * m + j];
                }
            }
        }
    }
}

pub fn incident_field(contrast: &ContrastGrid, incidence_angle: f64) -> Vec<Complex64> {
    let (c, s) = (incidence_angle.cos(), incidence_angle.sin());
    let n = contrast.n;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let (x, y) = contrast.center(i, j);
            out.push(Complex64::from_polar(1.0, contrast.k * (x * c + y * s)));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub n: usize,
    pub frequency: f64,
    /// total pressure, row-major
    pub values: Vec<Complex64>,
    pub iterations: usize,
    pub residual: f64,
}

/// One-shot solve; builds the operator for this grid and wavenumber.
pub fn solve_total_field(contrast: &ContrastGrid, incidence_angle: f64, tol: f64, max_iter: usize) -> Result<FieldGrid> {
    GreenOperator::new(contrast.n, contrast.h, contrast.k)?.solve(contrast, incidence_angle, tol, max_iter)
}

/// `f(θ) = (k²/4) √(2/(πk)) e^{iπ/4} h² Σ_j χ_j p_j e^{−ik r̂·r_j}`, with
/// `p_s ≈ f(θ) e^{ikr}/√r`.
pub fn far_field_complex(contrast: &ContrastGrid, field: &FieldGrid, angles: &[f64]) -> Vec<Complex64> {
    let n = contrast.n;
    let k = contrast.k;
    let prefactor = k * k / 4.0 * (2.0 / (PI * k)).sqrt() * contrast.h * contrast.h * Complex64::from_polar(1.0, FRAC_PI_4);
    let source: Vec<Complex64> = contrast.chi.iter().zip(&field.values).map(|(c, p)| c * p).collect();
    let active_rows: Vec<usize> = (0..n)
        .filter(|&i| source[i * n..(i + 1) * n].iter().any(|v| v.norm() != 0.0))
        .collect();
    let coords: Vec<f64> = (0..n).map(|j| contrast.center(0, j).0).collect();
    angles
        .iter()
        .map(|&theta| {
            let (c, s) = (theta.cos(), theta.sin());
            let ex: Vec<Complex64> = coords.iter().map(|&x| Complex64::from_polar(1.0, -k * c * x)).collect();
            let mut total = Complex64::default();
            for &i in &active_rows {
                let row: Complex64 = source[i * n..(i + 1) * n].iter().zip(&ex).map(|(q, e)| q * e).sum();
                total += row * Complex64::from_polar(1.0, -k * s * coords[i]);
            }
            prefactor * total
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FarFieldPattern {
    pub frequency: f64,
    pub amplitudes: Vec<f64>,
}

/// Phaseless pattern `|f(θ_m)|`.
pub fn far_field(contrast: &ContrastGrid, field: &FieldGrid, angles: &[f64]) -> FarFieldPattern {
    FarFieldPattern {
        frequency: contrast.frequency,
        amplitudes: far_field_complex(contrast, field, angles).iter().map(|f| f.norm()).collect(),
    }
}

/// Frequency-major concatenation of per-frequency patterns.
#[derive(Debug, Clone, PartialEq)]
pub struct FarFieldSet {
    pub frequencies: Vec<f64>,
    pub angles_per_block: usize,
    pub values: Vec<f64>,
}

impl FarFieldSet {
    pub fn from_patterns(patterns: &[FarFieldPattern]) -> Result<Self> {
        let per = patterns.first().map_or(ANGLES, |p| p.amplitudes.len());
        if patterns.iter().any(|p| p.amplitudes.len() != per) {
            return Err(Error::Shape("patterns differ in angle count".into()));
        }
        Ok(Self {
            frequencies: patterns.iter().map(|p| p.frequency).collect(),
            angles_per_block: per,
            values: patterns.iter().flat_map(|p| p.amplitudes.iter().copied()).collect(),
        })
    }

    pub fn block(&self, index: usize) -> &[f64] {
        &self.values[index * self.angles_per_block..(index + 1) * self.angles_per_block]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Operators for every configured frequency, built once and shared by
/// concurrent simulations.
#[derive(Debug)]
pub struct Simulator {
    cfg: SolverConfig,
    chi: f64,
    operators: Vec<GreenOperator>,
    angles: Vec<f64>,
}

impl Simulator {
    pub fn new(cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let operators = cfg
            .frequencies_hz
            .iter()
            .map(|&f| GreenOperator::new(GRID, PIXEL_PITCH, cfg.background.wavenumber(f)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            chi: contrast_value(&cfg.background, &cfg.object),
            cfg: cfg.clone(),
            operators,
            angles: standard_angles(),
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn output_len(&self) -> usize {
        self.cfg.frequencies_hz.len() * ANGLES
    }

    /// Per-frequency patterns; a solver failure carries its frequency index.
    pub fn simulate(&self, image: &BinaryImage) -> Result<FarFieldSet> {
        let mut patterns = Vec::with_capacity(self.operators.len());
        for (index, (op, &f)) in self.operators.iter().zip(&self.cfg.frequencies_hz).enumerate() {
            let contrast = ContrastGrid::from_mask(image.pixels(), GRID, PIXEL_PITCH, self.chi, op.k(), f)?;
            let field = op
                .solve(&contrast, self.cfg.incidence_angle, self.cfg.tolerance, self.cfg.max_iterations)
                .map_err(|e| Error::Frequency {
                    index,
                    source: Box::new(e),
                })?;
            patterns.push(far_field(&contrast, &field, &self.angles));
        }
        FarFieldSet::from_patterns(&patterns)
    }
}

pub fn simulate_sample(image: &BinaryImage, cfg: &SolverConfig) -> Result<FarFieldSet> {
    Simulator::new(cfg)?.simulate(image)
}

/// Fluid-cylinder series for a disk with the object's sound speed and the
/// background density, evaluated in this module's angle convention. The
/// series uses incidence toward `−x`, so its pattern is read at `θ + π`.
pub fn disk_oracle_amplitudes(radius: f64, frequency: f64, cfg: &SolverConfig, angles: &[f64]) -> Result<Vec<f64>> {
    let interior = FluidMaterial::from_speed(cfg.background.density, cfg.object.sound_speed())?;
    let k = cfg.background.wavenumber(frequency);
    let n_max = (k * radius).ceil() as usize + 12;
    let coeffs = fluid_cylinder_coefficients(radius, frequency, cfg.background, interior, n_max)?;
    let shifted: Vec<f64> = angles.iter().map(|a| a - cfg.incidence_angle + PI).collect();
    Ok(far_field_from_coefficients(&coeffs, k, &shifted))
}

/// `‖a − b‖₂ / ‖b‖₂`.
pub fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}
