//! Random star-shaped scatterers and their 64×64 binary rasterization.
//!
//! Pixel `(i, j)` has its center at `x = -L/2 + (j + ½)h`, `y = -L/2 + (i + ½)h`,
//! so rows run along `+y` and columns along `+x`. Images are stored row-major.

use std::collections::VecDeque;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid side in pixels.
pub const GRID: usize = 64;
pub const PIXELS: usize = GRID * GRID;
/// Physical side length of the square domain (m).
pub const DOMAIN_SIZE: f64 = 2.0;
pub const PIXEL_PITCH: f64 = DOMAIN_SIZE / GRID as f64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub order: u32,
    /// m
    pub amplitude: f64,
    pub phase: f64,
}

/// `r(θ) = base_radius + Σ a_k cos(n_k θ + φ_k)` around `center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurve {
    pub base_radius: f64,
    pub harmonics: Vec<Harmonic>,
    pub center: (f64, f64),
}

impl BoundaryCurve {
    pub fn circle(radius: f64, center: (f64, f64)) -> Self {
        Self {
            base_radius: radius,
            harmonics: Vec::new(),
            center,
        }
    }

    pub fn radius(&self, theta: f64) -> f64 {
        self.base_radius
            + self
                .harmonics
                .iter()
                .map(|h| h.amplitude * (h.order as f64 * theta + h.phase).cos())
                .sum::<f64>()
    }

    /// Upper bound on `r(θ)` measured from the center.
    pub fn max_extent(&self) -> f64 {
        self.base_radius + self.harmonics.iter().map(|h| h.amplitude.abs()).sum::<f64>()
    }

    /// Minimum of `r(θ)` over a dense sample of angles.
    pub fn sampled_min_radius(&self, samples: usize) -> f64 {
        (0..samples)
            .map(|s| self.radius(2.0 * PI * s as f64 / samples as f64))
            .fold(f64::INFINITY, f64::min)
    }

    /// Curve fits in the domain and has strictly positive radius.
    pub fn validate(&self, domain_size: f64) -> Result<()> {
        let half = domain_size / 2.0;
        let (cx, cy) = self.center;
        if !(self.base_radius > 0.0) || self.max_extent() + cx.abs().max(cy.abs()) > half {
            return Err(Error::Domain(format!(
                "curve with extent {:.4} m around ({cx}, {cy}) does not fit a {domain_size} m domain",
                self.max_extent()
            )));
        }
        if self.sampled_min_radius(4096) <= 0.0 {
            return Err(Error::Domain("curve radius reaches zero".into()));
        }
        Ok(())
    }

    /// Star-shape membership test.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        let rho = dx.hypot(dy);
        rho < self.radius(dy.atan2(dx))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapeConfig {
    pub harmonics_min: u32,
    pub harmonics_max: u32,
    /// Highest cosine order a harmonic may take.
    pub max_order: u32,
    /// m
    pub base_radius_min: f64,
    pub base_radius_max: f64,
    /// Cap on `Σ|a_k|` (m).
    pub amplitude_cap: f64,
    pub center: (f64, f64),
    pub domain_size: f64,
}

impl Default for ShapeConfig {
    fn default() -> Self {
        Self {
            harmonics_min: 2,
            harmonics_max: 8,
            max_order: 8,
            base_radius_min: 0.35,
            base_radius_max: 0.6,
            amplitude_cap: 0.25,
            center: (0.0, 0.0),
            domain_size: DOMAIN_SIZE,
        }
    }
}

impl ShapeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("shapes: {msg}")));
        if !(self.base_radius_min > 0.0 && self.base_radius_max >= self.base_radius_min) {
            return bad(format!(
                "base radius range [{}, {}] must be positive and ordered",
                self.base_radius_min, self.base_radius_max
            ));
        }
        if !(self.amplitude_cap >= 0.0) || self.amplitude_cap >= self.base_radius_min {
            return bad(format!(
                "amplitude cap {} must be non-negative and below the minimum base radius {}",
                self.amplitude_cap, self.base_radius_min
            ));
        }
        if self.harmonics_min > self.harmonics_max || self.harmonics_max > self.max_order {
            return bad(format!(
                "harmonic count range [{}, {}] must be ordered and at most max_order {}",
                self.harmonics_min, self.harmonics_max, self.max_order
            ));
        }
        let half = self.domain_size / 2.0;
        if self.base_radius_max + self.amplitude_cap + self.center.0.abs().max(self.center.1.abs()) > half {
            return bad(format!("largest shape does not fit the {} m domain", self.domain_size));
        }
        Ok(())
    }
}

/// Per-sample seed derived from a dataset seed (SplitMix64 finalizer).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws a random boundary. Orders are distinct, amplitudes fall off as
/// `1/order` before being rescaled to a random total below the cap.
pub fn sample_boundary(seed: u64, cfg: &ShapeConfig) -> Result<BoundaryCurve> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let base_radius = if cfg.base_radius_max > cfg.base_radius_min {
            rng.random_range(cfg.base_radius_min..cfg.base_radius_max)
        } else {
            cfg.base_radius_min
        };
        let count = rng.random_range(cfg.harmonics_min..=cfg.harmonics_max) as usize;
        let mut orders: Vec<u32> = (1..=cfg.max_order).collect();
        // partial Fisher-Yates: the first `count` entries are a uniform subset
        for k in 0..count {
            let pick = rng.random_range(k..orders.len());
            orders.swap(k, pick);
        }
        let mut harmonics: Vec<Harmonic> = orders[..count]
            .iter()
            .map(|&order| Harmonic {
                order,
                amplitude: rng.random::<f64>() / order as f64,
                phase: rng.random_range(0.0..2.0 * PI),
            })
            .collect();
        let raw: f64 = harmonics.iter().map(|h| h.amplitude).sum();
        let total = cfg.amplitude_cap * rng.random::<f64>();
        for h in &mut harmonics {
            h.amplitude = if raw > 0.0 { h.amplitude * total / raw } else { 0.0 };
        }
        harmonics.sort_by_key(|h| h.order);
        let curve = BoundaryCurve {
            base_radius,
            harmonics,
            center: cfg.center,
        };
        if curve.validate(cfg.domain_size).is_ok() {
            return Ok(curve);
        }
    }
}

/// A 64×64 occupancy image, pixels in `{0, 1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryImage {
    pixels: Vec<u8>,
}

impl Default for BinaryImage {
    fn default() -> Self {
        Self::zeros()
    }
}

impl BinaryImage {
    pub fn zeros() -> Self {
        Self { pixels: vec![0; PIXELS] }
    }

    pub fn from_pixels(pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != PIXELS {
            return Err(Error::Shape(format!("image needs {PIXELS} pixels, got {}", pixels.len())));
        }
        if let Some(p) = pixels.iter().find(|&&p| p > 1) {
            return Err(Error::Domain(format!("pixel value {p} is not binary")));
        }
        Ok(Self { pixels })
    }

    /// `values[p] ≥ threshold` → 1.
    pub fn threshold<T: Into<f64> + Copy>(values: &[T], threshold: f64) -> Result<Self> {
        if values.len() != PIXELS {
            return Err(Error::Shape(format!("image needs {PIXELS} values, got {}", values.len())));
        }
        Ok(Self {
            pixels: values.iter().map(|&v| u8::from(v.into() >= threshold)).collect(),
        })
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.pixels[i * GRID + j] == 1
    }

    pub fn set(&mut self, i: usize, j: usize, on: bool) {
        self.pixels[i * GRID + j] = u8::from(on);
    }

    pub fn count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p == 1).count()
    }

    pub fn fill_fraction(&self) -> f64 {
        self.count() as f64 / PIXELS as f64
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.pixels.iter().map(|&p| p as f32).collect()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| p as f64).collect()
    }

    /// Reflection `y → −y` (row `i` ↔ `63 − i`).
    pub fn mirror_rows(&self) -> Self {
        let mut out = Self::zeros();
        for i in 0..GRID {
            for j in 0..GRID {
                out.set(GRID - 1 - i, j, self.get(i, j));
            }
        }
        out
    }

    /// Set pixels form one 4-connected component (vacuously true when empty).
    pub fn is_4_connected(&self) -> bool {
        let Some(start) = self.pixels.iter().position(|&p| p == 1) else {
            return true;
        };
        let mut seen = vec![false; PIXELS];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut reached = 0;
        while let Some(p) = queue.pop_front() {
            reached += 1;
            let (i, j) = (p / GRID, p % GRID);
            let mut visit = |q: usize| {
                if self.pixels[q] == 1 && !seen[q] {
                    seen[q] = true;
                    queue.push_back(q);
                }
            };
            if i > 0 {
                visit(p - GRID);
            }
            if i + 1 < GRID {
                visit(p + GRID);
            }
            if j > 0 {
                visit(p - 1);
            }
            if j + 1 < GRID {
                visit(p + 1);
            }
        }
        reached == self.count()
    }
}

/// Pixel-center coordinates `(x, y)` of pixel `(i, j)`.
pub fn pixel_center(i: usize, j: usize, domain_size: f64) -> (f64, f64) {
    let h = domain_size / GRID as f64;
    let lo = -domain_size / 2.0;
    (lo + (j as f64 + 0.5) * h, lo + (i as f64 + 0.5) * h)
}

/// Center-point rasterization on the 64×64 grid of a `domain_size` square.
pub fn rasterize(curve: &BoundaryCurve, domain_size: f64) -> BinaryImage {
    let mut img = BinaryImage::zeros();
    for i in 0..GRID {
        for j in 0..GRID {
            let (x, y) = pixel_center(i, j, domain_size);
            img.set(i, j, curve.contains(x, y));
        }
    }
    img
}

/// `sample_boundary` followed by `rasterize`.
pub fn generate_shape(seed: u64, cfg: &ShapeConfig) -> Result<BinaryImage> {
    Ok(rasterize(&sample_boundary(seed, cfg)?, cfg.domain_size))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_amplitude_is_a_circle() {
        let cfg = ShapeConfig {
            base_radius_min: 0.5,
            base_radius_max: 0.5,
            amplitude_cap: 0.0,
            ..ShapeConfig::default()
        };
        let c = sample_boundary(7, &cfg).unwrap();
        for s in 0..360 {
            assert_eq!(c.radius(s as f64 * PI / 180.0), 0.5);
        }
    }

    #[test]
    fn deterministic() {
        let cfg = ShapeConfig::default();
        assert_eq!(sample_boundary(99, &cfg).unwrap(), sample_boundary(99, &cfg).unwrap());
        assert_ne!(sample_boundary(99, &cfg).unwrap(), sample_boundary(100, &cfg).unwrap());
    }

    #[test]
    fn radius_respects_amplitude_bound() {
        let cfg = ShapeConfig::default();
        for seed in 0..500 {
            let c = sample_boundary(seed, &cfg).unwrap();
            assert!(c.sampled_min_radius(20_000) >= c.base_radius - cfg.amplitude_cap - 1e-12);
            assert!(c.max_extent() <= DOMAIN_SIZE / 2.0);
        }
    }

    #[test]
    fn cap_at_min_radius_is_rejected() {
        let cfg = ShapeConfig {
            amplitude_cap: 0.35,
            ..ShapeConfig::default()
        };
        assert!(matches!(sample_boundary(1, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn disk_area_matches() {
        let img = rasterize(&BoundaryCurve::circle(0.5, (0.0, 0.0)), DOMAIN_SIZE);
        let expected = PI * 0.25 / (PIXEL_PITCH * PIXEL_PITCH);
        let n = img.count() as f64;
        assert!((n - expected).abs() / expected < 0.05, "{n} vs {expected}");
    }

    #[test]
    fn tiny_disk_on_pixel_center_sets_one_pixel() {
        let c = pixel_center(20, 41, DOMAIN_SIZE);
        let img = rasterize(&BoundaryCurve::circle(0.4 * PIXEL_PITCH, c), DOMAIN_SIZE);
        assert_eq!(img.count(), 1);
        assert!(img.get(20, 41));
    }

    #[test]
    fn large_disk_keeps_corners_clear() {
        let img = rasterize(&BoundaryCurve::circle(0.9, (0.0, 0.0)), DOMAIN_SIZE);
        assert!(img.get(31, 31) && img.get(32, 32));
        for (i, j) in [(0, 0), (0, 63), (63, 0), (63, 63)] {
            assert!(!img.get(i, j));
        }
    }

    #[test]
    fn samples_are_connected_and_within_fill_band() {
        let cfg = ShapeConfig::default();
        let mut fills = Vec::new();
        for idx in 0..1000 {
            let img = generate_shape(derive_seed(2024, idx), &cfg).unwrap();
            assert!(img.count() >= 1);
            assert!(img.is_4_connected(), "sample {idx}");
            fills.push(img.fill_fraction());
        }
        let lo = fills.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = fills.iter().cloned().fold(0.0, f64::max);
        assert!(lo >= 0.02 && hi <= 0.6, "fill range [{lo}, {hi}]");
    }

    #[test]
    fn connectivity_detects_split() {
        let mut img = BinaryImage::zeros();
        img.set(3, 3, true);
        img.set(4, 4, true);
        assert!(!img.is_4_connected());
        img.set(3, 4, true);
        assert!(img.is_4_connected());
    }

    #[test]
    fn non_binary_pixels_rejected() {
        let mut px = vec![0u8; PIXELS];
        px[5] = 2;
        assert!(BinaryImage::from_pixels(px).is_err());
        assert!(BinaryImage::from_pixels(vec![0; 10]).is_err());
    }
}
