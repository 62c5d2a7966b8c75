//! The three trained artifacts: adversarial autoencoder, forward surrogate
//! and variational inverse network, plus the far-field preprocessing they
//! share.

pub mod aae;
pub mod fnn;
pub mod inn;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{BinaryImage, PIXELS};
use crate::nn::{Matrix, Mlp};

pub use aae::{evaluate_aae, train_aae, AaeArchitecture, AaeEvaluation, AaeModel};
pub use fnn::{evaluate_fnn, train_fnn, FnnModel};
pub use inn::{evaluate_inn, train_inn, InnEvaluation, InnModel, InvertMode};

/// Per-block z-score of far-field vectors: one mean and one standard
/// deviation for every frequency block, fitted on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub block_width: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardization {
    pub fn fit(rows: &[Vec<f32>], block_width: usize) -> Result<Self> {
        let width = rows.first().map(|r| r.len()).ok_or_else(|| Error::Shape("no rows to standardize".into()))?;
        if block_width == 0 || width % block_width != 0 {
            return Err(Error::Shape(format!("row width {width} is not a multiple of block width {block_width}")));
        }
        let blocks = width / block_width;
        let mut mean = vec![0.0; blocks];
        let mut sq = vec![0.0; blocks];
        for row in rows {
            if row.len() != width {
                return Err(Error::Shape("ragged far-field rows".into()));
            }
            for (b, chunk) in row.chunks(block_width).enumerate() {
                for &v in chunk {
                    mean[b] += v as f64;
                    sq[b] += (v as f64) * (v as f64);
                }
            }
        }
        let n = (rows.len() * block_width) as f64;
        let std = mean
            .iter_mut()
            .zip(&sq)
            .map(|(m, s)| {
                *m /= n;
                let var = (s / n - *m * *m).max(0.0);
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { block_width, mean, std })
    }

    pub fn width(&self) -> usize {
        self.block_width * self.mean.len()
    }

    pub fn apply(&self, row: &[f32]) -> Vec<f32> {
        row.iter()
            .enumerate()
            .map(|(i, &v)| {
                let b = i / self.block_width;
                ((v as f64 - self.mean[b]) / self.std[b]) as f32
            })
            .collect()
    }

    pub fn invert(&self, row: &[f32]) -> Vec<f32> {
        row.iter()
            .enumerate()
            .map(|(i, &v)| {
                let b = i / self.block_width;
                (v as f64 * self.std[b] + self.mean[b]) as f32
            })
            .collect()
    }

    pub fn apply_matrix(&self, rows: &[Vec<f32>]) -> Result<Matrix<f32>> {
        let std: Vec<Vec<f32>> = rows.iter().map(|r| self.apply(r)).collect();
        Matrix::from_rows(&std)
    }

    /// Statistics of the first `k` blocks.
    pub fn take_blocks(&self, k: usize) -> Self {
        Self {
            block_width: self.block_width,
            mean: self.mean[..k].to_vec(),
            std: self.std[..k].to_vec(),
        }
    }
}

/// Indices kept by an angular window `[lo°, hi°]` (both inclusive) over
/// `blocks` blocks of `per_block` uniform angles starting at 0°.
pub fn angular_mask_indices(per_block: usize, blocks: usize, lo_deg: f64, hi_deg: f64) -> Result<Vec<usize>> {
    if !(0.0..=360.0).contains(&lo_deg) || !(0.0..=360.0).contains(&hi_deg) || lo_deg >= hi_deg {
        return Err(Error::Config(format!("angular range [{lo_deg}, {hi_deg}] must satisfy 0 ≤ lo < hi ≤ 360")));
    }
    let keep: Vec<usize> = (0..per_block)
        .filter(|&m| {
            let deg = 360.0 * m as f64 / per_block as f64;
            deg >= lo_deg - 1e-9 && deg <= hi_deg + 1e-9
        })
        .collect();
    if keep.is_empty() {
        return Err(Error::Config(format!("angular range [{lo_deg}, {hi_deg}] contains no sample angle")));
    }
    Ok((0..blocks).flat_map(|b| keep.iter().map(move |&m| b * per_block + m)).collect())
}

/// Restricts a far-field vector to an angular window.
pub fn angular_mask<T: Copy>(values: &[T], per_block: usize, lo_deg: f64, hi_deg: f64) -> Result<Vec<T>> {
    if per_block == 0 || values.len() % per_block != 0 {
        return Err(Error::Shape(format!("{} values do not form blocks of {per_block}", values.len())));
    }
    let idx = angular_mask_indices(per_block, values.len() / per_block, lo_deg, hi_deg)?;
    Ok(idx.into_iter().map(|i| values[i]).collect())
}

/// Per-epoch training record, written as CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl History {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| format!("{v}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Progress callback invoked with each finished history row.
pub type Observer<'a> = &'a mut dyn FnMut(&[f64]);

pub fn images_to_matrix(images: &[&BinaryImage]) -> Matrix<f32> {
    let mut data = Vec::with_capacity(images.len() * PIXELS);
    for img in images {
        data.extend(img.pixels().iter().map(|&p| p as f32));
    }
    Matrix::from_vec(images.len(), PIXELS, data).expect("sized")
}

pub fn rows_to_matrix(rows: &[&[f32]]) -> Result<Matrix<f32>> {
    Matrix::from_rows(rows)
}

/// SHA-256 over the little-endian parameter bytes of every network.
pub fn parameter_hash(nets: &[&Mlp<f32>]) -> String {
    let mut h = Sha256::new();
    for net in nets {
        for v in net.parameters() {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Epoch-wise shuffled mini-batches of `0..n`.
pub(crate) fn batches(n: usize, batch: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(batch).map(|c| c.to_vec()).collect()
}

pub(crate) fn rng_for(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(crate::geometry::derive_seed(seed, salt))
}

pub(crate) fn check_finite(epoch: usize, what: &str, values: &[f64], nets: &[&Mlp<f32>]) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) || nets.iter().any(|n| !n.is_finite()) {
        return Err(Error::Diverged {
            epoch,
            what: what.to_string(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardization_round_trip() {
        let rows: Vec<Vec<f32>> = (0..5).map(|r| (0..6).map(|i| (r * 6 + i) as f32 * if i < 3 { 1.0 } else { 10.0 }).collect()).collect();
        let s = Standardization::fit(&rows, 3).unwrap();
        assert_eq!(s.mean.len(), 2);
        let z: Vec<Vec<f32>> = rows.iter().map(|r| s.apply(r)).collect();
        for b in 0..2 {
            let vals: Vec<f64> = z.iter().flat_map(|r| r[b * 3..b * 3 + 3].iter().map(|&v| v as f64)).collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let v = vals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / vals.len() as f64;
            assert!(m.abs() < 1e-5 && (v - 1.0).abs() < 1e-4);
        }
        for (r, zr) in rows.iter().zip(&z) {
            for (a, b) in r.iter().zip(s.invert(zr)) {
                assert!((a - b).abs() <= 1e-4 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn half_plane_keeps_44_angles() {
        let idx = angular_mask_indices(87, 5, 0.0, 180.0).unwrap();
        assert_eq!(idx.len(), 220);
        assert_eq!(&idx[..44], &(0..44).collect::<Vec<_>>()[..]);
        assert_eq!(idx[44], 87);
        let v: Vec<usize> = (0..435).collect();
        assert_eq!(angular_mask(&v, 87, 0.0, 360.0).unwrap(), v);
        assert!(angular_mask(&v, 87, 90.0, 90.0).is_err());
        assert!(angular_mask(&v, 87, 1.0, 3.0).is_err());
    }

    #[test]
    fn history_csv_has_one_row_per_epoch() {
        let mut h = History::new(&["epoch", "loss"]);
        h.rows.push(vec![1.0, 0.5]);
        h.rows.push(vec![2.0, 0.25]);
        assert_eq!(h.to_csv(), "epoch,loss\n1,0.5\n2,0.25\n");
        assert_eq!(h.column("loss").unwrap(), vec![0.5, 0.25]);
    }
}
