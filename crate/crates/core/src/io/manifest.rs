//! Dataset manifests: shard locations, the seeded train/val/test split and
//! the settings that produced the data.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ShapeConfig;
use crate::scatter::SolverConfig;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dataset_id: String,
    /// Paths relative to the manifest's directory.
    pub shards: Vec<String>,
    pub count: usize,
    pub seed: u64,
    pub ratios: [f64; 3],
    pub split: Split,
    /// Records dropped after the split, e.g. solver failures.
    #[serde(default)]
    pub excluded: Vec<usize>,
    #[serde(default)]
    pub shapes: Option<ShapeConfig>,
    #[serde(default)]
    pub solver: Option<SolverConfig>,
}

/// Seeded shuffle of `0..count`, cut into train/val/test by `ratios`
/// (rounded; the test split takes the remainder).
pub fn build_manifest(dataset_id: &str, shards: Vec<String>, count: usize, seed: u64, ratios: [f64; 3]) -> Result<Manifest> {
    if ratios.iter().any(|r| !(*r >= 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split ratios {ratios:?} must be non-negative and sum to 1")));
    }
    let mut order: Vec<usize> = (0..count).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((count as f64) * ratios[0]).round() as usize;
    let n_val = (((count as f64) * ratios[1]).round() as usize).min(count - n_train);
    let mut train = order[..n_train].to_vec();
    let mut val = order[n_train..n_train + n_val].to_vec();
    let mut test = order[n_train + n_val..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(Manifest {
        dataset_id: dataset_id.to_string(),
        shards,
        count,
        seed,
        ratios,
        split: Split { train, val, test },
        excluded: Vec::new(),
        shapes: None,
        solver: None,
    })
}

impl Manifest {
    /// Splits plus exclusions are disjoint and exhaustive over `0..count`.
    pub fn validate(&self) -> Result<()> {
        let mut seen = vec![false; self.count];
        let s = &self.split;
        for &i in s.train.iter().chain(&s.val).chain(&s.test).chain(&self.excluded) {
            if i >= self.count || std::mem::replace(&mut seen[i], true) {
                return Err(Error::Contract(format!("split index {i} is out of range or repeated")));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Contract("splits do not cover every record".into()));
        }
        Ok(())
    }

    /// Moves `indices` out of their splits into the exclusion list.
    pub fn exclude(&mut self, indices: &[usize]) {
        for &i in indices {
            let s = &mut self.split;
            let before = s.train.len() + s.val.len() + s.test.len();
            s.train.retain(|&j| j != i);
            s.val.retain(|&j| j != i);
            s.test.retain(|&j| j != i);
            if s.train.len() + s.val.len() + s.test.len() < before {
                self.excluded.push(i);
            }
        }
        self.excluded.sort_unstable();
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        super::write_atomic(path, &bytes)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: Manifest = serde_json::from_slice(&fs::read(path)?)?;
        m.validate()?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_ratio_sizes() {
        let m = build_manifest("d", vec![], 2000, 4, [0.8, 0.1, 0.1]).unwrap();
        assert_eq!((m.split.train.len(), m.split.val.len(), m.split.test.len()), (1600, 200, 200));
        m.validate().unwrap();
    }

    #[test]
    fn deterministic_and_seed_dependent() {
        let a = build_manifest("d", vec![], 100, 4, [0.8, 0.1, 0.1]).unwrap();
        assert_eq!(a, build_manifest("d", vec![], 100, 4, [0.8, 0.1, 0.1]).unwrap());
        assert_ne!(a.split, build_manifest("d", vec![], 100, 5, [0.8, 0.1, 0.1]).unwrap().split);
    }

    #[test]
    fn exclusions_keep_the_manifest_exhaustive() {
        let mut m = build_manifest("d", vec![], 20, 1, [0.8, 0.1, 0.1]).unwrap();
        m.exclude(&[3, 3, 17]);
        assert_eq!(m.excluded, vec![3, 17]);
        m.validate().unwrap();
        assert!(!m.split.train.contains(&3) && !m.split.test.contains(&17) && !m.split.val.contains(&17));
    }

    #[test]
    fn bad_ratios_rejected() {
        assert!(matches!(build_manifest("d", vec![], 10, 0, [0.8, 0.1, 0.2]), Err(Error::Config(_))));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("manifest.json");
        let mut m = build_manifest("d", vec!["shapes.aisd".into()], 37, 9, [0.8, 0.1, 0.1]).unwrap();
        m.shapes = Some(ShapeConfig::default());
        m.solver = Some(SolverConfig::default());
        m.save(&p).unwrap();
        assert_eq!(Manifest::load(&p).unwrap(), m);
    }
}
