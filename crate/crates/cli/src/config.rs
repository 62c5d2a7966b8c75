//! Pipeline configuration, read from a TOML document.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sonarshape::geometry::{derive_seed, ShapeConfig};
use sonarshape::models::AaeArchitecture;
use sonarshape::nn::TrainConfig;
use sonarshape::scatter::{SolverConfig, FREQUENCIES_HZ};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub id: String,
    pub count: usize,
    /// train / validation / test
    pub ratios: [f64; 3],
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            id: "paper-desk".into(),
            count: 2000,
            ratios: [0.8, 0.1, 0.1],
        }
    }
}

/// Every seed in the pipeline is derived from `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Seeds {
    pub base: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self { base: 2024 }
    }
}

impl Seeds {
    pub fn shapes(&self) -> u64 {
        derive_seed(self.base, 1)
    }
    pub fn split(&self) -> u64 {
        derive_seed(self.base, 2)
    }
    pub fn aae(&self) -> u64 {
        derive_seed(self.base, 3)
    }
    pub fn fnn(&self) -> u64 {
        derive_seed(self.base, 4)
    }
    /// Shared by the main inverse network and all its variants.
    pub fn inn(&self) -> u64 {
        derive_seed(self.base, 5)
    }
    pub fn evaluation(&self) -> u64 {
        derive_seed(self.base, 6)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AaeStage {
    #[serde(flatten)]
    pub train: TrainConfig,
    pub architecture: AaeArchitecture,
}

impl Default for AaeStage {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            architecture: AaeArchitecture::default(),
        }
    }
}

/// A network whose input and output widths follow from the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetStage {
    #[serde(flatten)]
    pub train: TrainConfig,
    pub hidden: Vec<usize>,
}

impl Default for NetStage {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            hidden: vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub aae: AaeStage,
    pub fnn: NetStage,
    pub inn: NetStage,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            aae: AaeStage::default(),
            fnn: NetStage {
                train: TrainConfig {
                    epochs: 300,
                    ..TrainConfig::default()
                },
                hidden: vec![1000, 1000, 800, 800, 800, 800, 600, 600, 600],
            },
            inn: NetStage {
                train: TrainConfig {
                    epochs: 300,
                    ..TrainConfig::default()
                },
                hidden: vec![800, 800, 500, 500, 500, 400],
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AngularConfig {
    /// Degrees, both ends inclusive.
    pub range_deg: [f64; 2],
}

impl Default for AngularConfig {
    fn default() -> Self {
        Self { range_deg: [0.0, 360.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationConfig {
    /// Numbers of leading frequency blocks to train on.
    pub blocks: Vec<usize>,
    /// Inverse hidden widths for a single block.
    pub hidden_single: Vec<usize>,
    /// Inverse hidden widths for two or more blocks.
    pub hidden: Vec<usize>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            blocks: vec![1, 2, 3, 4, 5],
            hidden_single: vec![800, 500, 500, 500, 400],
            hidden: vec![800, 800, 500, 500, 500, 400],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HalfPlaneConfig {
    pub range_deg: [f64; 2],
    /// Train a separate surrogate on masked data instead of slicing the
    /// full-range one.
    pub dedicated_fnn: bool,
    pub fnn_hidden: Vec<usize>,
    pub inn_hidden: Vec<usize>,
}

impl Default for HalfPlaneConfig {
    fn default() -> Self {
        Self {
            range_deg: [0.0, 180.0],
            dedicated_fnn: true,
            fnn_hidden: vec![1000, 1000, 800, 800, 600, 600],
            inn_hidden: vec![800, 800, 500, 500, 400],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluationConfig {
    /// Test inversions re-simulated with the solver.
    pub resimulate: usize,
    /// Prior draws for the discriminator and fill-fraction checks.
    pub prior_samples: usize,
    /// Disk radii (m) compared against the cylinder series.
    pub oracle_radii: Vec<f64>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            resimulate: 10,
            prior_samples: 1000,
            oracle_radii: vec![0.3, 0.5, 0.7],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub out: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            out: PathBuf::from("runs/paper-desk"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub dataset: DatasetConfig,
    pub seeds: Seeds,
    pub shapes: ShapeConfig,
    pub solver: SolverConfig,
    pub angular: AngularConfig,
    pub training: TrainingConfig,
    pub ablation: AblationConfig,
    pub halfplane: HalfPlaneConfig,
    pub evaluation: EvaluationConfig,
    pub paths: Paths,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> CliResult<()> {
        self.shapes.validate()?;
        self.solver.validate()?;
        for f in &self.solver.frequencies_hz {
            if !FREQUENCIES_HZ.contains(f) {
                return Err(CliError::Config(format!("frequency {f} Hz is not one of {FREQUENCIES_HZ:?}")));
            }
        }
        let a = &self.training.aae;
        a.architecture.validate()?;
        for t in [&a.train, &self.training.fnn.train, &self.training.inn.train] {
            t.validate()?;
        }
        let r = self.dataset.ratios;
        if r.iter().any(|v| !(*v >= 0.0)) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(CliError::Config(format!("dataset ratios {r:?} must be non-negative and sum to 1")));
        }
        let nf = self.solver.frequencies_hz.len();
        if self.ablation.blocks.iter().any(|&k| k == 0 || k > nf) {
            return Err(CliError::Config(format!("ablation blocks must lie in 1..={nf}")));
        }
        for range in [self.angular.range_deg, self.halfplane.range_deg] {
            sonarshape::models::angular_mask_indices(sonarshape::scatter::ANGLES, 1, range[0], range[1])?;
        }
        Ok(())
    }

    pub fn latent_dim(&self) -> usize {
        self.training.aae.architecture.generator[0]
    }

    /// Applies `--seed` and `--out` overrides.
    pub fn with_overrides(mut self, seed: Option<u64>, out: Option<PathBuf>) -> Self {
        if let Some(s) = seed {
            self.seeds.base = s;
        }
        if let Some(o) = out {
            self.paths.out = o;
        }
        self
    }
}
