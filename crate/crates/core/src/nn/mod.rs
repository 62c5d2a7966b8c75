//! Dense-network engine: forward/backward passes, losses, Adam and the
//! reparameterization trick. Generic over [`crate::Real`].

pub mod adam;
pub mod latent;
pub mod loss;
pub mod matrix;
pub mod mlp;

use serde::{Deserialize, Serialize};

pub use adam::{Adam, AdamConfig};
pub use latent::{reparameterize, reparameterize_batch, GaussianLatentParams, LatentVector, LATENT_DIM};
pub use loss::{loss_bce, loss_bce_logits, loss_inn, loss_inn_batch, loss_kl, loss_mae, loss_mse};
pub use matrix::Matrix;
pub use mlp::{Activation, Architecture, Backward, Gradients, Layer, Mlp, Seed, Tape, LEAKY_SLOPE};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Weight α of the KL term in the inverse-network loss.
    pub kl_weight: f64,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            batch_size: 32,
            epochs: 200,
            kl_weight: 1e-5,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.batch_size == 0 || !(self.kl_weight >= 0.0) {
            return Err(Error::Config(format!(
                "training needs lr > 0, batch > 0 and α ≥ 0 (got {}, {}, {})",
                self.learning_rate, self.batch_size, self.kl_weight
            )));
        }
        let a = &self.adam;
        if !(a.beta1 > 0.0 && a.beta1 < 1.0 && a.beta2 > 0.0 && a.beta2 < 1.0 && a.epsilon > 0.0) {
            return Err(Error::Config("Adam β must lie in (0, 1) and ε > 0".into()));
        }
        Ok(())
    }
}
