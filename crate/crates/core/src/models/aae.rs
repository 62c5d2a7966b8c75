//! Adversarial autoencoder over 64×64 binary shapes. The generator half is
//! the decoder later frozen inside the inverse pipeline.

use serde::{Deserialize, Serialize};

use super::{batches, check_finite, images_to_matrix, rng_for, History, Observer};
use crate::error::{Error, Result};
use crate::geometry::{BinaryImage, PIXELS};
use crate::metrics::{bce_error, ssim};
use crate::nn::latent::standard_normal;
use crate::nn::{loss_bce_logits, Activation, Adam, Architecture, LatentVector, Matrix, Mlp, Seed, TrainConfig, LATENT_DIM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AaeArchitecture {
    pub encoder: Vec<usize>,
    pub generator: Vec<usize>,
    pub discriminator: Vec<usize>,
}

impl Default for AaeArchitecture {
    fn default() -> Self {
        Self {
            encoder: vec![PIXELS, 1000, 500, LATENT_DIM],
            generator: vec![LATENT_DIM, 500, 1000, PIXELS],
            discriminator: vec![LATENT_DIM, 500, 500, 1],
        }
    }
}

impl AaeArchitecture {
    pub fn validate(&self) -> Result<()> {
        let (e, g, d) = (&self.encoder, &self.generator, &self.discriminator);
        let ok = e.len() >= 2
            && g.len() >= 2
            && d.len() >= 2
            && e[0] == PIXELS
            && g.last() == Some(&PIXELS)
            && e.last() == g.first()
            && d[0] == *g.first().unwrap()
            && d.last() == Some(&1);
        if !ok {
            return Err(Error::Config(format!(
                "autoencoder widths must chain {PIXELS} → latent → {PIXELS} with a scalar discriminator (got {e:?}, {g:?}, {d:?})"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AaeModel {
    pub encoder: Mlp<f32>,
    pub generator: Mlp<f32>,
    pub discriminator: Mlp<f32>,
}

impl AaeModel {
    pub fn new(arch: &AaeArchitecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let enc = Architecture::dense(&arch.encoder, Activation::Identity);
        Ok(Self {
            encoder: Mlp::new(&enc, crate::geometry::derive_seed(seed, 1))?,
            generator: Mlp::new(&Architecture::dense(&arch.generator, Activation::Sigmoid), crate::geometry::derive_seed(seed, 2))?,
            discriminator: Mlp::new(
                &Architecture::dense(&arch.discriminator, Activation::Sigmoid),
                crate::geometry::derive_seed(seed, 3),
            )?,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.generator.input_width()
    }

    pub fn encode_batch(&self, images: &Matrix<f32>) -> Result<Matrix<f32>> {
        self.encoder.predict_batch(images)
    }

    pub fn generate_batch(&self, z: &Matrix<f32>) -> Result<Matrix<f32>> {
        self.generator.predict_batch(z)
    }

    /// Pixel probabilities in `[0, 1]`.
    pub fn generate(&self, z: &LatentVector<f32>) -> Result<Vec<f32>> {
        if z.len() != self.latent_dim() {
            return Err(Error::Shape(format!("latent has {} entries, generator expects {}", z.len(), self.latent_dim())));
        }
        self.generator.predict(z.as_slice())
    }

    pub fn reconstruct_batch(&self, images: &Matrix<f32>) -> Result<Matrix<f32>> {
        self.generate_batch(&self.encode_batch(images)?)
    }

    pub fn reconstruct(&self, image: &BinaryImage) -> Result<Vec<f32>> {
        let x = images_to_matrix(&[image]);
        Ok(self.reconstruct_batch(&x)?.into_vec())
    }

    pub fn discriminate_batch(&self, z: &Matrix<f32>) -> Result<Matrix<f32>> {
        self.discriminator.predict_batch(z)
    }
}

fn constant(rows: usize, v: f32) -> Matrix<f32> {
    Matrix::from_vec(rows, 1, vec![v; rows]).expect("sized")
}

fn mean_bce_over(aae: &AaeModel, images: &[BinaryImage], batch: usize) -> Result<f64> {
    let mut total = 0.0;
    for chunk in images.chunks(batch.max(1)) {
        let refs: Vec<&BinaryImage> = chunk.iter().collect();
        let x = images_to_matrix(&refs);
        let p = aae.reconstruct_batch(&x)?;
        total += bce_error(x.as_slice(), p.as_slice())? as f64 * chunk.len() as f64;
    }
    Ok(total / images.len().max(1) as f64)
}

/// History columns: `epoch, recon_bce, disc_bce, reg_bce, disc_real, disc_fake, val_recon_bce`.
///
/// Each mini-batch runs three phases with separate Adam states: the
/// reconstruction step updates encoder and generator, the discriminator step
/// separates prior draws (label 1) from codes (label 0), and the
/// regularization step pushes the encoder toward fooling the discriminator.
pub fn train_aae(
    train: &[BinaryImage],
    val: &[BinaryImage],
    cfg: &TrainConfig,
    arch: &AaeArchitecture,
    observer: Observer<'_>,
) -> Result<(AaeModel, History)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Config("autoencoder training set is empty".into()));
    }
    let mut model = AaeModel::new(arch, cfg.seed)?;
    let mut opt_enc_rec = Adam::new(&model.encoder, cfg.adam);
    let mut opt_gen = Adam::new(&model.generator, cfg.adam);
    let mut opt_disc = Adam::new(&model.discriminator, cfg.adam);
    let mut opt_enc_reg = Adam::new(&model.encoder, cfg.adam);
    let mut shuffle = rng_for(cfg.seed, 10);
    let mut prior = rng_for(cfg.seed, 11);
    let latent = model.latent_dim();
    let lr = cfg.learning_rate;
    let mut history = History::new(&["epoch", "recon_bce", "disc_bce", "reg_bce", "disc_real", "disc_fake", "val_recon_bce"]);

    for epoch in 1..=cfg.epochs {
        let mut sums = [0.0f64; 5];
        let mut seen = 0usize;
        for idx in batches(train.len(), cfg.batch_size, &mut shuffle) {
            let refs: Vec<&BinaryImage> = idx.iter().map(|&i| &train[i]).collect();
            let x = images_to_matrix(&refs);
            let b = idx.len();

            // reconstruction
            let (z, enc_tape) = model.encoder.forward_batch(&x)?;
            let (xh, gen_tape) = model.generator.forward_batch(&z)?;
            let (rec, d_logits) = loss_bce_logits(&x, &xh)?;
            let g_back = model.generator.backward(&gen_tape, Seed::PreActivation(&d_logits), true, true)?;
            let e_back = model
                .encoder
                .backward(&enc_tape, Seed::Output(g_back.input.as_ref().unwrap()), true, false)?;
            opt_gen.step(&mut model.generator, g_back.params.as_ref().unwrap(), lr)?;
            opt_enc_rec.step(&mut model.encoder, e_back.params.as_ref().unwrap(), lr)?;

            // discriminator
            let (z_fake, enc_tape) = model.encoder.forward_batch(&x)?;
            let z_real = Matrix::from_vec(b, latent, standard_normal::<f32, _>(&mut prior, b * latent))?;
            let (d_real, real_tape) = model.discriminator.forward_batch(&z_real)?;
            let (d_fake, fake_tape) = model.discriminator.forward_batch(&z_fake)?;
            let (l_real, g_real) = loss_bce_logits(&constant(b, 1.0), &d_real)?;
            let (l_fake, g_fake) = loss_bce_logits(&constant(b, 0.0), &d_fake)?;
            let mut d_grads = model
                .discriminator
                .backward(&real_tape, Seed::PreActivation(&g_real), true, false)?
                .params
                .unwrap();
            d_grads.add_assign(
                model
                    .discriminator
                    .backward(&fake_tape, Seed::PreActivation(&g_fake), true, false)?
                    .params
                    .as_ref()
                    .unwrap(),
            );
            opt_disc.step(&mut model.discriminator, &d_grads, lr)?;

            // regularization: encoder codes should read as prior draws
            let (d_fool, fool_tape) = model.discriminator.forward_batch(&z_fake)?;
            let (l_reg, g_reg) = loss_bce_logits(&constant(b, 1.0), &d_fool)?;
            let d_back = model.discriminator.backward(&fool_tape, Seed::PreActivation(&g_reg), false, true)?;
            let e_back = model
                .encoder
                .backward(&enc_tape, Seed::Output(d_back.input.as_ref().unwrap()), true, false)?;
            opt_enc_reg.step(&mut model.encoder, e_back.params.as_ref().unwrap(), lr)?;

            let mean = |m: &Matrix<f32>| m.as_slice().iter().map(|&v| v as f64).sum::<f64>() / m.as_slice().len() as f64;
            let w = b as f64;
            sums[0] += rec as f64 * w;
            sums[1] += (l_real + l_fake) as f64 * w;
            sums[2] += l_reg as f64 * w;
            sums[3] += mean(&d_real) * w;
            sums[4] += mean(&d_fake) * w;
            seen += b;
        }
        let n = seen as f64;
        let val_bce = if val.is_empty() {
            f64::NAN
        } else {
            mean_bce_over(&model, val, cfg.batch_size.max(64))?
        };
        let row = vec![epoch as f64, sums[0] / n, sums[1] / n, sums[2] / n, sums[3] / n, sums[4] / n, val_bce];
        check_finite(
            epoch,
            "autoencoder",
            &row[..6],
            &[&model.encoder, &model.generator, &model.discriminator],
        )?;
        observer(&row);
        history.rows.push(row);
    }
    Ok((model, history))
}

/// Per-image reconstruction scores. Similarity is computed on the 0.5
/// thresholded reconstruction; cross-entropy is reported both on the raw
/// probabilities and on the thresholded image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AaeEvaluation {
    pub ssim: Vec<f64>,
    pub bce_raw: Vec<f64>,
    pub bce_threshold: Vec<f64>,
}

pub fn evaluate_aae(model: &AaeModel, images: &[BinaryImage]) -> Result<AaeEvaluation> {
    let mut out = AaeEvaluation {
        ssim: Vec::with_capacity(images.len()),
        bce_raw: Vec::with_capacity(images.len()),
        bce_threshold: Vec::with_capacity(images.len()),
    };
    for chunk in images.chunks(64) {
        let refs: Vec<&BinaryImage> = chunk.iter().collect();
        let probs = model.reconstruct_batch(&images_to_matrix(&refs))?;
        for (i, img) in chunk.iter().enumerate() {
            let truth = img.to_f64();
            let raw: Vec<f64> = probs.row(i).iter().map(|&v| v as f64).collect();
            let bin = BinaryImage::threshold(probs.row(i), 0.5)?.to_f64();
            out.ssim.push(ssim(&bin, &truth)?);
            out.bce_raw.push(bce_error(&truth, &raw)?);
            out.bce_threshold.push(bce_error(&truth, &bin)?);
        }
    }
    Ok(out)
}
