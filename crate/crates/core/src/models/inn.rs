//! Variational inverse network: far field → Gaussian latent → frozen
//! generator → frozen forward surrogate, trained on far-field consistency.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{batches, check_finite, parameter_hash, rng_for, FnnModel, History, Observer, Standardization};
use crate::error::{Error, Result};
use crate::geometry::BinaryImage;
use crate::metrics::{bce_error, relative_abs_error, ssim};
use crate::nn::latent::standard_normal;
use crate::nn::{
    loss_inn_batch, reparameterize, reparameterize_batch, Activation, Adam, Architecture, GaussianLatentParams, LatentVector,
    Matrix, Mlp, Seed, TrainConfig, LATENT_DIM, LEAKY_SLOPE,
};

pub const INN_TRUNK_WIDTHS: [usize; 8] = [435, 800, 800, 500, 500, 500, 400, LATENT_DIM];
pub const INN_HALF_PLANE_WIDTHS: [usize; 7] = [220, 800, 800, 500, 500, 400, LATENT_DIM];

/// Trunk widths for the first `k` of five frequencies with 87 angles each.
pub fn ablation_trunk_widths(k: usize) -> Vec<usize> {
    let input = 87 * k;
    match k {
        1 => vec![input, 800, 500, 500, 500, 400, LATENT_DIM],
        _ => vec![input, 800, 800, 500, 500, 500, 400, LATENT_DIM],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InvertMode {
    /// `z = μ`
    Mean,
    /// `z = μ + σε` with `ε` drawn from this seed.
    Sample(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnModel {
    pub trunk: Mlp<f32>,
    pub mu_head: Mlp<f32>,
    pub log_var_head: Mlp<f32>,
    /// Input standardization, shared with the forward surrogate.
    pub standardization: Standardization,
}

impl InnModel {
    pub fn new(trunk_widths: &[usize], latent: usize, standardization: Standardization, seed: u64) -> Result<Self> {
        if trunk_widths.first() != Some(&standardization.width()) {
            return Err(Error::Config(format!(
                "inverse trunk input {:?} differs from far-field width {}",
                trunk_widths.first(),
                standardization.width()
            )));
        }
        let trunk = Architecture::dense(trunk_widths, Activation::LeakyRelu(LEAKY_SLOPE));
        let head = Architecture::dense(&[*trunk_widths.last().unwrap(), latent], Activation::Identity);
        Ok(Self {
            trunk: Mlp::new(&trunk, crate::geometry::derive_seed(seed, 30))?,
            mu_head: Mlp::new(&head, crate::geometry::derive_seed(seed, 31))?,
            log_var_head: Mlp::new(&head, crate::geometry::derive_seed(seed, 32))?,
            standardization,
        })
    }

    pub fn input_width(&self) -> usize {
        self.trunk.input_width()
    }

    /// `(μ, log σ²)` for standardized far fields.
    pub fn latent_batch(&self, standardized: &Matrix<f32>) -> Result<(Matrix<f32>, Matrix<f32>)> {
        let h = self.trunk.predict_batch(standardized)?;
        Ok((self.mu_head.predict_batch(&h)?, self.log_var_head.predict_batch(&h)?))
    }

    /// Latent parameters for a far field in physical units.
    pub fn latent_params(&self, far_field: &[f32]) -> Result<GaussianLatentParams<f32>> {
        self.check_width(far_field.len())?;
        let x = Matrix::from_vec(1, far_field.len(), self.standardization.apply(far_field))?;
        let (mu, lv) = self.latent_batch(&x)?;
        Ok(GaussianLatentParams {
            mu: mu.into_vec(),
            log_var: lv.into_vec(),
        })
    }

    fn check_width(&self, n: usize) -> Result<()> {
        if n != self.input_width() {
            return Err(Error::Shape(format!("far field has {n} values, inverse network expects {}", self.input_width())));
        }
        Ok(())
    }

    /// Latent code and generated pixel probabilities.
    pub fn invert(&self, generator: &Mlp<f32>, far_field: &[f32], mode: InvertMode) -> Result<(LatentVector<f32>, Vec<f32>)> {
        let params = self.latent_params(far_field)?;
        let z = match mode {
            InvertMode::Mean => LatentVector(params.mu.clone()),
            InvertMode::Sample(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                reparameterize(&params, &standard_normal::<f32, _>(&mut rng, params.mu.len()))
            }
        };
        let probs = generator.predict(z.as_slice())?;
        Ok((z, probs))
    }

    /// Mean-mode probabilities for many far fields.
    pub fn invert_many(&self, generator: &Mlp<f32>, far_fields: &[Vec<f32>]) -> Result<Matrix<f32>> {
        for f in far_fields {
            self.check_width(f.len())?;
        }
        let x = self.standardization.apply_matrix(far_fields)?;
        let (mu, _) = self.latent_batch(&x)?;
        generator.predict_batch(&mu)
    }
}

/// History columns: `epoch, loss, mae, kl, val_mae`. MAE is in
/// standardized units; validation uses `z = μ`.
///
/// The generator and the surrogate only pass gradients through; their
/// parameter hashes are checked after training.
pub fn train_inn(
    train_f: &[Vec<f32>],
    val_f: &[Vec<f32>],
    generator: &Mlp<f32>,
    fnn: &FnnModel,
    cfg: &TrainConfig,
    trunk_widths: &[usize],
    observer: Observer<'_>,
) -> Result<(InnModel, History)> {
    cfg.validate()?;
    if train_f.is_empty() {
        return Err(Error::Config("inverse training set is empty".into()));
    }
    if generator.output_width() != fnn.net.input_width() {
        return Err(Error::Config("generator output does not feed the forward surrogate".into()));
    }
    let frozen = parameter_hash(&[generator, &fnn.net]);
    let mut model = InnModel::new(trunk_widths, generator.input_width(), fnn.standardization.clone(), cfg.seed)?;
    if fnn.output_width() != model.input_width() {
        return Err(Error::Config("surrogate output width differs from inverse input width".into()));
    }
    let targets = model.standardization.apply_matrix(train_f)?;
    let val_targets = if val_f.is_empty() {
        None
    } else {
        Some(model.standardization.apply_matrix(val_f)?)
    };
    let mut opt_trunk = Adam::new(&model.trunk, cfg.adam);
    let mut opt_mu = Adam::new(&model.mu_head, cfg.adam);
    let mut opt_lv = Adam::new(&model.log_var_head, cfg.adam);
    let mut shuffle = rng_for(cfg.seed, 33);
    let mut noise = rng_for(cfg.seed, 34);
    let latent = generator.input_width();
    let alpha = cfg.kl_weight as f32;
    let mut history = History::new(&["epoch", "loss", "mae", "kl", "val_mae"]);

    for epoch in 1..=cfg.epochs {
        let mut sums = [0.0f64; 3];
        let mut seen = 0usize;
        for idx in batches(train_f.len(), cfg.batch_size, &mut shuffle) {
            let b = idx.len();
            let rows: Vec<&[f32]> = idx.iter().map(|&i| targets.row(i)).collect();
            let f = Matrix::from_rows(&rows)?;
            let (h, trunk_tape) = model.trunk.forward_batch(&f)?;
            let (mu, mu_tape) = model.mu_head.forward_batch(&h)?;
            let (lv, lv_tape) = model.log_var_head.forward_batch(&h)?;
            let eps = Matrix::from_vec(b, latent, standard_normal::<f32, _>(&mut noise, b * latent))?;
            let (z, dz_dlv) = reparameterize_batch(&mu, &lv, &eps);
            let (xh, gen_tape) = generator.forward_batch(&z)?;
            let (fh, fnn_tape) = fnn.net.forward_batch(&xh)?;
            let (loss, d_fh, d_mu_kl, d_lv_kl) = loss_inn_batch(&f, &fh, &mu, &lv, alpha)?;

            let d_xh = fnn.net.backward(&fnn_tape, Seed::Output(&d_fh), false, true)?.input.unwrap();
            let d_z = generator.backward(&gen_tape, Seed::Output(&d_xh), false, true)?.input.unwrap();
            let mut d_mu = d_mu_kl;
            let mut d_lv = d_lv_kl;
            for (((m, l), &g), &s) in d_mu
                .as_mut_slice()
                .iter_mut()
                .zip(d_lv.as_mut_slice().iter_mut())
                .zip(d_z.as_slice())
                .zip(dz_dlv.as_slice())
            {
                *m += g;
                *l += g * s;
            }
            let b_mu = model.mu_head.backward(&mu_tape, Seed::Output(&d_mu), true, true)?;
            let b_lv = model.log_var_head.backward(&lv_tape, Seed::Output(&d_lv), true, true)?;
            let mut d_h = b_mu.input.unwrap();
            for (a, &c) in d_h.as_mut_slice().iter_mut().zip(b_lv.input.as_ref().unwrap().as_slice()) {
                *a += c;
            }
            let b_trunk = model.trunk.backward(&trunk_tape, Seed::Output(&d_h), true, false)?;
            opt_mu.step(&mut model.mu_head, b_mu.params.as_ref().unwrap(), cfg.learning_rate)?;
            opt_lv.step(&mut model.log_var_head, b_lv.params.as_ref().unwrap(), cfg.learning_rate)?;
            opt_trunk.step(&mut model.trunk, b_trunk.params.as_ref().unwrap(), cfg.learning_rate)?;

            let w = b as f64;
            sums[0] += loss.value as f64 * w;
            sums[1] += loss.mae as f64 * w;
            sums[2] += loss.kl as f64 * w;
            seen += b;
        }
        let val = match &val_targets {
            Some(t) => {
                let (mu, _) = model.latent_batch(t)?;
                let fh = fnn.net.predict_batch(&generator.predict_batch(&mu)?)?;
                crate::nn::loss_mae(t.as_slice(), fh.as_slice())?.value as f64
            }
            None => f64::NAN,
        };
        let n = seen as f64;
        let row = vec![epoch as f64, sums[0] / n, sums[1] / n, sums[2] / n, val];
        check_finite(epoch, "inverse network", &row[..4], &[&model.trunk, &model.mu_head, &model.log_var_head])?;
        observer(&row);
        history.rows.push(row);
    }
    if parameter_hash(&[generator, &fnn.net]) != frozen {
        return Err(Error::Contract("frozen generator or surrogate changed during inverse training".into()));
    }
    Ok((model, history))
}

/// Per-sample inversion scores with `z = μ`. Images are scored after the
/// 0.5 threshold (cross-entropy also on raw probabilities); the far-field
/// error compares the surrogate's prediction for the thresholded image
/// against the true far field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnEvaluation {
    pub ssim: Vec<f64>,
    pub bce_raw: Vec<f64>,
    pub bce_threshold: Vec<f64>,
    pub far_field_error: Vec<f64>,
}

pub fn evaluate_inn(
    inn: &InnModel,
    generator: &Mlp<f32>,
    fnn: &FnnModel,
    images: &[BinaryImage],
    far_fields: &[Vec<f32>],
) -> Result<InnEvaluation> {
    if images.len() != far_fields.len() {
        return Err(Error::Shape("image and far-field counts differ".into()));
    }
    let mut out = InnEvaluation {
        ssim: vec![],
        bce_raw: vec![],
        bce_threshold: vec![],
        far_field_error: vec![],
    };
    for (imgs, ffs) in images.chunks(64).zip(far_fields.chunks(64)) {
        let probs = inn.invert_many(generator, ffs)?;
        let mut bins = Vec::with_capacity(imgs.len());
        for (i, img) in imgs.iter().enumerate() {
            let truth = img.to_f64();
            let raw: Vec<f64> = probs.row(i).iter().map(|&v| v as f64).collect();
            let bin = BinaryImage::threshold(probs.row(i), 0.5)?;
            let b64 = bin.to_f64();
            out.ssim.push(ssim(&b64, &truth)?);
            out.bce_raw.push(bce_error(&truth, &raw)?);
            out.bce_threshold.push(bce_error(&truth, &b64)?);
            bins.push(bin);
        }
        let refs: Vec<&BinaryImage> = bins.iter().collect();
        for (p, t) in fnn.predict_many(&refs)?.iter().zip(ffs) {
            let t64: Vec<f64> = t.iter().map(|&v| v as f64).collect();
            let p64: Vec<f64> = p.iter().map(|&v| v as f64).collect();
            out.far_field_error.push(relative_abs_error(&t64, &p64)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PIXELS;
    use crate::models::fnn::fnn_architecture;

    fn fixture(seed: u64) -> (Mlp<f32>, FnnModel, Vec<Vec<f32>>) {
        let generator = Mlp::new(&Architecture::dense(&[4, 16, PIXELS], Activation::Sigmoid), seed).unwrap();
        let net = Mlp::new(&fnn_architecture(&[PIXELS, 8, 6]), seed + 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // far fields the surrogate can actually produce
        let z: Vec<f32> = standard_normal(&mut rng, 24 * 4);
        let x = generator.predict_batch(&Matrix::from_vec(24, 4, z).unwrap()).unwrap();
        let y = net.predict_batch(&x).unwrap();
        let rows: Vec<Vec<f32>> = (0..24).map(|i| y.row(i).to_vec()).collect();
        // fold per-output statistics into the last layer so standardized
        // targets have unit spread across samples
        let standardization = Standardization::fit(&rows, 1).unwrap();
        let mut layers = net.layers().to_vec();
        let last = layers.last_mut().unwrap();
        for o in 0..6 {
            let (m, sd) = (standardization.mean[o] as f32, standardization.std[o] as f32);
            last.weights.row_mut(o).iter_mut().for_each(|w| *w /= sd);
            last.bias[o] = (last.bias[o] - m) / sd;
        }
        let net = Mlp::from_layers(layers, seed + 1).unwrap();
        (generator, FnnModel { net, standardization }, rows)
    }

    fn cfg(alpha: f64, epochs: usize) -> TrainConfig {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 8,
            epochs,
            kl_weight: alpha,
            seed: 4,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn frozen_networks_are_untouched() {
        let (g, f, data) = fixture(1);
        let before = parameter_hash(&[&g, &f.net]);
        let (m, h) = train_inn(&data, &data[..4], &g, &f, &cfg(1e-5, 3), &[6, 12, 4], &mut |_| {}).unwrap();
        assert_eq!(parameter_hash(&[&g, &f.net]), before);
        assert_eq!(h.rows.len(), 3);
        let (z, p) = m.invert(&g, &data[0], InvertMode::Mean).unwrap();
        assert_eq!(z.0, m.latent_params(&data[0]).unwrap().mu);
        assert_eq!(p.len(), PIXELS);
        let (zs, _) = m.invert(&g, &data[0], InvertMode::Sample(7)).unwrap();
        assert_ne!(zs, z);
        assert_eq!(m.invert(&g, &data[0], InvertMode::Sample(7)).unwrap().0, zs);
        assert!(m.invert(&g, &data[0][..5], InvertMode::Mean).is_err());
    }

    #[test]
    fn larger_kl_weight_gives_smaller_kl() {
        let (g, f, data) = fixture(2);
        let kl: Vec<f64> = [0.0, 1e-2, 1.0]
            .iter()
            .map(|&a| {
                let (_, h) = train_inn(&data, &[], &g, &f, &cfg(a, 30), &[6, 12, 4], &mut |_| {}).unwrap();
                *h.column("kl").unwrap().last().unwrap()
            })
            .collect();
        assert!(kl[0] > kl[1] && kl[1] > kl[2], "{kl:?}");
    }

    #[test]
    fn training_lowers_consistency_error() {
        let (g, f, data) = fixture(3);
        let (_, h) = train_inn(&data, &data, &g, &f, &cfg(1e-5, 200), &[6, 12, 4], &mut |_| {}).unwrap();
        let mae = h.column("val_mae").unwrap();
        assert!(mae[199] < 0.7 * mae[0], "{:?}", mae.iter().step_by(20).collect::<Vec<_>>());
    }

    #[test]
    fn ablation_widths() {
        assert_eq!(ablation_trunk_widths(1), vec![87, 800, 500, 500, 500, 400, 100]);
        assert_eq!(ablation_trunk_widths(5)[..], INN_TRUNK_WIDTHS[..]);
    }
}
