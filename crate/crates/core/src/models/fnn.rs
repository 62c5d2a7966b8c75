//! Forward surrogate: binary image → standardized far-field amplitudes.

use super::{batches, check_finite, images_to_matrix, rng_for, History, Observer, Standardization};
use crate::error::{Error, Result};
use crate::geometry::{BinaryImage, PIXELS};
use crate::metrics::relative_abs_error;
use crate::nn::{loss_mse, Activation, Adam, Architecture, Layer, Matrix, Mlp, Seed, TrainConfig};

pub const FNN_WIDTHS: [usize; 11] = [PIXELS, 1000, 1000, 800, 800, 800, 800, 600, 600, 600, 435];
/// Upper-half-plane surrogate: 44 angles × 5 frequencies.
pub const FNN_HALF_PLANE_WIDTHS: [usize; 8] = [PIXELS, 1000, 1000, 800, 800, 600, 600, 220];

pub fn fnn_architecture(widths: &[usize]) -> Architecture {
    Architecture::dense(widths, Activation::Identity)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FnnModel {
    pub net: Mlp<f32>,
    pub standardization: Standardization,
}

impl FnnModel {
    pub fn output_width(&self) -> usize {
        self.net.output_width()
    }

    /// Batch prediction in standardized units.
    pub fn predict_standardized(&self, images: &Matrix<f32>) -> Result<Matrix<f32>> {
        self.net.predict_batch(images)
    }

    /// Far-field amplitudes in physical units.
    pub fn predict(&self, image: &BinaryImage) -> Result<Vec<f32>> {
        Ok(self.predict_many(&[image])?.remove(0))
    }

    pub fn predict_many(&self, images: &[&BinaryImage]) -> Result<Vec<Vec<f32>>> {
        let out = self.predict_standardized(&images_to_matrix(images))?;
        Ok((0..out.rows()).map(|i| self.standardization.invert(out.row(i))).collect())
    }

    /// Keeps only the output units in `keep` (in that order); the
    /// standardization must already describe the kept layout.
    pub fn select_outputs(&self, keep: &[usize], standardization: Standardization) -> Result<Self> {
        if keep.iter().any(|&i| i >= self.output_width()) || keep.is_empty() {
            return Err(Error::Shape("output selection out of range".into()));
        }
        if standardization.width() != keep.len() {
            return Err(Error::Shape(format!(
                "standardization covers {} outputs, selection keeps {}",
                standardization.width(),
                keep.len()
            )));
        }
        let mut layers: Vec<Layer<f32>> = self.net.layers().to_vec();
        let last = layers.last_mut().unwrap();
        let rows: Vec<&[f32]> = keep.iter().map(|&i| last.weights.row(i)).collect();
        last.weights = Matrix::from_rows(&rows)?;
        last.bias = keep.iter().map(|&i| last.bias[i]).collect();
        Ok(Self {
            net: Mlp::from_layers(layers, self.net.seed())?,
            standardization,
        })
    }

    /// The surrogate for the first `k` frequency blocks.
    pub fn first_blocks(&self, k: usize) -> Result<Self> {
        let s = &self.standardization;
        if k == 0 || k > s.mean.len() {
            return Err(Error::Config(format!("cannot keep {k} of {} frequency blocks", s.mean.len())));
        }
        let keep: Vec<usize> = (0..k * s.block_width).collect();
        self.select_outputs(&keep, s.take_blocks(k))
    }
}

/// History columns: `epoch, train_mse, val_mse` (standardized units).
pub fn train_fnn(
    train_x: &[BinaryImage],
    train_f: &[Vec<f32>],
    val_x: &[BinaryImage],
    val_f: &[Vec<f32>],
    block_width: usize,
    cfg: &TrainConfig,
    widths: &[usize],
    observer: Observer<'_>,
) -> Result<(FnnModel, History)> {
    cfg.validate()?;
    if train_x.is_empty() || train_x.len() != train_f.len() || val_x.len() != val_f.len() {
        return Err(Error::Config("forward training needs matching, nonempty image and far-field sets".into()));
    }
    if widths.first() != Some(&PIXELS) || widths.last() != train_f.first().map(|r| r.len()).as_ref() {
        return Err(Error::Config(format!("forward widths {widths:?} do not fit the data")));
    }
    let standardization = Standardization::fit(train_f, block_width)?;
    let targets = standardization.apply_matrix(train_f)?;
    let val_targets = if val_f.is_empty() {
        None
    } else {
        Some(standardization.apply_matrix(val_f)?)
    };
    let mut net = Mlp::new(&fnn_architecture(widths), crate::geometry::derive_seed(cfg.seed, 20))?;
    let mut opt = Adam::new(&net, cfg.adam);
    let mut shuffle = rng_for(cfg.seed, 21);
    let mut history = History::new(&["epoch", "train_mse", "val_mse"]);

    for epoch in 1..=cfg.epochs {
        let (mut sum, mut seen) = (0.0f64, 0usize);
        for idx in batches(train_x.len(), cfg.batch_size, &mut shuffle) {
            let refs: Vec<&BinaryImage> = idx.iter().map(|&i| &train_x[i]).collect();
            let x = images_to_matrix(&refs);
            let rows: Vec<&[f32]> = idx.iter().map(|&i| targets.row(i)).collect();
            let y = Matrix::from_rows(&rows)?;
            let (pred, tape) = net.forward_batch(&x)?;
            let loss = loss_mse(y.as_slice(), pred.as_slice())?;
            let grad = Matrix::from_vec(pred.rows(), pred.cols(), loss.gradient)?;
            let back = net.backward(&tape, Seed::Output(&grad), true, false)?;
            opt.step(&mut net, back.params.as_ref().unwrap(), cfg.learning_rate)?;
            sum += loss.value as f64 * idx.len() as f64;
            seen += idx.len();
        }
        let val = match &val_targets {
            Some(t) => {
                let mut s = 0.0;
                for (c, chunk) in val_x.chunks(64).enumerate() {
                    let refs: Vec<&BinaryImage> = chunk.iter().collect();
                    let pred = net.predict_batch(&images_to_matrix(&refs))?;
                    let rows: Vec<&[f32]> = (0..chunk.len()).map(|i| t.row(c * 64 + i)).collect();
                    s += loss_mse(Matrix::from_rows(&rows)?.as_slice(), pred.as_slice())?.value as f64 * chunk.len() as f64;
                }
                s / val_x.len() as f64
            }
            None => f64::NAN,
        };
        let row = vec![epoch as f64, sum / seen as f64, val];
        check_finite(epoch, "forward network", &row[..2], &[&net])?;
        observer(&row);
        history.rows.push(row);
    }
    Ok((FnnModel { net, standardization }, history))
}

/// Per-sample relative absolute error of the surrogate in physical units.
pub fn evaluate_fnn(model: &FnnModel, images: &[BinaryImage], far_fields: &[Vec<f32>]) -> Result<Vec<f64>> {
    if images.len() != far_fields.len() {
        return Err(Error::Shape("image and far-field counts differ".into()));
    }
    let mut out = Vec::with_capacity(images.len());
    for (chunk, truth) in images.chunks(64).zip(far_fields.chunks(64)) {
        let refs: Vec<&BinaryImage> = chunk.iter().collect();
        for (p, t) in model.predict_many(&refs)?.iter().zip(truth) {
            let t64: Vec<f64> = t.iter().map(|&v| v as f64).collect();
            let p64: Vec<f64> = p.iter().map(|&v| v as f64).collect();
            out.push(relative_abs_error(&t64, &p64)?);
        }
    }
    Ok(out)
}
