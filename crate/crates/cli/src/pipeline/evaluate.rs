use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sonarshape::geometry::BinaryImage;
use sonarshape::metrics::{aggregate, MetricsReport};
use sonarshape::models::{evaluate_aae, evaluate_fnn, evaluate_inn, parameter_hash, InnEvaluation};
use sonarshape::nn::latent::standard_normal;
use sonarshape::nn::Matrix;
use sonarshape::scatter::{relative_l2, Simulator, ANGLES};

use super::data::Dataset;
use super::train::{checkpoint_range, load_aae, load_fnn, load_inn};
use super::{num, write_csv, write_json, Context};
use crate::error::{CliError, CliResult};

/// Mean scores of one inverse-network variant on the test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub ssim: f64,
    pub bce_raw: f64,
    pub bce_threshold: f64,
    pub far_field_error: f64,
}

impl MetricSummary {
    pub fn of(e: &InnEvaluation) -> Self {
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
        Self {
            ssim: mean(&e.ssim),
            bce_raw: mean(&e.bce_raw),
            bce_threshold: mean(&e.bce_threshold),
            far_field_error: mean(&e.far_field_error),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resimulated {
    pub index: usize,
    pub relative_l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub test_size: usize,
    pub aae_ssim: MetricsReport,
    pub aae_bce_raw: MetricsReport,
    pub aae_bce_threshold: MetricsReport,
    /// Mean discriminator output on fresh prior draws.
    pub discriminator_prior_mean: f64,
    /// Mean thresholded fill fraction of generated prior draws.
    pub prior_fill_fraction: f64,
    /// Largest L∞ change of the generator under a 1e-6 latent nudge.
    pub generator_nudge_linf: f64,
    pub fnn_relative_error: MetricsReport,
    pub inn_ssim: MetricsReport,
    pub inn_bce_raw: MetricsReport,
    pub inn_bce_threshold: MetricsReport,
    pub inn_far_field_error: MetricsReport,
    pub inn: MetricSummary,
    /// Generator and surrogate hashes equal those recorded at inverse training.
    pub freeze_verified: bool,
    /// Solver far field of inverted test shapes vs. the input far field.
    pub resimulated: Vec<Resimulated>,
    pub resimulated_mean: f64,
}

fn per_sample_rows(indices: &[usize], columns: &[&[f64]]) -> Vec<Vec<String>> {
    indices
        .iter()
        .enumerate()
        .map(|(r, &i)| std::iter::once(i.to_string()).chain(columns.iter().map(|c| num(c[r]))).collect())
        .collect()
}

pub fn cmd_eval(ctx: &Context) -> CliResult<EvalSummary> {
    let layout = ctx.output()?;
    let cfg = &ctx.cfg;
    let aae = load_aae(&layout.checkpoint("aae"))?;
    let (fnn, fnn_meta) = load_fnn(&layout.checkpoint("fnn"))?;
    let (inn, inn_meta) = load_inn(&layout.checkpoint("inn"))?;
    let data = Dataset::load(&layout)?;
    let split = &data.manifest.split;
    if split.test.iter().any(|i| split.train.binary_search(i).is_ok()) {
        return Err(CliError::Core(sonarshape::Error::Contract("test split overlaps the training split".into())));
    }
    let test = &split.test;
    if test.is_empty() {
        return Err(CliError::Missing("test split is empty".into()));
    }
    let range = checkpoint_range(&fnn_meta)?;
    let mask = data.mask(range)?;
    let (images, fields) = data.select(test, &mask);

    let a = evaluate_aae(&aae, &images)?;
    write_csv(
        &layout.eval("aae_test.csv"),
        &["index", "ssim", "bce_raw", "bce_threshold"],
        per_sample_rows(test, &[&a.ssim, &a.bce_raw, &a.bce_threshold]),
    )?;

    let latent = aae.latent_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seeds.evaluation());
    let n_prior = cfg.evaluation.prior_samples.max(1);
    let prior = Matrix::from_vec(n_prior, latent, standard_normal::<f32, _>(&mut rng, n_prior * latent))?;
    let d = aae.discriminate_batch(&prior)?;
    let discriminator_prior_mean = d.as_slice().iter().map(|&v| v as f64).sum::<f64>() / n_prior as f64;
    let n_fill = n_prior.min(100);
    let generated = aae.generate_batch(&prior)?;
    let mut fill = 0.0;
    for i in 0..n_fill {
        fill += BinaryImage::threshold(generated.row(i), 0.5)?.fill_fraction();
    }
    let mut nudge: f64 = 0.0;
    for i in 0..n_fill.min(10) {
        let z: Vec<f32> = prior.row(i).to_vec();
        let mut z2 = z.clone();
        for (j, v) in z2.iter_mut().enumerate() {
            *v += if j % 2 == 0 { 1e-7 } else { -1e-7 };
        }
        let (g1, g2) = (aae.generator.predict(&z)?, aae.generator.predict(&z2)?);
        nudge = g1.iter().zip(&g2).fold(nudge, |m, (p, q)| m.max((p - q).abs() as f64));
    }

    let f_err = evaluate_fnn(&fnn, &images, &fields)?;
    write_csv(&layout.eval("fnn_test.csv"), &["index", "relative_error"], per_sample_rows(test, &[&f_err]))?;

    let e = evaluate_inn(&inn, &aae.generator, &fnn, &images, &fields)?;
    write_csv(
        &layout.eval("inn_test.csv"),
        &["index", "ssim", "bce_raw", "bce_threshold", "far_field_error"],
        per_sample_rows(test, &[&e.ssim, &e.bce_raw, &e.bce_threshold, &e.far_field_error]),
    )?;
    let freeze_verified = inn_meta.extra["generator_hash"] == parameter_hash(&[&aae.generator])
        && inn_meta.extra["fnn_hash"] == parameter_hash(&[&fnn.net]);

    let resimulated = resimulate(ctx, &layout, &data, &inn, &aae.generator, &fnn, &mask)?;
    let resimulated_mean = resimulated.iter().map(|r| r.relative_l2).sum::<f64>() / resimulated.len().max(1) as f64;

    let summary = EvalSummary {
        test_size: test.len(),
        aae_ssim: aggregate("ssim", &a.ssim, "test")?,
        aae_bce_raw: aggregate("bce_raw", &a.bce_raw, "test")?,
        aae_bce_threshold: aggregate("bce_threshold", &a.bce_threshold, "test")?,
        discriminator_prior_mean,
        prior_fill_fraction: fill / n_fill as f64,
        generator_nudge_linf: nudge,
        fnn_relative_error: aggregate("relative_error", &f_err, "test")?,
        inn_ssim: aggregate("ssim", &e.ssim, "test")?,
        inn_bce_raw: aggregate("bce_raw", &e.bce_raw, "test")?,
        inn_bce_threshold: aggregate("bce_threshold", &e.bce_threshold, "test")?,
        inn_far_field_error: aggregate("far_field_error", &e.far_field_error, "test")?,
        inn: MetricSummary::of(&e),
        freeze_verified,
        resimulated,
        resimulated_mean,
    };
    write_json(&layout.eval("summary.json"), &summary)?;
    eprintln!(
        "eval: aae ssim {:.4} bce {:.4}/{:.4} | fnn err {:.4} | inn ssim {:.4} bce {:.4}/{:.4} ff err {:.4} | resim {:.4}",
        summary.aae_ssim.mean,
        summary.aae_bce_raw.mean,
        summary.aae_bce_threshold.mean,
        summary.fnn_relative_error.mean,
        summary.inn.ssim,
        summary.inn.bce_raw,
        summary.inn.bce_threshold,
        summary.inn.far_field_error,
        summary.resimulated_mean
    );
    Ok(summary)
}

/// Simulates the thresholded inversions of the first test shapes and
/// tabulates them against their input far fields.
#[allow(clippy::too_many_arguments)]
fn resimulate(
    ctx: &Context,
    layout: &super::Layout,
    data: &Dataset,
    inn: &sonarshape::models::InnModel,
    generator: &sonarshape::nn::Mlp<f32>,
    fnn: &sonarshape::models::FnnModel,
    mask: &[usize],
) -> CliResult<Vec<Resimulated>> {
    let n = ctx.cfg.evaluation.resimulate.min(data.manifest.split.test.len());
    let picked = &data.manifest.split.test[..n];
    let (_, fields) = data.select(picked, mask);
    if n == 0 {
        return Ok(vec![]);
    }
    let probs = inn.invert_many(generator, &fields)?;
    let shapes: Vec<BinaryImage> = (0..n)
        .map(|i| BinaryImage::threshold(probs.row(i), 0.5))
        .collect::<sonarshape::Result<_>>()?;
    let mut solver = ctx.cfg.solver.clone();
    solver.frequencies_hz = data.frequencies.clone();
    let sim = Simulator::new(&solver)?;
    let simulated: Vec<Vec<f64>> = ctx.pool()?.install(|| {
        shapes
            .par_iter()
            .map(|s| sim.simulate(s).map(|ff| mask.iter().map(|&c| ff.values[c]).collect()))
            .collect::<sonarshape::Result<_>>()
    })?;
    let refs: Vec<&BinaryImage> = shapes.iter().collect();
    let surrogate = fnn.predict_many(&refs)?;
    let per_block = mask.len() / data.frequencies.len();
    let mut rows = vec![];
    let mut out = vec![];
    for (s, &index) in picked.iter().enumerate() {
        let target: Vec<f64> = fields[s].iter().map(|&v| v as f64).collect();
        out.push(Resimulated {
            index,
            relative_l2: relative_l2(&simulated[s], &target),
        });
        for (c, &col) in mask.iter().enumerate() {
            let f = data.frequencies[c / per_block];
            let angle = 360.0 * (col % ANGLES) as f64 / ANGLES as f64;
            rows.push(vec![
                index.to_string(),
                num(f),
                num(angle),
                num(target[c]),
                num(simulated[s][c]),
                num(surrogate[s][c] as f64),
            ]);
        }
    }
    write_csv(
        &layout.eval("resimulated.csv"),
        &["index", "frequency_hz", "angle_deg", "target", "inverted_simulated", "inverted_surrogate"],
        rows,
    )?;
    Ok(out)
}
