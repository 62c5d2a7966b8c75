use std::path::Path;

use serde_json::json;
use sonarshape::geometry::PIXELS;
use sonarshape::io::{load_checkpoint, save_checkpoint, CheckpointMeta, ModelKind};
use sonarshape::models::{parameter_hash, train_aae, train_fnn, train_inn, AaeModel, FnnModel, History, InnModel};
use sonarshape::nn::{Mlp, TrainConfig};

use super::data::Dataset;
use super::{require, write_history, Context};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Stage {
    Aae,
    Fnn,
    Inn,
}

fn take(nets: &mut Vec<(String, Mlp<f32>)>, name: &str, path: &Path) -> CliResult<Mlp<f32>> {
    let i = nets
        .iter()
        .position(|(n, _)| n == name)
        .ok_or_else(|| CliError::Missing(format!("{} has no network named {name}", path.display())))?;
    Ok(nets.remove(i).1)
}

pub fn load_aae(path: &Path) -> CliResult<AaeModel> {
    require(path, "autoencoder checkpoint (run `train aae`)")?;
    let (mut nets, _) = load_checkpoint(path, Some(ModelKind::Aae))?;
    Ok(AaeModel {
        encoder: take(&mut nets, "encoder", path)?,
        generator: take(&mut nets, "generator", path)?,
        discriminator: take(&mut nets, "discriminator", path)?,
    })
}

pub fn load_fnn(path: &Path) -> CliResult<(FnnModel, CheckpointMeta)> {
    require(path, "forward checkpoint (run `train fnn`)")?;
    let (mut nets, meta) = load_checkpoint(path, Some(ModelKind::Fnn))?;
    let standardization = meta
        .standardization
        .clone()
        .ok_or_else(|| CliError::Missing(format!("{} lacks standardization statistics", path.display())))?;
    let model = FnnModel {
        net: take(&mut nets, "fnn", path)?,
        standardization,
    };
    Ok((model, meta))
}

pub fn load_inn(path: &Path) -> CliResult<(InnModel, CheckpointMeta)> {
    require(path, "inverse checkpoint (run `train inn`)")?;
    let (mut nets, meta) = load_checkpoint(path, Some(ModelKind::Inn))?;
    let standardization = meta
        .standardization
        .clone()
        .ok_or_else(|| CliError::Missing(format!("{} lacks standardization statistics", path.display())))?;
    let model = InnModel {
        trunk: take(&mut nets, "trunk", path)?,
        mu_head: take(&mut nets, "mu_head", path)?,
        log_var_head: take(&mut nets, "log_var_head", path)?,
        standardization,
    };
    Ok((model, meta))
}

fn with_seed(t: &TrainConfig, seed: u64) -> TrainConfig {
    TrainConfig { seed, ..t.clone() }
}

pub fn cmd_train(ctx: &Context, stage: Stage) -> CliResult<()> {
    let layout = ctx.output()?;
    let cfg = &ctx.cfg;
    match stage {
        Stage::Aae => {
            let (shapes, manifest) = Dataset::load_shapes(&layout)?;
            let pick = |idx: &[usize]| idx.iter().map(|&i| shapes[i].clone()).collect::<Vec<_>>();
            let (train, val) = (pick(&manifest.split.train), pick(&manifest.split.val));
            let tc = with_seed(&cfg.training.aae.train, cfg.seeds.aae());
            let columns = History::new(&["epoch", "recon_bce", "disc_bce", "reg_bce", "disc_real", "disc_fake", "val_recon_bce"]).columns;
            let mut obs = ctx.progress("aae", &columns, tc.epochs);
            let (model, history) = train_aae(&train, &val, &tc, &cfg.training.aae.architecture, &mut obs)?;
            let mut meta = CheckpointMeta::new(ModelKind::Aae);
            meta.train = Some(tc);
            meta.data_hash = sonarshape::io::sha256_file(&layout.shapes())?;
            super::ensure_parent(&layout.checkpoint("aae"))?;
            save_checkpoint(
                &layout.checkpoint("aae"),
                &[("encoder", &model.encoder), ("generator", &model.generator), ("discriminator", &model.discriminator)],
                &meta,
            )?;
            write_history(&layout.history("aae"), &history)?;
        }
        Stage::Fnn => {
            let data = Dataset::load(&layout)?;
            let range = cfg.angular.range_deg;
            let mask = data.mask(range)?;
            let per_block = mask.len() / data.frequencies.len();
            let (tx, tf) = data.select(&data.manifest.split.train, &mask);
            let (vx, vf) = data.select(&data.manifest.split.val, &mask);
            let tc = with_seed(&cfg.training.fnn.train, cfg.seeds.fnn());
            let widths: Vec<usize> = std::iter::once(PIXELS)
                .chain(cfg.training.fnn.hidden.iter().copied())
                .chain(std::iter::once(mask.len()))
                .collect();
            let (model, history) = train_fnn_logged(ctx, "fnn", &tx, &tf, &vx, &vf, per_block, &tc, &widths)?;
            save_fnn(&layout.checkpoint("fnn"), &model, tc, &data, range)?;
            write_history(&layout.history("fnn"), &history)?;
        }
        Stage::Inn => {
            let aae = load_aae(&layout.checkpoint("aae"))?;
            let (fnn, fnn_meta) = load_fnn(&layout.checkpoint("fnn"))?;
            let data = Dataset::load(&layout)?;
            let range = checkpoint_range(&fnn_meta)?;
            let mask = data.mask(range)?;
            let widths = inn_widths(fnn.output_width(), &cfg.training.inn.hidden, aae.latent_dim());
            let (model, history) = train_inn_logged(ctx, "inn", &data, &mask, &aae.generator, &fnn, &widths)?;
            save_inn(&layout.checkpoint("inn"), &model, &aae.generator, &fnn, with_seed(&cfg.training.inn.train, cfg.seeds.inn()), &data, range)?;
            write_history(&layout.history("inn"), &history)?;
        }
    }
    Ok(())
}

pub(super) fn inn_widths(input: usize, hidden: &[usize], latent: usize) -> Vec<usize> {
    std::iter::once(input).chain(hidden.iter().copied()).chain(std::iter::once(latent)).collect()
}

/// Angular window a checkpoint was trained on.
pub(super) fn checkpoint_range(meta: &CheckpointMeta) -> CliResult<[f64; 2]> {
    serde_json::from_value(meta.extra["angular_range_deg"].clone())
        .map_err(|_| CliError::Missing("checkpoint does not record its angular range".into()))
}

#[allow(clippy::too_many_arguments)]
pub(super) fn train_fnn_logged(
    ctx: &Context,
    label: &str,
    tx: &[sonarshape::geometry::BinaryImage],
    tf: &[Vec<f32>],
    vx: &[sonarshape::geometry::BinaryImage],
    vf: &[Vec<f32>],
    per_block: usize,
    tc: &TrainConfig,
    widths: &[usize],
) -> CliResult<(FnnModel, History)> {
    let columns = History::new(&["epoch", "train_mse", "val_mse"]).columns;
    let mut obs = ctx.progress(label, &columns, tc.epochs);
    Ok(train_fnn(tx, tf, vx, vf, per_block, tc, widths, &mut obs)?)
}

/// Trains an inverse network on the masked columns `mask` with the inverse
/// stage's optimizer settings and seed.
pub(super) fn train_inn_logged(
    ctx: &Context,
    label: &str,
    data: &Dataset,
    mask: &[usize],
    generator: &Mlp<f32>,
    fnn: &FnnModel,
    widths: &[usize],
) -> CliResult<(InnModel, History)> {
    let (_, tf) = data.select(&data.manifest.split.train, mask);
    let (_, vf) = data.select(&data.manifest.split.val, mask);
    let tc = with_seed(&ctx.cfg.training.inn.train, ctx.cfg.seeds.inn());
    let columns = History::new(&["epoch", "loss", "mae", "kl", "val_mae"]).columns;
    let mut obs = ctx.progress(label, &columns, tc.epochs);
    Ok(train_inn(&tf, &vf, generator, fnn, &tc, widths, &mut obs)?)
}

pub(super) fn save_fnn(path: &Path, model: &FnnModel, tc: TrainConfig, data: &Dataset, range: [f64; 2]) -> CliResult<()> {
    let mut meta = CheckpointMeta::new(ModelKind::Fnn);
    meta.standardization = Some(model.standardization.clone());
    meta.train = Some(tc);
    meta.data_hash = data.hash.clone();
    meta.extra = json!({ "angular_range_deg": range, "frequencies_hz": data.frequencies });
    super::ensure_parent(path)?;
    save_checkpoint(path, &[("fnn", &model.net)], &meta)?;
    Ok(())
}

pub(super) fn save_inn(
    path: &Path,
    model: &InnModel,
    generator: &Mlp<f32>,
    fnn: &FnnModel,
    tc: TrainConfig,
    data: &Dataset,
    range: [f64; 2],
) -> CliResult<()> {
    let mut meta = CheckpointMeta::new(ModelKind::Inn);
    meta.standardization = Some(model.standardization.clone());
    meta.train = Some(tc);
    meta.data_hash = data.hash.clone();
    meta.extra = json!({
        "angular_range_deg": range,
        "frequency_blocks": model.standardization.mean.len(),
        "generator_hash": parameter_hash(&[generator]),
        "fnn_hash": parameter_hash(&[&fnn.net]),
    });
    super::ensure_parent(path)?;
    save_checkpoint(
        path,
        &[("trunk", &model.trunk), ("mu_head", &model.mu_head), ("log_var_head", &model.log_var_head)],
        &meta,
    )?;
    Ok(())
}
