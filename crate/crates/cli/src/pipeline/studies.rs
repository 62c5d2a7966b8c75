use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sonarshape::geometry::PIXELS;
use sonarshape::models::{evaluate_inn, FnnModel, Standardization};
use sonarshape::nn::TrainConfig;

use super::data::Dataset;
use super::evaluate::MetricSummary;
use super::train::{checkpoint_range, inn_widths, load_aae, load_fnn, load_inn, save_fnn, save_inn, train_fnn_logged, train_inn_logged};
use super::{num, write_csv, write_history, write_json, Context};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub blocks: usize,
    pub input_width: usize,
    pub checkpoint: String,
    #[serde(flatten)]
    pub scores: MetricSummary,
}

fn inn_seeded(ctx: &Context) -> TrainConfig {
    TrainConfig {
        seed: ctx.cfg.seeds.inn(),
        ..ctx.cfg.training.inn.train.clone()
    }
}

/// Inverse networks on the first `k` frequency blocks, all sharing the
/// shapes, split and seed; the surrogate is the full one restricted to the
/// same blocks.
pub fn cmd_ablate_frequencies(ctx: &Context) -> CliResult<Vec<AblationRow>> {
    let layout = ctx.output()?;
    let cfg = &ctx.cfg;
    let aae = load_aae(&layout.checkpoint("aae"))?;
    let (fnn, fnn_meta) = load_fnn(&layout.checkpoint("fnn"))?;
    let data = Dataset::load(&layout)?;
    let range = checkpoint_range(&fnn_meta)?;
    let mask = data.mask(range)?;
    let blocks = data.frequencies.len();
    let per_block = mask.len() / blocks;
    let (test_x, test_f) = data.select(&data.manifest.split.test, &mask);
    let latent = aae.latent_dim();
    let main_inn = layout.checkpoint("inn");

    let mut ks = cfg.ablation.blocks.clone();
    ks.sort_unstable();
    ks.dedup();
    let run = |k: usize| -> CliResult<AblationRow> {
        let fnn_k = fnn.first_blocks(k)?;
        let hidden = if k == 1 { &cfg.ablation.hidden_single } else { &cfg.ablation.hidden };
        let widths = inn_widths(k * per_block, hidden, latent);
        // the all-block variant is exactly the main inverse network
        let reuse = k == blocks && *hidden == cfg.training.inn.hidden && main_inn.is_file();
        let (inn, path) = if reuse {
            (load_inn(&main_inn)?.0, main_inn.clone())
        } else {
            let label = format!("inn-k{k}");
            let (inn, history) = train_inn_logged(ctx, &label, &data, &mask[..k * per_block], &aae.generator, &fnn_k, &widths)?;
            let path = layout.ablation(&format!("inn_k{k}.ckpt"));
            save_inn(&path, &inn, &aae.generator, &fnn_k, inn_seeded(ctx), &data, range)?;
            write_history(&layout.history(&format!("ablation_k{k}")), &history)?;
            (inn, path)
        };
        let sliced: Vec<Vec<f32>> = test_f.iter().map(|r| r[..k * per_block].to_vec()).collect();
        let e = evaluate_inn(&inn, &aae.generator, &fnn_k, &test_x, &sliced)?;
        Ok(AblationRow {
            blocks: k,
            input_width: k * per_block,
            checkpoint: path.strip_prefix(&layout.root).unwrap_or(&path).display().to_string(),
            scores: MetricSummary::of(&e),
        })
    };
    let rows: Vec<AblationRow> = ctx.pool()?.install(|| ks.par_iter().map(|&k| run(k)).collect::<CliResult<_>>())?;
    write_csv(
        &layout.ablation("ablation.csv"),
        &["blocks", "input_width", "ssim", "bce_raw", "bce_threshold", "far_field_error"],
        rows.iter().map(|r| {
            vec![
                r.blocks.to_string(),
                r.input_width.to_string(),
                num(r.scores.ssim),
                num(r.scores.bce_raw),
                num(r.scores.bce_threshold),
                num(r.scores.far_field_error),
            ]
        }),
    )?;
    write_json(&layout.ablation("ablation.json"), &rows)?;
    for r in &rows {
        eprintln!(
            "ablate-freq: k={} ssim {:.4} bce {:.4}/{:.4} ff err {:.4}",
            r.blocks, r.scores.ssim, r.scores.bce_raw, r.scores.bce_threshold, r.scores.far_field_error
        );
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfPlaneRow {
    pub variant: String,
    pub range_deg: [f64; 2],
    pub input_width: usize,
    #[serde(flatten)]
    pub scores: MetricSummary,
}

/// Full-range pipeline against one trained on a reduced angular window.
pub fn cmd_halfplane(ctx: &Context) -> CliResult<Vec<HalfPlaneRow>> {
    let layout = ctx.output()?;
    let cfg = &ctx.cfg;
    let aae = load_aae(&layout.checkpoint("aae"))?;
    let (fnn, fnn_meta) = load_fnn(&layout.checkpoint("fnn"))?;
    let (inn, _) = load_inn(&layout.checkpoint("inn"))?;
    let data = Dataset::load(&layout)?;
    let full_range = checkpoint_range(&fnn_meta)?;
    let full_mask = data.mask(full_range)?;
    let half_range = cfg.halfplane.range_deg;
    let half_mask = data.mask(half_range)?;
    let blocks = data.frequencies.len();

    let test = &data.manifest.split.test;
    let (test_x, test_f) = data.select(test, &full_mask);
    let full = MetricSummary::of(&evaluate_inn(&inn, &aae.generator, &fnn, &test_x, &test_f)?);

    let (half_inn, half_fnn) = if half_mask == full_mask {
        (inn, fnn)
    } else {
        if !half_mask.iter().all(|c| full_mask.contains(c)) {
            return Err(CliError::Config(format!(
                "half-plane window {half_range:?} is not inside the trained window {full_range:?}"
            )));
        }
        let per_block = half_mask.len() / blocks;
        let half_fnn = if cfg.halfplane.dedicated_fnn {
            let split = &data.manifest.split;
            let (tx, tf) = data.select(&split.train, &half_mask);
            let (vx, vf) = data.select(&split.val, &half_mask);
            let tc = TrainConfig {
                seed: cfg.seeds.fnn(),
                ..cfg.training.fnn.train.clone()
            };
            let widths: Vec<usize> = std::iter::once(PIXELS)
                .chain(cfg.halfplane.fnn_hidden.iter().copied())
                .chain(std::iter::once(half_mask.len()))
                .collect();
            let (m, history) = train_fnn_logged(ctx, "fnn-half", &tx, &tf, &vx, &vf, per_block, &tc, &widths)?;
            save_fnn(&layout.halfplane("fnn.ckpt"), &m, tc, &data, half_range)?;
            write_history(&layout.history("halfplane_fnn"), &history)?;
            m
        } else {
            slice_surrogate(&fnn, &full_mask, &half_mask, per_block)?
        };
        let widths = inn_widths(half_mask.len(), &cfg.halfplane.inn_hidden, aae.latent_dim());
        let (half_inn, history) = train_inn_logged(ctx, "inn-half", &data, &half_mask, &aae.generator, &half_fnn, &widths)?;
        save_inn(&layout.halfplane("inn.ckpt"), &half_inn, &aae.generator, &half_fnn, inn_seeded(ctx), &data, half_range)?;
        write_history(&layout.history("halfplane_inn"), &history)?;
        (half_inn, half_fnn)
    };
    let (hx, hf) = data.select(test, &half_mask);
    let half = MetricSummary::of(&evaluate_inn(&half_inn, &aae.generator, &half_fnn, &hx, &hf)?);
    let rows = vec![
        HalfPlaneRow {
            variant: "full".into(),
            range_deg: full_range,
            input_width: full_mask.len(),
            scores: full,
        },
        HalfPlaneRow {
            variant: "half".into(),
            range_deg: half_range,
            input_width: half_inn.input_width(),
            scores: half,
        },
    ];
    write_csv(
        &layout.halfplane("halfplane.csv"),
        &["variant", "range_lo_deg", "range_hi_deg", "input_width", "ssim", "bce_raw", "bce_threshold", "far_field_error"],
        rows.iter().map(|r| {
            vec![
                r.variant.clone(),
                num(r.range_deg[0]),
                num(r.range_deg[1]),
                r.input_width.to_string(),
                num(r.scores.ssim),
                num(r.scores.bce_raw),
                num(r.scores.bce_threshold),
                num(r.scores.far_field_error),
            ]
        }),
    )?;
    write_json(&layout.halfplane("halfplane.json"), &rows)?;
    eprintln!(
        "halfplane: full ssim {:.4} | half ({} inputs) ssim {:.4}",
        rows[0].scores.ssim, rows[1].input_width, rows[1].scores.ssim
    );
    Ok(rows)
}

/// Restricts a surrogate to a sub-window; per-block statistics carry over.
fn slice_surrogate(fnn: &FnnModel, full_mask: &[usize], half_mask: &[usize], per_block: usize) -> CliResult<FnnModel> {
    let keep: Vec<usize> = half_mask
        .iter()
        .map(|c| full_mask.iter().position(|f| f == c).expect("checked subset"))
        .collect();
    let s = &fnn.standardization;
    let standardization = Standardization {
        block_width: per_block,
        mean: s.mean.clone(),
        std: s.std.clone(),
    };
    debug_assert_eq!(keep.len(), per_block * s.mean.len());
    Ok(fnn.select_outputs(&keep, standardization)?)
}
