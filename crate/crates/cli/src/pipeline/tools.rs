use std::fs;
use std::path::Path;

use serde_json::json;
use sonarshape::geometry::{rasterize, BinaryImage, BoundaryCurve, DOMAIN_SIZE, GRID};
use sonarshape::metrics::relative_abs_error;
use sonarshape::mie::{cross_section_sweep, ElasticMaterial, FluidMaterial, Interior};
use sonarshape::models::InvertMode;
use sonarshape::scatter::{disk_oracle_amplitudes, standard_angles, Simulator, ANGLES};

use super::data::disk_oracle_report;
use super::train::{checkpoint_range, load_aae, load_fnn, load_inn};
use super::{num, write_csv, write_json, Context};
use crate::error::{CliError, CliResult};

/// Cylinder-series tables: disk oracle agreement, far-field patterns of
/// the oracle disks and elastic vs. fluid cross sections.
pub fn cmd_mie(ctx: &Context) -> CliResult<()> {
    let layout = ctx.output()?;
    let cfg = &ctx.cfg;
    let solver = &cfg.solver;
    let oracle = disk_oracle_report(solver, &cfg.evaluation.oracle_radii)?;
    write_csv(
        &layout.mie("oracle.csv"),
        &["radius_m", "frequency_hz", "relative_l2"],
        oracle.iter().map(|r| vec![num(r.radius), num(r.frequency_hz), num(r.relative_l2)]),
    )?;

    let sim = Simulator::new(solver)?;
    let angles = standard_angles();
    let mut rows = vec![];
    for &r in &cfg.evaluation.oracle_radii {
        let simulated = sim.simulate(&rasterize(&BoundaryCurve::circle(r, (0.0, 0.0)), DOMAIN_SIZE))?;
        for (b, &f) in solver.frequencies_hz.iter().enumerate() {
            let series = disk_oracle_amplitudes(r, f, solver, &angles)?;
            for (m, &a) in angles.iter().enumerate() {
                rows.push(vec![num(r), num(f), num(a.to_degrees()), num(series[m]), num(simulated.block(b)[m])]);
            }
        }
    }
    write_csv(&layout.mie("far_field.csv"), &["radius_m", "frequency_hz", "angle_deg", "series", "solver"], rows)?;

    let radius = 0.5;
    let ka: Vec<f64> = (1..=100).map(|i| 0.1 * i as f64).collect();
    let elastic = cross_section_sweep(radius, solver.background, Interior::Elastic(ElasticMaterial::STEEL), &ka)?;
    let fluid = cross_section_sweep(radius, solver.background, Interior::Fluid(solver.object), &ka)?;
    let rigid_like = FluidMaterial::from_speed(solver.background.density, solver.object.sound_speed())?;
    let contrast = cross_section_sweep(radius, solver.background, Interior::Fluid(rigid_like), &ka)?;
    write_csv(
        &layout.mie("cross_section.csv"),
        &["ka", "elastic_steel", "fluid_object", "solver_contrast"],
        elastic
            .iter()
            .zip(&fluid)
            .zip(&contrast)
            .map(|(((x, e), (_, f)), (_, c))| vec![num(*x), num(*e), num(*f), num(*c)]),
    )?;
    let worst = oracle.iter().map(|r| r.relative_l2).fold(0.0, f64::max);
    eprintln!("mie: {} oracle cases, worst relative L2 {worst:.4}", oracle.len());
    Ok(())
}

/// Reads far-field amplitudes from a CSV: the `amplitude` column when a
/// header names one, otherwise every numeric field in reading order.
pub fn read_far_field_csv(path: &Path) -> CliResult<Vec<f32>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let bad = |what: String| CliError::Config(format!("{}: {what}", path.display()));
    let mut records = reader.records();
    let mut values = vec![];
    let mut column: Option<usize> = None;
    let mut first = true;
    while let Some(rec) = records.next() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let fields: Vec<&str> = rec.iter().filter(|f| !f.is_empty()).collect();
        if first {
            first = false;
            if fields.iter().any(|f| f.parse::<f64>().is_err()) {
                column = rec.iter().position(|f| f == "amplitude");
                if column.is_none() && fields.len() > 1 {
                    return Err(bad("header lacks an `amplitude` column".into()));
                }
                continue;
            }
        }
        let picked: Vec<&str> = match column {
            Some(c) => vec![rec.get(c).ok_or_else(|| bad("short row".into()))?],
            None => fields,
        };
        for f in picked {
            values.push(f.parse::<f32>().map_err(|_| bad(format!("not a number: {f:?}")))?);
        }
    }
    if values.is_empty() {
        return Err(bad("no amplitudes".into()));
    }
    Ok(values)
}

pub fn cmd_invert(ctx: &Context, input: &Path, sample: Option<u64>) -> CliResult<()> {
    let layout = ctx.output()?;
    let aae = load_aae(&layout.checkpoint("aae"))?;
    let (fnn, fnn_meta) = load_fnn(&layout.checkpoint("fnn"))?;
    let (inn, _) = load_inn(&layout.checkpoint("inn"))?;
    let range = checkpoint_range(&fnn_meta)?;
    let blocks = inn.standardization.mean.len();
    let mut far_field = read_far_field_csv(input)?;
    if far_field.len() != inn.input_width() {
        if far_field.len() == blocks * ANGLES {
            let mask = sonarshape::models::angular_mask_indices(ANGLES, blocks, range[0], range[1])?;
            far_field = mask.iter().map(|&c| far_field[c]).collect();
        } else {
            return Err(CliError::Config(format!(
                "{} holds {} amplitudes; expected {} or {}",
                input.display(),
                far_field.len(),
                inn.input_width(),
                blocks * ANGLES
            )));
        }
    }
    let mode = sample.map_or(InvertMode::Mean, InvertMode::Sample);
    let params = inn.latent_params(&far_field)?;
    let (z, probs) = inn.invert(&aae.generator, &far_field, mode)?;
    let shape = BinaryImage::threshold(&probs, 0.5)?;
    let predicted = fnn.predict(&shape)?;
    let stem = input.file_stem().map_or("farfield".into(), |s| s.to_string_lossy().into_owned());

    let grid_rows = |values: &dyn Fn(usize) -> String| -> Vec<Vec<String>> {
        (0..GRID).map(|i| (0..GRID).map(|j| values(i * GRID + j)).collect()).collect()
    };
    let header: Vec<String> = (0..GRID).map(|j| format!("c{j}")).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&layout.invert(&format!("{stem}.shape.csv")), &header, grid_rows(&|p| shape.pixels()[p].to_string()))?;
    write_csv(&layout.invert(&format!("{stem}.probabilities.csv")), &header, grid_rows(&|p| num(probs[p] as f64)))?;
    write_json(
        &layout.invert(&format!("{stem}.latent.json")),
        &json!({ "mode": mode, "mu": params.mu, "log_var": params.log_var, "z": z.0 }),
    )?;
    let per_block = far_field.len() / blocks;
    let mask = sonarshape::models::angular_mask_indices(ANGLES, blocks, range[0], range[1])?;
    write_csv(
        &layout.invert(&format!("{stem}.far_field.csv")),
        &["block", "angle_deg", "input", "surrogate"],
        (0..far_field.len()).map(|c| {
            vec![
                (c / per_block).to_string(),
                num(360.0 * (mask[c] % ANGLES) as f64 / ANGLES as f64),
                num(far_field[c] as f64),
                num(predicted[c] as f64),
            ]
        }),
    )?;
    let input64: Vec<f64> = far_field.iter().map(|&v| v as f64).collect();
    let pred64: Vec<f64> = predicted.iter().map(|&v| v as f64).collect();
    eprintln!(
        "invert: fill fraction {:.3}, surrogate relative error {:.4}",
        shape.fill_fraction(),
        relative_abs_error(&input64, &pred64)?
    );
    Ok(())
}
