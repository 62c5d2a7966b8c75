use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sonarshape::geometry::{generate_shape, rasterize, BinaryImage, BoundaryCurve};
use sonarshape::io::{build_manifest, read_shard, sha256_file, sha256_hex, write_shard, Manifest, ShardRecords};
use sonarshape::models::angular_mask_indices;
use sonarshape::scatter::{disk_oracle_amplitudes, relative_l2, standard_angles, Simulator, SolverConfig, ANGLES};

use super::{require, write_json, Context, Layout};
use crate::error::{CliError, CliResult};

/// Shapes, far fields and the split, as stored on disk.
pub struct Dataset {
    pub shapes: Vec<BinaryImage>,
    pub far_fields: Vec<Vec<f32>>,
    pub manifest: Manifest,
    pub frequencies: Vec<f64>,
    /// Digest over both shards and the manifest.
    pub hash: String,
}

impl Dataset {
    pub fn load_shapes(layout: &Layout) -> CliResult<(Vec<BinaryImage>, Manifest)> {
        require(&layout.shapes(), "shape shard (run `gen`)")?;
        require(&layout.manifest(), "manifest (run `gen`)")?;
        let shapes = read_shard(&layout.shapes())?.into_shapes()?;
        let manifest = Manifest::load(&layout.manifest())?;
        if manifest.count != shapes.len() {
            return Err(CliError::Missing(format!(
                "manifest lists {} records but the shard holds {}",
                manifest.count,
                shapes.len()
            )));
        }
        Ok((shapes, manifest))
    }

    pub fn load(layout: &Layout) -> CliResult<Self> {
        let (shapes, manifest) = Self::load_shapes(layout)?;
        require(&layout.far_fields(), "far-field shard (run `simulate`)")?;
        let (width, far_fields) = read_shard(&layout.far_fields())?.into_far_fields()?;
        if far_fields.len() != shapes.len() {
            return Err(CliError::Missing("far-field and shape shards differ in length".into()));
        }
        let solver = manifest.solver.clone().ok_or_else(|| CliError::Missing("manifest has no solver snapshot (run `simulate`)".into()))?;
        if width != solver.frequencies_hz.len() * ANGLES && !far_fields.is_empty() {
            return Err(CliError::Missing(format!("far-field width {width} does not match the solver snapshot")));
        }
        let digest = [layout.shapes(), layout.far_fields(), layout.manifest()]
            .iter()
            .map(|p| sha256_file(p))
            .collect::<sonarshape::Result<Vec<_>>>()?
            .join("");
        Ok(Self {
            shapes,
            far_fields,
            manifest,
            frequencies: solver.frequencies_hz,
            hash: sha256_hex(digest.as_bytes()),
        })
    }

    /// Column indices kept by an angular window, over all frequency blocks.
    pub fn mask(&self, range: [f64; 2]) -> CliResult<Vec<usize>> {
        Ok(angular_mask_indices(ANGLES, self.frequencies.len(), range[0], range[1])?)
    }

    /// Images and masked far fields of `indices`.
    pub fn select(&self, indices: &[usize], mask: &[usize]) -> (Vec<BinaryImage>, Vec<Vec<f32>>) {
        let images = indices.iter().map(|&i| self.shapes[i].clone()).collect();
        let fields = indices
            .iter()
            .map(|&i| mask.iter().map(|&c| self.far_fields[i][c]).collect())
            .collect();
        (images, fields)
    }
}

pub fn cmd_gen(ctx: &Context) -> CliResult<()> {
    let layout = ctx.output()?;
    let cfg = &ctx.cfg;
    let base = cfg.seeds.shapes();
    let shapes = ctx.pool()?.install(|| {
        (0..cfg.dataset.count)
            .into_par_iter()
            .map(|i| generate_shape(sonarshape::geometry::derive_seed(base, i as u64), &cfg.shapes))
            .collect::<sonarshape::Result<Vec<_>>>()
    })?;
    super::ensure_parent(&layout.shapes())?;
    write_shard(&ShardRecords::Shapes(shapes.clone()), &layout.shapes())?;
    let mut manifest = build_manifest(
        &cfg.dataset.id,
        vec!["shapes.aisd".into(), "farfields.aisd".into()],
        shapes.len(),
        cfg.seeds.split(),
        cfg.dataset.ratios,
    )?;
    manifest.shapes = Some(cfg.shapes.clone());
    manifest.save(&layout.manifest())?;
    let fill = shapes.iter().map(|s| s.fill_fraction()).sum::<f64>() / shapes.len().max(1) as f64;
    eprintln!(
        "gen: {} shapes (train {}, val {}, test {}), mean fill {fill:.3}",
        shapes.len(),
        manifest.split.train.len(),
        manifest.split.val.len(),
        manifest.split.test.len()
    );
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub radius: f64,
    pub frequency_hz: f64,
    pub relative_l2: f64,
}

/// Rasterized disks against the fluid-cylinder series at every configured
/// frequency.
pub fn disk_oracle_report(solver: &SolverConfig, radii: &[f64]) -> CliResult<Vec<OracleRow>> {
    let sim = Simulator::new(solver)?;
    let angles = standard_angles();
    let mut rows = vec![];
    for &r in radii {
        let pattern = sim.simulate(&rasterize(&BoundaryCurve::circle(r, (0.0, 0.0)), solver_domain()))?;
        for (b, &f) in solver.frequencies_hz.iter().enumerate() {
            let series = disk_oracle_amplitudes(r, f, solver, &angles)?;
            rows.push(OracleRow {
                radius: r,
                frequency_hz: f,
                relative_l2: relative_l2(pattern.block(b), &series),
            });
        }
    }
    Ok(rows)
}

fn solver_domain() -> f64 {
    sonarshape::geometry::DOMAIN_SIZE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub index: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub count: usize,
    pub width: usize,
    pub failures: Vec<Failure>,
    pub failure_fraction: f64,
    pub oracle: Vec<OracleRow>,
    pub oracle_max_relative_l2: f64,
}

/// Maximum share of failed samples before the command reports an error.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

pub fn cmd_simulate(ctx: &Context) -> CliResult<()> {
    let layout = ctx.output()?;
    let (shapes, mut manifest) = Dataset::load_shapes(&layout)?;
    let solver = &ctx.cfg.solver;
    let sim = Simulator::new(solver)?;
    let width = sim.output_len();
    let start = std::time::Instant::now();
    let results: Vec<sonarshape::Result<Vec<f32>>> = ctx.pool()?.install(|| {
        shapes
            .par_iter()
            .map(|s| sim.simulate(s).map(|ff| ff.values.iter().map(|&v| v as f32).collect()))
            .collect()
    });
    let mut rows = Vec::with_capacity(results.len());
    let mut failures = vec![];
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => rows.push(v),
            Err(e) => {
                failures.push(Failure {
                    index,
                    error: e.to_string(),
                });
                rows.push(vec![0.0; width]);
            }
        }
    }
    write_shard(&ShardRecords::FarFields { width, rows }, &layout.far_fields())?;
    let failed: Vec<usize> = failures.iter().map(|f| f.index).collect();
    manifest.exclude(&failed);
    manifest.solver = Some(solver.clone());
    manifest.save(&layout.manifest())?;

    let oracle = disk_oracle_report(solver, &ctx.cfg.evaluation.oracle_radii)?;
    let oracle_max = oracle.iter().map(|r| r.relative_l2).fold(0.0, f64::max);
    let fraction = failures.len() as f64 / shapes.len().max(1) as f64;
    let report = SimulateReport {
        count: shapes.len(),
        width,
        failures,
        failure_fraction: fraction,
        oracle,
        oracle_max_relative_l2: oracle_max,
    };
    write_json(&layout.simulate_report(), &report)?;
    eprintln!(
        "simulate: {} samples in {:.1}s, {} failed, disk oracle max relative L2 {:.4}",
        report.count,
        start.elapsed().as_secs_f64(),
        report.failures.len(),
        oracle_max
    );
    if fraction > MAX_FAILURE_FRACTION {
        return Err(CliError::Numerical(format!(
            "{} of {} simulations failed (limit {:.0}%)",
            report.failures.len(),
            report.count,
            MAX_FAILURE_FRACTION * 100.0
        )));
    }
    Ok(())
}
