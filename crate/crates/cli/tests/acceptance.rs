//! End-to-end acceptance. Prints one PASS/FAIL line per criterion and never
//! fails on a red criterion; only harness errors (a stage crashing, a file
//! missing) abort the run.
//!
//! Desk-scale artifacts are cached under the cargo target directory, keyed
//! by the configuration, the crate version and the sources, so reruns after
//! an unrelated edit skip the hours of training. `SONARSHAPE_FRESH=1` wipes
//! the cache first.

mod common;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::Instant;

use common::*;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use sonarshape::io::{load_checkpoint, save_checkpoint, sha256_hex, ModelKind};
use sonarshape::metrics::{ssim, SSIM_K1};
use sonarshape::mie::{
    assemble_elastic_system, fluid_cylinder_coefficients, scattering_cross_section, scattering_cross_section_quadrature,
    solve3, solve_coefficients_cramer, ElasticMaterial, FluidMaterial, Interior, MieProblem,
};
use sonarshape::models::InvertMode;
use sonarshape::nn::latent::GaussianLatentParams;
use sonarshape::nn::loss::{loss_bce, loss_bce_logits, loss_inn, loss_kl, loss_mae, loss_mse};
use sonarshape::nn::mlp::{sigmoid, Seed};
use sonarshape::nn::{Activation, Architecture, Matrix, Mlp};
use sonarshape::scatter::{SolverConfig, FREQUENCIES_HZ};
use sonarshape_cli::pipeline::{disk_oracle_report, load_aae, load_fnn, load_inn};
use sonarshape_cli::PipelineConfig;

struct Report {
    passed: usize,
    failed: usize,
}

impl Report {
    fn line(&mut self, id: &str, ok: bool, detail: String) {
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        let mut out = std::io::stdout().lock();
        writeln!(out, "criterion {id}: {} {detail}", if ok { "PASS" } else { "FAIL" }).unwrap();
        out.flush().unwrap();
    }
}

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

// ---- criterion 1 ----

fn disk_oracle(r: &mut Report) {
    let start = Instant::now();
    let rows = disk_oracle_report(&SolverConfig::default(), &[0.3, 0.5, 0.7]).expect("oracle runs");
    assert_eq!(rows.len(), 15);
    let worst = rows.iter().max_by(|a, b| a.relative_l2.total_cmp(&b.relative_l2)).unwrap();
    let failing: Vec<String> = rows
        .iter()
        .filter(|o| o.relative_l2 > 0.02)
        .map(|o| format!("r={} f={} {:.4}", o.radius, o.frequency_hz, o.relative_l2))
        .collect();
    r.line(
        "1",
        failing.is_empty(),
        format!(
            "disk vs fluid-cylinder series, worst relative L2 {:.4} (r={} m, {} Hz), limit 0.02, {} of 15 over [{}] ({:.1}s)",
            worst.relative_l2,
            worst.radius,
            worst.frequency_hz,
            failing.len(),
            failing.join(", "),
            start.elapsed().as_secs_f64()
        ),
    );
}

// ---- criterion 2 ----

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn elastic_mie(r: &mut Report) {
    let water = FluidMaterial::WATER;
    let steel = ElasticMaterial::STEEL;
    let mut cramer_worst: f64 = 0.0;
    let mut quad_worst: f64 = 0.0;
    let mut shear_worst: f64 = 0.0;
    for &f in &FREQUENCIES_HZ {
        let p = MieProblem::new(0.5, f, water, Interior::Elastic(steel)).unwrap();
        let n_max = p.default_n_max();
        let coeffs = solve_coefficients_cramer(&p, n_max).unwrap();
        let peak = coeffs.c.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for n in 0..=n_max {
            let (m, rhs) = assemble_elastic_system(&p, n).unwrap();
            let x = solve3(&m, &rhs).unwrap();
            if coeffs.c[n].norm() > 1e-12 * peak {
                cramer_worst = cramer_worst.max(rel(coeffs.c[n], x[2]));
            }
        }
        let k = p.k_exterior();
        let closed = scattering_cross_section(&coeffs, k);
        let quad = scattering_cross_section_quadrature(&coeffs, k, 4 * n_max + 8);
        quad_worst = quad_worst.max(((closed - quad) / closed).abs());

        // a solid with the same density and compressional speed but
        // vanishing shear speed behaves like a fluid
        let fluid = FluidMaterial::from_speed(steel.density, steel.p_speed).unwrap();
        let soft = ElasticMaterial::new(steel.density, steel.p_speed, 1e-3).unwrap();
        let p = MieProblem::new(0.5, f, water, Interior::Elastic(soft)).unwrap();
        let elastic = solve_coefficients_cramer(&p, n_max).unwrap();
        let limit = fluid_cylinder_coefficients(0.5, f, water, fluid, n_max).unwrap();
        let peak = limit.c.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for n in 0..=n_max {
            if limit.c[n].norm() > 1e-6 * peak {
                shear_worst = shear_worst.max(rel(elastic.c[n], limit.c[n]));
            }
        }
    }
    let ok = shear_worst < 1e-4 && cramer_worst < 1e-10 && quad_worst < 1e-8;
    r.line(
        "2",
        ok,
        format!(
            "shear→0 vs fluid {shear_worst:.2e} (<1e-4), Cramer vs elimination {cramer_worst:.2e} (<1e-10), \
             cross-section quadrature vs closed form {quad_worst:.2e} (<1e-8)"
        ),
    );
}

// ---- criterion 3 ----

const DELTA: f64 = 1e-5;
const GRAD_TOL: f64 = 1e-4;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

fn central(f: &dyn Fn(&[f64]) -> f64, x: &[f64], i: usize) -> f64 {
    let (mut a, mut b) = (x.to_vec(), x.to_vec());
    a[i] += DELTA;
    b[i] -= DELTA;
    (f(&a) - f(&b)) / (2.0 * DELTA)
}

/// Worst relative error of an analytic gradient over all coordinates.
fn check_vector(f: &dyn Fn(&[f64]) -> f64, x: &[f64], analytic: &[f64]) -> f64 {
    (0..x.len()).map(|i| rel_err(analytic[i], central(f, x, i))).fold(0.0, f64::max)
}

/// Every parameter and input of a random network against central differences
/// of `Σ c ⊙ output`.
fn check_network(acts: &[Activation], widths: &[usize], seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arch = Architecture {
        widths: widths.to_vec(),
        activations: acts.to_vec(),
    };
    let mut net = Mlp::<f64>::new(&arch, seed).unwrap();
    for layer in net.layers_mut() {
        for b in layer.bias.iter_mut() {
            *b = rng.random_range(-0.5..0.5);
        }
    }
    let rows = 3;
    let batch = Matrix::from_vec(rows, widths[0], (0..rows * widths[0]).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let out_w = *widths.last().unwrap();
    let c: Vec<f64> = (0..rows * out_w).map(|_| rng.random_range(-1.0..1.0)).collect();
    let objective = |n: &Mlp<f64>, b: &Matrix<f64>| -> f64 {
        n.predict_batch(b).unwrap().as_slice().iter().zip(&c).map(|(a, w)| a * w).sum()
    };
    let (_, tape) = net.forward_batch(&batch).unwrap();
    let seed_m = Matrix::from_vec(rows, out_w, c.clone()).unwrap();
    let back = net.backward(&tape, Seed::Output(&seed_m), true, true).unwrap();
    let grads = back.params.unwrap();
    let mut worst: f64 = 0.0;
    for l in 0..net.layers().len() {
        let (o, i) = (net.layers()[l].outputs(), net.layers()[l].inputs());
        for p in 0..o * i + o {
            let analytic = if p < o * i { grads.weights[l].get(p / i, p % i) } else { grads.biases[l][p - o * i] };
            let probe = |net: &mut Mlp<f64>, d: f64| {
                let layer = &mut net.layers_mut()[l];
                if p < o * i {
                    let v = layer.weights.get(p / i, p % i);
                    layer.weights.set(p / i, p % i, v + d);
                } else {
                    layer.bias[p - o * i] += d;
                }
            };
            probe(&mut net, DELTA);
            let up = objective(&net, &batch);
            probe(&mut net, -2.0 * DELTA);
            let down = objective(&net, &batch);
            probe(&mut net, DELTA);
            worst = worst.max(rel_err(analytic, (up - down) / (2.0 * DELTA)));
        }
    }
    let input = back.input.unwrap();
    for k in 0..batch.as_slice().len() {
        let (mut plus, mut minus) = (batch.clone(), batch.clone());
        plus.as_mut_slice()[k] += DELTA;
        minus.as_mut_slice()[k] -= DELTA;
        let numeric = (objective(&net, &plus) - objective(&net, &minus)) / (2.0 * DELTA);
        worst = worst.max(rel_err(input.as_slice()[k], numeric));
    }
    worst
}

fn params(mu: &[f64], lv: &[f64]) -> GaussianLatentParams<f64> {
    GaussianLatentParams {
        mu: mu.to_vec(),
        log_var: lv.to_vec(),
    }
}

fn gradient_suite(r: &mut Report) {
    let leaky = Activation::LeakyRelu(0.2);
    let mut checks: Vec<(String, f64)> = vec![];
    for (name, act) in [("leaky", leaky), ("sigmoid", Activation::Sigmoid), ("identity", Activation::Identity)] {
        for seed in 0..3 {
            checks.push((format!("{name} layer"), check_network(&[act], &[5, 4], 100 + seed)));
        }
    }
    checks.push(("stacked network".into(), check_network(&[leaky, Activation::Sigmoid, leaky, Activation::Identity], &[6, 5, 5, 4, 3], 7)));

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 6;
    let y: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
    let soft: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let p: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..0.95)).collect();
    let t: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    // keep |t − q| away from the MAE kink
    let q: Vec<f64> = t.iter().map(|v| v + if rng.random_bool(0.5) { 0.3 } else { -0.3 } + rng.random_range(-0.2..0.2)).collect();
    checks.push(("bce".into(), check_vector(&|x| loss_bce(&y, x).unwrap().value, &p, &loss_bce(&y, &p).unwrap().gradient)));
    checks.push(("bce soft targets".into(), check_vector(&|x| loss_bce(&soft, x).unwrap().value, &p, &loss_bce(&soft, &p).unwrap().gradient)));
    checks.push(("mse".into(), check_vector(&|x| loss_mse(&t, x).unwrap().value, &q, &loss_mse(&t, &q).unwrap().gradient)));
    checks.push(("mae".into(), check_vector(&|x| loss_mae(&t, x).unwrap().value, &q, &loss_mae(&t, &q).unwrap().gradient)));

    let logits: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    let ym = Matrix::from_vec(1, n, y.clone()).unwrap();
    let probs = Matrix::from_vec(1, n, logits.iter().map(|&z| sigmoid(z)).collect()).unwrap();
    let (_, g) = loss_bce_logits(&ym, &probs).unwrap();
    let via_logits = |z: &[f64]| loss_bce(&y, &z.iter().map(|&v| sigmoid(v)).collect::<Vec<_>>()).unwrap().value;
    checks.push(("bce through sigmoid".into(), check_vector(&via_logits, &logits, g.as_slice())));

    let mu: Vec<f64> = (0..4).map(|_| rng.random_range(-1.5..1.5)).collect();
    let lv: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
    let kl = loss_kl(&params(&mu, &lv));
    checks.push(("kl μ".into(), check_vector(&|m| loss_kl(&params(m, &lv)).value, &mu, &kl.d_mu)));
    checks.push(("kl log σ²".into(), check_vector(&|l| loss_kl(&params(&mu, l)).value, &lv, &kl.d_log_var)));
    let alpha = 0.3;
    let t4 = &t[..4];
    let q4 = &q[..4];
    let inn = loss_inn(t4, q4, &params(&mu, &lv), alpha).unwrap();
    checks.push(("inn prediction".into(), check_vector(&|x| loss_inn(t4, x, &params(&mu, &lv), alpha).unwrap().value, q4, &inn.d_predicted)));
    checks.push(("inn μ".into(), check_vector(&|m| loss_inn(t4, q4, &params(m, &lv), alpha).unwrap().value, &mu, &inn.d_mu)));
    checks.push(("inn log σ²".into(), check_vector(&|l| loss_inn(t4, q4, &params(&mu, l), alpha).unwrap().value, &lv, &inn.d_log_var)));

    let kl_zero = loss_kl(&params(&[0.0; 8], &[0.0; 8])).value;
    let (name, worst) = checks.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    let ok = *worst < GRAD_TOL && kl_zero == 0.0;
    r.line(
        "3",
        ok,
        format!("{} gradient checks, worst relative error {worst:.2e} ({name}), limit {GRAD_TOL:e}; L_KL(0,1) = {kl_zero:e}", checks.len()),
    );
}

// ---- criterion 10 ----

fn ssim_axioms(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst_self: f64 = 0.0;
    let mut worst_sym: f64 = 0.0;
    for _ in 0..20 {
        let x: Vec<f64> = (0..4096).map(|_| rng.random_range(0.0..1.0)).collect();
        let y: Vec<f64> = (0..4096).map(|_| if rng.random_bool(0.3) { 1.0 } else { 0.0 }).collect();
        worst_self = worst_self.max((ssim(&x, &x).unwrap() - 1.0).abs());
        worst_sym = worst_sym.max((ssim(&x, &y).unwrap() - ssim(&y, &x).unwrap()).abs());
    }
    let c1 = SSIM_K1 * SSIM_K1;
    let constant = ssim(&[0.0; 4096], &[1.0; 4096]).unwrap();
    let const_err = (constant - c1 / (1.0 + c1)).abs();
    let ok = worst_self < 1e-12 && worst_sym < 1e-12 && const_err < 1e-9;
    r.line(
        "10",
        ok,
        format!("|ssim(x,x) − 1| {worst_self:.1e}, asymmetry {worst_sym:.1e}, constant case error {const_err:.1e} (<1e-9)"),
    );
}

// ---- desk-scale pipeline ----

fn hash_sources(root: &Path, digest: &mut Vec<u8>) {
    let mut entries: Vec<PathBuf> = fs::read_dir(root).unwrap().map(|e| e.unwrap().path()).collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            hash_sources(&p, digest);
        } else if p.extension().is_some_and(|e| e == "rs") {
            digest.extend(sha256_hex(&fs::read(&p).unwrap()).into_bytes());
        }
    }
}

struct Desk {
    out: PathBuf,
    stamps: PathBuf,
    config: PathBuf,
}

impl Desk {
    fn prepare() -> Self {
        let ws = workspace();
        let mut cfg = PipelineConfig::load(&ws.join("configs/paper-desk.cfg")).expect("shipped config loads");
        cfg.ablation.blocks = vec![1, 3, 5];
        let text = cfg.to_toml();
        let mut key = format!("{text}{}", env!("CARGO_PKG_VERSION")).into_bytes();
        hash_sources(&ws.join("crates/core/src"), &mut key);
        hash_sources(&ws.join("crates/cli/src"), &mut key);
        let cache = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
        if std::env::var("SONARSHAPE_FRESH").is_ok_and(|v| v == "1") && cache.exists() {
            fs::remove_dir_all(&cache).unwrap();
        }
        let root = cache.join(&sha256_hex(&key)[..16]);
        let (out, stamps) = (root.join("run"), root.join("stamps"));
        fs::create_dir_all(&out).unwrap();
        fs::create_dir_all(&stamps).unwrap();
        let config = root.join("pipeline.cfg");
        fs::write(&config, text).unwrap();
        Desk { out, stamps, config }
    }

    /// Runs a stage unless an earlier run finished it; returns its wall time.
    fn stage(&self, args: &[&str]) -> f64 {
        let name = args.join("-");
        let stamp = self.stamps.join(format!("{name}.seconds"));
        if let Ok(s) = fs::read_to_string(&stamp) {
            return s.trim().parse().unwrap();
        }
        let log = fs::File::create(self.stamps.join(format!("{name}.log"))).unwrap();
        let start = Instant::now();
        let status = Command::new(BIN)
            .arg("--config")
            .arg(&self.config)
            .arg("--out")
            .arg(&self.out)
            .args(["--progress", "10"])
            .args(args)
            .stdout(Stdio::null())
            .stderr(log)
            .status()
            .unwrap();
        let seconds = start.elapsed().as_secs_f64();
        assert!(status.success(), "desk stage {name} failed ({status}); see {}", self.stamps.join(format!("{name}.log")).display());
        fs::write(&stamp, format!("{seconds:.1}")).unwrap();
        eprintln!("acceptance: desk stage {name} finished in {seconds:.0}s");
        seconds
    }
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

fn desk_criteria(r: &mut Report, desk: &Desk) {
    for stage in [&["gen"][..], &["simulate"]] {
        desk.stage(stage);
    }
    let aae_seconds = desk.stage(&["train", "aae"]);
    desk.stage(&["train", "fnn"]);
    desk.stage(&["train", "inn"]);
    desk.stage(&["eval"]);
    let s = json(&desk.out.join("eval/summary.json"));
    let test_size = s["test_size"].as_u64().unwrap();

    let (ssim_a, raw_a, thr_a) = (f(&s["aae_ssim"]["mean"]), f(&s["aae_bce_raw"]["mean"]), f(&s["aae_bce_threshold"]["mean"]));
    let timing = aae_seconds <= 3600.0;
    r.line(
        "4 (raw BCE)",
        ssim_a >= 0.85 && raw_a <= 0.08 && timing,
        format!("AAE test SSIM {ssim_a:.4} (≥0.85), BCE of probabilities {raw_a:.4} (≤0.08), {test_size} test shapes, trained in {aae_seconds:.0}s (≤3600)"),
    );
    r.line(
        "4 (thresholded BCE)",
        ssim_a >= 0.85 && thr_a <= 0.08 && timing,
        format!("AAE test SSIM {ssim_a:.4} (≥0.85), BCE of thresholded images {thr_a:.4} (≤0.08)"),
    );

    let fnn = f(&s["fnn_relative_error"]["mean"]);
    r.line("5", fnn <= 0.10, format!("FNN held-out mean relative absolute error {fnn:.4} (≤0.10)"));

    let inn = &s["inn"];
    let (ff, ssim_i, raw_i, thr_i) = (f(&inn["far_field_error"]), f(&inn["ssim"]), f(&inn["bce_raw"]), f(&inn["bce_threshold"]));
    let frozen = s["freeze_verified"] == true;
    r.line(
        "6 (raw BCE)",
        frozen && ff <= 0.10 && ssim_i >= 0.70 && raw_i <= 0.15,
        format!("INN far-field error {ff:.4} (≤0.10), SSIM {ssim_i:.4} (≥0.70), BCE of probabilities {raw_i:.4} (≤0.15), frozen hashes verified {frozen}"),
    );
    r.line(
        "6 (thresholded BCE)",
        frozen && ff <= 0.10 && ssim_i >= 0.70 && thr_i <= 0.15,
        format!("INN far-field error {ff:.4}, SSIM {ssim_i:.4}, BCE of thresholded images {thr_i:.4} (≤0.15)"),
    );

    desk.stage(&["ablate-freq"]);
    let rows = json(&desk.out.join("ablation/ablation.json"));
    let rows = rows.as_array().unwrap();
    let ks: Vec<u64> = rows.iter().map(|v| v["blocks"].as_u64().unwrap()).collect();
    assert_eq!(ks, [1, 3, 5], "ablation rows");
    let col = |name: &str| rows.iter().map(|v| f(&v[name])).collect::<Vec<_>>();
    let (ssim_k, raw_k, thr_k) = (col("ssim"), col("bce_raw"), col("bce_threshold"));
    let up = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
    let down = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" → ");
    r.line(
        "7 (raw BCE)",
        up(&ssim_k) && down(&raw_k),
        format!("k = 1, 3, 5: SSIM {} (strictly up), BCE of probabilities {} (strictly down)", fmt(&ssim_k), fmt(&raw_k)),
    );
    r.line(
        "7 (thresholded BCE)",
        up(&ssim_k) && down(&thr_k),
        format!("k = 1, 3, 5: SSIM {}, BCE of thresholded images {}", fmt(&ssim_k), fmt(&thr_k)),
    );

    desk.stage(&["halfplane"]);
    let half = json(&desk.out.join("halfplane/halfplane.json"));
    let (full_s, half_s) = (f(&half[0]["ssim"]), f(&half[1]["ssim"]));
    let gap = half_s - full_s;
    r.line(
        "8",
        gap.abs() <= 0.1 && gap <= 0.02,
        format!(
            "half-plane ({} inputs) SSIM {half_s:.4} vs full-range {full_s:.4}: difference {gap:+.4} (within ±0.1, ≤ +0.02)",
            half[1]["input_width"]
        ),
    );
}

// ---- criterion 9 ----

fn bits(v: &[f32]) -> Vec<u32> {
    v.iter().map(|x| x.to_bits()).collect()
}

/// Checkpoints round-trip through save/load with bitwise-identical outputs.
fn persistence(out: &Path, scratch: &Path) -> Result<String, String> {
    let aae = load_aae(&out.join("models/aae.ckpt")).map_err(|e| e.to_string())?;
    let (fnn, _) = load_fnn(&out.join("models/fnn.ckpt")).map_err(|e| e.to_string())?;
    let (inn, _) = load_inn(&out.join("models/inn.ckpt")).map_err(|e| e.to_string())?;
    let probe: Vec<f32> = (0..inn.input_width()).map(|i| 0.02 + 0.01 * ((i * 7) % 13) as f32).collect();
    let (_, before) = inn.invert(&aae.generator, &probe, InvertMode::Mean).map_err(|e| e.to_string())?;
    let shape = sonarshape::geometry::BinaryImage::threshold(&before, 0.5).map_err(|e| e.to_string())?;
    let field_before = fnn.predict(&shape).map_err(|e| e.to_string())?;

    let mut names = 0;
    for (file, kind) in [("aae", ModelKind::Aae), ("fnn", ModelKind::Fnn), ("inn", ModelKind::Inn)] {
        let (nets, meta) = load_checkpoint(&out.join(format!("models/{file}.ckpt")), Some(kind)).map_err(|e| e.to_string())?;
        let refs: Vec<(&str, &Mlp<f32>)> = nets.iter().map(|(n, m)| (n.as_str(), m)).collect();
        fs::create_dir_all(scratch.join("models")).unwrap();
        save_checkpoint(&scratch.join(format!("models/{file}.ckpt")), &refs, &meta).map_err(|e| e.to_string())?;
        names += nets.len();
        let a = fs::read(out.join(format!("models/{file}.ckpt"))).unwrap();
        let b = fs::read(scratch.join(format!("models/{file}.ckpt"))).unwrap();
        if a != b {
            return Err(format!("{file} checkpoint bytes change on resave"));
        }
    }
    let aae2 = load_aae(&scratch.join("models/aae.ckpt")).map_err(|e| e.to_string())?;
    let (fnn2, _) = load_fnn(&scratch.join("models/fnn.ckpt")).map_err(|e| e.to_string())?;
    let (inn2, _) = load_inn(&scratch.join("models/inn.ckpt")).map_err(|e| e.to_string())?;
    let (_, after) = inn2.invert(&aae2.generator, &probe, InvertMode::Mean).map_err(|e| e.to_string())?;
    let field_after = fnn2.predict(&shape).map_err(|e| e.to_string())?;
    if bits(&before) != bits(&after) || bits(&field_before) != bits(&field_after) {
        return Err("reloaded networks give different outputs".into());
    }
    Ok(format!("{names} networks reload bitwise"))
}

fn determinism(r: &mut Report, desk: Option<&Desk>) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    fs::create_dir(&a).unwrap();
    fs::create_dir(&b).unwrap();
    let start = Instant::now();
    run_pipeline(&cfg, &a);
    run_pipeline(&cfg, &b);
    let (ha, hb) = (tree_hashes(&a), tree_hashes(&b));
    let differing: Vec<&String> = ha.iter().filter(|(k, v)| hb.get(*k) != Some(*v)).map(|(k, _)| k).collect();
    let same = ha.len() == hb.len() && differing.is_empty();
    let mut persisted = persistence(&a, &dir.path().join("resaved"));
    if let (Ok(tiny), Some(desk)) = (&persisted, desk) {
        persisted = persistence(&desk.out, &dir.path().join("resaved-desk")).map(|d| format!("{tiny}; desk: {d}"));
    }
    let detail = format!(
        "two full pipeline runs: {} artifacts, {} differ{}; persistence: {} ({:.0}s)",
        ha.len(),
        differing.len(),
        if differing.is_empty() { String::new() } else { format!(" {differing:?}") },
        match &persisted {
            Ok(m) => m.clone(),
            Err(e) => e.clone(),
        },
        start.elapsed().as_secs_f64()
    );
    r.line("9", same && persisted.is_ok(), detail);
}

fn main() {
    let quick = std::env::var("SONARSHAPE_ACCEPTANCE").is_ok_and(|v| v == "quick");
    let mut r = Report { passed: 0, failed: 0 };
    disk_oracle(&mut r);
    elastic_mie(&mut r);
    gradient_suite(&mut r);
    let desk = (!quick).then(Desk::prepare);
    if let Some(desk) = &desk {
        desk_criteria(&mut r, desk);
    } else {
        println!("criterion 4-8: SKIPPED (SONARSHAPE_ACCEPTANCE=quick)");
    }
    determinism(&mut r, desk.as_ref());
    ssim_axioms(&mut r);
    println!("acceptance: {} passed, {} failed", r.passed, r.failed);
}
