#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sonarshape::io::sha256_hex;

pub const BIN: &str = env!("CARGO_BIN_EXE_sonarshape");

/// A pipeline small enough to run end to end in seconds.
pub const TINY: &str = r#"
[dataset]
id = "tiny"
count = 24

[seeds]
base = 7

[training.aae]
epochs = 3
batch_size = 8

[training.aae.architecture]
encoder = [4096, 32, 8]
generator = [8, 32, 4096]
discriminator = [8, 16, 1]

[training.fnn]
epochs = 3
batch_size = 8
hidden = [32]

[training.inn]
epochs = 3
batch_size = 8
hidden = [32]

[ablation]
blocks = [1, 5]
hidden_single = [16]
hidden = [32]

[halfplane]
dedicated_fnn = true
fnn_hidden = [16]
inn_hidden = [16]

[evaluation]
resimulate = 2
prior_samples = 20
oracle_radii = [0.5]
"#;

pub fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("pipeline.cfg");
    fs::write(&path, text).unwrap();
    path
}

pub fn run(config: &Path, out: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("--progress")
        .arg("0")
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn run_ok(config: &Path, out: &Path, args: &[&str]) {
    let o = run(config, out, args);
    assert!(
        o.status.success(),
        "{args:?} failed ({:?}): {}",
        o.status.code(),
        String::from_utf8_lossy(&o.stderr)
    );
}

pub const STAGES: &[&[&str]] = &[
    &["gen"],
    &["simulate"],
    &["train", "aae"],
    &["train", "fnn"],
    &["train", "inn"],
    &["eval"],
    &["ablate-freq"],
    &["halfplane"],
    &["mie"],
];

pub fn run_pipeline(config: &Path, out: &Path) {
    for stage in STAGES {
        run_ok(config, out, stage);
    }
}

/// sha256 of every file below `root`, keyed by relative path.
pub fn tree_hashes(root: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, sha256_hex(&fs::read(&path).unwrap()));
            }
        }
    }
    out
}

/// The `amplitude` CSV for one far-field row.
pub fn far_field_csv(path: &Path, values: &[f64]) {
    let mut text = String::from("amplitude\n");
    for v in values {
        text.push_str(&format!("{v}\n"));
    }
    fs::write(path, text).unwrap();
}

/// Target far field of the first re-simulated test shape.
pub fn first_target(out: &Path) -> Vec<f64> {
    let mut reader = csv::Reader::from_path(out.join("eval/resimulated.csv")).unwrap();
    let mut first: Option<String> = None;
    let mut values = vec![];
    for rec in reader.records() {
        let rec = rec.unwrap();
        let index = rec[0].to_string();
        if first.get_or_insert_with(|| index.clone()) != &index {
            break;
        }
        values.push(rec[3].parse().unwrap());
    }
    values
}
