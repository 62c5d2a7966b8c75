//! Pipeline stages behind the subcommands. Every artifact lands under
//! `paths.out` in a fixed layout and is written atomically; nothing written
//! depends on wall-clock time, so reruns reproduce every file.

mod data;
mod evaluate;
mod studies;
mod tools;
mod train;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sonarshape::io::write_atomic;

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};

pub use data::{cmd_gen, cmd_simulate, disk_oracle_report, Dataset, OracleRow, SimulateReport};
pub use evaluate::{cmd_eval, EvalSummary, MetricSummary};
pub use studies::{cmd_ablate_frequencies, cmd_halfplane, AblationRow, HalfPlaneRow};
pub use tools::{cmd_invert, cmd_mie};
pub use train::{cmd_train, load_aae, load_fnn, load_inn, Stage};

pub struct Context {
    pub cfg: PipelineConfig,
    /// Worker threads for simulation and parallel variants.
    pub jobs: usize,
    /// Print every n-th epoch (0 silences training progress).
    pub progress_every: usize,
}

impl Context {
    pub fn new(cfg: PipelineConfig, jobs: usize) -> Self {
        Self {
            cfg,
            jobs,
            progress_every: 1,
        }
    }

    pub fn layout(&self) -> Layout {
        Layout::new(&self.cfg.paths.out)
    }

    /// The output root must already exist.
    fn output(&self) -> CliResult<Layout> {
        let root = &self.cfg.paths.out;
        if !root.is_dir() {
            return Err(CliError::Config(format!("output directory {} does not exist", root.display())));
        }
        Ok(self.layout())
    }

    fn pool(&self) -> CliResult<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| CliError::Config(format!("cannot start {} workers: {e}", self.jobs)))
    }

    fn progress<'a>(&self, label: &'a str, columns: &'a [String], epochs: usize) -> impl FnMut(&[f64]) + 'a {
        let every = self.progress_every;
        move |row: &[f64]| {
            let epoch = row[0] as usize;
            if every == 0 || (epoch % every != 0 && epoch != 1 && epoch != epochs) {
                return;
            }
            let cells: Vec<String> = columns[1..].iter().zip(&row[1..]).map(|(c, v)| format!("{c}={v:.5}")).collect();
            eprintln!("[{label}] epoch {epoch}/{epochs} {}", cells.join(" "));
        }
    }
}

/// Fixed artifact locations under the output root.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf() }
    }

    pub fn shapes(&self) -> PathBuf {
        self.root.join("data/shapes.aisd")
    }
    pub fn far_fields(&self) -> PathBuf {
        self.root.join("data/farfields.aisd")
    }
    pub fn manifest(&self) -> PathBuf {
        self.root.join("data/manifest.json")
    }
    pub fn simulate_report(&self) -> PathBuf {
        self.root.join("data/simulate.json")
    }
    pub fn checkpoint(&self, name: &str) -> PathBuf {
        self.root.join("models").join(format!("{name}.ckpt"))
    }
    pub fn history(&self, name: &str) -> PathBuf {
        self.root.join("history").join(format!("{name}.csv"))
    }
    pub fn eval(&self, name: &str) -> PathBuf {
        self.root.join("eval").join(name)
    }
    pub fn ablation(&self, name: &str) -> PathBuf {
        self.root.join("ablation").join(name)
    }
    pub fn halfplane(&self, name: &str) -> PathBuf {
        self.root.join("halfplane").join(name)
    }
    pub fn mie(&self, name: &str) -> PathBuf {
        self.root.join("mie").join(name)
    }
    pub fn invert(&self, name: &str) -> PathBuf {
        self.root.join("invert").join(name)
    }
}

fn require(path: &Path, what: &str) -> CliResult<()> {
    if !path.is_file() {
        return Err(CliError::Missing(format!("{what} not found at {}", path.display())));
    }
    Ok(())
}

fn ensure_parent(path: &Path) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    ensure_parent(path)?;
    write_atomic(path, bytes)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(sonarshape::Error::from)?;
    bytes.push(b'\n');
    write_bytes(path, &bytes)
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Core(sonarshape::Error::Io(e.into_error())))?;
    write_bytes(path, &bytes)
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// The full-precision history of a training run.
fn write_history(path: &Path, history: &sonarshape::models::History) -> CliResult<()> {
    write_bytes(path, history.to_csv().as_bytes())
}
