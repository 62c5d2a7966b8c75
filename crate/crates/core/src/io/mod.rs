//! On-disk formats: binary dataset shards, JSON-headed checkpoints and split
//! manifests. All multi-byte values are little-endian. Writers go through a
//! temporary file and a rename so readers never see partial files.

pub mod checkpoint;
pub mod manifest;
pub mod shard;

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::Result;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta, ModelKind, NetworkHeader};
pub use manifest::{build_manifest, Manifest, Split};
pub use shard::{read_shard, write_shard, RecordKind, ShardRecords};

/// Writes `bytes` next to `path`, syncs, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp-{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}
