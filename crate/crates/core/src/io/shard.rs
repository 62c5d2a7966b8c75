//! Dataset shard layout:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "AISD"
//! 4       2     format version (u16, currently 1)
//! 6       1     record kind (1 = shapes, 2 = far fields)
//! 7       1     reserved, 0
//! 8       4     record count (u32)
//! 12      4     record width (u32): 4096 for shapes, values per far field
//! 16      ...   payload: count × width bytes (shapes) or f32 values (far fields)
//! end-4   4     CRC-32 (IEEE) of the payload
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{BinaryImage, PIXELS};

pub const MAGIC: &[u8; 4] = b"AISD";
pub const VERSION: u16 = 1;
const HEADER: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    Shapes = 1,
    FarFields = 2,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ShardRecords {
    Shapes(Vec<BinaryImage>),
    FarFields { width: usize, rows: Vec<Vec<f32>> },
}

impl ShardRecords {
    pub fn kind(&self) -> RecordKind {
        match self {
            ShardRecords::Shapes(_) => RecordKind::Shapes,
            ShardRecords::FarFields { .. } => RecordKind::FarFields,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ShardRecords::Shapes(v) => v.len(),
            ShardRecords::FarFields { rows, .. } => rows.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn into_shapes(self) -> Result<Vec<BinaryImage>> {
        match self {
            ShardRecords::Shapes(v) => Ok(v),
            other => Err(Error::KindMismatch {
                expected: "shapes".into(),
                found: format!("{:?}", other.kind()),
            }),
        }
    }

    pub fn into_far_fields(self) -> Result<(usize, Vec<Vec<f32>>)> {
        match self {
            ShardRecords::FarFields { width, rows } => Ok((width, rows)),
            other => Err(Error::KindMismatch {
                expected: "far fields".into(),
                found: format!("{:?}", other.kind()),
            }),
        }
    }
}

pub fn encode_shard(records: &ShardRecords) -> Result<Vec<u8>> {
    let (kind, width, payload) = match records {
        ShardRecords::Shapes(images) => {
            let mut payload = Vec::with_capacity(images.len() * PIXELS);
            for img in images {
                payload.extend_from_slice(img.pixels());
            }
            (RecordKind::Shapes, PIXELS, payload)
        }
        ShardRecords::FarFields { width, rows } => {
            let mut payload = Vec::with_capacity(rows.len() * width * 4);
            for row in rows {
                if row.len() != *width {
                    return Err(Error::Shape(format!("far-field record of {} values in a width-{width} shard", row.len())));
                }
                for v in row {
                    payload.extend_from_slice(&v.to_le_bytes());
                }
            }
            (RecordKind::FarFields, *width, payload)
        }
    };
    let count = u32::try_from(records.len()).map_err(|_| Error::Shape("too many records for one shard".into()))?;
    let mut out = Vec::with_capacity(HEADER + payload.len() + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(kind as u8);
    out.push(0);
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&(width as u32).to_le_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    Ok(out)
}

/// `path` is only used in error messages.
pub fn decode_shard(bytes: &[u8], path: &Path) -> Result<ShardRecords> {
    let truncated = |detail: String| Error::Truncated {
        path: path.to_path_buf(),
        detail,
    };
    let format = |detail: String| Error::Format {
        path: path.to_path_buf(),
        detail,
    };
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        if bytes.len() < 4 && MAGIC.starts_with(bytes) {
            return Err(truncated(format!("{} bytes, header needs {HEADER}", bytes.len())));
        }
        return Err(format("missing AISD magic".into()));
    }
    if bytes.len() < HEADER {
        return Err(truncated(format!("{} bytes, header needs {HEADER}", bytes.len())));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::Version {
            path: path.to_path_buf(),
            found: version,
        });
    }
    let kind = match bytes[6] {
        1 => RecordKind::Shapes,
        2 => RecordKind::FarFields,
        k => return Err(format(format!("unknown record kind {k}"))),
    };
    let count = u32_at(8) as usize;
    let width = u32_at(12) as usize;
    let item = match kind {
        RecordKind::Shapes => 1,
        RecordKind::FarFields => 4,
    };
    if kind == RecordKind::Shapes && width != PIXELS {
        return Err(format(format!("shape width {width}, expected {PIXELS}")));
    }
    let payload_len = count
        .checked_mul(width)
        .and_then(|v| v.checked_mul(item))
        .ok_or_else(|| format("record count overflows".into()))?;
    let expected = HEADER + payload_len + 4;
    if bytes.len() < expected {
        return Err(truncated(format!("{} bytes, header implies {expected}", bytes.len())));
    }
    if bytes.len() > expected {
        return Err(format(format!("{} trailing bytes", bytes.len() - expected)));
    }
    let payload = &bytes[HEADER..HEADER + payload_len];
    let stored = u32_at(HEADER + payload_len);
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(Error::Checksum {
            path: path.to_path_buf(),
            stored,
            computed,
        });
    }
    Ok(match kind {
        RecordKind::Shapes => ShardRecords::Shapes(
            payload
                .chunks(PIXELS)
                .map(|c| BinaryImage::from_pixels(c.to_vec()))
                .collect::<Result<_>>()
                .map_err(|e| format(e.to_string()))?,
        ),
        RecordKind::FarFields => ShardRecords::FarFields {
            width,
            rows: if width == 0 {
                vec![Vec::new(); count]
            } else {
                payload
                    .chunks(width * 4)
                    .map(|c| c.chunks(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect())
                    .collect()
            },
        },
    })
}

pub fn write_shard(records: &ShardRecords, path: &Path) -> Result<()> {
    super::write_atomic(path, &encode_shard(records)?)
}

pub fn read_shard(path: &Path) -> Result<ShardRecords> {
    decode_shard(&fs::read(path)?, path)
}
