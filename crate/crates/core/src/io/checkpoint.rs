//! Checkpoint layout: one line of JSON (the header, terminated by `\n`)
//! followed by the raw parameter block, little-endian f32, networks in header
//! order, each layer's weights (row-major, `out × in`) then its bias.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Standardization;
use crate::nn::{Activation, Architecture, Layer, Matrix, Mlp, TrainConfig};

pub const FORMAT: &str = "sonarshape-checkpoint";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Aae,
    Fnn,
    Inn,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Aae => "aae",
            ModelKind::Fnn => "fnn",
            ModelKind::Inn => "inn",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkHeader {
    pub name: String,
    pub seed: u64,
    pub widths: Vec<usize>,
    pub activations: Vec<String>,
}

/// Everything in the header besides the network shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub kind: ModelKind,
    #[serde(default)]
    pub standardization: Option<Standardization>,
    #[serde(default)]
    pub train: Option<TrainConfig>,
    /// Digest of the training data the model was fitted on.
    #[serde(default)]
    pub data_hash: String,
    #[serde(default)]
    pub extra: serde_json::Value,
}

impl CheckpointMeta {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            standardization: None,
            train: None,
            data_hash: String::new(),
            extra: serde_json::Value::Null,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u16,
    networks: Vec<NetworkHeader>,
    parameter_count: usize,
    #[serde(flatten)]
    meta: CheckpointMeta,
}

pub fn encode_checkpoint(networks: &[(&str, &Mlp<f32>)], meta: &CheckpointMeta) -> Result<Vec<u8>> {
    for (name, net) in networks {
        if !net.is_finite() {
            return Err(Error::Domain(format!("network {name} has non-finite parameters")));
        }
    }
    let header = Header {
        format: FORMAT.into(),
        version: VERSION,
        networks: networks
            .iter()
            .map(|(name, net)| {
                let arch = net.architecture();
                NetworkHeader {
                    name: name.to_string(),
                    seed: net.seed(),
                    widths: arch.widths,
                    activations: arch.activations.iter().map(|a| a.to_string()).collect(),
                }
            })
            .collect(),
        parameter_count: networks.iter().map(|(_, n)| n.parameter_count()).sum(),
        meta: meta.clone(),
    };
    let mut out = serde_json::to_vec(&header)?;
    out.push(b'\n');
    out.reserve(header.parameter_count * 4);
    for (_, net) in networks {
        for v in net.parameters() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Decodes and, if `expected` is given, checks the model kind.
pub fn decode_checkpoint(bytes: &[u8], path: &Path, expected: Option<ModelKind>) -> Result<(Vec<(String, Mlp<f32>)>, CheckpointMeta)> {
    let format = |detail: String| Error::Format {
        path: path.to_path_buf(),
        detail,
    };
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| format("no header line".into()))?;
    let header: Header = serde_json::from_slice(&bytes[..newline]).map_err(|e| format(format!("header: {e}")))?;
    if header.format != FORMAT {
        return Err(format(format!("format tag {:?}", header.format)));
    }
    if header.version != VERSION {
        return Err(Error::Version {
            path: path.to_path_buf(),
            found: header.version,
        });
    }
    if let Some(kind) = expected {
        if kind != header.meta.kind {
            return Err(Error::KindMismatch {
                expected: kind.to_string(),
                found: header.meta.kind.to_string(),
            });
        }
    }
    let mut archs = Vec::new();
    for n in &header.networks {
        let arch = Architecture {
            widths: n.widths.clone(),
            activations: n.activations.iter().map(|a| a.parse::<Activation>()).collect::<Result<_>>()?,
        };
        arch.validate()?;
        archs.push(arch);
    }
    let declared: usize = archs.iter().map(|a| a.parameter_count()).sum();
    if declared != header.parameter_count {
        return Err(format(format!(
            "header parameter_count {} but widths imply {declared}",
            header.parameter_count
        )));
    }
    let block = &bytes[newline + 1..];
    if block.len() != declared * 4 {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            detail: format!("parameter block has {} bytes, header implies {}", block.len(), declared * 4),
        });
    }
    let mut values = block.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap()));
    let mut networks = Vec::new();
    for (n, arch) in header.networks.iter().zip(&archs) {
        let layers = arch
            .widths
            .windows(2)
            .zip(&arch.activations)
            .map(|(w, &activation)| Layer {
                weights: Matrix::from_vec(w[1], w[0], values.by_ref().take(w[0] * w[1]).collect()).expect("sized"),
                bias: values.by_ref().take(w[1]).collect(),
                activation,
            })
            .collect();
        networks.push((n.name.clone(), Mlp::from_layers(layers, n.seed)?));
    }
    Ok((networks, header.meta))
}

pub fn save_checkpoint(path: &Path, networks: &[(&str, &Mlp<f32>)], meta: &CheckpointMeta) -> Result<()> {
    super::write_atomic(path, &encode_checkpoint(networks, meta)?)
}

pub fn load_checkpoint(path: &Path, expected: Option<ModelKind>) -> Result<(Vec<(String, Mlp<f32>)>, CheckpointMeta)> {
    decode_checkpoint(&fs::read(path)?, path, expected)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net() -> Mlp<f32> {
        Mlp::new(&Architecture::dense(&[7, 5, 3], Activation::Sigmoid), 11).unwrap()
    }

    #[test]
    fn round_trip_preserves_inference_bits() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.ckpt");
        let (a, b) = (net(), Mlp::new(&Architecture::dense(&[3, 2], Activation::Identity), 2).unwrap());
        let mut meta = CheckpointMeta::new(ModelKind::Fnn);
        meta.data_hash = "abc".into();
        save_checkpoint(&p, &[("a", &a), ("b", &b)], &meta).unwrap();
        let (nets, back) = load_checkpoint(&p, Some(ModelKind::Fnn)).unwrap();
        assert_eq!(back, meta);
        assert_eq!(nets[0].0, "a");
        let probe: Vec<f32> = (0..7).map(|i| i as f32 * 0.3 - 1.0).collect();
        let (x, y) = (a.predict(&probe).unwrap(), nets[0].1.predict(&probe).unwrap());
        assert_eq!(x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), y.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(nets[1].1, b);
    }

    /// Statistics must survive the JSON header bit for bit, or a reloaded
    /// model standardizes differently.
    #[test]
    fn header_floats_round_trip_exactly() {
        let mut meta = CheckpointMeta::new(ModelKind::Fnn);
        meta.standardization = Some(crate::models::Standardization {
            block_width: 87,
            mean: vec![0.44494006960808835, 0.1 + 0.2, 1.0 / 3.0],
            std: vec![0.22004804874939818, 0.24036058363069102, 5e-324],
        });
        let bytes = encode_checkpoint(&[("a", &net())], &meta).unwrap();
        let (nets, back) = decode_checkpoint(&bytes, Path::new("m"), None).unwrap();
        assert_eq!(back, meta);
        assert_eq!(encode_checkpoint(&[("a", &nets[0].1)], &back).unwrap(), bytes);
    }

    #[test]
    fn kind_mismatch_is_reported() {
        let bytes = encode_checkpoint(&[("a", &net())], &CheckpointMeta::new(ModelKind::Fnn)).unwrap();
        assert!(matches!(
            decode_checkpoint(&bytes, Path::new("x"), Some(ModelKind::Aae)),
            Err(Error::KindMismatch { .. })
        ));
    }

    #[test]
    fn parameter_count_is_checked() {
        let bytes = encode_checkpoint(&[("a", &net())], &CheckpointMeta::new(ModelKind::Fnn)).unwrap();
        let header = String::from_utf8(bytes[..bytes.iter().position(|&b| b == b'\n').unwrap()].to_vec()).unwrap();
        assert!(header.contains("\"parameter_count\":58"));
        assert!(matches!(
            decode_checkpoint(&bytes[..bytes.len() - 4], Path::new("x"), None),
            Err(Error::Truncated { .. })
        ));
        let split = bytes.iter().position(|&b| b == b'\n').unwrap();
        let mut forged = header.replacen("\"parameter_count\":58", "\"parameter_count\":59", 1).into_bytes();
        forged.extend_from_slice(&bytes[split..]);
        assert!(matches!(decode_checkpoint(&forged, Path::new("x"), None), Err(Error::Format { .. })));
    }

    #[test]
    fn fnn_parameter_count() {
        let widths = [4096, 1000, 1000, 800, 800, 800, 800, 600, 600, 600, 435];
        let arch = Architecture::dense(&widths, Activation::Identity);
        // 4,097,000 + 1,001,000 + 800,800 + 640,800 ×3 + 480,600 + 360,600 ×2 + 261,435
        assert_eq!(arch.parameter_count(), 9_284_435);
    }
}
