//! Binary checkpoint: magic, `u32` version, `u32` header length, a JSON
//! header with the config and tensor table, then every parameter as a
//! little-endian `f32` in layout order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MttConfig, MttModel, TensorSpec};
use crate::error::{Error, Result};
use crate::graph::NodeType;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"MTTCKPT\0";

#[derive(Serialize, Deserialize)]
struct Header {
    embed_dim: usize,
    n_layers: usize,
    n_heads: usize,
    node_types: Vec<String>,
    relations: Vec<(String, String)>,
    seed: u64,
    tensors: Vec<TensorEntry>,
    param_count: usize,
}

#[derive(Serialize, Deserialize, PartialEq)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

impl From<&TensorSpec> for TensorEntry {
    fn from(t: &TensorSpec) -> Self {
        Self {
            name: t.name.clone(),
            shape: t.shape.clone(),
            offset: t.offset,
        }
    }
}

/// Encodes a model. Fails if any parameter is not exactly an `f32`.
pub fn checkpoint_bytes(model: &MttModel) -> Result<Vec<u8>> {
    let cfg = model.config();
    let header = Header {
        embed_dim: cfg.embed_dim,
        n_layers: cfg.n_layers,
        n_heads: cfg.n_heads,
        node_types: cfg.node_types.iter().map(|t| t.name().to_string()).collect(),
        relations: cfg
            .relations
            .iter()
            .map(|(s, d)| (s.name().to_string(), d.name().to_string()))
            .collect(),
        seed: cfg.seed,
        tensors: model.tensors().iter().map(TensorEntry::from).collect(),
        param_count: model.param_count(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::format("header", e.to_string()))?;
    let mut out = Vec::with_capacity(16 + json.len() + 4 * model.param_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for (i, &p) in model.params().iter().enumerate() {
        let f = p as f32;
        if !p.is_finite() || f64::from(f) != p {
            return Err(Error::NumericalFault(format!(
                "parameter {i} ({p}) is not a finite f32 value"
            )));
        }
        out.extend_from_slice(&f.to_le_bytes());
    }
    Ok(out)
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<MttModel> {
    let take = |range: std::ops::Range<usize>, what: &str| {
        bytes
            .get(range)
            .ok_or_else(|| Error::format(what, "file is truncated"))
    };
    if take(0..8, "magic")? != MAGIC {
        return Err(Error::format("magic", "not a model checkpoint"));
    }
    let version = u32::from_le_bytes(take(8..12, "version")?.try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::format(
            "version",
            format!("unsupported version {version}, expected {CHECKPOINT_VERSION}"),
        ));
    }
    let len = u32::from_le_bytes(take(12..16, "header")?.try_into().expect("4 bytes")) as usize;
    let header: Header = serde_json::from_slice(take(16..16 + len, "header")?)
        .map_err(|e| Error::format("header", e.to_string()))?;
    let node_type = |name: &str| {
        NodeType::from_name(name).ok_or_else(|| Error::format("node_types", format!("unknown node type {name}")))
    };
    let config = MttConfig {
        embed_dim: header.embed_dim,
        n_layers: header.n_layers,
        n_heads: header.n_heads,
        node_types: header.node_types.iter().map(|n| node_type(n)).collect::<Result<_>>()?,
        relations: header
            .relations
            .iter()
            .map(|(s, d)| Ok((node_type(s)?, node_type(d)?)))
            .collect::<Result<_>>()?,
        seed: header.seed,
    };
    let data = &bytes[16 + len..];
    if data.len() != 4 * header.param_count {
        return Err(Error::format(
            "param_count",
            format!("header declares {} parameters but {} bytes follow", header.param_count, data.len()),
        ));
    }
    let params = data
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
        .collect();
    let model = MttModel::from_parts(config, params).map_err(|e| Error::format("param_count", e.to_string()))?;
    let expected: Vec<TensorEntry> = model.tensors().iter().map(TensorEntry::from).collect();
    if expected != header.tensors {
        return Err(Error::format("tensors", "tensor table does not match the config"));
    }
    Ok(model)
}

pub fn save_checkpoint(model: &MttModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, checkpoint_bytes(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<MttModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_bytes(&bytes)
}
