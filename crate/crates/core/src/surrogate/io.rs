//! Model container: magic, version, JSON header, little-endian f64 weights
//! and a SHA-256 trailer over everything before it.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::network::{Architecture, Network};
use super::train::TrainConfig;
use super::{InputScalers, Surrogate};
use crate::dataset::{ScalerParams, ONE_HOT_ORDER};
use crate::error::{Error, Result};
use crate::materials::Metal;

pub const MODEL_MAGIC: &[u8; 8] = b"PLASMOSG";
pub const MODEL_VERSION: u32 = 1;
const HASH_LEN: usize = 32;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    architecture: Architecture,
    layers: Vec<String>,
    param_count: usize,
    input_scalers: InputScalers,
    target_scalers: Vec<ScalerParams>,
    target_names: Vec<String>,
    one_hot_order: Vec<Metal>,
    seed: u64,
    train_config: Option<TrainConfig>,
}

pub fn to_bytes(model: &Surrogate) -> Result<Vec<u8>> {
    let header = Header {
        architecture: model.architecture.clone(),
        layers: model
            .network
            .layers()
            .iter()
            .map(|l| l.name().to_string())
            .collect(),
        param_count: model.network.param_count(),
        input_scalers: model.input_scalers,
        target_scalers: model.target_scalers.clone(),
        target_names: model.target_names.clone(),
        one_hot_order: model.one_hot_order.clone(),
        seed: model.seed,
        train_config: model.train_config.clone(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(20 + json.len() + header.param_count * 8 + HASH_LEN);
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for v in model.network.state_vector() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<Surrogate> {
    let bad = |m: String| Error::Format(m);
    if bytes.len() < MODEL_MAGIC.len() + 12 + HASH_LEN || &bytes[..8] != MODEL_MAGIC {
        return Err(bad("not a surrogate model file".into()));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - HASH_LEN);
    if Sha256::digest(body).as_slice() != trailer {
        return Err(bad(
            "content hash mismatch (file truncated or modified)".into()
        ));
    }
    let version = u32::from_le_bytes(body[8..12].try_into().expect("4 bytes"));
    if version != MODEL_VERSION {
        return Err(bad(format!(
            "unsupported model version {version} (expected {MODEL_VERSION})"
        )));
    }
    let header_len = u64::from_le_bytes(body[12..20].try_into().expect("8 bytes")) as usize;
    let payload_start = 20usize.checked_add(header_len).filter(|&e| e <= body.len());
    let Some(payload_start) = payload_start else {
        return Err(bad("header length exceeds file size".into()));
    };
    let header: Header = serde_json::from_slice(&body[20..payload_start])
        .map_err(|e| bad(format!("bad header: {e}")))?;
    let payload = &body[payload_start..];
    if payload.len() != header.param_count * 8 {
        return Err(bad(format!(
            "payload holds {} bytes, header promises {} values",
            payload.len(),
            header.param_count
        )));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if header.one_hot_order != ONE_HOT_ORDER {
        return Err(bad(format!(
            "one-hot order {:?} differs from {:?}",
            header.one_hot_order, ONE_HOT_ORDER
        )));
    }
    let mut network = Network::build(&header.architecture, header.seed)?;
    let names: Vec<String> = network
        .layers()
        .iter()
        .map(|l| l.name().to_string())
        .collect();
    if names != header.layers {
        return Err(bad("layer list does not match the architecture".into()));
    }
    network.load_state_vector(&values)?;
    Ok(Surrogate {
        architecture: header.architecture,
        network,
        input_scalers: header.input_scalers,
        target_scalers: header.target_scalers,
        target_names: header.target_names,
        one_hot_order: header.one_hot_order,
        seed: header.seed,
        train_config: header.train_config,
    })
}

pub fn save_model(model: &Surrogate, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<Surrogate> {
    from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
