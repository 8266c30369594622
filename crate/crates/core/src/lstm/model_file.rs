//! Versioned portable model file.
//!
//! Layout:
//!
//! ```text
//! bytes 0..8    magic "SSLSTM01"
//! bytes 8..12   header length N, u32 little-endian
//! bytes 12..12+N  JSON header: format version, layer sizes, window
//!                 length, feature order, scaler, metadata
//! rest          parameters as f64 little-endian, in the network's
//!               canonical order (layer1 gates i/f/g/o each w,u,b;
//!               layer2 likewise; head weights; head bias)
//! ```
//!
//! Loading a file whose magic or format version differs fails loudly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::FeatureScaler;

use super::{LstmLayerParams, LstmNetwork, ModelMetadata, OutputHead, FEATURE_COUNT};

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"SSLSTM01";

#[derive(Debug, Serialize, Deserialize)]
struct ModelHeader {
    format_version: u32,
    input_size: usize,
    hidden1: usize,
    hidden2: usize,
    scaler: FeatureScaler,
    metadata: ModelMetadata,
}

pub fn save_model(net: &LstmNetwork, path: &Path) -> Result<()> {
    let header = ModelHeader {
        format_version: MODEL_FORMAT_VERSION,
        input_size: net.layer1.input_size,
        hidden1: net.layer1.hidden_size,
        hidden2: net.layer2.hidden_size,
        scaler: net.scaler.clone(),
        metadata: net.metadata.clone(),
    };
    let header_bytes =
        serde_json::to_vec(&header).map_err(|e| Error::json("model header", e))?;
    let params = net.params_flat();
    let mut bytes = Vec::with_capacity(12 + header_bytes.len() + params.len() * 8);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(header_bytes.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&header_bytes);
    for p in params {
        bytes.extend_from_slice(&p.to_le_bytes());
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<LstmNetwork> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < 12 || &bytes[0..8] != MAGIC {
        return Err(Error::ModelFile(format!(
            "{} is not a model file (bad magic)",
            path.display()
        )));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if bytes.len() < 12 + header_len {
        return Err(Error::ModelFile("truncated header".into()));
    }
    let header: ModelHeader = serde_json::from_slice(&bytes[12..12 + header_len])
        .map_err(|e| Error::json("model header", e))?;
    if header.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::ModelFile(format!(
            "format version {} unsupported (expected {MODEL_FORMAT_VERSION})",
            header.format_version
        )));
    }
    if header.input_size != FEATURE_COUNT {
        return Err(Error::ModelFile(format!(
            "input size {} unsupported (expected {FEATURE_COUNT})",
            header.input_size
        )));
    }

    let mut net = LstmNetwork {
        layer1: LstmLayerParams::zeros(header.input_size, header.hidden1),
        layer2: LstmLayerParams::zeros(header.hidden1, header.hidden2),
        head: OutputHead {
            w: vec![0.0; header.hidden2],
            b: 0.0,
        },
        scaler: header.scaler,
        metadata: header.metadata,
    };
    let param_bytes = &bytes[12 + header_len..];
    let expected = net.param_count() * 8;
    if param_bytes.len() != expected {
        return Err(Error::ModelFile(format!(
            "expected {expected} parameter bytes, found {}",
            param_bytes.len()
        )));
    }
    let params: Vec<f64> = param_bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::ModelFile("non-finite parameter".into()));
    }
    net.set_params_flat(&params)?;
    Ok(net)
}
