//! Binary model checkpoints: magic, version, a JSON header with the model
//! configuration and context term order, then the parameters as f64 LE.

use serde::{Deserialize, Serialize};

use super::{FlowConfig, FlowModel};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"FVQECKPT";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: FlowConfig,
    term_order: Vec<String>,
    n_params: usize,
}

pub(super) fn encode(model: &FlowModel) -> Vec<u8> {
    let header = Header {
        config: model.config.clone(),
        term_order: model.term_order.clone(),
        n_params: model.params.len(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(20 + json.len() + 8 * model.params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for p in &model.params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub(super) fn decode(bytes: &[u8]) -> Result<FlowModel> {
    let bad = |msg: &str| Error::Checkpoint(msg.to_string());
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(bad("not a flow checkpoint"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
    }
    let header_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let body = &bytes[20..];
    if body.len() < header_len {
        return Err(bad("truncated header"));
    }
    let header: Header = serde_json::from_slice(&body[..header_len])?;
    let data = &body[header_len..];
    if data.len() != 8 * header.n_params {
        return Err(bad("parameter block has the wrong length"));
    }
    let params = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    FlowModel::from_parts(header.config, header.term_order, params)
}

pub(super) fn save(model: &FlowModel, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, encode(model))?;
    Ok(())
}

pub(super) fn load(path: &std::path::Path) -> Result<FlowModel> {
    decode(&std::fs::read(path)?)
}
