use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const TOOL_VERSION: &str = concat!("dynbatch ", env!("CARGO_PKG_VERSION"));

/// Provenance record written alongside every output. Rerunning with the
/// same manifest reproduces the output byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Every resolved parameter, defaults included.
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub seed: u64,
    pub tool_version: String,
    /// `sha256:<hex>` of the input CSV bytes, when there is one.
    #[serde(default)]
    pub input_digest: Option<String>,
}

impl RunManifest {
    pub fn new<P: Serialize>(command: &str, params: &P, seed: u64, input: Option<&[u8]>) -> Self {
        let parameters = match serde_json::to_value(params).expect("parameters serialize") {
            serde_json::Value::Object(map) => map.into_iter().collect(),
            other => BTreeMap::from([("value".to_string(), other)]),
        };
        Self {
            command: command.to_string(),
            parameters,
            seed,
            tool_version: TOOL_VERSION.to_string(),
            input_digest: input.map(digest),
        }
    }
}

pub fn digest(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}
