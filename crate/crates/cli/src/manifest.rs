use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Written next to every result file. Holds nothing that varies between identical runs
/// (no timestamps, no thread counts).
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub tool_version: &'static str,
    pub config_digest: Option<String>,
    pub inputs: Vec<String>,
    pub params: BTreeMap<&'static str, Value>,
}

impl RunManifest {
    pub fn new(command: &'static str) -> Self {
        RunManifest {
            command,
            tool_version: env!("CARGO_PKG_VERSION"),
            config_digest: None,
            inputs: Vec::new(),
            params: BTreeMap::new(),
        }
    }

    /// sha256 over the raw bytes of every input, in order.
    pub fn with_inputs(mut self, inputs: &[(&Path, &[u8])]) -> Self {
        let mut hasher = Sha256::new();
        for (path, bytes) in inputs {
            hasher.update(bytes);
            self.inputs.push(path.display().to_string());
        }
        if !inputs.is_empty() {
            self.config_digest = Some(hex::encode(hasher.finalize()));
        }
        self
    }

    pub fn param(mut self, key: &'static str, value: impl Serialize) -> Self {
        self.params
            .insert(key, serde_json::to_value(value).expect("manifest values serialize"));
        self
    }
}
