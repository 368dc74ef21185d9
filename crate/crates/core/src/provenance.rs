//! Provenance header embedded in every output artifact.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    /// Pipeline stage that produced the artifact.
    pub stage: String,
    /// Digest of every setting the artifact's content depends on.
    pub config_digest: String,
    /// `config_digest` of the artifact this one was computed from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upstream_digest: Option<String>,
    pub seed: u64,
    pub version: String,
    /// The settings behind `config_digest`, verbatim.
    pub params: serde_json::Value,
}

impl Provenance {
    pub fn new(
        stage: &str,
        params: serde_json::Value,
        upstream_digest: Option<String>,
        seed: u64,
    ) -> Self {
        Provenance {
            stage: stage.to_string(),
            config_digest: digest_json(&params),
            upstream_digest,
            seed,
            version: VERSION.to_string(),
            params,
        }
    }

    /// One-line form for CSV comment headers.
    pub fn csv_comment(&self) -> String {
        format!(
            "# transent {} stage={} config_digest={} seed={}\n",
            self.version, self.stage, self.config_digest, self.seed
        )
    }
}

/// Hex SHA-256 of the compact JSON encoding. Object keys serialize in
/// sorted order (`serde_json::Map` is a `BTreeMap`), so this is canonical.
pub fn digest_json(value: &serde_json::Value) -> String {
    let bytes = serde_json::to_vec(value).expect("json value serializes");
    hex::encode(Sha256::digest(&bytes))
}
