//! JSON bodies of the model-server wire protocol.
//!
//! ```text
//! POST /v1/translate
//!   {"model": str, "decode": {"strategy": "greedy", "max_output_len": int}, "inputs": [[int,...],...]}
//!   -> {"outputs": [[int,...],...]}
//! GET /v1/vocab?side=source|target
//!   -> {"entries": [{"id": int, "surface": str, "special": bool},...]}
//! ```
//!
//! Errors come back as `{"error": str}` with status 400 (malformed),
//! 404 (unknown model) or 503 (overloaded, retry later).

use serde::{Deserialize, Serialize};

use super::{DecodeParams, Strategy, Translation};
use crate::corpus::{TokenId, Vocab, VocabEntry};
use crate::error::{Error, Result};

pub const TRANSLATE_PATH: &str = "/v1/translate";
pub const VOCAB_PATH: &str = "/v1/vocab";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireDecode {
    pub strategy: Strategy,
    pub max_output_len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranslateRequest {
    pub model: String,
    pub decode: WireDecode,
    pub inputs: Vec<Vec<u32>>,
}

impl TranslateRequest {
    pub fn new(inputs: &[Vec<TokenId>], params: &DecodeParams) -> Self {
        TranslateRequest {
            model: params.model_id.clone(),
            decode: WireDecode {
                strategy: params.strategy,
                max_output_len: params.max_output_len,
            },
            inputs: inputs
                .iter()
                .map(|seq| seq.iter().map(|t| t.0).collect())
                .collect(),
        }
    }

    pub fn params(&self) -> DecodeParams {
        DecodeParams {
            strategy: self.decode.strategy,
            max_output_len: self.decode.max_output_len,
            model_id: self.model.clone(),
        }
    }

    pub fn token_inputs(&self) -> Vec<Vec<TokenId>> {
        self.inputs
            .iter()
            .map(|seq| seq.iter().copied().map(TokenId).collect())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslateResponse {
    pub outputs: Vec<Vec<u32>>,
}

impl TranslateResponse {
    pub fn from_translations(outputs: &[Translation]) -> Self {
        TranslateResponse {
            outputs: outputs
                .iter()
                .map(|t| t.tokens().iter().map(|x| x.0).collect())
                .collect(),
        }
    }

    pub fn into_translations(self) -> Vec<Translation> {
        self.outputs
            .into_iter()
            .map(|seq| Translation(seq.into_iter().map(TokenId).collect()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireVocabEntry {
    pub id: u32,
    pub surface: String,
    pub special: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabResponse {
    pub entries: Vec<WireVocabEntry>,
}

impl VocabResponse {
    pub fn from_vocab(vocab: &Vocab) -> Self {
        VocabResponse {
            entries: vocab
                .entries()
                .iter()
                .map(|e| WireVocabEntry {
                    id: e.id.0,
                    surface: e.surface.clone(),
                    special: e.special,
                })
                .collect(),
        }
    }

    pub fn into_vocab(self) -> Result<Vocab> {
        Vocab::from_entries(
            self.entries
                .into_iter()
                .map(|e| VocabEntry {
                    id: TokenId(e.id),
                    surface: e.surface,
                    special: e.special,
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: String,
}

/// Parses and validates a translate request body the way a conforming
/// server must (unknown strategies and fields are rejected).
pub fn parse_translate_request(body: &str) -> Result<TranslateRequest> {
    let req: TranslateRequest = serde_json::from_str(body)?;
    if req.inputs.iter().any(Vec::is_empty) {
        return Err(Error::InvalidArgument("empty input sequence".into()));
    }
    Ok(req)
}
