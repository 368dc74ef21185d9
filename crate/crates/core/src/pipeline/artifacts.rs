//! On-disk artifact formats: JSONL files with a provenance header line,
//! written atomically.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::corpus::{Occurrence, TokenId};
use crate::degeneracy::PairDegeneracy;
use crate::error::{Error, Result};
use crate::provenance::Provenance;

#[derive(Serialize, Deserialize)]
struct Header {
    provenance: Provenance,
}

/// Writes `bytes` to a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    let io = |e| Error::io(path, e);
    {
        let mut f = fs::File::create(&tmp).map_err(io)?;
        f.write_all(bytes).map_err(io)?;
        f.sync_all().map_err(io)?;
    }
    fs::rename(&tmp, path).map_err(io)
}

pub fn jsonl_line<T: Serialize>(record: &T) -> Result<String> {
    let mut line = serde_json::to_string(record)?;
    line.push('\n');
    Ok(line)
}

pub fn header_line(provenance: &Provenance) -> Result<String> {
    jsonl_line(&Header {
        provenance: provenance.clone(),
    })
}

pub fn write_jsonl<T: Serialize>(path: &Path, provenance: &Provenance, records: &[T]) -> Result<()> {
    let mut out = header_line(provenance)?;
    for r in records {
        out.push_str(&jsonl_line(r)?);
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<(Provenance, Vec<T>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let parse_err = |line: usize, e: serde_json::Error| Error::Parse {
        path: path.to_path_buf(),
        line: line + 1,
        message: e.to_string(),
    };
    let (n, first) = lines.next().ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        message: "missing provenance header".into(),
    })?;
    let header: Header = serde_json::from_str(first).map_err(|e| parse_err(n, e))?;
    let records = lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| serde_json::from_str(l).map_err(|e| parse_err(n, e)))
        .collect::<Result<_>>()?;
    Ok((header.provenance, records))
}

/// Checks that an input artifact was produced under the expected settings.
pub fn expect_digest(path: &Path, found: &Provenance, expected: &str) -> Result<()> {
    if found.config_digest != expected {
        return Err(Error::DigestMismatch(format!(
            "{} was produced with config digest {}, current settings give {}; rerun the upstream stage",
            path.display(),
            found.config_digest,
            expected
        )));
    }
    Ok(())
}

/// One selected pivot token and its sampled sentences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PivotRecord {
    pub token: TokenId,
    pub surface: String,
    pub frequency: u64,
    pub sentences: Vec<Occurrence>,
}

/// A pair-degeneracy result with the two original tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub tokens: (TokenId, TokenId),
    #[serde(flatten)]
    pub pair: PairDegeneracy,
}
