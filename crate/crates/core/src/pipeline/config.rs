use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::corpus::{CorpusPaths, PivotCriteria, DEFAULT_MAX_LEN};
use crate::degeneracy::DEFAULT_SWEEP_BATCH;
use crate::entropy::{DEFAULT_BETA_C, DEFAULT_K, DEFAULT_KEEP};
use crate::error::{Error, Result};
use crate::provenance::{digest_json, Provenance};
use crate::translator::{
    CachedTranslator, DecodeParams, Deduplicating, RemoteTranslator, SynthSpec, SynthTranslator,
    TranslationCache, Translator,
};

/// Where translations come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// In-process synthetic translator loaded from a spec JSON file.
    Synthetic { spec: PathBuf },
    /// Model server speaking the HTTP wire protocol.
    Remote { url: String },
}

/// Everything a run needs. Measurement settings feed the stage digests;
/// operational settings (concurrency, batch size, cache, output directory,
/// server URL) do not, so they can change between runs and resumes without
/// invalidating earlier artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub corpus: CorpusPaths,
    pub direction: String,
    pub max_len: usize,
    pub backend: Backend,
    pub decode: DecodeParams,
    pub pivots: PivotCriteria,
    pub keep: usize,
    pub beta_c: f64,
    pub k: usize,
    pub seed: u64,
    pub histogram_bin_width: f64,
    pub concurrency: usize,
    pub batch_size: usize,
    pub cache: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl RunConfig {
    /// Defaults for everything but the inputs.
    pub fn new(corpus: CorpusPaths, backend: Backend, model_id: &str, out_dir: PathBuf) -> Self {
        RunConfig {
            corpus,
            direction: "src-tgt".into(),
            max_len: DEFAULT_MAX_LEN,
            backend,
            decode: DecodeParams::greedy(model_id),
            pivots: PivotCriteria::default(),
            keep: DEFAULT_KEEP,
            beta_c: DEFAULT_BETA_C,
            k: DEFAULT_K,
            seed: 0,
            histogram_bin_width: 1.0,
            concurrency: std::thread::available_parallelism().map_or(4, |n| n.get()),
            batch_size: DEFAULT_SWEEP_BATCH,
            cache: None,
            out_dir,
        }
    }

    pub fn out(&self, file: &str) -> PathBuf {
        self.out_dir.join(file)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.pivots.count == 0 {
            return bad("pivot count must be >= 1");
        }
        if self.pivots.min_freq > self.pivots.max_freq {
            return bad("min-freq exceeds max-freq");
        }
        if self.keep == 0 || self.keep > self.pivots.sentences_per_token {
            return bad("keep must be in 1..=sentences-per-token");
        }
        if self.k == 0 || self.k > self.pivots.count {
            return bad("K must be in 1..=pivot-count");
        }
        if !(self.beta_c >= 0.0) || !self.beta_c.is_finite() {
            return bad("beta-c must be a finite value >= 0");
        }
        if !(self.histogram_bin_width > 0.0) {
            return bad("histogram bin width must be positive");
        }
        Ok(())
    }

    fn corpus_digest(&self) -> Result<String> {
        let mut h = Sha256::new();
        for path in [
            &self.corpus.source,
            &self.corpus.target,
            &self.corpus.source_vocab,
            &self.corpus.target_vocab,
        ] {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(&bytes);
        }
        Ok(hex::encode(h.finalize()))
    }

    fn backend_identity(&self) -> Result<serde_json::Value> {
        Ok(match &self.backend {
            Backend::Synthetic { spec } => {
                json!({"kind": "synthetic", "spec_digest": SynthSpec::load(spec)?.digest()})
            }
            Backend::Remote { .. } => json!({"kind": "remote"}),
        })
    }

    /// Settings that determine pivot selection.
    pub fn selection_params(&self) -> Result<serde_json::Value> {
        Ok(json!({
            "corpus_digest": self.corpus_digest()?,
            "direction": self.direction,
            "max_len": self.max_len,
            "pivots": self.pivots,
            "seed": self.seed,
        }))
    }

    /// Settings that determine the sweep output, including selection.
    pub fn sweep_params(&self) -> Result<serde_json::Value> {
        Ok(json!({
            "selection_digest": digest_json(&self.selection_params()?),
            "backend": self.backend_identity()?,
            "decode": self.decode,
        }))
    }

    /// Settings that determine the entropy report, including the sweep.
    pub fn entropy_params(&self) -> Result<serde_json::Value> {
        Ok(json!({
            "sweep_digest": digest_json(&self.sweep_params()?),
            "keep": self.keep,
            "beta_c": self.beta_c,
            "k": self.k,
            "histogram_bin_width": self.histogram_bin_width,
        }))
    }

    pub fn selection_provenance(&self) -> Result<Provenance> {
        Ok(Provenance::new("select", self.selection_params()?, None, self.seed))
    }

    pub fn sweep_provenance(&self) -> Result<Provenance> {
        let upstream = digest_json(&self.selection_params()?);
        Ok(Provenance::new("sweep", self.sweep_params()?, Some(upstream), self.seed))
    }

    pub fn entropy_provenance(&self) -> Result<Provenance> {
        let upstream = digest_json(&self.sweep_params()?);
        Ok(Provenance::new("entropy", self.entropy_params()?, Some(upstream), self.seed))
    }

    /// Pair and BLEU artifacts depend on the corpus and the translator.
    pub fn translation_provenance(&self, stage: &str, extra: serde_json::Value) -> Result<Provenance> {
        let params = json!({
            "corpus_digest": self.corpus_digest()?,
            "direction": self.direction,
            "max_len": self.max_len,
            "backend": self.backend_identity()?,
            "decode": self.decode,
            "extra": extra,
        });
        Ok(Provenance::new(stage, params, None, self.seed))
    }

    /// The configured backend, behind the persistent cache when one is
    /// configured. Within-batch deduplication applies either way.
    pub fn translator(&self) -> Result<Arc<dyn Translator>> {
        let inner: Box<dyn Translator> = match &self.backend {
            Backend::Synthetic { spec } => Box::new(SynthTranslator::new(SynthSpec::load(spec)?)?),
            Backend::Remote { url } => Box::new(
                RemoteTranslator::new(url.clone(), self.concurrency).with_max_batch(self.batch_size),
            ),
        };
        Ok(match &self.cache {
            Some(path) => Arc::new(CachedTranslator::new(
                inner,
                Arc::new(TranslationCache::open(path)?),
            )),
            None => Arc::new(Deduplicating::new(inner)),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
