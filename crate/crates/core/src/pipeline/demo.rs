//! Self-contained demo data: a random synthetic translator plus a corpus
//! translated by it, so the whole pipeline can run without a model server.

use std::fs;
use std::path::{Path, PathBuf};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{derive_seed, CorpusPaths, ParallelCorpus, SentencePair, TokenId, Vocab};
use crate::error::{Error, Result};
use crate::translator::{synth_translate, RandomSpecParams, SynthSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoParams {
    pub spec: RandomSpecParams,
    pub sentences: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Exponent of the Zipf-like unigram distribution over source tokens.
    pub zipf_exponent: f64,
    pub seed: u64,
}

impl Default for DemoParams {
    fn default() -> Self {
        DemoParams {
            spec: RandomSpecParams::default(),
            sentences: 20_000,
            min_len: 8,
            max_len: 30,
            zipf_exponent: 0.6,
            seed: 0,
        }
    }
}

/// Files written by [`generate_demo`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemoFiles {
    pub corpus: CorpusPaths,
    pub spec: PathBuf,
}

impl DemoFiles {
    pub fn in_dir(dir: &Path) -> Self {
        DemoFiles {
            corpus: CorpusPaths {
                source: dir.join("source.txt"),
                target: dir.join("target.txt"),
                source_vocab: dir.join("source.vocab"),
                target_vocab: dir.join("target.vocab"),
            },
            spec: dir.join("spec.json"),
        }
    }
}

/// Builds the spec and the corpus in memory. Targets are the synthetic
/// translations of the sources; sentences that translate to nothing are
/// skipped. Special tokens never appear in sources.
pub fn demo_corpus(params: &DemoParams) -> Result<(SynthSpec, ParallelCorpus)> {
    if params.min_len == 0 || params.min_len > params.max_len || params.sentences == 0 {
        return Err(Error::InvalidArgument(
            "demo needs sentences >= 1 and 1 <= min_len <= max_len".into(),
        ));
    }
    let spec = SynthSpec::random(&params.spec, derive_seed(params.seed, 0));
    let source_vocab =
        Vocab::synthetic_with_specials(spec.source_vocab_size, "s", &spec.specials);
    let target_vocab = Vocab::synthetic(spec.target_vocab_size, "t");
    let candidates: Vec<TokenId> = source_vocab.substitutable().collect();
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("demo vocabulary has no ordinary tokens".into()));
    }
    let weights = (1..=candidates.len()).map(|r| (r as f64).powf(-params.zipf_exponent));
    let unigram = WeightedIndex::new(weights)
        .map_err(|e| Error::InvalidArgument(format!("unigram weights: {e}")))?;

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(params.seed, 1));
    let mut pairs = Vec::with_capacity(params.sentences);
    while pairs.len() < params.sentences {
        let len = rng.gen_range(params.min_len..=params.max_len);
        let source: Vec<TokenId> = (0..len).map(|_| candidates[unigram.sample(&mut rng)]).collect();
        let target = synth_translate(&spec, &source)?.0;
        if target.is_empty() {
            continue;
        }
        pairs.push(SentencePair { id: pairs.len() as u64, source, target });
    }
    let corpus = ParallelCorpus::new(pairs, source_vocab, target_vocab, "s-t", params.max_len)?;
    Ok((spec, corpus))
}

/// Writes the demo spec and corpus into `dir`.
pub fn generate_demo(dir: &Path, params: &DemoParams) -> Result<DemoFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (spec, corpus) = demo_corpus(params)?;
    let files = DemoFiles::in_dir(dir);
    corpus.write(&files.corpus)?;
    spec.save(&files.spec)?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::load_parallel_corpus;

    #[test]
    fn demo_roundtrips_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let params = DemoParams {
            spec: RandomSpecParams { source_vocab_size: 50, target_vocab_size: 50, ..Default::default() },
            sentences: 40,
            ..Default::default()
        };
        let files = generate_demo(dir.path(), &params).unwrap();
        let corpus = load_parallel_corpus(&files.corpus, "s-t", 128).unwrap();
        let spec = SynthSpec::load(&files.spec).unwrap();
        assert_eq!(corpus.len(), 40);
        for p in corpus.pairs() {
            assert_eq!(synth_translate(&spec, &p.source).unwrap().0, p.target);
        }
        assert_eq!(demo_corpus(&params).unwrap().1.pairs(), corpus.pairs());
    }
}
