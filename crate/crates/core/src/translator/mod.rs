//! The deterministic translator contract and its implementations.
//!
//! A [`Translator`] maps source token sequences to target token sequences.
//! Implementations must be pure: the same `(input, params)` always yields the
//! same output regardless of how inputs are batched.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{TokenId, Vocab};
use crate::error::TranslateError;

pub mod cache;
pub mod protocol;
pub mod remote;
pub mod synth;

pub use cache::{cached_translate, CacheStats, CachedTranslator, TranslationCache};
pub use remote::{RemoteTranslator, RetryPolicy};
pub use synth::{synth_translate, ContextRule, RandomSpecParams, SynthSpec, SynthTranslator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[default]
    Greedy,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Greedy => "greedy",
        }
    }
}

pub const DEFAULT_MAX_OUTPUT_LEN: usize = 128;

/// Decoding parameters; part of every cache key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DecodeParams {
    pub strategy: Strategy,
    pub max_output_len: usize,
    pub model_id: String,
}

impl DecodeParams {
    pub fn greedy(model_id: impl Into<String>) -> Self {
        DecodeParams {
            strategy: Strategy::Greedy,
            max_output_len: DEFAULT_MAX_OUTPUT_LEN,
            model_id: model_id.into(),
        }
    }
}

/// A generated target sentence. Equality is exact token-id equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct Translation(pub Vec<TokenId>);

impl Translation {
    pub fn tokens(&self) -> &[TokenId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Source,
    Target,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Source => "source",
            Side::Target => "target",
        }
    }
}

pub trait Translator: Send + Sync {
    /// Translates every input; the output is positionally aligned.
    fn translate_batch(
        &self,
        inputs: &[Vec<TokenId>],
        params: &DecodeParams,
    ) -> Result<Vec<Translation>, TranslateError>;

    /// The vocabulary of one side, with special tokens flagged. For the
    /// source side this is the exact substitution universe of a sweep.
    fn vocabulary(&self, side: Side) -> Result<Vocab, TranslateError>;
}

impl<T: Translator + ?Sized> Translator for &T {
    fn translate_batch(
        &self,
        inputs: &[Vec<TokenId>],
        params: &DecodeParams,
    ) -> Result<Vec<Translation>, TranslateError> {
        (**self).translate_batch(inputs, params)
    }

    fn vocabulary(&self, side: Side) -> Result<Vocab, TranslateError> {
        (**self).vocabulary(side)
    }
}

impl<T: Translator + ?Sized> Translator for Arc<T> {
    fn translate_batch(
        &self,
        inputs: &[Vec<TokenId>],
        params: &DecodeParams,
    ) -> Result<Vec<Translation>, TranslateError> {
        (**self).translate_batch(inputs, params)
    }

    fn vocabulary(&self, side: Side) -> Result<Vocab, TranslateError> {
        (**self).vocabulary(side)
    }
}

impl<T: Translator + ?Sized> Translator for Box<T> {
    fn translate_batch(
        &self,
        inputs: &[Vec<TokenId>],
        params: &DecodeParams,
    ) -> Result<Vec<Translation>, TranslateError> {
        (**self).translate_batch(inputs, params)
    }

    fn vocabulary(&self, side: Side) -> Result<Vocab, TranslateError> {
        (**self).vocabulary(side)
    }
}

/// Convenience: translate a single input.
pub fn translate_one<T: Translator + ?Sized>(
    translator: &T,
    input: &[TokenId],
    params: &DecodeParams,
) -> Result<Translation, TranslateError> {
    let mut out = translator.translate_batch(&[input.to_vec()], params)?;
    check_alignment(1, out.len())?;
    Ok(out.pop().expect("one output"))
}

pub(crate) fn check_alignment(expected: usize, got: usize) -> Result<(), TranslateError> {
    if expected != got {
        return Err(TranslateError::Protocol(format!(
            "backend returned {got} outputs for {expected} inputs"
        )));
    }
    Ok(())
}

/// Counts the calls and inputs that reach the wrapped backend.
#[derive(Debug, Default)]
pub struct Counting<T> {
    inner: T,
    calls: AtomicU64,
    inputs: AtomicU64,
}

impl<T> Counting<T> {
    pub fn new(inner: T) -> Self {
        Counting {
            inner,
            calls: AtomicU64::new(0),
            inputs: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn inputs(&self) -> u64 {
        self.inputs.load(Ordering::SeqCst)
    }

    pub fn inner(&self) -> &T {
        &self.inner
    }
}

impl<T: Translator> Translator for Counting<T> {
    fn translate_batch(
        &self,
        inputs: &[Vec<TokenId>],
        params: &DecodeParams,
    ) -> Result<Vec<Translation>, TranslateError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inputs.fetch_add(inputs.len() as u64, Ordering::SeqCst);
        self.inner.translate_batch(inputs, params)
    }

    fn vocabulary(&self, side: Side) -> Result<Vocab, TranslateError> {
        self.inner.vocabulary(side)
    }
}

/// Collapses duplicate inputs within each batch before dispatch, without
/// remembering anything across batches.
#[derive(Debug)]
pub struct Deduplicating<T> {
    inner: T,
}

impl<T> Deduplicating<T> {
    pub fn new(inner: T) -> Self {
        Deduplicating { inner }
    }
}

impl<T: Translator> Translator for Deduplicating<T> {
    fn translate_batch(
        &self,
        inputs: &[Vec<TokenId>],
        params: &DecodeParams,
    ) -> Result<Vec<Translation>, TranslateError> {
        let mut slot: std::collections::HashMap<&[TokenId], usize> =
            std::collections::HashMap::with_capacity(inputs.len());
        let mut unique: Vec<Vec<TokenId>> = Vec::new();
        let positions: Vec<usize> = inputs
            .iter()
            .map(|input| {
                *slot.entry(input.as_slice()).or_insert_with(|| {
                    unique.push(input.clone());
                    unique.len() - 1
                })
            })
            .collect();
        let outputs = self.inner.translate_batch(&unique, params)?;
        check_alignment(unique.len(), outputs.len())?;
        Ok(positions.into_iter().map(|i| outputs[i].clone()).collect())
    }

    fn vocabulary(&self, side: Side) -> Result<Vocab, TranslateError> {
        self.inner.vocabulary(side)
    }
}
