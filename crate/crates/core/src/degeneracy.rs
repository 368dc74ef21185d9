//! Translation-degeneracy subgroups.
//!
//! A single-token sweep replaces the token at one position of a sentence by
//! every other substitutable source token and keeps those replacements whose
//! translation is identical to the unmodified sentence's translation. The
//! pair sweep does the same for every combination of two positions' subgroup
//! members.

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{PivotSentence, SentencePair, TokenId, Vocab};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::translator::{translate_one, DecodeParams, Translation, Translator};

/// Inputs per translator call during a sweep.
pub const DEFAULT_SWEEP_BATCH: usize = 1024;

/// Replacement tokens at one position that preserve the translation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subgroup {
    pub pivot: TokenId,
    pub sentence_id: u64,
    pub position: usize,
    /// Ascending; never contains the pivot or a special token.
    #[serde(rename = "member_ids")]
    pub members: Vec<TokenId>,
    pub size: usize,
    pub reference_output: Translation,
}

impl Subgroup {
    pub fn contains(&self, token: TokenId) -> bool {
        self.members.binary_search(&token).is_ok()
    }
}

fn substituted(source: &[TokenId], position: usize, token: TokenId) -> Vec<TokenId> {
    let mut s = source.to_vec();
    s[position] = token;
    s
}

/// Sweeps one position of `sentence`; the pivot is whatever token sits there.
/// Multiple occurrences of that token elsewhere in the sentence are left
/// untouched.
pub fn sweep_position<T: Translator + ?Sized>(
    sentence: &SentencePair,
    position: usize,
    vocab: &Vocab,
    translator: &T,
    params: &DecodeParams,
    batch_size: usize,
) -> Result<Subgroup> {
    let pivot = *sentence.source.get(position).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "position {position} outside sentence {} of length {}",
            sentence.id,
            sentence.source.len()
        ))
    })?;
    let reference = translate_one(translator, &sentence.source, params)?;
    let candidates: Vec<TokenId> = vocab.substitutable().filter(|&t| t != pivot).collect();

    let chunks: Vec<Vec<TokenId>> = candidates
        .par_chunks(batch_size.max(1))
        .map(|chunk| -> Result<Vec<TokenId>> {
            let inputs: Vec<Vec<TokenId>> = chunk
                .iter()
                .map(|&t| substituted(&sentence.source, position, t))
                .collect();
            let outputs = translator.translate_batch(&inputs, params)?;
            crate::translator::check_alignment(inputs.len(), outputs.len())?;
            Ok(chunk
                .iter()
                .zip(outputs)
                .filter(|(_, out)| *out == reference)
                .map(|(&t, _)| t)
                .collect())
        })
        .collect::<Result<_>>()?;

    let members: Vec<TokenId> = chunks.into_iter().flatten().collect();
    debug_assert!(members.windows(2).all(|w| w[0] < w[1]));
    Ok(Subgroup {
        pivot,
        sentence_id: sentence.id,
        position,
        size: members.len(),
        members,
        reference_output: reference,
    })
}

/// Exhaustive single-token sweep of a pivot sentence.
pub fn substitution_sweep<T: Translator + ?Sized>(
    pivot_sentence: &PivotSentence,
    vocab: &Vocab,
    translator: &T,
    params: &DecodeParams,
) -> Result<Subgroup> {
    substitution_sweep_batched(pivot_sentence, vocab, translator, params, DEFAULT_SWEEP_BATCH)
}

pub fn substitution_sweep_batched<T: Translator + ?Sized>(
    pivot_sentence: &PivotSentence,
    vocab: &Vocab,
    translator: &T,
    params: &DecodeParams,
    batch_size: usize,
) -> Result<Subgroup> {
    sweep_position(
        &pivot_sentence.sentence,
        pivot_sentence.position,
        vocab,
        translator,
        params,
        batch_size,
    )
}

/// The subgroups of one pivot token across its pivot sentences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgroupEnsemble {
    pub pivot: TokenId,
    pub subgroups: Vec<Subgroup>,
}

impl SubgroupEnsemble {
    pub fn new(pivot: TokenId, subgroups: Vec<Subgroup>) -> Result<Self> {
        if let Some(sg) = subgroups.iter().find(|sg| sg.pivot != pivot) {
            return Err(Error::PivotMismatch {
                expected: pivot,
                found: sg.pivot,
            });
        }
        Ok(SubgroupEnsemble { pivot, subgroups })
    }

    pub fn len(&self) -> usize {
        self.subgroups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subgroups.is_empty()
    }

    pub fn total_size(&self) -> u64 {
        self.subgroups.iter().map(|sg| sg.size as u64).sum()
    }

    /// Mean subgroup size, exactly.
    pub fn avg_size_exact(&self) -> Option<Ratio<u64>> {
        (!self.is_empty()).then(|| Ratio::new(self.total_size(), self.len() as u64))
    }

    /// Mean subgroup size, `0` for an empty ensemble.
    pub fn avg_size<S: Scalar>(&self) -> S {
        if self.is_empty() {
            return S::zero();
        }
        S::from_count(self.total_size()) / S::from_count(self.len() as u64)
    }
}

/// Sweeps every pivot sentence of one pivot token, preserving order.
pub fn sweep_ensemble<T: Translator + ?Sized>(
    pivot: TokenId,
    sentences: &[PivotSentence],
    vocab: &Vocab,
    translator: &T,
    params: &DecodeParams,
) -> Result<SubgroupEnsemble> {
    if let Some(ps) = sentences.iter().find(|ps| ps.pivot != pivot) {
        return Err(Error::PivotMismatch {
            expected: pivot,
            found: ps.pivot,
        });
    }
    let subgroups = sentences
        .iter()
        .map(|ps| substitution_sweep(ps, vocab, translator, params))
        .collect::<Result<Vec<_>>>()?;
    SubgroupEnsemble::new(pivot, subgroups)
}

/// Two-position degeneracy of one sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDegeneracy {
    pub sentence_id: u64,
    pub positions: (usize, usize),
    pub sg_a: usize,
    pub sg_b: usize,
    /// Combinations `(t_a, t_b)` of subgroup members preserving the translation.
    pub pair_count: u64,
    /// `pair_count / (sg_a * sg_b)`; absent when either subgroup is empty.
    pub ratio: Option<f64>,
}

impl PairDegeneracy {
    pub fn product(&self) -> u64 {
        self.sg_a as u64 * self.sg_b as u64
    }

    pub fn ratio_exact(&self) -> Option<Ratio<u64>> {
        let product = self.product();
        (product > 0).then(|| Ratio::new(self.pair_count, product))
    }

    pub fn ratio_as<S: Scalar>(&self) -> Option<S> {
        let product = self.product();
        (product > 0).then(|| S::from_count(self.pair_count) / S::from_count(product))
    }
}

/// Counts how many joint replacements of positions `j_a` and `j_b` by members
/// of `sg_a` and `sg_b` still produce the sentence's reference translation.
pub fn pair_sweep<T: Translator + ?Sized>(
    sentence: &SentencePair,
    sg_a: &Subgroup,
    sg_b: &Subgroup,
    translator: &T,
    params: &DecodeParams,
) -> Result<PairDegeneracy> {
    pair_sweep_batched(sentence, sg_a, sg_b, translator, params, DEFAULT_SWEEP_BATCH)
}

pub fn pair_sweep_batched<T: Translator + ?Sized>(
    sentence: &SentencePair,
    sg_a: &Subgroup,
    sg_b: &Subgroup,
    translator: &T,
    params: &DecodeParams,
    batch_size: usize,
) -> Result<PairDegeneracy> {
    let (j_a, j_b) = (sg_a.position, sg_b.position);
    if j_a == j_b {
        return Err(Error::InvalidArgument(format!(
            "pair positions must differ (both {j_a})"
        )));
    }
    for sg in [sg_a, sg_b] {
        if sg.sentence_id != sentence.id || sentence.source.get(sg.position) != Some(&sg.pivot) {
            return Err(Error::InvalidArgument(format!(
                "subgroup for sentence {} position {} does not match sentence {}",
                sg.sentence_id, sg.position, sentence.id
            )));
        }
    }
    let reference = translate_one(translator, &sentence.source, params)?;
    if reference != sg_a.reference_output || reference != sg_b.reference_output {
        return Err(Error::InvalidArgument(format!(
            "subgroups of sentence {} were computed against a different translation",
            sentence.id
        )));
    }

    let mut record = PairDegeneracy {
        sentence_id: sentence.id,
        positions: (j_a, j_b),
        sg_a: sg_a.size,
        sg_b: sg_b.size,
        pair_count: 0,
        ratio: None,
    };
    if sg_a.members.is_empty() || sg_b.members.is_empty() {
        return Ok(record);
    }

    let combos: Vec<(TokenId, TokenId)> = sg_a
        .members
        .iter()
        .flat_map(|&a| sg_b.members.iter().map(move |&b| (a, b)))
        .collect();
    record.pair_count = combos
        .par_chunks(batch_size.max(1))
        .map(|chunk| -> Result<u64> {
            let inputs: Vec<Vec<TokenId>> = chunk
                .iter()
                .map(|&(a, b)| {
                    let mut s = sentence.source.clone();
                    s[j_a] = a;
                    s[j_b] = b;
                    s
                })
                .collect();
            let outputs = translator.translate_batch(&inputs, params)?;
            crate::translator::check_alignment(inputs.len(), outputs.len())?;
            Ok(outputs.iter().filter(|o| **o == reference).count() as u64)
        })
        .try_reduce(|| 0, |x, y| Ok(x + y))?;
    record.ratio = record.ratio_as::<f64>();
    Ok(record)
}
