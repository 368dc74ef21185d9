//! Corpus-level BLEU over token sequences.
//!
//! Clipped n-gram matches for n = 1..=4 are pooled over the whole corpus
//! before the geometric mean is taken; the brevity penalty is
//! `exp(1 - r/c)` when the hypothesis length `c` does not exceed the
//! reference length `r`. There is no smoothing: if any pooled precision is
//! zero (including an order with no hypothesis n-grams at all) the score
//! is 0 and the precisions are still reported.

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuScore<S> {
    /// In `[0, 100]`.
    pub score: S,
    pub precisions: [S; MAX_ORDER],
    pub matches: [u64; MAX_ORDER],
    pub totals: [u64; MAX_ORDER],
    pub brevity_penalty: S,
    pub hyp_len: u64,
    pub ref_len: u64,
}

fn ngram_counts<T: Eq + Hash>(seq: &[T], n: usize) -> HashMap<&[T], u64> {
    let mut counts = HashMap::new();
    if seq.len() >= n {
        for w in seq.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

pub fn bleu_corpus<T, S>(hypotheses: &[Vec<T>], references: &[Vec<T>]) -> Result<BleuScore<S>>
where
    T: Eq + Hash,
    S: Scalar,
{
    if hypotheses.is_empty() {
        return Err(Error::InvalidArgument("no hypotheses to score".into()));
    }
    if hypotheses.len() != references.len() {
        return Err(Error::InvalidArgument(format!(
            "{} hypotheses vs {} references",
            hypotheses.len(),
            references.len()
        )));
    }

    let mut matches = [0u64; MAX_ORDER];
    let mut totals = [0u64; MAX_ORDER];
    let mut hyp_len = 0u64;
    let mut ref_len = 0u64;
    for (hyp, reference) in hypotheses.iter().zip(references) {
        hyp_len += hyp.len() as u64;
        ref_len += reference.len() as u64;
        for n in 1..=MAX_ORDER {
            let ref_counts = ngram_counts(reference, n);
            for (gram, count) in ngram_counts(hyp, n) {
                let clip = ref_counts.get(gram).copied().unwrap_or(0);
                matches[n - 1] += count.min(clip);
            }
            totals[n - 1] += hyp.len().saturating_sub(n - 1) as u64;
        }
    }

    let precisions: [S; MAX_ORDER] = std::array::from_fn(|i| {
        if totals[i] == 0 {
            S::zero()
        } else {
            S::from_count(matches[i]) / S::from_count(totals[i])
        }
    });
    let brevity_penalty = if hyp_len == 0 {
        S::zero()
    } else if hyp_len > ref_len {
        S::one()
    } else {
        (S::one() - S::from_count(ref_len) / S::from_count(hyp_len)).exp()
    };
    let score = if precisions.iter().any(|p| *p <= S::zero()) {
        S::zero()
    } else {
        let log_mean = precisions.iter().map(|p| p.ln()).sum::<S>()
            / S::from_count(MAX_ORDER as u64);
        let hundred = S::from_count(100);
        (brevity_penalty * log_mean.exp() * hundred).min(hundred)
    };
    Ok(BleuScore {
        score,
        precisions,
        matches,
        totals,
        brevity_penalty,
        hyp_len,
        ref_len,
    })
}
