//! From subgroup ensembles to per-token and per-model entropy.
//!
//! Per pivot token, the `keep` smallest subgroups are retained. Replacement
//! token `i` gets count `c_i`, the number of kept subgroups containing it,
//! and probability `P_i = c_i / keep`. The probabilities are not normalized
//! as a family. From them:
//!
//! * `N_Av = keep * sum(P_i) = sum(c_i)`, exact, over all tokens;
//! * `S(T) = -sum(P_i log2 P_i)` over tokens with `P_i > beta_c / keep`
//!   (strict), `beta_c = 0` being the unthresholded entropy;
//! * model entropy `S^K`, the mean of the `K` smallest `S(T)`.

use std::collections::BTreeMap;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::corpus::TokenId;
use crate::degeneracy::{Subgroup, SubgroupEnsemble};
use crate::error::{Error, Result};
use crate::provenance::Provenance;
use crate::scalar::{mean, pairwise_sum, Scalar};

pub const DEFAULT_KEEP: usize = 24;
pub const DEFAULT_BETA_C: f64 = 5.0;
pub const DEFAULT_K: usize = 95;

/// The `keep` smallest subgroups, ties broken by ascending sentence id.
/// Returned in that (size, sentence id) order.
pub fn select_smallest(ensemble: &SubgroupEnsemble, keep: usize) -> Result<Vec<Subgroup>> {
    if keep == 0 || ensemble.len() < keep {
        return Err(Error::TooFewSubgroups {
            keep,
            available: ensemble.len(),
        });
    }
    let mut order: Vec<&Subgroup> = ensemble.subgroups.iter().collect();
    order.sort_by_key(|sg| (sg.size, sg.sentence_id));
    Ok(order.into_iter().take(keep).cloned().collect())
}

/// How often each replacement token appears across the kept subgroups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplacementDistribution {
    pub pivot: TokenId,
    pub kept: u32,
    /// `1 <= c_i <= kept`; tokens that never appear are absent.
    pub counts: BTreeMap<TokenId, u32>,
}

impl ReplacementDistribution {
    /// Builds a distribution from explicit counts, validating the bounds.
    pub fn from_counts(
        pivot: TokenId,
        kept: u32,
        counts: impl IntoIterator<Item = (TokenId, u32)>,
    ) -> Result<Self> {
        if kept == 0 {
            return Err(Error::InvalidArgument("kept must be positive".into()));
        }
        let counts: BTreeMap<TokenId, u32> = counts.into_iter().collect();
        if let Some((t, c)) = counts.iter().find(|(_, &c)| c == 0 || c > kept) {
            return Err(Error::InvalidArgument(format!(
                "count {c} for token {t} outside 1..={kept}"
            )));
        }
        Ok(ReplacementDistribution {
            pivot,
            kept,
            counts,
        })
    }

    pub fn count(&self, token: TokenId) -> u32 {
        self.counts.get(&token).copied().unwrap_or(0)
    }

    pub fn probability_exact(&self, token: TokenId) -> Ratio<u32> {
        Ratio::new(self.count(token), self.kept)
    }

    pub fn probability<S: Scalar>(&self, token: TokenId) -> S {
        S::from_count(self.count(token).into()) / S::from_count(self.kept.into())
    }

    /// `(token, P_i)` in ascending token order.
    pub fn probabilities<S: Scalar>(&self) -> Vec<(TokenId, S)> {
        let kept = S::from_count(self.kept.into());
        self.counts
            .iter()
            .map(|(&t, &c)| (t, S::from_count(c.into()) / kept))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Tokens surviving `P_i > beta_c / kept`.
    pub fn surviving<S: Scalar>(&self, beta_c: S) -> usize {
        self.counts
            .values()
            .filter(|&&c| passes_threshold(c, beta_c))
            .count()
    }
}

/// `c / kept > beta_c / kept`, decided on the counts so the boundary is exact.
fn passes_threshold<S: Scalar>(count: u32, beta_c: S) -> bool {
    S::from_count(count.into()) > beta_c
}

/// Counts sentence-level membership over the kept subgroups.
pub fn replacement_distribution(kept: &[Subgroup]) -> Result<ReplacementDistribution> {
    let first = kept
        .first()
        .ok_or_else(|| Error::InvalidArgument("no kept subgroups".into()))?;
    let mut counts: BTreeMap<TokenId, u32> = BTreeMap::new();
    for sg in kept {
        if sg.pivot != first.pivot {
            return Err(Error::PivotMismatch {
                expected: first.pivot,
                found: sg.pivot,
            });
        }
        // members are a set, so each subgroup adds at most one per token
        for &t in &sg.members {
            *counts.entry(t).or_default() += 1;
        }
    }
    Ok(ReplacementDistribution {
        pivot: first.pivot,
        kept: kept.len() as u32,
        counts,
    })
}

/// `kept * sum(P_i)`, which is exactly `sum(c_i)`. Unthresholded.
pub fn n_av(dist: &ReplacementDistribution) -> u64 {
    dist.counts.values().map(|&c| u64::from(c)).sum()
}

/// `-P log2 P` for `P = count / kept`; zero for `count == 0`.
pub fn entropy_term<S: Scalar>(count: u32, kept: u32) -> S {
    if count == 0 {
        return S::zero();
    }
    let p = S::from_count(count.into()) / S::from_count(kept.into());
    S::zero() - p * p.log2()
}

/// Entropy in bits over the tokens with `P_i > beta_c / kept`.
pub fn token_entropy<S: Scalar>(dist: &ReplacementDistribution, beta_c: S) -> S {
    let terms: Vec<S> = dist
        .counts
        .values()
        .filter(|&&c| passes_threshold(c, beta_c))
        .map(|&c| entropy_term(c, dist.kept))
        .collect();
    pairwise_sum(&terms)
}

/// Statistics of one pivot token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenEntropyRecord<S> {
    pub pivot: TokenId,
    /// Mean size over all measured subgroups (before keeping the smallest).
    pub avg_subgroup_size: S,
    pub n_av: u64,
    pub entropy_raw: S,
    pub entropy_thresholded: S,
    pub beta_c: S,
    pub kept: u32,
    /// Replacement tokens that pass the threshold.
    pub surviving: usize,
}

/// Runs the per-token statistics on one ensemble.
pub fn token_record<S: Scalar>(
    ensemble: &SubgroupEnsemble,
    keep: usize,
    beta_c: S,
) -> Result<TokenEntropyRecord<S>> {
    if beta_c < S::zero() {
        return Err(Error::InvalidArgument("beta_c must be >= 0".into()));
    }
    let kept = select_smallest(ensemble, keep)?;
    let dist = replacement_distribution(&kept)?;
    Ok(TokenEntropyRecord {
        pivot: ensemble.pivot,
        avg_subgroup_size: ensemble.avg_size(),
        n_av: n_av(&dist),
        entropy_raw: token_entropy(&dist, S::zero()),
        entropy_thresholded: token_entropy(&dist, beta_c),
        beta_c,
        kept: dist.kept,
        surviving: dist.surviving(beta_c),
    })
}

/// `(S, S^K)`: the mean over all records and over the `k` lowest
/// thresholded entropies.
pub fn aggregate<S: Scalar>(records: &[TokenEntropyRecord<S>], k: usize) -> Result<(S, S)> {
    if k == 0 || k > records.len() {
        return Err(Error::InvalidArgument(format!(
            "K = {k} outside 1..={}",
            records.len()
        )));
    }
    let mut entropies: Vec<S> = records.iter().map(|r| r.entropy_thresholded).collect();
    entropies.sort_by(|a, b| a.partial_cmp(b).expect("entropies are finite"));
    let all = mean(&entropies).expect("non-empty");
    let lowest = mean(&entropies[..k]).expect("k >= 1");
    Ok((all, lowest))
}

/// Per-model entropy report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntropyReport<S> {
    pub model_id: String,
    pub direction: String,
    pub beta_c: S,
    pub kept: usize,
    pub k: usize,
    /// Mean thresholded entropy over every record.
    pub s: S,
    /// Mean of the `k` lowest.
    pub s_k: S,
    /// Ascending by thresholded entropy, ties by pivot id.
    pub records: Vec<TokenEntropyRecord<S>>,
    pub provenance: Provenance,
}

impl<S: Scalar> ModelEntropyReport<S> {
    pub fn build(
        model_id: impl Into<String>,
        direction: impl Into<String>,
        mut records: Vec<TokenEntropyRecord<S>>,
        keep: usize,
        beta_c: S,
        k: usize,
        provenance: Provenance,
    ) -> Result<Self> {
        let (s, s_k) = aggregate(&records, k)?;
        records.sort_by(|a, b| {
            a.entropy_thresholded
                .partial_cmp(&b.entropy_thresholded)
                .expect("entropies are finite")
                .then(a.pivot.cmp(&b.pivot))
        });
        Ok(ModelEntropyReport {
            model_id: model_id.into(),
            direction: direction.into(),
            beta_c,
            kept: keep,
            k,
            s,
            s_k,
            records,
            provenance,
        })
    }

    /// Mean of the `k` lowest entropies for any `k`.
    pub fn s_lowest(&self, k: usize) -> Result<S> {
        aggregate(&self.records, k).map(|(_, lowest)| lowest)
    }
}

/// Sorted entropies with half-open bins `[i*w, (i+1)*w)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyHistogram<S> {
    pub bin_width: S,
    pub entropies: Vec<S>,
    /// Bin index to count; empty bins are absent.
    pub bins: BTreeMap<u64, usize>,
}

impl<S: Scalar> EntropyHistogram<S> {
    pub fn total(&self) -> usize {
        self.bins.values().sum()
    }

    /// `bin_start,count` rows for every non-empty bin.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_start,count\n");
        for (&bin, &count) in &self.bins {
            out.push_str(&format!(
                "{},{count}\n",
                S::from_count(bin) * self.bin_width
            ));
        }
        out
    }
}

pub fn histogram<S: Scalar>(
    records: &[TokenEntropyRecord<S>],
    bin_width: S,
) -> Result<EntropyHistogram<S>> {
    if !(bin_width > S::zero()) || !bin_width.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "bin width must be positive, got {bin_width}"
        )));
    }
    let mut entropies: Vec<S> = records.iter().map(|r| r.entropy_thresholded).collect();
    entropies.sort_by(|a, b| a.partial_cmp(b).expect("entropies are finite"));
    let mut bins = BTreeMap::new();
    for &e in &entropies {
        let bin = (e / bin_width).floor().to_u64().unwrap_or(0);
        *bins.entry(bin).or_insert(0) += 1;
    }
    Ok(EntropyHistogram {
        bin_width,
        entropies,
        bins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokens;
    use crate::translator::Translation;

    fn dist(counts: &[u32]) -> ReplacementDistribution {
        ReplacementDistribution::from_counts(
            TokenId(0),
            24,
            counts.iter().enumerate().map(|(i, &c)| (TokenId(i as u32 + 1), c)),
        )
        .unwrap()
    }

    fn sg(sentence_id: u64, members: &[u32]) -> Subgroup {
        Subgroup {
            pivot: TokenId(0),
            sentence_id,
            position: 0,
            members: tokens(members),
            size: members.len(),
            reference_output: Translation::default(),
        }
    }

    fn record(e: f64) -> TokenEntropyRecord<f64> {
        TokenEntropyRecord {
            pivot: TokenId(0),
            avg_subgroup_size: 0.0,
            n_av: 0,
            entropy_raw: e,
            entropy_thresholded: e,
            beta_c: 5.0,
            kept: 24,
            surviving: 0,
        }
    }

    #[test]
    fn hand_computed_entropies() {
        assert_eq!(token_entropy(&dist(&[24]), 5.0), 0.0);
        assert_eq!(token_entropy(&dist(&[12, 6]), 5.0), 1.0);
        assert_eq!(token_entropy(&dist(&[12, 5]), 5.0), 0.5);
        assert_eq!(n_av(&dist(&[12, 6])), 18);
        assert_eq!(n_av(&dist(&[])), 0);
        assert_eq!(token_entropy(&dist(&[12, 6]), 5.0f32), 1.0f32);
    }

    #[test]
    fn strict_threshold_boundary() {
        assert_eq!(dist(&[6]).surviving(5.0), 1);
        assert_eq!(dist(&[5]).surviving(5.0), 0);
        assert_eq!(token_entropy(&dist(&[5]), 5.0), 0.0);
        assert!(token_entropy(&dist(&[5]), 0.0) > 0.0);
    }

    #[test]
    fn term_peaks_at_nine_of_twenty_four() {
        let best = (1..=24)
            .max_by(|&a, &b| {
                entropy_term::<f64>(a, 24)
                    .partial_cmp(&entropy_term::<f64>(b, 24))
                    .unwrap()
            })
            .unwrap();
        assert_eq!(best, 9);
    }

    #[test]
    fn counts_are_sentence_level() {
        let kept: Vec<Subgroup> = (0..24)
            .map(|i| if i < 12 { sg(i, &[9, 4]) } else { sg(i, &[4]) })
            .collect();
        let d = replacement_distribution(&kept).unwrap();
        assert_eq!(d.count(TokenId(9)), 12);
        assert_eq!(d.probability::<f64>(TokenId(9)), 0.5);
        assert_eq!(d.probability_exact(TokenId(4)), Ratio::new(1, 1));
        assert_eq!(n_av(&d), 36);
    }

    #[test]
    fn distribution_rejects_mixed_pivots() {
        let mut other = sg(1, &[3]);
        other.pivot = TokenId(7);
        assert!(matches!(
            replacement_distribution(&[sg(0, &[3]), other]),
            Err(Error::PivotMismatch { .. })
        ));
    }

    #[test]
    fn smallest_drops_outliers_and_breaks_ties_by_sentence() {
        let mut sgs: Vec<Subgroup> = (0..24).map(|i| sg(100 - i, &[1, 2])).collect();
        sgs.extend((0..6).map(|i| sg(i, &(0..50).collect::<Vec<_>>())));
        let ens = SubgroupEnsemble::new(TokenId(0), sgs).unwrap();
        let kept = select_smallest(&ens, 24).unwrap();
        assert!(kept.iter().all(|s| s.size == 2));

        let equal: Vec<Subgroup> = (0..30).rev().map(|i| sg(i, &[1])).collect();
        let ens = SubgroupEnsemble::new(TokenId(0), equal).unwrap();
        let kept = select_smallest(&ens, 24).unwrap();
        assert_eq!(
            kept.iter().map(|s| s.sentence_id).collect::<Vec<_>>(),
            (0..24).collect::<Vec<_>>()
        );
        assert!(select_smallest(&ens, 31).is_err());
    }

    #[test]
    fn aggregate_arithmetic_series() {
        let records: Vec<_> = (1..=100).rev().map(|e| record(e as f64)).collect();
        let (s, s95) = aggregate(&records, 95).unwrap();
        assert_eq!((s, s95), (50.5, 48.0));
        assert!(aggregate(&records, 0).is_err());
        assert!(aggregate(&records, 101).is_err());
        let zeros: Vec<_> = (0..10).map(|_| record(0.0)).collect();
        assert_eq!(aggregate(&zeros, 5).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn histogram_bins_are_half_open() {
        let h = histogram(&[record(0.5), record(1.5), record(1.0)], 1.0).unwrap();
        assert_eq!(h.bins, BTreeMap::from([(0, 1), (1, 2)]));
        assert_eq!(h.to_csv(), "bin_start,count\n0,1\n1,2\n");
        assert!(histogram::<f64>(&[], 1.0).unwrap().bins.is_empty());
        assert!(histogram(&[record(1.0)], 0.0).is_err());
        assert!(histogram(&[record(1.0)], -1.0).is_err());
    }

    #[test]
    fn from_counts_validates_bounds() {
        assert!(ReplacementDistribution::from_counts(TokenId(0), 24, [(TokenId(1), 25)]).is_err());
        assert!(ReplacementDistribution::from_counts(TokenId(0), 24, [(TokenId(1), 0)]).is_err());
        assert!(ReplacementDistribution::from_counts(TokenId(0), 0, []).is_err());
    }
}
