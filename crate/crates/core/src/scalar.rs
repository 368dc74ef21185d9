//! Scalar abstraction for the floating-point statistics.
//!
//! Counts, `N_Av` and subgroup sizes stay in exact integers everywhere; only
//! probabilities, entropies and their means go through [`Scalar`], so the
//! same code runs in `f32` or `f64`. Exact probabilities are available as
//! [`num_rational::Ratio`] where bit-exactness matters.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point type the entropy and BLEU statistics are computed in.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossless-enough conversion from a count. Counts in this crate are far
    /// below 2^24, so this is exact for `f32` as well.
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable as float")
    }

    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 representable")
    }
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
}

/// Pairwise (cascade) summation. Error grows as O(log n) instead of O(n).
pub fn pairwise_sum<S: Scalar>(values: &[S]) -> S {
    const BLOCK: usize = 8;
    if values.len() <= BLOCK {
        return values.iter().fold(S::zero(), |acc, &v| acc + v);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Arithmetic mean via [`pairwise_sum`]; `None` for an empty slice.
pub fn mean<S: Scalar>(values: &[S]) -> Option<S> {
    if values.is_empty() {
        return None;
    }
    Some(pairwise_sum(values) / S::from_count(values.len() as u64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let v: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 500_500.0);
        let w: Vec<f32> = (1..=100).map(|x| x as f32).collect();
        assert_eq!(pairwise_sum(&w), 5050.0);
    }

    #[test]
    fn mean_of_empty_is_none() {
        assert_eq!(mean::<f64>(&[]), None);
        assert_eq!(mean(&[1.0f64, 2.0, 3.0]), Some(2.0));
    }

    #[test]
    fn pairwise_is_more_accurate_than_naive() {
        let v = vec![0.1f32; 1 << 16];
        let naive: f32 = v.iter().copied().fold(0.0, |a, b| a + b);
        let exact = 0.1f64 * (1 << 16) as f64;
        let pw = pairwise_sum(&v) as f64;
        assert!((pw - exact).abs() < (naive as f64 - exact).abs());
    }
}
