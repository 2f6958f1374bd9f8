//! The weighted-average model: closed-form interpolation of
//! maximum-likelihood estimates for every seen history suffix.
//!
//! Each suffix of the history that occurred more than once contributes its
//! conditional estimate with weight `2^|suffix| · log f(suffix)`; the
//! empty suffix contributes the unigram estimate with weight `log N`. The
//! weight sum normalises the average, so the result is a proper
//! distribution without any held-out training.

use super::prob_ml;
use crate::corpus::{NGramCounts, WordId};

/// Logarithm base for the weights. The prediction is invariant to the
/// choice because every weight scales by the same factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogBase {
    Binary,
    Natural,
}

impl LogBase {
    #[inline]
    fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Binary => x.log2(),
            LogBase::Natural => x.ln(),
        }
    }
}

/// `P(w | history)` under the weighted-average model with binary-log
/// weights.
pub fn weighted_average_prob(counts: &NGramCounts, history: &[WordId], w: WordId) -> f64 {
    weighted_average_prob_base(counts, history, w, LogBase::Binary)
}

/// Weighted-average probability with an explicit weight log base.
pub fn weighted_average_prob_base(
    counts: &NGramCounts,
    history: &[WordId],
    w: WordId,
    base: LogBase,
) -> f64 {
    let unigram = prob_ml(counts, &[], w).unwrap_or(0.0);
    let lambda0 = base.log(counts.n() as f64);
    if lambda0 <= 0.0 {
        // degenerate single-token corpus
        return unigram;
    }
    let mut numerator = lambda0 * unigram;
    let mut denominator = lambda0;
    let longest = history.len().min(counts.max_order() - 1);
    for len in 1..=longest {
        let suffix = &history[history.len() - len..];
        let freq = counts.gram(suffix);
        if freq <= 1 {
            // shorter suffixes dominate longer ones, so nothing further
            // up can be frequent either
            break;
        }
        // a segment seen twice or more necessarily has a continuation
        let p = match prob_ml(counts, suffix, w) {
            Some(p) => p,
            None => {
                debug_assert!(false, "suffix with f > 1 must have continuations");
                continue;
            }
        };
        let lambda = (1u64 << len) as f64 * base.log(freq as f64);
        numerator += lambda * p;
        denominator += lambda;
    }
    numerator / denominator
}
