//! Corpus-level BLEU over pooled n-gram statistics.
//!
//! Clipped n-gram matches and hypothesis n-gram totals are summed over the
//! whole corpus before precisions are formed; the score is the geometric mean
//! of the precisions times the brevity penalty, scaled to 0..100. N-gram
//! orders for which the hypotheses contain no n-grams at all are left out of
//! the mean (effective order), so a corpus of short identical segments still
//! scores 100.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::tokenize::{Scheme, TokenizedSegment};
use super::MetricError;

/// What to do with an n-gram order that has hypothesis n-grams but no matches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase", deny_unknown_fields)]
pub enum Smoothing {
    /// Leave the precision at zero (score becomes 0).
    None,
    /// Replace the zero match count by `epsilon`.
    Floor { epsilon: f64 },
    /// The k-th zero precision becomes `1 / (2^k * total)`.
    Exp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BleuConfig {
    pub max_n: usize,
    pub smoothing: Smoothing,
}

impl Default for BleuConfig {
    fn default() -> Self {
        Self {
            max_n: 4,
            smoothing: Smoothing::Floor { epsilon: 0.1 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuScore {
    pub score: f64,
    /// Per-order precisions in [0, 1], after smoothing.
    pub precisions: Vec<f64>,
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
    pub matches: Vec<u64>,
    pub totals: Vec<u64>,
    pub tokenization: Scheme,
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

pub fn corpus_bleu(hyps: &[TokenizedSegment], refs: &[TokenizedSegment], cfg: &BleuConfig) -> Result<BleuScore, MetricError> {
    if hyps.len() != refs.len() {
        return Err(MetricError::LengthMismatch {
            hyps: hyps.len(),
            refs: refs.len(),
        });
    }
    let scheme = hyps.first().ok_or(MetricError::EmptyCorpus)?.scheme;
    if let Some(seg) = hyps.iter().chain(refs).find(|s| s.scheme != scheme) {
        return Err(MetricError::SchemeMismatch {
            expected: scheme,
            found: seg.scheme,
        });
    }
    if cfg.max_n == 0 {
        return Err(MetricError::InvalidParams("max_n must be at least 1".into()));
    }

    let max_n = cfg.max_n;
    let mut matches = vec![0u64; max_n];
    let mut totals = vec![0u64; max_n];
    let (mut hyp_len, mut ref_len) = (0usize, 0usize);
    for (h, r) in hyps.iter().zip(refs) {
        hyp_len += h.len();
        ref_len += r.len();
        for n in 1..=max_n {
            let ref_counts = ngram_counts(&r.tokens, n);
            for (gram, count) in ngram_counts(&h.tokens, n) {
                matches[n - 1] += count.min(ref_counts.get(gram).copied().unwrap_or(0));
                totals[n - 1] += count;
            }
        }
    }
    Ok(score_from_stats(matches, totals, hyp_len, ref_len, cfg.smoothing, scheme))
}

pub(crate) fn score_from_stats(
    matches: Vec<u64>,
    totals: Vec<u64>,
    hyp_len: usize,
    ref_len: usize,
    smoothing: Smoothing,
    tokenization: Scheme,
) -> BleuScore {
    let mut precisions = vec![0.0; totals.len()];
    let mut zero_orders = 0;
    let mut effective_order = 0;
    for n in 0..totals.len() {
        if totals[n] == 0 {
            break;
        }
        effective_order = n + 1;
        let total = totals[n] as f64;
        precisions[n] = if matches[n] > 0 {
            matches[n] as f64 / total
        } else {
            match smoothing {
                Smoothing::None => 0.0,
                Smoothing::Floor { epsilon } => epsilon / total,
                Smoothing::Exp => {
                    zero_orders += 1;
                    1.0 / (2f64.powi(zero_orders) * total)
                }
            }
        };
    }
    let brevity_penalty = if hyp_len == 0 {
        0.0
    } else if hyp_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    let used = &precisions[..effective_order];
    let score = if used.is_empty() || used.iter().any(|&p| p <= 0.0) {
        0.0
    } else {
        let log_mean = used.iter().map(|p| p.ln()).sum::<f64>() / effective_order as f64;
        100.0 * brevity_penalty * log_mean.exp()
    };
    BleuScore {
        score,
        precisions,
        brevity_penalty,
        hyp_len,
        ref_len,
        matches,
        totals,
        tokenization,
    }
}

/// BLEU of a single segment pair.
pub fn sentence_bleu(hyp: &TokenizedSegment, reference: &TokenizedSegment, cfg: &BleuConfig) -> Result<BleuScore, MetricError> {
    corpus_bleu(std::slice::from_ref(hyp), std::slice::from_ref(reference), cfg)
}

/// Tokenizes raw strings with `scheme` and scores them.
pub fn corpus_bleu_text(hyps: &[String], refs: &[String], scheme: Scheme, cfg: &BleuConfig) -> Result<BleuScore, MetricError> {
    let tok = |v: &[String]| v.iter().map(|s| scheme.tokenize(s)).collect::<Vec<_>>();
    corpus_bleu(&tok(hyps), &tok(refs), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(text: &str) -> TokenizedSegment {
        Scheme::Whitespace.tokenize(text)
    }

    #[test]
    fn identity_is_exactly_100() {
        let h = vec![seg("the cat sat on the mat"), seg("a b")];
        assert_eq!(corpus_bleu(&h, &h, &BleuConfig::default()).unwrap().score, 100.0);
    }

    #[test]
    fn repeated_token_against_short_reference() {
        // p1 = min(4, 1)/4; orders 2..4 have 3, 2, 1 n-grams and no matches.
        let h = [seg("the the the the")];
        let r = [seg("the cat")];
        let floor = corpus_bleu(&h, &r, &BleuConfig::default()).unwrap();
        assert_eq!(floor.matches, vec![1, 0, 0, 0]);
        assert_eq!(floor.totals, vec![4, 3, 2, 1]);
        assert_eq!(floor.brevity_penalty, 1.0);
        assert!((floor.score - 8.034284189446518).abs() < 1e-12, "{}", floor.score);
        let exp = corpus_bleu(
            &h,
            &r,
            &BleuConfig {
                smoothing: Smoothing::Exp,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((exp.score - 15.97357760615681).abs() < 1e-12);
        let none = corpus_bleu(
            &h,
            &r,
            &BleuConfig {
                smoothing: Smoothing::None,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(none.score, 0.0);
    }

    #[test]
    fn brevity_penalty_applies_to_short_output() {
        let s = corpus_bleu(&[seg("a b")], &[seg("a b c d")], &BleuConfig::default()).unwrap();
        assert!((s.brevity_penalty - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        let cfg = BleuConfig::default();
        assert!(matches!(corpus_bleu(&[seg("a")], &[], &cfg), Err(MetricError::LengthMismatch { .. })));
        assert!(matches!(corpus_bleu(&[], &[], &cfg), Err(MetricError::EmptyCorpus)));
        let zh = Scheme::Zh.tokenize("甲");
        assert!(matches!(corpus_bleu(&[seg("a")], &[zh], &cfg), Err(MetricError::SchemeMismatch { .. })));
    }

    #[test]
    fn empty_hypothesis_contributes_zero_counts() {
        let s = corpus_bleu(&[seg(""), seg("a b c d")], &[seg("x y"), seg("a b c d")], &BleuConfig::default()).unwrap();
        assert_eq!(s.totals, vec![4, 3, 2, 1]);
        assert_eq!(s.ref_len, 6);
        let none = corpus_bleu(&[seg("")], &[seg("x")], &BleuConfig::default()).unwrap();
        assert_eq!(none.score, 0.0);
    }
}
