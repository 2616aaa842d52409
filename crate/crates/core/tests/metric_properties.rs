//! Property checks for the lexical metrics against independent oracles.

use lowmt_core::metrics::{corpus_bleu, hlepor, sentence_bleu, BleuConfig, HleporParams, Scheme, Smoothing, TokenizedSegment};
use proptest::prelude::*;

fn seg(tokens: &[u8]) -> TokenizedSegment {
    TokenizedSegment::new(tokens.iter().map(|t| format!("w{t}")), Scheme::Whitespace)
}

/// Counts occurrences of `gram` in `tokens` by scanning every offset.
fn occurrences(tokens: &[u8], gram: &[u8]) -> u64 {
    if gram.len() > tokens.len() {
        return 0;
    }
    (0..=tokens.len() - gram.len()).filter(|&i| &tokens[i..i + gram.len()] == gram).count() as u64
}

/// Corpus BLEU from first principles: distinct hypothesis n-grams are found
/// by deduplicating a list, and each is clipped by its reference count.
fn oracle_bleu(corpus: &[(Vec<u8>, Vec<u8>)], max_n: usize, smoothing: Smoothing) -> f64 {
    let mut matches = vec![0u64; max_n];
    let mut totals = vec![0u64; max_n];
    let (mut c, mut r) = (0usize, 0usize);
    for (h, rf) in corpus {
        c += h.len();
        r += rf.len();
        for n in 1..=max_n {
            if h.len() < n {
                continue;
            }
            let mut distinct: Vec<&[u8]> = Vec::new();
            for i in 0..=h.len() - n {
                if !distinct.contains(&&h[i..i + n]) {
                    distinct.push(&h[i..i + n]);
                }
            }
            for g in distinct {
                let in_hyp = occurrences(h, g);
                matches[n - 1] += in_hyp.min(occurrences(rf, g));
                totals[n - 1] += in_hyp;
            }
        }
    }
    let orders: Vec<usize> = (0..max_n).filter(|&n| totals[n] > 0).collect();
    if orders.is_empty() || c == 0 {
        return 0.0;
    }
    let mut k = 0;
    let mut log_sum = 0.0;
    for &n in &orders {
        let p = if matches[n] > 0 {
            matches[n] as f64 / totals[n] as f64
        } else {
            match smoothing {
                Smoothing::None => return 0.0,
                Smoothing::Floor { epsilon } => epsilon / totals[n] as f64,
                Smoothing::Exp => {
                    k += 1;
                    1.0 / (2f64.powi(k) * totals[n] as f64)
                }
            }
        };
        log_sum += p.ln();
    }
    let bp = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };
    100.0 * bp * (log_sum / orders.len() as f64).exp()
}

fn bleu(corpus: &[(Vec<u8>, Vec<u8>)], cfg: &BleuConfig) -> f64 {
    let hyps: Vec<_> = corpus.iter().map(|(h, _)| seg(h)).collect();
    let refs: Vec<_> = corpus.iter().map(|(_, r)| seg(r)).collect();
    corpus_bleu(&hyps, &refs, cfg).unwrap().score
}

fn smoothing() -> impl Strategy<Value = Smoothing> {
    prop_oneof![Just(Smoothing::None), Just(Smoothing::Floor { epsilon: 0.1 }), Just(Smoothing::Exp)]
}

fn corpus(vocab: u8) -> impl Strategy<Value = Vec<(Vec<u8>, Vec<u8>)>> {
    let sent = prop::collection::vec(0..vocab, 0..14);
    prop::collection::vec((sent.clone(), sent), 1..=10)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn bleu_matches_oracle(c in corpus(20), s in smoothing(), max_n in 1usize..=4) {
        let cfg = BleuConfig { max_n, smoothing: s };
        let (got, want) = (bleu(&c, &cfg), oracle_bleu(&c, max_n, s));
        prop_assert!(close(got, want), "got {got}, oracle {want}");
    }

    #[test]
    fn bleu_identity_is_100(c in corpus(20)) {
        let ident: Vec<_> = c.into_iter().map(|(h, _)| (h.clone(), h)).collect();
        prop_assume!(ident.iter().any(|(h, _)| !h.is_empty()));
        prop_assert_eq!(bleu(&ident, &BleuConfig::default()), 100.0);
    }

    #[test]
    fn bleu_ignores_segment_order(c in corpus(6), seed in any::<u64>()) {
        let mut shuffled = c.clone();
        lowmt_core::rng::SplitMix64::new(seed).shuffle(&mut shuffled);
        prop_assert!(close(bleu(&c, &BleuConfig::default()), bleu(&shuffled, &BleuConfig::default())));
    }

    #[test]
    fn bleu_in_range(c in corpus(5), s in smoothing()) {
        let v = bleu(&c, &BleuConfig { max_n: 4, smoothing: s });
        prop_assert!((0.0..=100.0).contains(&v));
    }
}

#[test]
fn corpus_bleu_pools_counts_instead_of_averaging() {
    let cfg = BleuConfig::default();
    let c = vec![(vec![1, 2, 3, 4], vec![1, 2, 3, 4]), (vec![5, 6], vec![7, 8, 9, 10])];
    let pooled = bleu(&c, &cfg);
    let mean = c
        .iter()
        .map(|(h, r)| sentence_bleu(&seg(h), &seg(r), &cfg).unwrap().score)
        .sum::<f64>()
        / 2.0;
    assert!(close(pooled, oracle_bleu(&c, 4, cfg.smoothing)));
    assert!((pooled - mean).abs() > 1.0, "pooled {pooled} vs mean {mean}");
}

fn hl(h: &[u8], r: &[u8]) -> lowmt_core::metrics::HleporScore {
    hlepor(&seg(h), &seg(r), &HleporParams::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn hlepor_permutation_never_beats_identity(r in prop::collection::vec(0u8..8, 1..16), seed in any::<u64>()) {
        let mut h = r.clone();
        lowmt_core::rng::SplitMix64::new(seed).shuffle(&mut h);
        let (p, id) = (hl(&h, &r), hl(&r, &r));
        prop_assert_eq!(id.score, 1.0);
        prop_assert!(p.score <= id.score);
        prop_assert_eq!(p.lp, id.lp);
        prop_assert_eq!(p.hpr, id.hpr);
    }

    #[test]
    fn hlepor_invariant_under_relabeling(h in prop::collection::vec(0u8..8, 1..12), r in prop::collection::vec(0u8..8, 1..12), shift in 1u8..50) {
        let relabel = |v: &[u8]| v.iter().map(|t| (t + shift) % 64).collect::<Vec<_>>();
        prop_assert_eq!(hl(&h, &r), hl(&relabel(&h), &relabel(&r)));
    }

    #[test]
    fn hlepor_bounded(h in prop::collection::vec(0u8..6, 1..12), r in prop::collection::vec(0u8..6, 1..12)) {
        let s = hl(&h, &r);
        prop_assert!((0.0..=1.0).contains(&s.score));
        prop_assert!(s.matched <= h.len().min(r.len()));
    }
}

#[test]
fn hlepor_disjoint_is_zero() {
    assert_eq!(hl(&[1, 2, 3], &[4, 5]).score, 0.0);
}
