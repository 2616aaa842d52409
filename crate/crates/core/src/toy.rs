//! Seeded toy language for desk-scale pipeline runs.
//!
//! Cantonese-side words are 2-3 characters from the cipher alphabet drawn
//! with Zipfian frequencies; the English side is the cipher image of each
//! word. Sentences have 5-8 words and therefore at least 10 CJK characters,
//! so they survive the default cleaning threshold.

use std::collections::HashSet;

use crate::backends::{ToyCipher, CJK_ALPHABET};
use crate::corpus::{Corpus, CorpusMeta, LogEntry, MonoCorpus, ParallelCorpus, Sentence, SentencePair};
use crate::lang::{Direction, Lang};
use crate::rng::SplitMix64;

pub const DEFAULT_VOCAB: usize = 300;

#[derive(Debug, Clone)]
pub struct ToyLanguage {
    seed: u64,
    cipher: ToyCipher,
    vocab: Vec<String>,
    cdf: Vec<f64>,
}

impl ToyLanguage {
    pub fn new(seed: u64, vocab_size: usize) -> Self {
        assert!((1..=5000).contains(&vocab_size), "vocabulary size must be in 1..=5000");
        let mut rng = SplitMix64::derive(seed, 0);
        let mut seen = HashSet::new();
        let mut vocab = Vec::with_capacity(vocab_size);
        while vocab.len() < vocab_size {
            let len = 2 + rng.below(2) as usize;
            let word: String = (0..len).map(|_| CJK_ALPHABET[rng.below(26) as usize]).collect();
            if seen.insert(word.clone()) {
                vocab.push(word);
            }
        }
        let weights: Vec<f64> = (1..=vocab_size).map(|r| 1.0 / r as f64).collect();
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let cdf = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        Self {
            seed,
            cipher: ToyCipher::new(seed),
            vocab,
            cdf,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn cipher(&self) -> &ToyCipher {
        &self.cipher
    }

    /// Words by descending frequency.
    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    fn word(&self, rng: &mut SplitMix64) -> &str {
        let u = rng.next_f64();
        let i = self.cdf.partition_point(|&c| c < u).min(self.vocab.len() - 1);
        &self.vocab[i]
    }

    pub fn sentence(&self, rng: &mut SplitMix64) -> String {
        let n = 5 + rng.below(4) as usize;
        (0..n).map(|_| self.word(rng)).collect::<Vec<_>>().join(" ")
    }

    fn log(name: &str, detail: String) -> CorpusMeta {
        CorpusMeta {
            name: name.into(),
            seed: None,
            log: vec![LogEntry {
                corpus: name.into(),
                op: "generate-toy".into(),
                detail,
            }],
        }
    }

    /// `n` real yue-en pairs whose targets are exact cipher images.
    pub fn parallel(&self, name: &str, n: usize, stream: u64) -> ParallelCorpus {
        let mut rng = SplitMix64::derive(self.seed, 1 + 2 * stream);
        let items = (0..n)
            .map(|i| {
                let src = self.sentence(&mut rng);
                let tgt = self.cipher.encode(&src);
                SentencePair::real(format!("{name}-{}", i + 1), src, tgt, Direction::YUE_EN)
            })
            .collect();
        let detail = format!("pairs={n} language_seed={} stream={stream}", self.seed);
        Corpus::with_meta(Self::log(name, detail), items).expect("generated ids are unique")
    }

    /// `n` clean Cantonese-side sentences.
    pub fn mono(&self, name: &str, n: usize, stream: u64) -> MonoCorpus {
        let mut rng = SplitMix64::derive(self.seed, 2 + 2 * stream);
        let items = (0..n)
            .map(|i| Sentence {
                id: format!("{name}-{}", i + 1),
                text: self.sentence(&mut rng),
                lang: Lang::Yue,
            })
            .collect();
        let detail = format!("sentences={n} language_seed={} stream={stream}", self.seed);
        Corpus::with_meta(Self::log(name, detail), items).expect("generated ids are unique")
    }

    /// A forum-style text dump holding exactly `n` valid sentences. About a
    /// third carry markup, links, handles, user-id prefixes or quote headers,
    /// and roughly one extra noise line (removed-post placeholder or a
    /// too-short fragment) is interleaved per ten sentences.
    pub fn raw_dump(&self, n: usize, stream: u64) -> Vec<String> {
        let mut rng = SplitMix64::derive(self.seed, 1000 + stream);
        let mut lines = Vec::with_capacity(n + n / 8);
        for _ in 0..n {
            match rng.below(20) {
                0 => lines.push("此回覆已被刪除".to_string()),
                1 => lines.push(format!("{} {}", self.word(&mut rng), self.word(&mut rng))),
                _ => {}
            }
            let mut words: Vec<String> = self.sentence(&mut rng).split(' ').map(str::to_string).collect();
            if rng.below(3) == 0 {
                let at = rng.below(words.len() as u64) as usize;
                match rng.below(6) {
                    0 => words[at] = format!("<b>{}</b>", words[at]),
                    1 => words.insert(at, format!("https://lihkg.com/thread/{}/page/1", rng.below(4_000_000))),
                    2 => words.insert(at, "#like#".into()),
                    3 => words.insert(0, format!("ID{}:", rng.below(100_000))),
                    4 => words.insert(0, format!("@user_{}", rng.below(10_000))),
                    _ => words.insert(0, format!("引用 #{} 樓主:", 1 + rng.below(999))),
                }
            }
            lines.push(words.join(" "));
        }
        lines
    }
}
