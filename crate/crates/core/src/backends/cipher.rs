//! Seeded character-substitution cipher between a 26-ideograph alphabet and
//! the Latin letters `a`..`z`.
//!
//! The cipher is the ground-truth "translator" of the toy language: a
//! Cantonese-side character maps to exactly one English-side letter and back.
//! Characters outside both alphabets pass through unchanged.

use std::collections::HashMap;

use crate::lang::{Direction, Lang};
use crate::rng::SplitMix64;

/// Source-side alphabet: the ten heavenly stems, twelve earthly branches
/// and 天地人和.
pub const CJK_ALPHABET: [char; 26] = [
    '甲', '乙', '丙', '丁', '戊', '己', '庚', '辛', '壬', '癸', '子', '丑', '寅', '卯', '辰', '巳', '午', '未', '申', '酉', '戌',
    '亥', '天', '地', '人', '和',
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToyCipher {
    seed: u64,
    to_latin: HashMap<char, char>,
    to_cjk: HashMap<char, char>,
}

impl ToyCipher {
    pub fn new(seed: u64) -> Self {
        let mut letters: Vec<char> = ('a'..='z').collect();
        SplitMix64::new(seed).shuffle(&mut letters);
        let to_latin: HashMap<char, char> = CJK_ALPHABET.iter().copied().zip(letters).collect();
        let to_cjk = to_latin.iter().map(|(&k, &v)| (v, k)).collect();
        Self { seed, to_latin, to_cjk }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Cantonese-side text to English-side text.
    pub fn encode(&self, text: &str) -> String {
        text.chars().map(|c| *self.to_latin.get(&c).unwrap_or(&c)).collect()
    }

    /// English-side text to Cantonese-side text.
    pub fn decode(&self, text: &str) -> String {
        text.chars().map(|c| *self.to_cjk.get(&c).unwrap_or(&c)).collect()
    }

    pub fn apply(&self, text: &str, direction: Direction) -> String {
        match direction.source {
            Lang::Yue => self.encode(text),
            Lang::En => self.decode(text),
        }
    }
}
