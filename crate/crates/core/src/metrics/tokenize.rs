//! Evaluation tokenizers.
//!
//! * `13a`: the mteval-v13a rules used by standard BLEU tooling. Punctuation
//!   is split off, except periods and commas between digits and dashes not
//!   preceded by a digit.
//! * `zh`: every CJK ideograph and CJK/fullwidth punctuation mark becomes its
//!   own token, the rest goes through `13a`.
//! * `none`: whitespace splitting only.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::is_cjk;
use crate::lang::Lang;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Thirteen,
    Zh,
    Whitespace,
}

impl Scheme {
    /// Default scheme for text in `lang`.
    pub fn for_lang(lang: Lang) -> Self {
        match lang {
            Lang::En => Scheme::Thirteen,
            Lang::Yue => Scheme::Zh,
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            Scheme::Thirteen => "13a",
            Scheme::Zh => "zh",
            Scheme::Whitespace => "none",
        }
    }

    pub fn tokenize(self, text: &str) -> TokenizedSegment {
        let tokens = match self {
            Scheme::Whitespace => text.split_whitespace().map(str::to_string).collect(),
            Scheme::Thirteen => tokenize_13a(text),
            Scheme::Zh => {
                let mut spaced = String::with_capacity(text.len() * 2);
                for c in text.chars() {
                    if is_cjk(c) || is_cjk_punct(c) {
                        spaced.push(' ');
                        spaced.push(c);
                        spaced.push(' ');
                    } else {
                        spaced.push(c);
                    }
                }
                tokenize_13a(&spaced)
            }
        };
        TokenizedSegment { tokens, scheme: self }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "13a" => Ok(Scheme::Thirteen),
            "zh" => Ok(Scheme::Zh),
            "none" => Ok(Scheme::Whitespace),
            _ => Err(format!("unknown tokenization scheme `{s}` (13a, zh, none)")),
        }
    }
}

impl Serialize for Scheme {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.id())
    }
}

impl<'de> Deserialize<'de> for Scheme {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

fn is_cjk_punct(c: char) -> bool {
    matches!(c, '\u{3000}'..='\u{303F}' | '\u{FF00}'..='\u{FFEF}')
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedSegment {
    pub tokens: Vec<String>,
    pub scheme: Scheme,
}

impl TokenizedSegment {
    pub fn new<S: Into<String>>(tokens: impl IntoIterator<Item = S>, scheme: Scheme) -> Self {
        Self {
            tokens: tokens.into_iter().map(Into::into).collect(),
            scheme,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

fn rules() -> &'static [(Regex, &'static str); 4] {
    static RULES: OnceLock<[(Regex, &'static str); 4]> = OnceLock::new();
    RULES.get_or_init(|| {
        [
            (Regex::new(r"([\{-~\[-` -&\(-\+:-@/])").unwrap(), " $1 "),
            (Regex::new(r"([^0-9])([\.,])").unwrap(), "$1 $2 "),
            (Regex::new(r"([\.,])([^0-9])").unwrap(), " $1 $2"),
            (Regex::new(r"([0-9])(-)").unwrap(), "$1 $2 "),
        ]
    })
}

fn tokenize_13a(text: &str) -> Vec<String> {
    let mut s = text.replace("<skipped>", "").replace("-\n", "").replace('\n', " ");
    if s.contains('&') {
        s = s
            .replace("&quot;", "\"")
            .replace("&amp;", "&")
            .replace("&lt;", "<")
            .replace("&gt;", ">");
    }
    let mut s = format!(" {s} ");
    for (re, rep) in rules() {
        s = re.replace_all(&s, *rep).into_owned();
    }
    s.split_whitespace().map(str::to_string).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(scheme: Scheme, text: &str) -> Vec<String> {
        scheme.tokenize(text).tokens
    }

    #[test]
    fn thirteen_a_punctuation() {
        assert_eq!(toks(Scheme::Thirteen, "Hello, world!"), ["Hello", ",", "world", "!"]);
        assert_eq!(toks(Scheme::Thirteen, "It costs 1,000.50 dollars."), ["It", "costs", "1,000.50", "dollars", "."]);
        assert_eq!(toks(Scheme::Thirteen, "don't (really)"), ["don't", "(", "really", ")"]);
        assert_eq!(toks(Scheme::Thirteen, "state-of-the-art 3-4"), ["state-of-the-art", "3", "-", "4"]);
        assert_eq!(toks(Scheme::Thirteen, "a &amp; b"), ["a", "&", "b"]);
    }

    #[test]
    fn zh_splits_ideographs() {
        assert_eq!(toks(Scheme::Zh, "我哋去飲茶，OK?"), ["我", "哋", "去", "飲", "茶", "，", "OK", "?"]);
    }

    #[test]
    fn scheme_ids_round_trip() {
        for s in [Scheme::Thirteen, Scheme::Zh, Scheme::Whitespace] {
            assert_eq!(s.id().parse::<Scheme>().unwrap(), s);
        }
    }
}
