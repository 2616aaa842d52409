//! Language tags and translation directions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lang {
    /// Cantonese.
    Yue,
    /// English.
    En,
}

impl Lang {
    pub const ALL: [Lang; 2] = [Lang::Yue, Lang::En];

    pub fn as_str(self) -> &'static str {
        match self {
            Lang::Yue => "yue",
            Lang::En => "en",
        }
    }

    pub fn other(self) -> Lang {
        match self {
            Lang::Yue => Lang::En,
            Lang::En => Lang::Yue,
        }
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown language tag `{0}` (expected yue or en)")]
pub struct UnknownLang(pub String);

impl FromStr for Lang {
    type Err = UnknownLang;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "yue" => Ok(Lang::Yue),
            "en" => Ok(Lang::En),
            other => Err(UnknownLang(other.to_string())),
        }
    }
}

/// Source and target language of a corpus or model. Always two distinct tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Direction {
    pub source: Lang,
    pub target: Lang,
}

impl Direction {
    pub const YUE_EN: Direction = Direction { source: Lang::Yue, target: Lang::En };
    pub const EN_YUE: Direction = Direction { source: Lang::En, target: Lang::Yue };

    pub fn new(source: Lang, target: Lang) -> Option<Self> {
        (source != target).then_some(Self { source, target })
    }

    pub fn reversed(self) -> Self {
        Self { source: self.target, target: self.source }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.source, self.target)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid direction `{0}` (expected e.g. yue-en)")]
pub struct InvalidDirection(pub String);

impl FromStr for Direction {
    type Err = InvalidDirection;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || InvalidDirection(s.to_string());
        let (src, tgt) = s.split_once('-').ok_or_else(err)?;
        let source = src.parse().map_err(|_| err())?;
        let target = tgt.parse().map_err(|_| err())?;
        Direction::new(source, target).ok_or_else(err)
    }
}

impl Serialize for Direction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Direction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
