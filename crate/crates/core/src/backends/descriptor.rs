//! Model identity: base model type, training category and direction.
//!
//! Training categories follow the naming used in score reports:
//!
//! ```text
//! category := "baseline" | "ft" | "ft-syn-" ratio [ "-" base ]
//! ratio    := "h:h" | "1:" digits | "custom"
//! base     := "opus" | "nllb" | "mbart" | "toy"
//! ```
//!
//! The optional trailing base names the model that generated the synthetic
//! data when it differs from the model being fine-tuned (a model switch).

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::lang::Direction;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GrammarError {
    #[error("unknown model type `{0}` (allowed: opus, nllb, mbart, toy)")]
    UnknownBase(String),
    #[error("invalid training category `{0}`")]
    Category(String),
    #[error("invalid model key `{0}` (expected <type>/<category>/<src>-<tgt>)")]
    Key(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BaseModel {
    Opus,
    Nllb,
    Mbart,
    Toy,
}

impl BaseModel {
    pub const ALL: [BaseModel; 4] = [BaseModel::Opus, BaseModel::Nllb, BaseModel::Mbart, BaseModel::Toy];

    pub fn as_str(self) -> &'static str {
        match self {
            BaseModel::Opus => "opus",
            BaseModel::Nllb => "nllb",
            BaseModel::Mbart => "mbart",
            BaseModel::Toy => "toy",
        }
    }

    /// Pretrained checkpoint this base type stands for.
    pub fn checkpoint(self) -> &'static str {
        match self {
            BaseModel::Opus => "Helsinki-NLP/opus-mt-zh-en",
            BaseModel::Nllb => "facebook/nllb-200-distilled-600M",
            BaseModel::Mbart => "facebook/mbart-large-50-many-to-many-mmt",
            BaseModel::Toy => "toy",
        }
    }
}

impl fmt::Display for BaseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BaseModel {
    type Err = GrammarError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BaseModel::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| GrammarError::UnknownBase(s.to_string()))
    }
}

/// Named real:synthetic mixture recipes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MixName {
    /// Half of the real data plus an equal number of synthetic pairs.
    HalfHalf,
    /// All real data plus `k` times as many synthetic pairs.
    OneTo(u32),
    Custom,
}

impl fmt::Display for MixName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MixName::HalfHalf => f.write_str("h:h"),
            MixName::OneTo(k) => write!(f, "1:{k}"),
            MixName::Custom => f.write_str("custom"),
        }
    }
}

impl FromStr for MixName {
    type Err = GrammarError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "h:h" => Ok(MixName::HalfHalf),
            "custom" => Ok(MixName::Custom),
            _ => s
                .strip_prefix("1:")
                .filter(|k| !k.is_empty() && k.bytes().all(|b| b.is_ascii_digit()) && (k == &"0" || !k.starts_with('0')))
                .and_then(|k| k.parse().ok())
                .map(MixName::OneTo)
                .ok_or_else(|| GrammarError::Category(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TrainingCategory {
    /// Pretrained model deployed without fine-tuning.
    Baseline,
    /// Fine-tuned on real bilingual data.
    Ft,
    /// Fine-tuned on real plus synthetic data.
    FtSyn { ratio: MixName, generator: Option<BaseModel> },
}

impl fmt::Display for TrainingCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainingCategory::Baseline => f.write_str("baseline"),
            TrainingCategory::Ft => f.write_str("ft"),
            TrainingCategory::FtSyn { ratio, generator: None } => write!(f, "ft-syn-{ratio}"),
            TrainingCategory::FtSyn { ratio, generator: Some(g) } => write!(f, "ft-syn-{ratio}-{g}"),
        }
    }
}

impl FromStr for TrainingCategory {
    type Err = GrammarError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GrammarError::Category(s.to_string());
        match s {
            "baseline" => Ok(TrainingCategory::Baseline),
            "ft" => Ok(TrainingCategory::Ft),
            _ => {
                let rest = s.strip_prefix("ft-syn-").ok_or_else(bad)?;
                let (ratio, generator) = match rest.split_once('-') {
                    Some((r, g)) => (r, Some(g.parse().map_err(|_| bad())?)),
                    None => (rest, None),
                };
                Ok(TrainingCategory::FtSyn {
                    ratio: ratio.parse().map_err(|_| bad())?,
                    generator,
                })
            }
        }
    }
}

macro_rules! serde_via_str {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

serde_via_str!(BaseModel);
serde_via_str!(MixName);
serde_via_str!(TrainingCategory);
serde_via_str!(ModelKey);

/// The identity of a servable model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModelKey {
    pub base: BaseModel,
    pub category: TrainingCategory,
    pub direction: Direction,
}

impl ModelKey {
    pub fn new(base: BaseModel, category: TrainingCategory, direction: Direction) -> Self {
        Self { base, category, direction }
    }

    /// Short system label as used in score tables, e.g. `nllb-syn-1:1-mbart`.
    pub fn system_label(&self) -> String {
        let cat = self.category.to_string();
        let short = cat.strip_prefix("ft-").unwrap_or(&cat);
        format!("{}-{short}", self.base)
    }
}

impl fmt::Display for ModelKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.base, self.category, self.direction)
    }
}

impl FromStr for ModelKey {
    type Err = GrammarError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GrammarError::Key(s.to_string());
        let mut parts = s.split('/');
        let (Some(base), Some(cat), Some(dir), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
            return Err(bad());
        };
        Ok(ModelKey {
            base: base.parse()?,
            category: cat.parse()?,
            direction: dir.parse().map_err(|_| bad())?,
        })
    }
}

/// How a model's artifact is executed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Engine {
    /// Returns every input unchanged; stands in for an untrained model.
    Copy,
    /// Seeded character-substitution cipher with exact inverse.
    Cipher { seed: u64 },
    /// Token lookup table stored at the descriptor path.
    Table,
    /// External inference process speaking the JSONL adapter protocol.
    Command { program: String, #[serde(default)] args: Vec<String> },
    /// External inference service speaking the JSONL adapter protocol.
    Http { url: String },
}

/// A registered model: identity, artifact location and display metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDescriptor {
    pub model_type: BaseModel,
    pub training_category: TrainingCategory,
    pub direction: Direction,
    #[serde(default)]
    pub path: PathBuf,
    pub display_name: String,
    pub engine: Engine,
}

impl ModelDescriptor {
    pub fn new(key: ModelKey, engine: Engine) -> Self {
        Self {
            model_type: key.base,
            training_category: key.category,
            direction: key.direction,
            path: PathBuf::new(),
            display_name: key.system_label(),
            engine,
        }
    }

    pub fn key(&self) -> ModelKey {
        ModelKey::new(self.model_type, self.training_category, self.direction)
    }
}
