//! Synthetic data generation and real/synthetic mixing.

mod backtranslate;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::backends::{BackendError, BaseModel, MixName, ModelKey, Registry, TrainingCategory};
use crate::corpus::{Corpus, CorpusError, CorpusMeta, LogEntry, MonoCorpus, Origin, ParallelCorpus, SentencePair};
use crate::lang::{Direction, Lang};
use crate::rng::SplitMix64;

pub use backtranslate::{backtranslate, BacktranslateOptions, ResumeToken};

#[derive(Debug, thiserror::Error)]
pub enum AugmentError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("invalid mix spec: {0}")]
    InvalidSpec(String),
    #[error("mix needs at least one real pair")]
    ZeroReal,
    #[error("need {required} synthetic pairs but only {available} are available")]
    InsufficientSynthetic { required: usize, available: usize },
    #[error("real data translates {real}, synthetic data translates {synthetic}")]
    DirectionMismatch { real: Direction, synthetic: Direction },
    #[error("monolingual corpus is {mono} but model translates {model}")]
    LangMismatch { mono: Lang, model: Direction },
    #[error("not a synthetic corpus: {0}")]
    Provenance(String),
    #[error("generator {0} is not registered; train and register it first")]
    MissingGenerator(ModelKey),
    #[error("generator {0} is not a fine-tuned (ft) model")]
    NotFineTuned(ModelKey),
    #[error("back-translation needs at least one worker and a batch size of at least 1")]
    NoWorkers,
    #[error("workers serve different models: {0} and {1}")]
    MixedWorkers(ModelKey, ModelKey),
    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: String, reason: String },
    #[error("{source}{}", resume_hint(.resume))]
    Backend {
        #[source]
        source: BackendError,
        resume: Option<Box<ResumeToken>>,
    },
}

fn resume_hint(resume: &Option<Box<ResumeToken>>) -> String {
    match resume {
        Some(t) => format!(
            "; {} of {} sentences saved to {}, rerun to resume at batch {}",
            t.completed, t.mono_len, t.partial.display(), t.next_batch
        ),
        None => String::new(),
    }
}

/// Real/synthetic mixing recipe.
///
/// The selected real count is `floor(real_fraction * |real|)`; the synthetic
/// count is `floor(synthetic_multiple * selected_real)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixSpec {
    pub name: MixName,
    #[serde(with = "ratio_str")]
    pub real_fraction: Ratio<u64>,
    #[serde(with = "ratio_str")]
    pub synthetic_multiple: Ratio<u64>,
    pub seed: u64,
}

mod ratio_str {
    use num_rational::Ratio;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Ratio<u64>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(r)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Ratio<u64>, D::Error> {
        let text = String::deserialize(d)?;
        super::parse_ratio(&text).map_err(serde::de::Error::custom)
    }
}

fn parse_ratio(text: &str) -> Result<Ratio<u64>, String> {
    let (n, d) = text.split_once('/').unwrap_or((text, "1"));
    let n: u64 = n.trim().parse().map_err(|_| format!("bad rational `{text}`"))?;
    let d: u64 = d.trim().parse().map_err(|_| format!("bad rational `{text}`"))?;
    if d == 0 {
        return Err(format!("zero denominator in `{text}`"));
    }
    Ok(Ratio::new(n, d))
}

impl MixSpec {
    /// Binds a named recipe: `1:k` keeps all real data plus `k` times as
    /// many synthetic pairs; `h:h` keeps half the real data plus the same
    /// number of synthetic pairs.
    pub fn named(name: MixName, seed: u64) -> Result<Self, AugmentError> {
        let (real_fraction, synthetic_multiple) = match name {
            MixName::HalfHalf => (Ratio::new(1, 2), Ratio::from_integer(1)),
            MixName::OneTo(k) => (Ratio::from_integer(1), Ratio::from_integer(u64::from(k))),
            MixName::Custom => return Err(AugmentError::InvalidSpec("custom specs need explicit fractions".into())),
        };
        Ok(Self {
            name,
            real_fraction,
            synthetic_multiple,
            seed,
        })
    }

    pub fn custom(real_fraction: Ratio<u64>, synthetic_multiple: Ratio<u64>, seed: u64) -> Result<Self, AugmentError> {
        let spec = Self {
            name: MixName::Custom,
            real_fraction,
            synthetic_multiple,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        if self.real_fraction == Ratio::from_integer(0) || self.real_fraction > Ratio::from_integer(1) {
            return Err(AugmentError::InvalidSpec(format!("real_fraction {} is outside (0, 1]", self.real_fraction)));
        }
        if self.name != MixName::Custom {
            let bound = Self::named(self.name, self.seed)?;
            if (bound.real_fraction, bound.synthetic_multiple) != (self.real_fraction, self.synthetic_multiple) {
                return Err(AugmentError::InvalidSpec(format!(
                    "{} requires real_fraction={} synthetic_multiple={}",
                    self.name, bound.real_fraction, bound.synthetic_multiple
                )));
            }
        }
        Ok(())
    }

    /// `(selected real, selected synthetic)` for a real corpus of `real_len`.
    pub fn counts(&self, real_len: usize) -> (usize, usize) {
        let floor = |r: Ratio<u64>, n: usize| (u128::from(*r.numer()) * n as u128 / u128::from(*r.denom())) as usize;
        let real = floor(self.real_fraction, real_len);
        (real, floor(self.synthetic_multiple, real))
    }
}

impl fmt::Display for MixSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (real_fraction={} synthetic_multiple={} seed={})",
            self.name, self.real_fraction, self.synthetic_multiple, self.seed
        )
    }
}

impl FromStr for MixSpec {
    type Err = AugmentError;

    /// Accepts a named recipe (`1:3`, `h:h`) or `custom:<real_fraction>:<multiple>`;
    /// the seed defaults to 0.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(rest) = s.strip_prefix("custom:") {
            let (r, m) = rest
                .split_once(':')
                .ok_or_else(|| AugmentError::InvalidSpec(format!("expected custom:<fraction>:<multiple>, got `{s}`")))?;
            return Self::custom(
                parse_ratio(r).map_err(AugmentError::InvalidSpec)?,
                parse_ratio(m).map_err(AugmentError::InvalidSpec)?,
                0,
            );
        }
        let name: MixName = s.parse().map_err(|e: crate::backends::GrammarError| AugmentError::InvalidSpec(e.to_string()))?;
        Self::named(name, 0)
    }
}

/// Parallel corpus whose pairs were all produced by one generator model
/// from the monolingual corpus named `source_mono`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    corpus: ParallelCorpus,
    generator: String,
    source_mono: String,
}

impl SyntheticCorpus {
    pub fn new(corpus: ParallelCorpus, generator: impl Into<String>, source_mono: impl Into<String>) -> Result<Self, AugmentError> {
        let generator = generator.into();
        for p in corpus.iter() {
            match &p.origin {
                Origin::Synthetic { generator: g } if *g == generator => {}
                Origin::Synthetic { generator: g } => {
                    return Err(AugmentError::Provenance(format!("pair {} was generated by {g}, expected {generator}", p.id)))
                }
                Origin::Real => return Err(AugmentError::Provenance(format!("pair {} is real", p.id))),
            }
        }
        Ok(Self {
            corpus,
            generator,
            source_mono: source_mono.into(),
        })
    }

    /// Recovers generator and source corpus from a loaded corpus, using the
    /// pairs' provenance and the `backtranslate` log entry.
    pub fn from_loaded(corpus: ParallelCorpus) -> Result<Self, AugmentError> {
        let entry = corpus.log().iter().rev().find(|e| e.op == "backtranslate");
        let field = |key: &str| entry.and_then(|e| detail_field(&e.detail, key));
        let generator = corpus
            .items()
            .first()
            .and_then(|p| p.origin.generator().map(str::to_string))
            .or_else(|| field("generator"))
            .ok_or_else(|| AugmentError::Provenance(format!("{} has no generator recorded", corpus.name())))?;
        let source_mono = field("source_mono").unwrap_or_default();
        Self::new(corpus, generator, source_mono)
    }

    pub fn corpus(&self) -> &ParallelCorpus {
        &self.corpus
    }

    pub fn into_corpus(self) -> ParallelCorpus {
        self.corpus
    }

    pub fn generator(&self) -> &str {
        &self.generator
    }

    pub fn source_mono(&self) -> &str {
        &self.source_mono
    }

    pub fn len(&self) -> usize {
        self.corpus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corpus.is_empty()
    }

    /// Whether every source sentence occurs verbatim in `mono`.
    pub fn sources_within(&self, mono: &MonoCorpus) -> bool {
        let texts: HashSet<&str> = mono.iter().map(|s| s.text.as_str()).collect();
        self.corpus.iter().all(|p| texts.contains(p.source.as_str()))
    }
}

fn detail_field(detail: &str, key: &str) -> Option<String> {
    detail
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix(key)?.strip_prefix('='))
        .map(str::to_string)
}

/// Combines real and synthetic pairs per `spec`. Both subsets are sampled
/// without replacement and the result is shuffled, all driven by `spec.seed`.
/// Ids are namespaced by source corpus name; provenance is kept per pair.
pub fn mix(real: &ParallelCorpus, syn: &SyntheticCorpus, spec: &MixSpec) -> Result<ParallelCorpus, AugmentError> {
    spec.validate()?;
    if let (Some(r), Some(s)) = (real.direction(), syn.corpus.direction()) {
        if r != s {
            return Err(AugmentError::DirectionMismatch { real: r, synthetic: s });
        }
    }
    let (n_real, n_syn) = spec.counts(real.len());
    if n_real == 0 {
        return Err(AugmentError::ZeroReal);
    }
    if n_syn > syn.len() {
        return Err(AugmentError::InsufficientSynthetic {
            required: n_syn,
            available: syn.len(),
        });
    }
    let pick = |c: &ParallelCorpus, k: usize, stream: u64| -> Vec<SentencePair> {
        let idx = if k == c.len() {
            (0..k).collect()
        } else {
            SplitMix64::derive(spec.seed, stream).sample_indices(c.len(), k)
        };
        idx.into_iter()
            .map(|i| {
                let mut p = c.items()[i].clone();
                p.id = format!("{}/{}", c.name(), p.id);
                p
            })
            .collect()
    };
    let mut items = pick(real, n_real, 0);
    items.extend(pick(&syn.corpus, n_syn, 1));
    SplitMix64::derive(spec.seed, 2).shuffle(&mut items);

    let name = format!("{}.mix-{}", real.name(), spec.name);
    let mut log = real.log().to_vec();
    log.extend_from_slice(syn.corpus.log());
    let mut detail = format!(
        "spec={} real_fraction={} synthetic_multiple={} seed={} real={}/{} synthetic={}/{} generator={} remainder=floor-real",
        spec.name,
        spec.real_fraction,
        spec.synthetic_multiple,
        spec.seed,
        n_real,
        real.len(),
        n_syn,
        syn.len(),
        syn.generator
    );
    if spec.name == MixName::HalfHalf {
        detail.push_str(" interpretation=half-real-plus-equal-synthetic");
    }
    log.push(LogEntry {
        corpus: name.clone(),
        op: "mix".into(),
        detail,
    });
    Ok(Corpus::with_meta(
        CorpusMeta {
            name,
            seed: Some(spec.seed),
            log,
        },
        items,
    )?)
}

/// Training plan for a model fine-tuned on data from another model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSwitchPlan {
    pub base: BaseModel,
    pub direction: Direction,
    pub mix: MixName,
    pub generator: ModelKey,
}

impl ModelSwitchPlan {
    /// Category of the trainee: `ft-syn-<mix>`, suffixed with the generator
    /// base when it differs from the trainee base.
    pub fn category(&self) -> TrainingCategory {
        TrainingCategory::FtSyn {
            ratio: self.mix,
            generator: (self.generator.base != self.base).then_some(self.generator.base),
        }
    }

    pub fn trainee_key(&self) -> ModelKey {
        ModelKey::new(self.base, self.category(), self.direction)
    }

    /// The plan as experiment config keys.
    pub fn fragment(&self) -> toml::Table {
        toml::Table::try_from(self).expect("plan serializes to a table")
    }
}

pub fn model_switch_plan(registry: &Registry, generator: &ModelKey, trainee: BaseModel, mix: MixName) -> Result<ModelSwitchPlan, AugmentError> {
    if registry.find(generator).is_none() {
        return Err(AugmentError::MissingGenerator(*generator));
    }
    if generator.category != TrainingCategory::Ft {
        return Err(AugmentError::NotFineTuned(*generator));
    }
    Ok(ModelSwitchPlan {
        base: trainee,
        direction: generator.direction,
        mix,
        generator: *generator,
    })
}
