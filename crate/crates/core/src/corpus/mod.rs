//! Monolingual and parallel corpora.
//!
//! Corpora are immutable values: every operation returns a new corpus and
//! appends a [`LogEntry`] so the derivation chain of any artifact can be read
//! back from its metadata.

mod clean;
mod io;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::lang::{Direction, Lang};
use crate::rng::SplitMix64;

pub use clean::{clean, count_cjk, is_cjk, Cleaner, CleaningConfig, CleaningReport, NoiseRule, PatternRule};
pub use io::{load_mono, load_parallel, load_raw_lines, meta_path, save, JsonlRecord};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("invalid rule `{rule}`: {reason}")]
    InvalidRule { rule: String, reason: String },
    #[error("requested {requested} items but corpus has {available} (short by {})", requested - available)]
    InsufficientItems { requested: usize, available: usize },
    #[error("direction mismatch: {left} vs {right}")]
    DirectionMismatch { left: Direction, right: Direction },
    #[error("corpus mixes directions {0} and {1}")]
    MixedDirections(Direction, Direction),
    #[error("corpus mixes languages {0} and {1}")]
    MixedLangs(Lang, Lang),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("line {line}: missing required field `{field}`")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

/// Applies the toolkit's Unicode normalization policy (NFC).
pub fn normalize(text: &str) -> String {
    text.nfc().collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: String,
    pub text: String,
    pub lang: Lang,
}

/// Where a sentence pair came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "provenance", rename_all = "lowercase")]
pub enum Origin {
    Real,
    Synthetic { generator: String },
}

impl Origin {
    pub fn generator(&self) -> Option<&str> {
        match self {
            Origin::Real => None,
            Origin::Synthetic { generator } => Some(generator),
        }
    }

    pub fn is_synthetic(&self) -> bool {
        matches!(self, Origin::Synthetic { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentencePair {
    pub id: String,
    pub source: String,
    pub target: String,
    pub direction: Direction,
    pub origin: Origin,
}

impl SentencePair {
    pub fn real(id: impl Into<String>, source: impl Into<String>, target: impl Into<String>, direction: Direction) -> Self {
        Self {
            id: id.into(),
            source: source.into(),
            target: target.into(),
            direction,
            origin: Origin::Real,
        }
    }

    /// Text content and provenance, ignoring the id.
    pub fn content(&self) -> (&str, &str, Direction, &Origin) {
        (&self.source, &self.target, self.direction, &self.origin)
    }
}

/// An item stored in a [`Corpus`].
pub trait Record: Clone {
    fn id(&self) -> &str;
    fn set_id(&mut self, id: String);
    /// Checks cross-item invariants beyond id uniqueness.
    fn check_uniform(items: &[Self]) -> Result<()>;
}

impl Record for Sentence {
    fn id(&self) -> &str {
        &self.id
    }

    fn set_id(&mut self, id: String) {
        self.id = id;
    }

    fn check_uniform(items: &[Self]) -> Result<()> {
        if let Some(first) = items.first() {
            if let Some(other) = items.iter().find(|s| s.lang != first.lang) {
                return Err(CorpusError::MixedLangs(first.lang, other.lang));
            }
        }
        Ok(())
    }
}

impl Record for SentencePair {
    fn id(&self) -> &str {
        &self.id
    }

    fn set_id(&mut self, id: String) {
        self.id = id;
    }

    fn check_uniform(items: &[Self]) -> Result<()> {
        if let Some(first) = items.first() {
            if let Some(other) = items.iter().find(|p| p.direction != first.direction) {
                return Err(CorpusError::MixedDirections(first.direction, other.direction));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    /// Name of the corpus the operation produced.
    pub corpus: String,
    pub op: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusMeta {
    pub name: String,
    pub seed: Option<u64>,
    pub log: Vec<LogEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus<T> {
    meta: CorpusMeta,
    items: Vec<T>,
}

pub type MonoCorpus = Corpus<Sentence>;
pub type ParallelCorpus = Corpus<SentencePair>;

impl<T: Record> Corpus<T> {
    /// Builds a corpus, rejecting duplicate ids and non-uniform items.
    pub fn new(name: impl Into<String>, items: Vec<T>) -> Result<Self> {
        Self::with_meta(
            CorpusMeta {
                name: name.into(),
                seed: None,
                log: Vec::new(),
            },
            items,
        )
    }

    pub fn with_meta(meta: CorpusMeta, items: Vec<T>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(items.len());
        for item in &items {
            if !seen.insert(item.id()) {
                return Err(CorpusError::DuplicateId(item.id().to_string()));
            }
        }
        T::check_uniform(&items)?;
        Ok(Self { meta, items })
    }

    pub fn name(&self) -> &str {
        &self.meta.name
    }

    pub fn seed(&self) -> Option<u64> {
        self.meta.seed
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.meta.log
    }

    pub fn meta(&self) -> &CorpusMeta {
        &self.meta
    }

    pub fn items(&self) -> &[T] {
        &self.items
    }

    pub fn into_items(self) -> Vec<T> {
        self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.items.iter()
    }

    /// Derives a new corpus from this one, extending its log.
    pub(crate) fn derive(&self, name: String, seed: Option<u64>, op: &str, detail: String, items: Vec<T>) -> Result<Self> {
        let mut log = self.meta.log.clone();
        log.push(LogEntry {
            corpus: name.clone(),
            op: op.to_string(),
            detail,
        });
        Self::with_meta(CorpusMeta { name, seed: seed.or(self.meta.seed), log }, items)
    }

    /// Returns a copy under a new name with an extra log entry.
    pub fn renamed(&self, name: impl Into<String>) -> Self {
        let name = name.into();
        let detail = format!("from {}", self.meta.name);
        self.derive(name, None, "rename", detail, self.items.clone())
            .expect("renaming preserves invariants")
    }
}

impl ParallelCorpus {
    /// Direction of the pairs, `None` for an empty corpus.
    pub fn direction(&self) -> Option<Direction> {
        self.items.first().map(|p| p.direction)
    }
}

impl MonoCorpus {
    pub fn lang(&self) -> Option<Lang> {
        self.items.first().map(|s| s.lang)
    }

    /// Wraps raw text lines as a monolingual corpus with ids `<name>-<line>`.
    /// Text is NFC-normalized; blank lines are skipped.
    pub fn from_lines<'a>(name: &str, lang: Lang, lines: impl IntoIterator<Item = &'a str>) -> Self {
        let items = lines
            .into_iter()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| Sentence {
                id: format!("{name}-{}", i + 1),
                text: normalize(l),
                lang,
            })
            .collect();
        Self::new(name, items).expect("line ids are unique")
    }
}

/// Train/dev/test partition sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
}

impl SplitSizes {
    pub fn new(train: usize, dev: usize, test: usize) -> Self {
        Self { train, dev, test }
    }

    pub fn total(&self) -> usize {
        self.train + self.dev + self.test
    }
}

impl fmt::Display for SplitSizes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.train, self.dev, self.test)
    }
}

impl std::str::FromStr for SplitSizes {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().replace('_', "").parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| format!("bad split sizes `{s}`: {e}"))?;
        match parts[..] {
            [train, dev, test] => Ok(Self { train, dev, test }),
            _ => Err(format!("expected three comma-separated sizes, got `{s}`")),
        }
    }
}

/// Shuffles `c` with the seeded generator and cuts it into train/dev/test.
/// Items beyond `sizes.total()` are left out.
pub fn split<T: Record>(c: &Corpus<T>, sizes: SplitSizes, seed: u64) -> Result<(Corpus<T>, Corpus<T>, Corpus<T>)> {
    if sizes.total() > c.len() {
        return Err(CorpusError::InsufficientItems {
            requested: sizes.total(),
            available: c.len(),
        });
    }
    let mut order: Vec<usize> = (0..c.len()).collect();
    SplitMix64::new(seed).shuffle(&mut order);
    let mut picked = order.into_iter().map(|i| c.items[i].clone());
    let detail = format!("sizes={sizes} seed={seed} rng=splitmix64-fisher-yates");
    let mut part = |suffix: &str, n: usize| {
        let items: Vec<T> = picked.by_ref().take(n).collect();
        c.derive(format!("{}.{suffix}", c.name()), Some(seed), "split", detail.clone(), items)
    };
    let train = part("train", sizes.train)?;
    let dev = part("dev", sizes.dev)?;
    let test = part("test", sizes.test)?;
    Ok((train, dev, test))
}

/// Concatenates `a` then `b`. Ids are namespaced as `<corpus name>/<id>`.
pub fn merge(a: &ParallelCorpus, b: &ParallelCorpus) -> Result<ParallelCorpus> {
    if let (Some(left), Some(right)) = (a.direction(), b.direction()) {
        if left != right {
            return Err(CorpusError::DirectionMismatch { left, right });
        }
    }
    let items: Vec<SentencePair> = namespaced(a).chain(namespaced(b)).collect();
    let name = format!("{}+{}", a.name(), b.name());
    let mut log = a.log().to_vec();
    log.extend_from_slice(b.log());
    log.push(LogEntry {
        corpus: name.clone(),
        op: "merge".into(),
        detail: format!("{} ({}) then {} ({})", a.name(), a.len(), b.name(), b.len()),
    });
    Corpus::with_meta(CorpusMeta { name, seed: None, log }, items)
}

pub(crate) fn namespaced<T: Record>(c: &Corpus<T>) -> impl Iterator<Item = T> + '_ {
    c.items.iter().map(|item| {
        let mut item = item.clone();
        item.set_id(format!("{}/{}", c.name(), item.id()));
        item
    })
}
