//! Fine-tuning runs: per-epoch dev scoring, checkpoint selection and
//! registration of the selected model.

mod trainer;

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::backends::{manifest_file_name, BaseModel, MixName, ModelDescriptor, ModelKey, Registry, RegistryError, TrainingCategory};
use crate::corpus::ParallelCorpus;
use crate::lang::Direction;

pub use trainer::{dev_bleu, EpochScores, ExternalState, ExternalTrainer, SavedModel, ToyTrainer, TrainRequest, TrainResponse, Trainer, TrainerError};

pub const DEFAULT_EPOCHS: u32 = 3;
pub const LONG_EPOCHS: u32 = 10;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error("{what} data translates {found}, experiment is {expected}")]
    DirectionMismatch { what: &'static str, expected: Direction, found: Direction },
    #[error("training data provenance: {0}")]
    Provenance(String),
    #[error("trainer failed in epoch {epoch}: {source}; {completed} completed epoch(s) kept in {}", curve.display())]
    Trainer {
        epoch: u32,
        completed: usize,
        curve: PathBuf,
        #[source]
        source: TrainerError,
    },
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckpointPolicy {
    /// Highest dev BLEU; the earliest epoch wins ties.
    #[default]
    BestDev,
    LastEpoch,
}

fn default_epochs() -> u32 {
    DEFAULT_EPOCHS
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub base: BaseModel,
    pub direction: Direction,
    /// Training corpus (JSONL).
    pub train: PathBuf,
    /// Development corpus (JSONL) scored after every epoch.
    pub dev: PathBuf,
    #[serde(default = "default_epochs")]
    pub epochs: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub checkpoint: CheckpointPolicy,
    /// Mix recipe of the training data. Read from the corpus log when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mix: Option<MixName>,
    /// Model that produced the synthetic pairs. Read from the pairs when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<ModelKey>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub display_name: Option<String>,
}

impl ExperimentConfig {
    pub fn new(base: BaseModel, direction: Direction, train: impl Into<PathBuf>, dev: impl Into<PathBuf>) -> Self {
        Self {
            base,
            direction,
            train: train.into(),
            dev: dev.into(),
            epochs: DEFAULT_EPOCHS,
            seed: 0,
            checkpoint: CheckpointPolicy::default(),
            mix: None,
            generator: None,
            display_name: None,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.epochs == 0 {
            return Err(ExperimentError::Config("epochs must be at least 1".into()));
        }
        Ok(())
    }

    /// Training category implied by the config and the training data.
    ///
    /// Data without synthetic pairs gives `ft`. Otherwise the mix recipe
    /// (configured, or read from the corpus log) and the generator
    /// (configured, or read from the pairs) give `ft-syn-<mix>`, suffixed with
    /// the generator base when it differs from `base`.
    pub fn category_for(&self, train: &ParallelCorpus) -> Result<TrainingCategory, ExperimentError> {
        let generators: BTreeSet<&str> = train.iter().filter_map(|p| p.origin.generator()).collect();
        let logged_mix = train
            .log()
            .iter()
            .rev()
            .find(|e| e.op == "mix")
            .and_then(|e| e.detail.split_whitespace().find_map(|kv| kv.strip_prefix("spec=")))
            .map(|s| s.parse::<MixName>().map_err(|e| ExperimentError::Provenance(e.to_string())))
            .transpose()?;
        if generators.is_empty() {
            if let Some(mix) = self.mix {
                return Err(ExperimentError::Provenance(format!("mix {mix} configured but the training data has no synthetic pairs")));
            }
            return Ok(TrainingCategory::Ft);
        }
        let mix = match (self.mix, logged_mix) {
            (Some(c), Some(l)) if c != l => {
                return Err(ExperimentError::Provenance(format!("config says mix {c}, corpus log says {l}")));
            }
            (Some(m), _) | (None, Some(m)) => m,
            (None, None) => return Err(ExperimentError::Provenance("synthetic pairs present but no mix recipe configured or logged".into())),
        };
        let generator = match self.generator {
            Some(g) => {
                if generators.iter().any(|s| *s != g.to_string()) {
                    return Err(ExperimentError::Provenance(format!(
                        "config names generator {g}, data was generated by {}",
                        generators.iter().copied().collect::<Vec<_>>().join(", ")
                    )));
                }
                g
            }
            None => {
                let [only] = generators.iter().collect::<Vec<_>>()[..] else {
                    return Err(ExperimentError::Provenance(format!("{} generators in the data; configure one", generators.len())));
                };
                only.parse::<ModelKey>()
                    .map_err(|_| ExperimentError::Provenance(format!("generator `{only}` is not a model key; configure one")))?
            }
        };
        Ok(TrainingCategory::FtSyn {
            ratio: mix,
            generator: (generator.base != self.base).then_some(generator.base),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u32,
    pub dev_bleu: f64,
    #[serde(default, skip_serializing_if = "std::collections::BTreeMap::is_empty")]
    pub metrics: std::collections::BTreeMap<String, f64>,
    pub wall_time_secs: f64,
}

/// Per-epoch dev scores, stored one JSON record per line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub records: Vec<EpochRecord>,
}

impl LearningCurve {
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(|source| ExperimentError::Io { path: path.into(), source })?;
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<Vec<EpochRecord>, _>>()
            .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        let curve = Self { records };
        if !curve.is_contiguous() {
            return Err(ExperimentError::Config(format!("{}: epochs are not numbered 1..n", path.display())));
        }
        Ok(curve)
    }

    pub fn is_contiguous(&self) -> bool {
        self.records.iter().enumerate().all(|(i, r)| r.epoch as usize == i + 1)
    }

    /// Epoch chosen by `policy`, `None` for an empty curve.
    pub fn select(&self, policy: CheckpointPolicy) -> Option<u32> {
        match policy {
            CheckpointPolicy::LastEpoch => self.records.last().map(|r| r.epoch),
            CheckpointPolicy::BestDev => self
                .records
                .iter()
                .fold(None::<&EpochRecord>, |best, r| match best {
                    Some(b) if b.dev_bleu >= r.dev_bleu => Some(b),
                    _ => Some(r),
                })
                .map(|r| r.epoch),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub trainer: String,
    pub model: ModelKey,
    pub selected_epoch: u32,
    pub curve: LearningCurve,
    pub train_pairs: usize,
    pub dev_pairs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub descriptor: ModelDescriptor,
    pub curve: LearningCurve,
    pub selected_epoch: u32,
    pub manifest: PathBuf,
}

/// Trains for `cfg.epochs` epochs, scoring the dev set after each one and
/// appending to `<run_dir>/curve.jsonl` as it goes. The checkpoint picked by
/// `cfg.checkpoint` is saved under the registry's artifact directory and
/// registered. On trainer failure the curve prefix stays on disk.
pub fn run_experiment<T: Trainer>(
    cfg: &ExperimentConfig,
    train: &ParallelCorpus,
    dev: &ParallelCorpus,
    trainer: &mut T,
    registry: &mut Registry,
    run_dir: &Path,
) -> Result<ExperimentOutcome, ExperimentError> {
    cfg.validate()?;
    for (what, c) in [("training", train), ("dev", dev)] {
        if let Some(found) = c.direction().filter(|d| *d != cfg.direction) {
            return Err(ExperimentError::DirectionMismatch {
                what,
                expected: cfg.direction,
                found,
            });
        }
    }
    if dev.is_empty() {
        return Err(ExperimentError::Config("dev corpus is empty".into()));
    }
    let key = ModelKey::new(cfg.base, cfg.category_for(train)?, cfg.direction);
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ExperimentError::Io { path, source }
    };
    fs::create_dir_all(run_dir).map_err(io(run_dir))?;
    let curve_path = run_dir.join("curve.jsonl");
    let mut curve_file = fs::File::create(&curve_path).map_err(io(&curve_path))?;
    tracing::info!(model = %key, trainer = trainer.id(), epochs = cfg.epochs, "starting experiment");

    let fail = |epoch, completed, source| ExperimentError::Trainer {
        epoch,
        completed,
        curve: curve_path.clone(),
        source,
    };
    let mut curve = LearningCurve::default();
    trainer.prepare(train, dev).map_err(|e| fail(1, 0, e))?;
    let mut state = trainer.init(cfg.direction).map_err(|e| fail(1, 0, e))?;
    let mut selected: Option<(u32, T::State)> = None;
    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let done = curve.records.len();
        state = trainer.train_epoch(state, train, epoch, cfg.seed).map_err(|e| fail(epoch, done, e))?;
        let scores = trainer.evaluate(&state, dev).map_err(|e| fail(epoch, done, e))?;
        let record = EpochRecord {
            epoch,
            dev_bleu: scores.dev_bleu,
            metrics: scores.metrics,
            wall_time_secs: started.elapsed().as_secs_f64(),
        };
        writeln!(curve_file, "{}", serde_json::to_string(&record).expect("record serializes")).map_err(io(&curve_path))?;
        curve_file.flush().map_err(io(&curve_path))?;
        tracing::info!(epoch, dev_bleu = record.dev_bleu, "epoch finished");
        curve.records.push(record);
        if curve.select(cfg.checkpoint) == Some(epoch) {
            selected = Some((epoch, state.clone()));
        }
    }
    let (selected_epoch, best) = selected.expect("at least one epoch ran");

    let artifact_dir = registry.artifact_dir().join(manifest_file_name(&key).trim_end_matches(".toml"));
    let saved = trainer.save(&best, &artifact_dir).map_err(|e| fail(selected_epoch, curve.records.len(), e))?;
    let mut descriptor = ModelDescriptor::new(key, saved.engine);
    descriptor.path = saved.path;
    descriptor.display_name = cfg.display_name.clone().unwrap_or_else(|| match cfg.epochs {
        DEFAULT_EPOCHS => key.system_label(),
        n => format!("{}-{n}E", key.system_label()),
    });
    let manifest = registry.register(descriptor.clone())?;

    let summary = ExperimentSummary {
        config: cfg.clone(),
        trainer: trainer.id(),
        model: key,
        selected_epoch,
        curve: curve.clone(),
        train_pairs: train.len(),
        dev_pairs: dev.len(),
    };
    let summary_path = run_dir.join("experiment.json");
    fs::write(&summary_path, serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n").map_err(io(&summary_path))?;
    Ok(ExperimentOutcome {
        descriptor,
        curve,
        selected_epoch,
        manifest,
    })
}
