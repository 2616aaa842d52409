//! Training backends: the counting toy trainer and an external adapter.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adapter::{AdapterError, Transport, Versioned, SCHEMA_VERSION};
use crate::backends::{Engine, TableModel};
use crate::corpus::{save, CorpusError, ParallelCorpus};
use crate::lang::Direction;
use crate::metrics::{corpus_bleu_text, BleuConfig, MetricError, Scheme};
use crate::rng::SplitMix64;

#[derive(Debug, thiserror::Error)]
pub enum TrainerError {
    #[error(transparent)]
    Adapter(#[from] AdapterError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("trainer protocol: {0}")]
    Protocol(String),
}

/// Dev-set evaluation after one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochScores {
    pub dev_bleu: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metrics: BTreeMap<String, f64>,
}

/// Where a trained state was written and how to run it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SavedModel {
    pub engine: Engine,
    pub path: PathBuf,
}

pub trait Trainer {
    type State: Clone;

    /// Short identifier recorded in experiment summaries.
    fn id(&self) -> String;

    /// Called once with the training and dev data before the first epoch.
    fn prepare(&mut self, _train: &ParallelCorpus, _dev: &ParallelCorpus) -> Result<(), TrainerError> {
        Ok(())
    }

    fn init(&mut self, direction: Direction) -> Result<Self::State, TrainerError>;

    fn train_epoch(&mut self, state: Self::State, train: &ParallelCorpus, epoch: u32, seed: u64) -> Result<Self::State, TrainerError>;

    fn evaluate(&mut self, state: &Self::State, dev: &ParallelCorpus) -> Result<EpochScores, TrainerError>;

    fn save(&mut self, state: &Self::State, dir: &Path) -> Result<SavedModel, TrainerError>;
}

/// Trains a [`TableModel`]. Each epoch counts a seeded sample of
/// `epoch_fraction` of the training pairs (all of them by default).
#[derive(Debug, Clone)]
pub struct ToyTrainer {
    pub epoch_fraction: f64,
}

impl Default for ToyTrainer {
    fn default() -> Self {
        Self { epoch_fraction: 1.0 }
    }
}

impl ToyTrainer {
    pub fn with_fraction(epoch_fraction: f64) -> Self {
        assert!(epoch_fraction > 0.0 && epoch_fraction <= 1.0, "epoch fraction must be in (0, 1]");
        Self { epoch_fraction }
    }
}

/// BLEU of `hyps` against the dev targets, tokenized for the target language.
pub fn dev_bleu(hyps: &[String], dev: &ParallelCorpus) -> Result<f64, MetricError> {
    let refs: Vec<String> = dev.iter().map(|p| p.target.clone()).collect();
    let lang = dev.direction().ok_or(MetricError::EmptyCorpus)?.target;
    Ok(corpus_bleu_text(hyps, &refs, Scheme::for_lang(lang), &BleuConfig::default())?.score)
}

impl Trainer for ToyTrainer {
    type State = TableModel;

    fn id(&self) -> String {
        format!("toy-table(epoch_fraction={})", self.epoch_fraction)
    }

    fn init(&mut self, direction: Direction) -> Result<TableModel, TrainerError> {
        Ok(TableModel::new(direction))
    }

    fn train_epoch(&mut self, mut state: TableModel, train: &ParallelCorpus, epoch: u32, seed: u64) -> Result<TableModel, TrainerError> {
        let mut order: Vec<usize> = (0..train.len()).collect();
        SplitMix64::derive(seed, u64::from(epoch)).shuffle(&mut order);
        let take = (self.epoch_fraction * train.len() as f64).ceil() as usize;
        for i in order.into_iter().take(take) {
            let p = &train.items()[i];
            state.observe(&p.source, &p.target);
        }
        Ok(state)
    }

    fn evaluate(&mut self, state: &TableModel, dev: &ParallelCorpus) -> Result<EpochScores, TrainerError> {
        let hyps: Vec<String> = dev.iter().map(|p| state.translate(&p.source)).collect();
        Ok(EpochScores {
            dev_bleu: dev_bleu(&hyps, dev)?,
            metrics: BTreeMap::new(),
        })
    }

    fn save(&mut self, state: &TableModel, dir: &Path) -> Result<SavedModel, TrainerError> {
        fs::create_dir_all(dir).map_err(|source| TrainerError::Io { path: dir.into(), source })?;
        let path = dir.join("table.json");
        state.save(&path).map_err(|source| TrainerError::Io { path: path.clone(), source })?;
        Ok(SavedModel { engine: Engine::Table, path })
    }
}

/// One request per epoch to an external training process.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainRequest {
    pub schema_version: u32,
    pub id: u32,
    pub epoch: u32,
    pub seed: u64,
    pub source_lang: String,
    pub target_lang: String,
    pub train: PathBuf,
    pub dev: PathBuf,
    /// Artifact of the previous epoch, absent for the first.
    pub init: Option<PathBuf>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainResponse {
    pub schema_version: u32,
    pub id: u32,
    pub artifact: PathBuf,
    pub dev_bleu: f64,
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
}

impl Versioned for TrainResponse {
    fn schema_version(&self) -> u32 {
        self.schema_version
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalState {
    pub direction: Direction,
    pub artifact: Option<PathBuf>,
    pub scores: Option<EpochScores>,
}

/// Delegates training to an external process or service. The adapter gets
/// file paths for the training and dev data, trains one epoch, and replies
/// with the artifact location and its dev score. The saved model is served
/// by `inference`, with the artifact as its descriptor path.
#[derive(Debug, Clone)]
pub struct ExternalTrainer {
    transport: Transport,
    work_dir: PathBuf,
    inference: Engine,
    data: Option<(PathBuf, PathBuf)>,
}

impl ExternalTrainer {
    pub fn new(transport: Transport, work_dir: impl Into<PathBuf>, inference: Engine) -> Self {
        Self {
            transport,
            work_dir: work_dir.into(),
            inference,
            data: None,
        }
    }
}

impl Trainer for ExternalTrainer {
    type State = ExternalState;

    fn id(&self) -> String {
        format!("external({})", self.transport.describe())
    }

    fn prepare(&mut self, train: &ParallelCorpus, dev: &ParallelCorpus) -> Result<(), TrainerError> {
        let t = self.work_dir.join("train.jsonl");
        let d = self.work_dir.join("dev.jsonl");
        save(train, &t)?;
        save(dev, &d)?;
        self.data = Some((t, d));
        Ok(())
    }

    fn init(&mut self, direction: Direction) -> Result<ExternalState, TrainerError> {
        Ok(ExternalState {
            direction,
            artifact: None,
            scores: None,
        })
    }

    fn train_epoch(&mut self, state: ExternalState, _train: &ParallelCorpus, epoch: u32, seed: u64) -> Result<ExternalState, TrainerError> {
        let (train, dev) = self
            .data
            .clone()
            .ok_or_else(|| TrainerError::Protocol("prepare() was not called".into()))?;
        let req = TrainRequest {
            schema_version: SCHEMA_VERSION,
            id: epoch,
            epoch,
            seed,
            source_lang: state.direction.source.to_string(),
            target_lang: state.direction.target.to_string(),
            train,
            dev,
            init: state.artifact.clone(),
            output_dir: self.work_dir.join(format!("epoch-{epoch}")),
        };
        let mut resp: Vec<TrainResponse> = self.transport.call(&[req])?;
        let resp = match (resp.pop(), resp.is_empty()) {
            (Some(r), true) if r.id == epoch => r,
            _ => return Err(TrainerError::Protocol(format!("expected one response with id {epoch}"))),
        };
        Ok(ExternalState {
            direction: state.direction,
            artifact: Some(resp.artifact),
            scores: Some(EpochScores {
                dev_bleu: resp.dev_bleu,
                metrics: resp.metrics,
            }),
        })
    }

    fn evaluate(&mut self, state: &ExternalState, _dev: &ParallelCorpus) -> Result<EpochScores, TrainerError> {
        state
            .scores
            .clone()
            .ok_or_else(|| TrainerError::Protocol("no dev score reported".into()))
    }

    fn save(&mut self, state: &ExternalState, _dir: &Path) -> Result<SavedModel, TrainerError> {
        let path = state
            .artifact
            .clone()
            .ok_or_else(|| TrainerError::Protocol("no artifact reported".into()))?;
        Ok(SavedModel {
            engine: self.inference.clone(),
            path,
        })
    }
}
