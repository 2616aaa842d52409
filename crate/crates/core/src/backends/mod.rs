//! Translation backends behind one interface.
//!
//! A [`ModelDescriptor`] names a model and how to run it; [`load`] turns it
//! into a [`LoadedModel`] whose [`translate_batch`](LoadedModel::translate_batch)
//! enforces the shared contract: direction must match, outputs align 1:1
//! with inputs, and a non-empty input never yields an empty output (the
//! input is copied through and the index flagged instead).

mod cipher;
mod descriptor;
mod external;
mod registry;
mod table;

use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::adapter::{AdapterError, Transport};
use crate::lang::Direction;

pub use cipher::{ToyCipher, CJK_ALPHABET};
pub use descriptor::{BaseModel, Engine, GrammarError, MixName, ModelDescriptor, ModelKey, TrainingCategory};
pub use external::ExternalBackend;
pub use registry::{manifest_file_name, Registry, RegistryError};
pub use table::TableModel;

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("model not found: {0}")]
    NotFound(String),
    #[error("model {model} translates {model_direction}, request asks for {requested}")]
    DirectionMismatch {
        model: ModelKey,
        model_direction: Direction,
        requested: Direction,
    },
    #[error("backend for {model} returned {got} outputs for {expected} inputs")]
    Misaligned { model: ModelKey, expected: usize, got: usize },
    #[error("failed to load {model}: {reason}")]
    Load { model: ModelKey, reason: String },
    #[error("backend for {model} failed: {source}")]
    Adapter {
        model: ModelKey,
        #[source]
        source: AdapterError,
    },
}

/// Decoding settings passed through to backends that use them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecodingOptions {
    pub beam_size: u32,
    pub max_length: u32,
}

impl Default for DecodingOptions {
    fn default() -> Self {
        Self {
            beam_size: 4,
            max_length: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranslationRequest {
    pub sentences: Vec<String>,
    pub direction: Direction,
    pub options: DecodingOptions,
}

impl TranslationRequest {
    pub fn new(sentences: Vec<String>, direction: Direction) -> Self {
        Self {
            sentences,
            direction,
            options: DecodingOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranslationResult {
    pub sentences: Vec<String>,
    /// Indices where the backend produced nothing and the input was copied.
    pub copied: Vec<usize>,
    pub latency: Duration,
}

/// Raw translation engine. Implementations process one batch at a time.
pub trait Backend: Send {
    fn translate(&mut self, sentences: &[String], options: &DecodingOptions) -> Result<Vec<String>, AdapterError>;
}

struct CopyBackend;

impl Backend for CopyBackend {
    fn translate(&mut self, sentences: &[String], _: &DecodingOptions) -> Result<Vec<String>, AdapterError> {
        Ok(sentences.to_vec())
    }
}

struct CipherBackend {
    cipher: ToyCipher,
    direction: Direction,
}

impl Backend for CipherBackend {
    fn translate(&mut self, sentences: &[String], _: &DecodingOptions) -> Result<Vec<String>, AdapterError> {
        Ok(sentences.iter().map(|s| self.cipher.apply(s, self.direction)).collect())
    }
}

impl Backend for TableModel {
    fn translate(&mut self, sentences: &[String], _: &DecodingOptions) -> Result<Vec<String>, AdapterError> {
        Ok(sentences.iter().map(|s| TableModel::translate(self, s)).collect())
    }
}

/// A descriptor together with its running backend.
pub struct LoadedModel {
    descriptor: ModelDescriptor,
    backend: Box<dyn Backend>,
}

impl std::fmt::Debug for LoadedModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LoadedModel").field("descriptor", &self.descriptor).finish()
    }
}

impl LoadedModel {
    pub fn new(descriptor: ModelDescriptor, backend: Box<dyn Backend>) -> Self {
        Self { descriptor, backend }
    }

    pub fn descriptor(&self) -> &ModelDescriptor {
        &self.descriptor
    }

    pub fn translate_batch(&mut self, req: &TranslationRequest) -> Result<TranslationResult, BackendError> {
        let model = self.descriptor.key();
        if req.direction != self.descriptor.direction {
            return Err(BackendError::DirectionMismatch {
                model,
                model_direction: self.descriptor.direction,
                requested: req.direction,
            });
        }
        let start = Instant::now();
        if req.sentences.is_empty() {
            return Ok(TranslationResult {
                sentences: Vec::new(),
                copied: Vec::new(),
                latency: start.elapsed(),
            });
        }
        let mut out = self
            .backend
            .translate(&req.sentences, &req.options)
            .map_err(|source| BackendError::Adapter { model, source })?;
        if out.len() != req.sentences.len() {
            return Err(BackendError::Misaligned {
                model,
                expected: req.sentences.len(),
                got: out.len(),
            });
        }
        let mut copied = Vec::new();
        for (i, (input, output)) in req.sentences.iter().zip(out.iter_mut()).enumerate() {
            if output.trim().is_empty() && !input.trim().is_empty() {
                *output = input.clone();
                copied.push(i);
            }
        }
        Ok(TranslationResult {
            sentences: out,
            copied,
            latency: start.elapsed(),
        })
    }
}

/// Instantiates the backend described by `descriptor`.
pub fn load(descriptor: &ModelDescriptor) -> Result<LoadedModel, BackendError> {
    let backend: Box<dyn Backend> = match &descriptor.engine {
        Engine::Copy => Box::new(CopyBackend),
        Engine::Cipher { seed } => Box::new(CipherBackend {
            cipher: ToyCipher::new(*seed),
            direction: descriptor.direction,
        }),
        Engine::Table => Box::new(load_table(descriptor)?),
        Engine::Command { program, args } => Box::new(ExternalBackend::new(
            Transport::Command {
                program: program.clone(),
                args: args.clone(),
            },
            descriptor.direction,
        )),
        Engine::Http { url } => Box::new(ExternalBackend::new(Transport::Http { url: url.clone() }, descriptor.direction)),
    };
    Ok(LoadedModel::new(descriptor.clone(), backend))
}

fn load_table(descriptor: &ModelDescriptor) -> Result<TableModel, BackendError> {
    let fail = |reason: String| BackendError::Load {
        model: descriptor.key(),
        reason,
    };
    let table = TableModel::load(Path::new(&descriptor.path)).map_err(|e| fail(format!("{}: {e}", descriptor.path.display())))?;
    if table.direction != descriptor.direction {
        return Err(fail(format!("artifact translates {}", table.direction)));
    }
    Ok(table)
}
