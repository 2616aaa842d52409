//! Embedding-based metrics (BERTScore, COMET) via external scorers.
//!
//! Request records: `{schema_version, id, hyp, ref}`. Response records are
//! either per-segment `{schema_version, id, score}` or a summary
//! `{schema_version, corpus_score?, version?}`. When no corpus score is
//! reported, the corpus score is the mean of the segment scores.

use serde::{Deserialize, Serialize};

use crate::adapter::{AdapterError, Transport, Versioned, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingScores {
    pub adapter: String,
    pub version: Option<String>,
    pub segments: Vec<f64>,
    pub corpus: f64,
}

pub trait EmbeddingScorer {
    fn id(&self) -> &str;
    fn score(&mut self, hyps: &[String], refs: &[String]) -> Result<EmbeddingScores, AdapterError>;
}

#[derive(Debug, Serialize)]
struct ScoreRequest<'a> {
    schema_version: u32,
    id: usize,
    hyp: &'a str,
    #[serde(rename = "ref")]
    reference: &'a str,
}

#[derive(Debug, Deserialize)]
struct ScoreResponse {
    schema_version: u32,
    id: Option<usize>,
    score: Option<f64>,
    corpus_score: Option<f64>,
    version: Option<String>,
}

impl Versioned for ScoreResponse {
    fn schema_version(&self) -> u32 {
        self.schema_version
    }
}

/// Scorer reached through a subprocess or HTTP [`Transport`].
pub struct ExternalScorer {
    id: String,
    transport: Transport,
}

impl ExternalScorer {
    pub fn new(id: impl Into<String>, transport: Transport) -> Self {
        Self { id: id.into(), transport }
    }
}

impl EmbeddingScorer for ExternalScorer {
    fn id(&self) -> &str {
        &self.id
    }

    fn score(&mut self, hyps: &[String], refs: &[String]) -> Result<EmbeddingScores, AdapterError> {
        let requests: Vec<ScoreRequest> = hyps
            .iter()
            .zip(refs)
            .enumerate()
            .map(|(id, (h, r))| ScoreRequest {
                schema_version: SCHEMA_VERSION,
                id,
                hyp: h,
                reference: r,
            })
            .collect();
        let responses: Vec<ScoreResponse> = self.transport.call(&requests)?;
        let mut segments = vec![None; hyps.len()];
        let (mut corpus, mut version) = (None, None);
        for (index, resp) in responses.into_iter().enumerate() {
            if resp.corpus_score.is_some() {
                corpus = resp.corpus_score;
            }
            if resp.version.is_some() {
                version = resp.version;
            }
            if let (Some(id), Some(score)) = (resp.id, resp.score) {
                let slot = segments.get_mut(id).ok_or_else(|| AdapterError::Protocol {
                    index,
                    message: format!("unknown id {id}"),
                })?;
                *slot = Some(score);
            }
        }
        let segments: Vec<f64> = segments
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                s.ok_or_else(|| AdapterError::Protocol {
                    index: i,
                    message: format!("no score for segment {i}"),
                })
            })
            .collect::<Result<_, _>>()?;
        let corpus = corpus.unwrap_or_else(|| mean(&segments));
        Ok(EmbeddingScores {
            adapter: self.id.clone(),
            version,
            segments,
            corpus,
        })
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Outcome of asking an optional scorer; failures degrade to `Unavailable`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum MetricValue {
    Available(EmbeddingScores),
    Unavailable { reason: String },
}

impl MetricValue {
    pub fn corpus(&self) -> Option<f64> {
        match self {
            MetricValue::Available(s) => Some(s.corpus),
            MetricValue::Unavailable { .. } => None,
        }
    }
}

pub fn embedding_metric_score(scorer: Option<&mut dyn EmbeddingScorer>, hyps: &[String], refs: &[String]) -> MetricValue {
    let Some(scorer) = scorer else {
        return MetricValue::Unavailable {
            reason: "no adapter configured".into(),
        };
    };
    match scorer.score(hyps, refs) {
        Ok(s) => MetricValue::Available(s),
        Err(e) => {
            tracing::warn!(adapter = scorer.id(), error = %e, "embedding metric unavailable");
            MetricValue::Unavailable { reason: e.to_string() }
        }
    }
}
