//! Lexical MT metrics, embedding-metric adapters and score tables.

mod bleu;
mod embedding;
mod hlepor;
mod table;
mod tokenize;

pub use bleu::{corpus_bleu, corpus_bleu_text, sentence_bleu, BleuConfig, BleuScore, Smoothing};
pub use embedding::{embedding_metric_score, EmbeddingScorer, EmbeddingScores, ExternalScorer, MetricValue};
pub use hlepor::{align, corpus_hlepor, hlepor, CorpusHlepor, HleporParams, HleporScore};
pub use table::{build_score_table, ClusterBlock, Metric, ScoreRow, ScoreTable, TableRow};
pub use tokenize::{Scheme, TokenizedSegment};

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("{hyps} hypotheses but {refs} references")]
    LengthMismatch { hyps: usize, refs: usize },
    #[error("nothing to score")]
    EmptyCorpus,
    #[error("hLEPOR is undefined for an empty segment")]
    EmptySegment,
    #[error("segments tokenized with `{found}`, expected `{expected}`")]
    SchemeMismatch { expected: Scheme, found: Scheme },
    #[error("invalid metric parameters: {0}")]
    InvalidParams(String),
}
