//! Building blocks for a low-resource machine translation workflow: corpus
//! preparation, back-translation and data mixing, fine-tuning orchestration
//! over pluggable trainers, and lexical evaluation metrics.

pub mod adapter;
pub mod augment;
pub mod backends;
pub mod corpus;
pub mod experiment;
pub mod lang;
pub mod metrics;
pub mod rng;
pub mod toy;

pub use lang::{Direction, Lang};
