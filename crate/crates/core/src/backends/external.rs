//! Backend that delegates to an external inference adapter.
//!
//! Request record: `{schema_version, id, text, source_lang, target_lang,
//! beam_size, max_length}`. Response record: `{schema_version, id,
//! translation}`. Responses may arrive in any order but must cover every id
//! exactly once.

use serde::{Deserialize, Serialize};

use super::{Backend, DecodingOptions};
use crate::adapter::{AdapterError, Transport, Versioned, SCHEMA_VERSION};
use crate::lang::{Direction, Lang};

#[derive(Debug, Serialize, Deserialize)]
pub struct AdapterRequest {
    pub schema_version: u32,
    pub id: usize,
    pub text: String,
    pub source_lang: Lang,
    pub target_lang: Lang,
    pub beam_size: u32,
    pub max_length: u32,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AdapterResponse {
    pub schema_version: u32,
    pub id: usize,
    pub translation: String,
}

impl Versioned for AdapterResponse {
    fn schema_version(&self) -> u32 {
        self.schema_version
    }
}

pub struct ExternalBackend {
    transport: Transport,
    direction: Direction,
}

impl ExternalBackend {
    pub fn new(transport: Transport, direction: Direction) -> Self {
        Self { transport, direction }
    }
}

impl Backend for ExternalBackend {
    fn translate(&mut self, sentences: &[String], options: &DecodingOptions) -> Result<Vec<String>, AdapterError> {
        let requests: Vec<AdapterRequest> = sentences
            .iter()
            .enumerate()
            .map(|(id, text)| AdapterRequest {
                schema_version: SCHEMA_VERSION,
                id,
                text: text.clone(),
                source_lang: self.direction.source,
                target_lang: self.direction.target,
                beam_size: options.beam_size,
                max_length: options.max_length,
            })
            .collect();
        let responses: Vec<AdapterResponse> = self.transport.call(&requests)?;
        let mut out: Vec<Option<String>> = vec![None; sentences.len()];
        for (index, r) in responses.into_iter().enumerate() {
            match out.get_mut(r.id) {
                Some(slot @ None) => *slot = Some(r.translation),
                Some(Some(_)) => {
                    return Err(AdapterError::Protocol {
                        index,
                        message: format!("duplicate id {}", r.id),
                    })
                }
                None => {
                    return Err(AdapterError::Protocol {
                        index,
                        message: format!("unknown id {}", r.id),
                    })
                }
            }
        }
        out.into_iter()
            .enumerate()
            .map(|(i, t)| {
                t.ok_or_else(|| AdapterError::Protocol {
                    index: i,
                    message: format!("no response for id {i}"),
                })
            })
            .collect()
    }
}
