//! Sentence-level hLEPOR: weighted harmonic mean of a length penalty, an
//! n-gram position difference penalty and a harmonic precision/recall.
//!
//! ```text
//! LP        = 1                 if c == r
//!             exp(1 - r/c)      if c <  r
//!             exp(1 - c/r)      if c >  r
//! NPD       = (1/c) * sum over matched hyp positions i of |i/c - j(i)/r|
//! NPosPenal = exp(-NPD)
//! HPR       = (1 + b^2) P R / (R + b^2 P),   P = m/c, R = m/r
//! hLEPOR    = (wLP + wNPos + wHPR) / (wLP/LP + wNPos/NPosPenal + wHPR/HPR)
//! ```
//!
//! Positions are 1-based. Unmatched hypothesis tokens add nothing to NPD;
//! they are penalized through P and R. A zero factor makes the score 0.
//!
//! Alignment walks the hypothesis left to right. Each token is aligned to an
//! unused reference position holding the same token; with several
//! candidates, the one whose neighbours (within the context window) agree
//! most with the hypothesis neighbours wins, then the one nearest in
//! normalized position, then the leftmost.

use serde::{Deserialize, Serialize};

use super::tokenize::TokenizedSegment;
use super::MetricError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HleporParams {
    pub w_lp: f64,
    pub w_npos: f64,
    pub w_hpr: f64,
    pub beta: f64,
    pub window: usize,
}

impl Default for HleporParams {
    fn default() -> Self {
        Self {
            w_lp: 1.0,
            w_npos: 1.0,
            w_hpr: 1.0,
            beta: 1.0,
            window: 2,
        }
    }
}

impl HleporParams {
    pub fn validate(&self) -> Result<(), MetricError> {
        let all_positive = [self.w_lp, self.w_npos, self.w_hpr, self.beta]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if all_positive {
            Ok(())
        } else {
            Err(MetricError::InvalidParams("hLEPOR weights and beta must be positive".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HleporScore {
    pub score: f64,
    pub lp: f64,
    pub npos_penal: f64,
    pub hpr: f64,
    pub npd: f64,
    pub precision: f64,
    pub recall: f64,
    pub matched: usize,
}

/// For each hypothesis position, the aligned reference position (0-based).
pub fn align(hyp: &[String], reference: &[String], window: usize) -> Vec<Option<usize>> {
    let (c, r) = (hyp.len() as f64, reference.len() as f64);
    let mut used = vec![false; reference.len()];
    let mut alignment = Vec::with_capacity(hyp.len());
    for (i, tok) in hyp.iter().enumerate() {
        let context = |j: usize| -> usize {
            (1..=window)
                .flat_map(|k| [(i.checked_sub(k), j.checked_sub(k)), (Some(i + k), Some(j + k))])
                .filter(|&(hi, rj)| match (hi.and_then(|x| hyp.get(x)), rj.and_then(|x| reference.get(x))) {
                    (Some(a), Some(b)) => a == b,
                    _ => false,
                })
                .count()
        };
        let distance = |j: usize| ((i + 1) as f64 / c - (j + 1) as f64 / r).abs();
        let best = (0..reference.len())
            .filter(|&j| !used[j] && reference[j] == *tok)
            .map(|j| (j, context(j), distance(j)))
            .reduce(|best, cand| {
                let better = cand.1 > best.1 || (cand.1 == best.1 && cand.2 < best.2);
                if better {
                    cand
                } else {
                    best
                }
            })
            .map(|(j, _, _)| j);
        if let Some(j) = best {
            used[j] = true;
        }
        alignment.push(best);
    }
    alignment
}

pub fn hlepor(hyp: &TokenizedSegment, reference: &TokenizedSegment, params: &HleporParams) -> Result<HleporScore, MetricError> {
    params.validate()?;
    if hyp.is_empty() || reference.is_empty() {
        return Err(MetricError::EmptySegment);
    }
    let (c, r) = (hyp.len() as f64, reference.len() as f64);
    let lp = if c == r {
        1.0
    } else if c < r {
        (1.0 - r / c).exp()
    } else {
        (1.0 - c / r).exp()
    };
    let alignment = align(&hyp.tokens, &reference.tokens, params.window);
    let mut matched = 0usize;
    let mut npd = 0.0;
    for (i, j) in alignment.iter().enumerate() {
        if let Some(j) = j {
            matched += 1;
            npd += ((i + 1) as f64 / c - (j + 1) as f64 / r).abs();
        }
    }
    npd /= c;
    let npos_penal = (-npd).exp();
    let precision = matched as f64 / c;
    let recall = matched as f64 / r;
    let b2 = params.beta * params.beta;
    let hpr = if matched == 0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / (recall + b2 * precision)
    };
    let score = if lp == 0.0 || npos_penal == 0.0 || hpr == 0.0 {
        0.0
    } else {
        (params.w_lp + params.w_npos + params.w_hpr) / (params.w_lp / lp + params.w_npos / npos_penal + params.w_hpr / hpr)
    };
    Ok(HleporScore {
        score,
        lp,
        npos_penal,
        hpr,
        npd,
        precision,
        recall,
        matched,
    })
}

/// Corpus score: arithmetic mean of sentence scores (and of each sub-factor).
/// An empty hypothesis against a non-empty reference scores 0; an empty
/// reference is an error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusHlepor {
    pub score: f64,
    pub lp: f64,
    pub npos_penal: f64,
    pub hpr: f64,
    pub sentences: Vec<HleporScore>,
}

pub fn corpus_hlepor(hyps: &[TokenizedSegment], refs: &[TokenizedSegment], params: &HleporParams) -> Result<CorpusHlepor, MetricError> {
    if hyps.len() != refs.len() {
        return Err(MetricError::LengthMismatch {
            hyps: hyps.len(),
            refs: refs.len(),
        });
    }
    if hyps.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let sentences: Vec<HleporScore> = hyps
        .iter()
        .zip(refs)
        .map(|(h, r)| {
            if h.is_empty() && !r.is_empty() {
                params.validate()?;
                Ok(HleporScore {
                    score: 0.0,
                    lp: 0.0,
                    npos_penal: 0.0,
                    hpr: 0.0,
                    npd: 0.0,
                    precision: 0.0,
                    recall: 0.0,
                    matched: 0,
                })
            } else {
                hlepor(h, r, params)
            }
        })
        .collect::<Result<_, _>>()?;
    let n = sentences.len() as f64;
    let mean = |f: fn(&HleporScore) -> f64| sentences.iter().map(f).sum::<f64>() / n;
    Ok(CorpusHlepor {
        score: mean(|s| s.score),
        lp: mean(|s| s.lp),
        npos_penal: mean(|s| s.npos_penal),
        hpr: mean(|s| s.hpr),
        sentences,
    })
}
