//! Noise stripping, anonymization and length filtering for scraped text.
//!
//! Each sentence goes through one pass of: NFC normalization, noise rules in
//! listed order, anonymization rules in listed order, whitespace collapsing.
//! Passes repeat until the text stops changing, so a stripped fragment can
//! never leave behind a new match and cleaning is idempotent. The surviving
//! text is then checked against drop rules and the CJK length threshold.

use std::collections::HashSet;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{normalize, CorpusError, MonoCorpus, Result, Sentence};

/// Upper bound on fixpoint passes; every pass that changes the text shrinks it.
const MAX_PASSES: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternRule {
    pub name: String,
    pub pattern: String,
}

impl PatternRule {
    pub fn new(name: &str, pattern: &str) -> Self {
        Self {
            name: name.into(),
            pattern: pattern.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "lowercase", deny_unknown_fields)]
pub enum NoiseRule {
    /// Remove every match from the sentence.
    Strip { name: String, pattern: String },
    /// Drop sentences whose cleaned text matches.
    Drop { name: String, pattern: String },
    /// Keep only the first occurrence of each cleaned text.
    Dedup,
}

impl NoiseRule {
    pub fn name(&self) -> &str {
        match self {
            NoiseRule::Strip { name, .. } | NoiseRule::Drop { name, .. } => name,
            NoiseRule::Dedup => "dedup",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CleaningConfig {
    pub min_cjk_chars: usize,
    pub anonymize: Vec<PatternRule>,
    pub noise: Vec<NoiseRule>,
}

impl Default for CleaningConfig {
    /// Rules for forum dumps: post markup, links, emoji shortcodes, user
    /// ids, @-handles and quote headers.
    fn default() -> Self {
        Self {
            min_cjk_chars: 10,
            anonymize: vec![
                PatternRule::new("user-id-prefix", r"ID\d+[:：]"),
                PatternRule::new("at-handle", r"@[A-Za-z0-9_.\-]+"),
                PatternRule::new("quote-header", r"(?:引用|回覆)\s*#\d+[^:：\n]{0,20}[:：]"),
            ],
            noise: vec![
                NoiseRule::Strip {
                    name: "html-tag".into(),
                    pattern: r"<[^<>]*>".into(),
                },
                NoiseRule::Strip {
                    name: "bbcode".into(),
                    pattern: r"\[/?[A-Za-z]+(?:=[^\]]*)?\]".into(),
                },
                NoiseRule::Strip {
                    name: "url".into(),
                    pattern: r"(?:https?://|www\.)\S+".into(),
                },
                NoiseRule::Strip {
                    name: "emoji-shortcode".into(),
                    pattern: r"#[a-z_]+#".into(),
                },
                NoiseRule::Strip {
                    name: "control-char".into(),
                    pattern: r"[\x00-\x08\x0B\x0C\x0E-\x1F\x7F]".into(),
                },
                NoiseRule::Drop {
                    name: "removed-post".into(),
                    pattern: r"^(?:此回覆已被刪除|此回覆已被封鎖|Reply deleted)".into(),
                },
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub input_count: usize,
    pub kept_count: usize,
    pub dropped_short: usize,
    pub dropped_noise: usize,
    /// Kept sentences that had at least one anonymization match removed.
    pub anonymized_count: usize,
}

/// CJK Unified Ideographs, basic block and Extension A.
pub fn is_cjk(c: char) -> bool {
    matches!(c, '\u{4E00}'..='\u{9FFF}' | '\u{3400}'..='\u{4DBF}')
}

pub fn count_cjk(text: &str) -> usize {
    text.chars().filter(|&c| is_cjk(c)).count()
}

enum Step {
    Strip(Regex),
    Drop(Regex),
}

/// A validated, compiled [`CleaningConfig`].
pub struct Cleaner {
    config: CleaningConfig,
    steps: Vec<Step>,
    anonymizers: Vec<Regex>,
    dedup: bool,
    whitespace: Regex,
}

fn compile(name: &str, pattern: &str) -> Result<Regex> {
    let re = Regex::new(pattern).map_err(|e| CorpusError::InvalidRule {
        rule: name.to_string(),
        reason: e.to_string(),
    })?;
    if re.is_match("") {
        return Err(CorpusError::InvalidRule {
            rule: name.to_string(),
            reason: "pattern matches the empty string".into(),
        });
    }
    Ok(re)
}

enum Outcome {
    Kept { text: String, anonymized: bool },
    Short,
    Noise,
}

impl Cleaner {
    pub fn new(config: CleaningConfig) -> Result<Self> {
        let mut steps = Vec::new();
        let mut dedup = false;
        for rule in &config.noise {
            match rule {
                NoiseRule::Strip { name, pattern } => steps.push(Step::Strip(compile(name, pattern)?)),
                NoiseRule::Drop { name, pattern } => steps.push(Step::Drop(compile(name, pattern)?)),
                NoiseRule::Dedup => dedup = true,
            }
        }
        let anonymizers = config
            .anonymize
            .iter()
            .map(|r| compile(&r.name, &r.pattern))
            .collect::<Result<_>>()?;
        Ok(Self {
            config,
            steps,
            anonymizers,
            dedup,
            whitespace: Regex::new(r"\s+").expect("static regex"),
        })
    }

    pub fn config(&self) -> &CleaningConfig {
        &self.config
    }

    /// Patterns whose matches are guaranteed absent from cleaned output.
    pub fn anonymizers(&self) -> &[Regex] {
        &self.anonymizers
    }

    fn pass(&self, text: &str, anonymized: &mut bool) -> String {
        let mut s = normalize(text);
        for step in &self.steps {
            if let Step::Strip(re) = step {
                s = re.replace_all(&s, "").into_owned();
            }
        }
        for re in &self.anonymizers {
            if re.is_match(&s) {
                *anonymized = true;
                s = re.replace_all(&s, "").into_owned();
            }
        }
        self.whitespace.replace_all(&s, " ").trim().to_string()
    }

    fn clean_one(&self, text: &str) -> Outcome {
        let mut anonymized = false;
        let mut current = text.to_string();
        for _ in 0..MAX_PASSES {
            let next = self.pass(&current, &mut anonymized);
            if next == current {
                break;
            }
            current = next;
        }
        let dropped = self.steps.iter().any(|s| matches!(s, Step::Drop(re) if re.is_match(&current)));
        if dropped || current.is_empty() {
            Outcome::Noise
        } else if count_cjk(&current) < self.config.min_cjk_chars {
            Outcome::Short
        } else {
            Outcome::Kept { text: current, anonymized }
        }
    }

    pub fn clean(&self, raw: &MonoCorpus) -> Result<(MonoCorpus, CleaningReport)> {
        let mut report = CleaningReport {
            input_count: raw.len(),
            ..Default::default()
        };
        let mut seen = HashSet::new();
        let mut kept = Vec::new();
        for sentence in raw.iter() {
            match self.clean_one(&sentence.text) {
                Outcome::Short => report.dropped_short += 1,
                Outcome::Noise => report.dropped_noise += 1,
                Outcome::Kept { text, anonymized } => {
                    if self.dedup && !seen.insert(text.clone()) {
                        report.dropped_noise += 1;
                        continue;
                    }
                    report.anonymized_count += usize::from(anonymized);
                    kept.push(Sentence {
                        id: sentence.id.clone(),
                        text,
                        lang: sentence.lang,
                    });
                }
            }
        }
        report.kept_count = kept.len();
        let rules: Vec<&str> = self
            .config
            .noise
            .iter()
            .map(NoiseRule::name)
            .chain(self.config.anonymize.iter().map(|r| r.name.as_str()))
            .collect();
        let detail = format!(
            "min_cjk_chars={} rules=[{}] kept={}/{} short={} noise={} anonymized={}",
            self.config.min_cjk_chars,
            rules.join(","),
            report.kept_count,
            report.input_count,
            report.dropped_short,
            report.dropped_noise,
            report.anonymized_count
        );
        let out = raw.derive(format!("{}.clean", raw.name()), None, "clean", detail, kept)?;
        Ok((out, report))
    }
}

/// Validates `cfg` and cleans `raw`.
pub fn clean(raw: &MonoCorpus, cfg: &CleaningConfig) -> Result<(MonoCorpus, CleaningReport)> {
    Cleaner::new(cfg.clone())?.clean(raw)
}
