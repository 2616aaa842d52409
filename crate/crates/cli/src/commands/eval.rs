//! Scoring systems on a test set and assembling score tables.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, Context};
use clap::{Args, ValueEnum};
use lowmt_core::adapter::Transport;
use lowmt_core::backends::{self, DecodingOptions, ModelKey, TranslationRequest};
use lowmt_core::corpus::{self, ParallelCorpus};
use lowmt_core::metrics::{
    build_score_table, corpus_bleu_text, corpus_hlepor, embedding_metric_score, BleuConfig, EmbeddingScorer, ExternalScorer, HleporParams,
    Metric, MetricValue, Scheme, ScoreRow, Smoothing,
};
use serde::{Deserialize, Serialize};

use super::{finish, print_json, require, require_file, Ctx};
use crate::error::{config, data, runtime, Result};
use crate::flags;

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Registered model to translate the test set with.
    #[arg(long, conflicts_with = "hypotheses")]
    pub model: Option<ModelKey>,
    /// Precomputed system outputs, one line per test pair.
    #[arg(long)]
    pub hypotheses: Option<PathBuf>,
    /// Row label in score tables.
    #[arg(long)]
    pub system: Option<String>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Table cluster the row belongs to.
    #[arg(long)]
    pub cluster: Option<u32>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub metrics: Option<Vec<Metric>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateConfig {
    pub model: Option<ModelKey>,
    pub hypotheses: Option<PathBuf>,
    pub system: Option<String>,
    pub test: Option<PathBuf>,
    pub cluster: u32,
    pub metrics: Vec<Metric>,
    pub batch_size: usize,
    pub decoding: DecodingOptions,
    pub bleu: BleuConfig,
    pub hlepor: HleporParams,
    /// Adapter for BERTScore; unset renders as n/a.
    pub bertscore: Option<Transport>,
    /// Adapter for COMET; unset renders as n/a.
    pub comet: Option<Transport>,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            model: None,
            hypotheses: None,
            system: None,
            test: None,
            cluster: 1,
            metrics: Metric::ALL.to_vec(),
            batch_size: 64,
            decoding: DecodingOptions::default(),
            bleu: BleuConfig::default(),
            hlepor: HleporParams::default(),
            bertscore: None,
            comet: None,
        }
    }
}

fn smoothing_label(s: Smoothing) -> String {
    match s {
        Smoothing::None => "none".into(),
        Smoothing::Floor { epsilon } => format!("floor({epsilon})"),
        Smoothing::Exp => "exp".into(),
    }
}

/// Computes the requested metrics. Embedding metrics without an adapter, or
/// whose adapter fails, are recorded as `None` with a note.
pub fn score_row(cfg: &EvaluateConfig, system: String, model: Option<ModelKey>, hyps: &[String], test: &ParallelCorpus) -> Result<ScoreRow> {
    let direction = test.direction().ok_or_else(|| data(anyhow!("test corpus is empty")))?;
    let scheme = Scheme::for_lang(direction.target);
    let refs: Vec<String> = test.iter().map(|p| p.target.clone()).collect();
    let mut scores = BTreeMap::new();
    let mut notes = BTreeMap::new();
    notes.insert("tokenize".to_string(), scheme.id().to_string());
    notes.insert("segments".to_string(), refs.len().to_string());
    for metric in &cfg.metrics {
        let value = match metric {
            Metric::SacreBleu => {
                let b = corpus_bleu_text(hyps, &refs, scheme, &cfg.bleu)?;
                notes.insert("bleu".into(), format!("max_n={} smoothing={}", cfg.bleu.max_n, smoothing_label(cfg.bleu.smoothing)));
                Some(b.score)
            }
            Metric::Hlepor => {
                let h: Vec<_> = hyps.iter().map(|t| scheme.tokenize(t)).collect();
                let r: Vec<_> = refs.iter().map(|t| scheme.tokenize(t)).collect();
                Some(corpus_hlepor(&h, &r, &cfg.hlepor)?.score)
            }
            Metric::BertScore | Metric::Comet => {
                let transport = if *metric == Metric::BertScore { &cfg.bertscore } else { &cfg.comet };
                let mut scorer = transport.clone().map(|t| ExternalScorer::new(metric.column(), t));
                let value = embedding_metric_score(scorer.as_mut().map(|s| s as &mut dyn EmbeddingScorer), hyps, &refs);
                let key = metric.column().to_ascii_lowercase();
                match &value {
                    MetricValue::Available(s) => {
                        notes.insert(key, format!("adapter={} version={}", s.adapter, s.version.as_deref().unwrap_or("unknown")));
                    }
                    MetricValue::Unavailable { reason } => {
                        notes.insert(key, format!("unavailable: {reason}"));
                    }
                }
                value.corpus()
            }
        };
        scores.insert(*metric, value);
    }
    Ok(ScoreRow {
        system,
        model,
        cluster: cfg.cluster,
        scores,
        notes,
    })
}

pub fn evaluate(ctx: &Ctx, args: &EvaluateArgs) -> Result<()> {
    let cfg: EvaluateConfig = ctx.resolve(
        "evaluate",
        &EvaluateConfig::default(),
        flags! {
            "model" => args.model,
            "hypotheses" => args.hypotheses.clone(),
            "system" => args.system.clone(),
            "test" => args.test.clone(),
            "cluster" => args.cluster,
            "metrics" => args.metrics.clone(),
        },
    )?;
    let test_path = require(cfg.test.clone(), "test")?;
    if cfg.metrics.is_empty() {
        return Err(config(anyhow!("no metrics requested")));
    }
    if cfg.batch_size == 0 {
        return Err(config(anyhow!("batch_size must be positive")));
    }
    cfg.hlepor.validate()?;
    require_file(&test_path, "test corpus")?;
    let test = corpus::load_parallel(&test_path)?;
    let direction = test.direction().ok_or_else(|| data(anyhow!("test corpus {} is empty", test_path.display())))?;

    enum Source {
        Model(backends::ModelDescriptor),
        File(PathBuf),
    }
    let source = match (cfg.model, &cfg.hypotheses) {
        (Some(key), None) => {
            let registry = ctx.open_registry()?;
            let d = registry
                .find(&key)
                .ok_or_else(|| config(anyhow!("model {key} is not registered in {}", registry.root().display())))?;
            if d.direction != direction {
                return Err(config(anyhow!("{key} translates {} but the test set is {direction}", d.direction)));
            }
            Source::Model(d.clone())
        }
        (None, Some(path)) => {
            require_file(path, "hypotheses")?;
            Source::File(path.clone())
        }
        _ => return Err(config(anyhow!("give exactly one of `model` or `hypotheses`"))),
    };

    let mut run = ctx.start("evaluate", &cfg)?;
    run.input(&test_path);
    let result = (|| -> Result<()> {
        let (hyps, system, model) = match &source {
            Source::Model(d) => {
                let mut loaded = backends::load(d)?;
                let mut hyps = Vec::with_capacity(test.len());
                let sources: Vec<String> = test.iter().map(|p| p.source.clone()).collect();
                for chunk in sources.chunks(cfg.batch_size) {
                    let mut req = TranslationRequest::new(chunk.to_vec(), direction);
                    req.options = cfg.decoding;
                    hyps.extend(loaded.translate_batch(&req)?.sentences);
                }
                let path = run.output("hypotheses.txt");
                let mut text = hyps.join("\n");
                text.push('\n');
                fs::write(&path, text).with_context(|| format!("cannot write {}", path.display())).map_err(runtime)?;
                let system = cfg.system.clone().unwrap_or_else(|| d.display_name.clone());
                (hyps, system, Some(d.key()))
            }
            Source::File(path) => {
                run.input(path);
                let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display())).map_err(runtime)?;
                let hyps: Vec<String> = text.lines().map(str::to_string).collect();
                if hyps.len() != test.len() {
                    return Err(data(anyhow!("{} has {} lines but the test set has {} pairs", path.display(), hyps.len(), test.len())));
                }
                let system = cfg.system.clone().unwrap_or_else(|| {
                    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "system".into())
                });
                (hyps, system, None)
            }
        };
        let row = score_row(&cfg, system, model, &hyps, &test)?;
        let path = run.output("scores.json");
        fs::write(&path, serde_json::to_string_pretty(&row).expect("row serializes") + "\n")
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(runtime)?;
        print_json(&row);
        Ok(())
    })();
    finish(run, result)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// `scores.json` files written by `evaluate`.
    #[arg(long, num_args = 1..)]
    pub scores: Option<Vec<PathBuf>>,
    /// What to print on stdout; both forms are always written.
    #[arg(long)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportConfig {
    pub scores: Vec<PathBuf>,
    pub format: Format,
}

pub fn report(ctx: &Ctx, args: &ReportArgs) -> Result<()> {
    let cfg: ReportConfig = ctx.resolve("report", &ReportConfig::default(), flags! { "scores" => args.scores.clone(), "format" => args.format })?;
    if cfg.scores.is_empty() {
        return Err(config(anyhow!("report needs at least one scores file")));
    }
    let mut rows = Vec::with_capacity(cfg.scores.len());
    for p in &cfg.scores {
        require_file(p, "scores file")?;
        let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display())).map_err(runtime)?;
        let row: ScoreRow = serde_json::from_str(&text).with_context(|| format!("{} is not a score row", p.display())).map_err(data)?;
        rows.push(row);
    }
    let table = build_score_table(rows)?;

    let mut run = ctx.start("report", &cfg)?;
    for p in &cfg.scores {
        run.input(p);
    }
    let result = (|| -> Result<()> {
        let text = table.render_text();
        let json = serde_json::to_string_pretty(&table).expect("table serializes");
        for (name, body) in [("report.txt", &text), ("report.json", &json)] {
            let path = run.output(name);
            fs::write(&path, format!("{}\n", body.trim_end()))
                .with_context(|| format!("cannot write {}", path.display()))
                .map_err(runtime)?;
        }
        match cfg.format {
            Format::Text => print!("{text}"),
            Format::Json => println!("{json}"),
        }
        Ok(())
    })();
    finish(run, result)
}
