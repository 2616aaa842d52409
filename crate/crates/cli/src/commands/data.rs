//! Corpus commands: toy data, cleaning, splitting, merging, back-translation
//! and mixing.

use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, Context};
use clap::Args;
use lowmt_core::augment::{self, BacktranslateOptions, MixSpec, SyntheticCorpus};
use lowmt_core::backends::{self, DecodingOptions, ModelKey};
use lowmt_core::corpus::{self, CleaningConfig, SplitSizes};
use lowmt_core::toy::{ToyLanguage, DEFAULT_VOCAB};
use lowmt_core::Lang;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{finish, print_json, require, require_file, Ctx};
use crate::error::{config, runtime, Result};
use crate::flags;

#[derive(Debug, Args)]
pub struct GenerateToyArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub vocab: Option<usize>,
    /// Number of real parallel pairs.
    #[arg(long)]
    pub pairs: Option<usize>,
    /// Number of valid sentences in the raw monolingual dump.
    #[arg(long)]
    pub mono: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerateToyConfig {
    pub seed: u64,
    pub vocab: usize,
    pub pairs: usize,
    pub mono: usize,
}

impl Default for GenerateToyConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            vocab: DEFAULT_VOCAB,
            pairs: 500,
            mono: 2000,
        }
    }
}

pub fn generate_toy(ctx: &Ctx, args: &GenerateToyArgs) -> Result<()> {
    let cfg: GenerateToyConfig = ctx.resolve(
        "generate-toy",
        &GenerateToyConfig::default(),
        flags! { "seed" => args.seed, "vocab" => args.vocab, "pairs" => args.pairs, "mono" => args.mono },
    )?;
    if cfg.vocab < 10 {
        return Err(config(anyhow!("vocab must be at least 10")));
    }
    let mut run = ctx.start("generate-toy", &cfg)?;
    let result = (|| -> Result<()> {
        let lang = ToyLanguage::new(cfg.seed, cfg.vocab);
        let real = lang.parallel("real", cfg.pairs, 0);
        let real_path = run.corpus_output("real.jsonl");
        corpus::save(&real, &real_path)?;
        let raw_path = run.output("mono_raw.txt");
        let mut raw = lang.raw_dump(cfg.mono, 1).join("\n");
        raw.push('\n');
        fs::write(&raw_path, raw).with_context(|| format!("cannot write {}", raw_path.display())).map_err(runtime)?;
        print_json(&json!({
            "real": real_path,
            "real_pairs": real.len(),
            "mono_raw": raw_path,
            "cipher_seed": lang.cipher().seed(),
        }));
        Ok(())
    })();
    finish(run, result)
}

#[derive(Debug, Args)]
pub struct CleanArgs {
    /// Raw text (one sentence per line) or a monolingual JSONL corpus.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub lang: Option<Lang>,
    /// TOML file with cleaning rules (`min_cjk_chars`, `anonymize`, `noise`).
    #[arg(long)]
    pub rules: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CleanConfig {
    pub input: Option<PathBuf>,
    pub lang: Lang,
    pub rules: CleaningConfig,
}

impl Default for CleanConfig {
    fn default() -> Self {
        Self {
            input: None,
            lang: Lang::Yue,
            rules: CleaningConfig::default(),
        }
    }
}

pub fn clean(ctx: &Ctx, args: &CleanArgs) -> Result<()> {
    let rules = match &args.rules {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read rules {}", path.display())).map_err(config)?;
            Some(toml::from_str::<toml::Table>(&text).with_context(|| format!("invalid rules {}", path.display())).map_err(config)?)
        }
        None => None,
    };
    let cfg: CleanConfig = ctx.resolve(
        "clean",
        &CleanConfig::default(),
        flags! { "input" => args.input.clone(), "lang" => args.lang, "rules" => rules },
    )?;
    let input = require(cfg.input.clone(), "input")?;
    require_file(&input, "input")?;
    let cleaner = corpus::Cleaner::new(cfg.rules.clone())?;
    let raw = if input.extension().is_some_and(|e| e == "jsonl") {
        corpus::load_mono(&input)?
    } else {
        corpus::load_raw_lines(&input, cfg.lang)?
    };

    let mut run = ctx.start("clean", &cfg)?;
    run.input(&input);
    let result = (|| -> Result<()> {
        let (cleaned, report) = cleaner.clean(&raw)?;
        corpus::save(&cleaned, &run.corpus_output("clean.jsonl"))?;
        let report_path = run.output("cleaning_report.json");
        fs::write(&report_path, serde_json::to_string_pretty(&report).expect("report serializes") + "\n")
            .with_context(|| format!("cannot write {}", report_path.display()))
            .map_err(runtime)?;
        print_json(&report);
        Ok(())
    })();
    finish(run, result)
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Train, dev and test sizes, e.g. `38000,3000,3000`.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub sizes: Option<Vec<usize>>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub input: Option<PathBuf>,
    pub sizes: Vec<usize>,
    pub seed: u64,
}

pub fn split(ctx: &Ctx, args: &SplitArgs) -> Result<()> {
    let cfg: SplitConfig = ctx.resolve(
        "split",
        &SplitConfig::default(),
        flags! { "input" => args.input.clone(), "sizes" => args.sizes.clone(), "seed" => args.seed },
    )?;
    let input = require(cfg.input.clone(), "input")?;
    let [train, dev, test] = cfg.sizes[..] else {
        return Err(config(anyhow!("sizes must list exactly three numbers (train,dev,test), got {:?}", cfg.sizes)));
    };
    require_file(&input, "input")?;
    let corpus = corpus::load_parallel(&input)?;
    let (a, b, c) = corpus::split(&corpus, SplitSizes::new(train, dev, test), cfg.seed)?;

    let mut run = ctx.start("split", &cfg)?;
    run.input(&input);
    let result = (|| -> Result<()> {
        for (name, part) in [("train.jsonl", &a), ("dev.jsonl", &b), ("test.jsonl", &c)] {
            corpus::save(part, &run.corpus_output(name))?;
        }
        print_json(&json!({ "train": a.len(), "dev": b.len(), "test": c.len() }));
        Ok(())
    })();
    finish(run, result)
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    #[arg(long, num_args = 2..)]
    pub inputs: Option<Vec<PathBuf>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MergeConfig {
    pub inputs: Vec<PathBuf>,
}

pub fn merge(ctx: &Ctx, args: &MergeArgs) -> Result<()> {
    let cfg: MergeConfig = ctx.resolve("merge", &MergeConfig::default(), flags! { "inputs" => args.inputs.clone() })?;
    if cfg.inputs.len() < 2 {
        return Err(config(anyhow!("merge needs at least two inputs")));
    }
    for p in &cfg.inputs {
        require_file(p, "input")?;
    }
    let corpora = cfg.inputs.iter().map(|p| corpus::load_parallel(p)).collect::<Result<Vec<_>, _>>()?;
    let mut merged = corpora[0].clone();
    for next in &corpora[1..] {
        merged = corpus::merge(&merged, next)?;
    }

    let mut run = ctx.start("merge", &cfg)?;
    for p in &cfg.inputs {
        run.input(p);
    }
    let result = (|| -> Result<()> {
        corpus::save(&merged, &run.corpus_output("merged.jsonl"))?;
        print_json(&json!({ "inputs": corpora.iter().map(|c| c.len()).collect::<Vec<_>>(), "merged": merged.len() }));
        Ok(())
    })();
    finish(run, result)
}

#[derive(Debug, Args)]
pub struct BacktranslateArgs {
    /// Monolingual JSONL corpus in the generator's source language.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Registered generator, e.g. `mbart/ft/yue-en`.
    #[arg(long)]
    pub model: Option<ModelKey>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Model instances translating batches in parallel.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BacktranslateConfig {
    pub input: Option<PathBuf>,
    pub model: Option<ModelKey>,
    pub batch_size: usize,
    pub workers: usize,
    pub decoding: DecodingOptions,
}

impl Default for BacktranslateConfig {
    fn default() -> Self {
        Self {
            input: None,
            model: None,
            batch_size: BacktranslateOptions::default().batch_size,
            workers: 1,
            decoding: DecodingOptions::default(),
        }
    }
}

pub fn backtranslate(ctx: &Ctx, args: &BacktranslateArgs) -> Result<()> {
    let cfg: BacktranslateConfig = ctx.resolve(
        "backtranslate",
        &BacktranslateConfig::default(),
        flags! { "input" => args.input.clone(), "model" => args.model, "batch_size" => args.batch_size, "workers" => args.workers },
    )?;
    let input = require(cfg.input.clone(), "input")?;
    let key = require(cfg.model, "model")?;
    if cfg.workers == 0 || cfg.batch_size == 0 {
        return Err(config(anyhow!("workers and batch_size must be positive")));
    }
    require_file(&input, "input")?;
    let registry = ctx.open_registry()?;
    let descriptor = registry
        .find(&key)
        .ok_or_else(|| config(anyhow!("model {key} is not registered in {}", registry.root().display())))?
        .clone();
    let mono = corpus::load_mono(&input)?;
    if let Some(lang) = mono.lang().filter(|l| *l != key.direction.source) {
        return Err(config(anyhow!("input is {lang} but {key} translates from {}", key.direction.source)));
    }

    let mut run = ctx.start("backtranslate", &cfg)?;
    run.input(&input);
    let checkpoint = run.path().join("synthetic.partial.jsonl");
    let result = (|| -> Result<()> {
        let mut workers = (0..cfg.workers).map(|_| backends::load(&descriptor)).collect::<Result<Vec<_>, _>>()?;
        let opts = BacktranslateOptions {
            batch_size: cfg.batch_size,
            decoding: cfg.decoding,
            checkpoint: Some(checkpoint.clone()),
        };
        let synthetic = augment::backtranslate(&mono, &mut workers, &opts).inspect_err(|e| {
            if let augment::AugmentError::Backend { resume: Some(token), .. } = e {
                tracing::error!(
                    completed = token.completed,
                    partial = %token.partial.display(),
                    "back-translation stopped; rerun the same command with the same run directory to resume"
                );
            }
        })?;
        corpus::save(synthetic.corpus(), &run.corpus_output("synthetic.jsonl"))?;
        print_json(&json!({ "generator": synthetic.generator(), "pairs": synthetic.len() }));
        Ok(())
    })();
    finish(run, result)
}

#[derive(Debug, Args)]
pub struct MixArgs {
    #[arg(long)]
    pub real: Option<PathBuf>,
    #[arg(long)]
    pub synthetic: Option<PathBuf>,
    /// `1:k`, `h:h` or `custom:<real fraction>:<synthetic multiple>`.
    #[arg(long)]
    pub spec: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MixConfig {
    pub real: Option<PathBuf>,
    pub synthetic: Option<PathBuf>,
    pub spec: String,
    pub seed: u64,
}

impl Default for MixConfig {
    fn default() -> Self {
        Self {
            real: None,
            synthetic: None,
            spec: "1:1".into(),
            seed: 0,
        }
    }
}

pub fn mix(ctx: &Ctx, args: &MixArgs) -> Result<()> {
    let cfg: MixConfig = ctx.resolve(
        "mix",
        &MixConfig::default(),
        flags! { "real" => args.real.clone(), "synthetic" => args.synthetic.clone(), "spec" => args.spec.clone(), "seed" => args.seed },
    )?;
    let real_path = require(cfg.real.clone(), "real")?;
    let syn_path = require(cfg.synthetic.clone(), "synthetic")?;
    let mut spec: MixSpec = cfg.spec.parse()?;
    spec.seed = cfg.seed;
    require_file(&real_path, "real corpus")?;
    require_file(&syn_path, "synthetic corpus")?;
    let real = corpus::load_parallel(&real_path)?;
    let synthetic = SyntheticCorpus::from_loaded(corpus::load_parallel(&syn_path)?)?;
    let mixed = augment::mix(&real, &synthetic, &spec)?;

    let mut run = ctx.start("mix", &cfg)?;
    run.input(&real_path);
    run.input(&syn_path);
    let result = (|| -> Result<()> {
        corpus::save(&mixed, &run.corpus_output("mixed.jsonl"))?;
        let (r, s) = spec.counts(real.len());
        print_json(&json!({ "spec": cfg.spec, "real": r, "synthetic": s, "mixed": mixed.len() }));
        Ok(())
    })();
    finish(run, result)
}
