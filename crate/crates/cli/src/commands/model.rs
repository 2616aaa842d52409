//! Model commands: training, registration, listing and serving.

use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{anyhow, Context};
use clap::Args;
use lowmt_core::adapter::Transport;
use lowmt_core::augment::model_switch_plan;
use lowmt_core::backends::{BaseModel, Engine, MixName, ModelDescriptor, ModelKey};
use lowmt_core::corpus;
use lowmt_core::experiment::{self, CheckpointPolicy, ExperimentConfig, ExternalTrainer, ToyTrainer, DEFAULT_EPOCHS, LONG_EPOCHS};
use lowmt_core::Direction;
use lowmt_server::ServerConfig;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{finish, print_json, require, require_file, Ctx};
use crate::error::{config, runtime, Result};
use crate::flags;

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// Base model family: opus, mbart, nllb or toy.
    #[arg(long)]
    pub base: Option<BaseModel>,
    #[arg(long)]
    pub direction: Option<Direction>,
    #[arg(long, conflicts_with = "long")]
    pub epochs: Option<u32>,
    /// Train for the long schedule (10 epochs).
    #[arg(long)]
    pub long: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = ["best-dev", "last-epoch"])]
    pub checkpoint: Option<String>,
    /// Mixture recipe of the training data (`1:1`, `h:h`, ...).
    #[arg(long)]
    pub mix: Option<MixName>,
    /// Model that generated the synthetic part of the training data.
    #[arg(long)]
    pub generator: Option<ModelKey>,
    /// Train `--base` on data generated by this fine-tuned model.
    #[arg(long)]
    pub switch_from: Option<ModelKey>,
    #[arg(long)]
    pub display_name: Option<String>,
}

/// How epochs are run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TrainerSpec {
    /// In-process token table learner.
    Toy {
        #[serde(default = "one")]
        epoch_fraction: f64,
    },
    /// One adapter call per epoch; the result is served by `inference`.
    External { adapter: Transport, inference: Engine },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub base: Option<BaseModel>,
    pub direction: Option<Direction>,
    pub epochs: u32,
    pub seed: u64,
    pub checkpoint: CheckpointPolicy,
    pub mix: Option<MixName>,
    pub generator: Option<ModelKey>,
    pub switch_from: Option<ModelKey>,
    pub display_name: Option<String>,
    pub trainer: TrainerSpec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            train: None,
            dev: None,
            base: None,
            direction: None,
            epochs: DEFAULT_EPOCHS,
            seed: 0,
            checkpoint: CheckpointPolicy::default(),
            mix: None,
            generator: None,
            switch_from: None,
            display_name: None,
            trainer: TrainerSpec::Toy { epoch_fraction: 1.0 },
        }
    }
}

pub fn train(ctx: &Ctx, args: &TrainArgs) -> Result<()> {
    let epochs = if args.long { Some(LONG_EPOCHS) } else { args.epochs };
    let mut cfg: TrainConfig = ctx.resolve(
        "train",
        &TrainConfig::default(),
        flags! {
            "train" => args.train.clone(),
            "dev" => args.dev.clone(),
            "base" => args.base,
            "direction" => args.direction,
            "epochs" => epochs,
            "seed" => args.seed,
            "checkpoint" => args.checkpoint.clone(),
            "mix" => args.mix,
            "generator" => args.generator,
            "switch_from" => args.switch_from,
            "display_name" => args.display_name.clone(),
        },
    )?;
    let train_path = require(cfg.train.clone(), "train")?;
    let dev_path = require(cfg.dev.clone(), "dev")?;
    let base = require(cfg.base, "base")?;
    let mut registry = ctx.create_registry()?;
    if let Some(gen) = cfg.switch_from {
        let plan = model_switch_plan(&registry, &gen, base, cfg.mix.unwrap_or(MixName::OneTo(1)))?;
        if cfg.direction.is_some_and(|d| d != plan.direction) {
            return Err(config(anyhow!("--direction conflicts with generator {gen}")));
        }
        tracing::info!(trainee = %plan.trainee_key(), "model switch plan");
        cfg.direction = Some(plan.direction);
        cfg.mix = Some(plan.mix);
        cfg.generator = Some(plan.generator);
    }
    let direction = require(cfg.direction, "direction")?;
    if let TrainerSpec::Toy { epoch_fraction } = cfg.trainer {
        if !(epoch_fraction > 0.0 && epoch_fraction <= 1.0) {
            return Err(config(anyhow!("trainer.epoch_fraction must be in (0, 1]")));
        }
    }
    let exp = ExperimentConfig {
        epochs: cfg.epochs,
        seed: cfg.seed,
        checkpoint: cfg.checkpoint,
        mix: cfg.mix,
        generator: cfg.generator,
        display_name: cfg.display_name.clone(),
        ..ExperimentConfig::new(base, direction, &train_path, &dev_path)
    };
    exp.validate()?;
    require_file(&train_path, "training corpus")?;
    require_file(&dev_path, "dev corpus")?;
    let train = corpus::load_parallel(&train_path)?;
    let dev = corpus::load_parallel(&dev_path)?;
    exp.category_for(&train)?;

    let mut run = ctx.start("train", &cfg)?;
    run.input(&train_path);
    run.input(&dev_path);
    let run_path = run.path().to_path_buf();
    let outcome = match &cfg.trainer {
        TrainerSpec::Toy { epoch_fraction } => {
            let mut t = ToyTrainer::with_fraction(*epoch_fraction);
            experiment::run_experiment(&exp, &train, &dev, &mut t, &mut registry, &run_path)
        }
        TrainerSpec::External { adapter, inference } => {
            let mut t = ExternalTrainer::new(adapter.clone(), run_path.join("work"), inference.clone());
            experiment::run_experiment(&exp, &train, &dev, &mut t, &mut registry, &run_path)
        }
    };
    let _ = run.output("curve.jsonl");
    let result = outcome.map_err(Into::into).map(|o| {
        let _ = run.output("experiment.json");
        run.external_output(&o.manifest);
        print_json(&json!({
            "model": o.descriptor.key(),
            "display_name": o.descriptor.display_name,
            "selected_epoch": o.selected_epoch,
            "dev_bleu": o.curve.records.iter().map(|r| r.dev_bleu).collect::<Vec<_>>(),
            "manifest": o.manifest,
        }));
    });
    finish(run, result)
}

/// Engine given on the command line: `copy`, `cipher:<seed>`, `table`,
/// `command:<program> [args...]` or `http:<url>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineArg(pub Engine);

impl FromStr for EngineArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let engine = match kind {
            "copy" if rest.is_empty() => Engine::Copy,
            "table" if rest.is_empty() => Engine::Table,
            "cipher" => Engine::Cipher {
                seed: rest.parse().map_err(|_| format!("cipher needs a numeric seed, got `{rest}`"))?,
            },
            "command" => {
                let mut parts = rest.split_whitespace().map(str::to_string);
                let program = parts.next().ok_or("command needs a program")?;
                Engine::Command { program, args: parts.collect() }
            }
            "http" if !rest.is_empty() => Engine::Http { url: rest.to_string() },
            _ => return Err(format!("unknown engine `{s}`; expected copy, table, cipher:N, command:PROGRAM or http:URL")),
        };
        Ok(EngineArg(engine))
    }
}

#[derive(Debug, Args)]
pub struct RegisterArgs {
    #[arg(long)]
    pub key: Option<ModelKey>,
    #[arg(long)]
    pub engine: Option<EngineArg>,
    /// Artifact path (table file or weights directory).
    #[arg(long)]
    pub path: Option<PathBuf>,
    #[arg(long)]
    pub display_name: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegisterConfig {
    pub key: Option<ModelKey>,
    pub engine: Engine,
    pub path: Option<PathBuf>,
    pub display_name: Option<String>,
}

impl Default for RegisterConfig {
    fn default() -> Self {
        Self {
            key: None,
            engine: Engine::Copy,
            path: None,
            display_name: None,
        }
    }
}

pub fn register(ctx: &Ctx, args: &RegisterArgs) -> Result<()> {
    let cfg: RegisterConfig = ctx.resolve(
        "register",
        &RegisterConfig::default(),
        flags! {
            "key" => args.key,
            "engine" => args.engine.clone().map(|e| e.0),
            "path" => args.path.clone(),
            "display_name" => args.display_name.clone(),
        },
    )?;
    let key = require(cfg.key, "key")?;
    if let Some(path) = &cfg.path {
        if !path.exists() {
            return Err(config(anyhow!("artifact {} does not exist", path.display())));
        }
    } else if cfg.engine == Engine::Table {
        return Err(config(anyhow!("table engines need --path")));
    }
    let mut registry = ctx.create_registry()?;
    let mut descriptor = ModelDescriptor::new(key, cfg.engine.clone());
    if let Some(path) = &cfg.path {
        descriptor.path = std::path::absolute(path).with_context(|| format!("cannot resolve {}", path.display())).map_err(config)?;
    }
    if let Some(name) = &cfg.display_name {
        descriptor.display_name = name.clone();
    }
    let mut run = ctx.start("register", &cfg)?;
    let result = registry.register(descriptor).map_err(Into::into).map(|manifest| {
        run.external_output(&manifest);
        print_json(&json!({ "model": key, "manifest": manifest }));
    });
    finish(run, result)
}

#[derive(Debug, Args)]
pub struct ModelsArgs {
    #[arg(long)]
    pub base: Option<BaseModel>,
    #[arg(long)]
    pub source: Option<lowmt_core::Lang>,
    #[arg(long)]
    pub json: bool,
}

pub fn models(ctx: &Ctx, args: &ModelsArgs) -> Result<()> {
    let registry = ctx.open_registry()?;
    let found = registry.filter(args.base, args.source);
    if args.json {
        print_json(&found);
    } else {
        for d in found {
            println!("{:<40} {:<28} {}", d.key().to_string(), d.display_name, engine_label(&d.engine));
        }
    }
    Ok(())
}

fn engine_label(e: &Engine) -> String {
    match e {
        Engine::Copy => "copy".into(),
        Engine::Cipher { seed } => format!("cipher:{seed}"),
        Engine::Table => "table".into(),
        Engine::Command { program, .. } => format!("command:{program}"),
        Engine::Http { url } => format!("http:{url}"),
    }
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub bind: Option<String>,
    /// Maximum number of models kept in memory.
    #[arg(long)]
    pub capacity: Option<usize>,
}

pub fn serve(ctx: &Ctx, args: &ServeArgs) -> Result<()> {
    let defaults = ServerConfig {
        registry: ctx.registry.clone(),
        ..ServerConfig::default()
    };
    let cfg: ServerConfig = ctx.resolve("serve", &defaults, flags! { "bind" => args.bind.clone(), "capacity" => args.capacity })?;
    cfg.validate().map_err(config)?;
    tracing::info!(config = %serde_json::to_value(&cfg).expect("config serializes"), "effective config");
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("cannot start runtime")
        .map_err(runtime)?;
    rt.block_on(lowmt_server::serve(cfg, |addr| {
        eprintln!("listening on http://{addr}");
    }))
    .map_err(runtime)
}
