mod commands;
mod error;
mod rundir;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use commands::{data, eval, model, Ctx};
use settings::Layers;

/// Low-resource translation toolkit: corpus preparation, synthetic data,
/// fine-tuning experiments, evaluation and serving.
#[derive(Debug, Parser)]
#[command(name = "lowmt", version)]
struct Cli {
    /// TOML file with one section per subcommand, or a run's manifest.json to replay it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set epochs=10` or `--set bleu.max_n=2`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Output directory for this run [default: runs/<subcommand>].
    #[arg(long, global = true)]
    run_dir: Option<PathBuf>,
    #[arg(long, global = true, env = "LOWMT_REGISTRY", default_value = "registry")]
    registry: PathBuf,
    /// More logging (-v, -vv).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Only log errors.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic toy language pair (parallel data and a noisy mono dump).
    GenerateToy(data::GenerateToyArgs),
    /// Strip noise, anonymize and length-filter monolingual text.
    Clean(data::CleanArgs),
    /// Shuffle and cut a parallel corpus into train/dev/test.
    Split(data::SplitArgs),
    /// Concatenate parallel corpora.
    Merge(data::MergeArgs),
    /// Translate monolingual text with a fine-tuned model to make synthetic pairs.
    Backtranslate(data::BacktranslateArgs),
    /// Combine real and synthetic pairs by a mixture recipe.
    Mix(data::MixArgs),
    /// Fine-tune a base model and register the selected checkpoint.
    Train(model::TrainArgs),
    /// Score a model or a hypothesis file on a test set.
    Evaluate(eval::EvaluateArgs),
    /// Build a score table from evaluation results.
    Report(eval::ReportArgs),
    /// Add a model to the registry.
    Register(model::RegisterArgs),
    /// List registered models.
    Models(model::ModelsArgs),
    /// Run the translation HTTP server.
    Serve(model::ServeArgs),
}

fn init_logging(verbose: u8, quiet: bool) {
    let level = match (quiet, verbose) {
        (true, _) => "error",
        (false, 0) => "info",
        (false, 1) => "debug",
        _ => "trace",
    };
    let filter = EnvFilter::try_from_env("LOWMT_LOG").unwrap_or_else(|_| EnvFilter::new(level));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose, cli.quiet);
    let run = || -> error::Result<()> {
        let ctx = Ctx {
            layers: Layers::load(cli.config.as_deref(), &cli.set)?,
            registry: cli.registry.clone(),
            run_dir: cli.run_dir.clone(),
            argv: std::env::args().collect(),
        };
        match &cli.command {
            Command::GenerateToy(a) => data::generate_toy(&ctx, a),
            Command::Clean(a) => data::clean(&ctx, a),
            Command::Split(a) => data::split(&ctx, a),
            Command::Merge(a) => data::merge(&ctx, a),
            Command::Backtranslate(a) => data::backtranslate(&ctx, a),
            Command::Mix(a) => data::mix(&ctx, a),
            Command::Train(a) => model::train(&ctx, a),
            Command::Evaluate(a) => eval::evaluate(&ctx, a),
            Command::Report(a) => eval::report(&ctx, a),
            Command::Register(a) => model::register(&ctx, a),
            Command::Models(a) => model::models(&ctx, a),
            Command::Serve(a) => model::serve(&ctx, a),
        }
    };
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            tracing::error!(kind = ?e.kind, "{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn engine_args() {
        use lowmt_core::backends::Engine;
        let e = |s: &str| s.parse::<model::EngineArg>().map(|e| e.0);
        assert_eq!(e("copy"), Ok(Engine::Copy));
        assert_eq!(e("cipher:7"), Ok(Engine::Cipher { seed: 7 }));
        assert_eq!(
            e("command:python3 infer.py"),
            Ok(Engine::Command {
                program: "python3".into(),
                args: vec!["infer.py".into()]
            })
        );
        assert!(e("cipher:x").is_err());
        assert!(e("gpu").is_err());
    }
}
