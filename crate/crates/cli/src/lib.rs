//! The `dupliq` command line: every pipeline stage as a subcommand, driven
//! by an optional JSON experiment config with flag overrides. Each command
//! prints a table and writes a JSON report.

pub mod args;
mod commands;
pub mod config;
pub mod data;
mod error;
mod nn;
pub mod report;
pub mod reproduce;

use std::ffi::OsString;
use std::io::Write;

use clap::error::ErrorKind;
use clap::Parser;
use serde_json::Value;

pub use error::{CliError, CliResult};
pub use nn::separable_pairs;

use args::{Cli, Command};
use config::ExperimentConfig;

/// `git describe` of the build, after the crate version.
pub const VERSION: &str = env!("DUPLIQ_VERSION");

/// What a command produced: the report payload, the human-readable text
/// and, for checks that ran but did not pass, the failure message.
pub struct Outcome {
    pub result: Value,
    pub text: String,
    pub failure: Option<String>,
}

impl Outcome {
    pub fn ok(result: Value, text: String) -> Self {
        Outcome {
            result,
            text,
            failure: None,
        }
    }
}

fn dispatch(cfg: &mut ExperimentConfig, command: Command) -> CliResult<Outcome> {
    match command {
        Command::Stats { data, clean } => commands::stats(cfg, data, clean),
        Command::Clean { data, out } => commands::clean(cfg, data, out),
        Command::Split {
            data,
            test_fraction,
            train_out,
            test_out,
        } => commands::split(cfg, data, test_fraction, train_out, test_out),
        Command::Featurize {
            data,
            embeddings,
            out,
            drop,
            drop_low_importance,
        } => commands::featurize(cfg, data, embeddings, out, drop, drop_low_importance),
        Command::TfidfFit {
            data,
            out,
            analyzer,
            ngram,
            max_features,
        } => commands::tfidf_fit(cfg, data, out, analyzer, ngram, max_features),
        Command::TfidfFeaturize { model, data, out } => commands::tfidf_featurize(cfg, model, data, out),
        Command::Train {
            features,
            kind,
            set,
            out,
        } => commands::train_cmd(cfg, features, kind, set, out),
        Command::Eval { model, features } => commands::eval_cmd(cfg, model, features),
        Command::Importance { model, features } => commands::importance_cmd(cfg, model, features),
        Command::Grid {
            features,
            grid,
            val_fraction,
            out,
        } => commands::grid_cmd(cfg, features, grid, val_fraction, out),
        Command::NnBuild {
            arch,
            toy,
            vocab_size,
            data,
            glove,
            out,
        } => nn::build(
            cfg,
            nn::BuildArgs {
                arch,
                toy,
                vocab_size,
                data,
                glove,
                out,
            },
        ),
        Command::NnTrain {
            arch,
            toy,
            data,
            glove,
            epochs,
            batch_size,
            learning_rate,
            out,
        } => nn::train(
            cfg,
            nn::TrainArgs {
                arch,
                toy,
                data,
                glove,
                epochs,
                batch_size,
                learning_rate,
                out,
            },
        ),
        Command::NnGradcheck {
            arch,
            samples,
            tolerance,
        } => nn::gradcheck(cfg, arch, samples, tolerance),
        Command::Reproduce {
            table,
            data,
            embeddings,
            sample,
            test_fraction,
            kinds,
            max_features,
        } => reproduce::reproduce(
            cfg,
            reproduce::ReproduceArgs {
                table,
                data,
                embeddings,
                sample,
                test_fraction,
                kinds,
                max_features,
            },
        ),
    }
}

/// Runs one command line and returns the process exit code: 0 on success,
/// 1 for usage or contract errors, 2 for I/O errors.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    return 0;
                }
                _ => 1,
            };
            let _ = write!(err, "{}", e.render());
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    let mut cfg = match &cli.global.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    config::set(&mut cfg.seed, cli.global.seed);
    let name = match &cli.command {
        Command::Reproduce { table, .. } => format!("reproduce-{}", table.name()),
        other => other.name().to_string(),
    };
    let command_name = cli.command.name();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(CliError::Contract("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Contract(format!("thread pool: {e}")))?;
    let outcome = pool.install(|| dispatch(&mut cfg, cli.command))?;
    let report_path = cli.global.report.unwrap_or_else(|| report::default_path(&name));
    report::write(
        &report_path,
        &report::Report {
            tool: "dupliq",
            version: VERSION,
            command: command_name,
            config: &cfg,
            result: outcome.result,
        },
    )?;
    write!(out, "{}", outcome.text).map_err(|e| CliError::Io(format!("stdout: {e}")))?;
    match outcome.failure {
        Some(msg) => Err(CliError::Contract(msg)),
        None => Ok(()),
    }
}
