//! The `molgen` command line.
//!
//! Subcommands that produce files write them under `--out` next to a
//! `manifest.json`. Exit status is 0 on success, 1 on a usage error and 2 on
//! a data error (unreadable input, rejected molecules, failed filters).

mod args;
mod bench;
mod filter;
mod generate;
mod ingest;
mod manifest;
mod serve;
mod train;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

pub use bench::{BenchMode, Scenario};
pub use manifest::RunManifest;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

pub(crate) fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

pub(crate) fn usage_err(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "molgen", version, about = "Train property models and enumerate molecules that meet them")]
pub struct Cli {
    /// Print machine-readable JSON on stdout instead of a summary.
    #[arg(long, global = true)]
    pub json: bool,
    /// JSON file of settings; its fields take precedence over flags.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seed for cross-validation folds, splits and run naming.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for generation and the service.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a SMILES+property CSV and summarize it.
    Ingest(ingest::IngestArgs),
    /// Fit and select a property model by cross-validation.
    Train(train::TrainArgs),
    /// Enumerate molecules from an atom pool under rules and targets.
    Generate(generate::GenerateArgs),
    /// Run a benchmark scenario file.
    Bench(bench::BenchArgs),
    /// Check one molecule against a rule set.
    FilterCheck(filter::FilterArgs),
    /// Start the HTTP service.
    Serve(serve::ServeArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest(_) => "ingest",
            Command::Train(_) => "train",
            Command::Generate(_) => "generate",
            Command::Bench(_) => "bench",
            Command::FilterCheck(_) => "filter-check",
            Command::Serve(_) => "serve",
        }
    }
}

/// What a finished command prints and how it exits.
pub(crate) struct Report {
    pub human: String,
    pub json: Value,
    pub exit: i32,
}

impl Report {
    pub fn ok(human: String, json: Value) -> Report {
        Report {
            human,
            json,
            exit: EXIT_OK,
        }
    }
}

pub(crate) struct Context<'a> {
    pub cli: &'a Cli,
    pub argv: Vec<String>,
    pub started: chrono::DateTime<chrono::Utc>,
}

impl Context<'_> {
    pub fn seed(&self) -> u64 {
        self.cli.seed.unwrap_or(0)
    }

    /// Merges the `--config` file over `from_flags`. Returns the typed
    /// result and its JSON form for the manifest.
    pub fn resolve<T: Serialize + DeserializeOwned>(&self, from_flags: T) -> Result<(T, Value), CliError> {
        let mut merged = serde_json::to_value(&from_flags).map_err(usage_err)?;
        if let Some(path) = &self.cli.config {
            let text = std::fs::read_to_string(path).map_err(|e| usage_err(format!("cannot read config {}: {e}", path.display())))?;
            let overlay: Value =
                serde_json::from_str(&text).map_err(|e| usage_err(format!("config {} is not valid JSON: {e}", path.display())))?;
            merge(&mut merged, overlay);
        }
        let typed = serde_json::from_value(merged.clone()).map_err(|e| usage_err(format!("invalid settings: {e}")))?;
        Ok((typed, merged))
    }

    pub fn write_manifest(&self, dir: &Path, config: Value, paths: Vec<PathBuf>) -> Result<(), CliError> {
        let m = RunManifest::new(self.cli.command.name(), &self.argv, self.seed(), paths, config, self.started);
        m.write(&dir.join("manifest.json"))
    }
}

/// Object keys merge recursively; anything else in `overlay` replaces.
/// A `null` in the overlay is ignored so a config can leave a flag alone.
pub fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (_, Value::Null) => {}
        (slot, v) => *slot = v,
    }
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| data_err(format!("cannot create {}: {e}", dir.display())))
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| data_err(format!("cannot write {}: {e}", path.display())))
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(data_err)?;
    text.push('\n');
    write_file(path, text)
}

fn dispatch(ctx: &Context) -> Result<Report, CliError> {
    match &ctx.cli.command {
        Command::Ingest(a) => ingest::run(ctx, a),
        Command::Train(a) => train::run(ctx, a),
        Command::Generate(a) => generate::run(ctx, a),
        Command::Bench(a) => bench::run(ctx, a),
        Command::FilterCheck(a) => filter::run(ctx, a),
        Command::Serve(a) => serve::run(ctx, a),
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let ctx = Context {
        cli: &cli,
        argv: argv.iter().map(|a| a.to_string_lossy().into_owned()).collect(),
        started: chrono::Utc::now(),
    };
    match dispatch(&ctx) {
        Ok(report) => {
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&report.json).unwrap_or_default());
            } else if !report.human.is_empty() {
                print!("{}", report.human);
                if !report.human.ends_with('\n') {
                    println!();
                }
            }
            report.exit
        }
        Err(e) => {
            if cli.json {
                let kind = if e.exit_code() == EXIT_USAGE { "usage" } else { "data" };
                println!("{}", serde_json::json!({ "error": e.to_string(), "kind": kind }));
            }
            eprintln!("molgen {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn merge_overrides_leaves_and_keeps_the_rest() {
        let mut base = json!({ "a": 1, "b": { "c": 2, "d": 3 }, "e": [1] });
        merge(&mut base, json!({ "b": { "c": 9 }, "e": [2, 3], "f": null, "a": null }));
        assert_eq!(base, json!({ "a": 1, "b": { "c": 9, "d": 3 }, "e": [2, 3], "f": null }));
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["molgen", "no-such-command"]), EXIT_USAGE);
        assert_eq!(run(["molgen", "generate", "--max-nodes", "many"]), EXIT_USAGE);
        assert_eq!(run(["molgen", "--help"]), EXIT_OK);
    }
}
