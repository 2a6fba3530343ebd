use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use molgen_core::dataset::{load_csv, summarize, write_csv, write_rejects, LoadOptions};

use crate::{data_err, ensure_dir, usage_err, write_json, Context, CliError, Report};

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Input CSV with a SMILES column and numeric property columns.
    #[arg(long, value_name = "CSV")]
    data: Option<PathBuf>,
    /// Name of the SMILES column.
    #[arg(long)]
    smiles_column: Option<String>,
    /// Property columns to keep (repeatable); all by default.
    #[arg(long = "property")]
    properties: Vec<String>,
    /// Keep molecules that appear more than once.
    #[arg(long)]
    allow_duplicates: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IngestConfig {
    data: Option<PathBuf>,
    out: Option<PathBuf>,
    smiles_column: Option<String>,
    #[serde(default)]
    properties: Vec<String>,
    #[serde(default)]
    allow_duplicates: bool,
}

pub fn run(ctx: &Context, a: &IngestArgs) -> Result<Report, CliError> {
    let (c, resolved) = ctx.resolve(IngestConfig {
        data: a.data.clone(),
        out: ctx.cli.out.clone(),
        smiles_column: a.smiles_column.clone(),
        properties: a.properties.clone(),
        allow_duplicates: a.allow_duplicates,
    })?;
    let data = c.data.ok_or_else(|| usage_err("ingest needs --data"))?;
    let out = c.out.ok_or_else(|| usage_err("ingest needs --out"))?;
    let options = LoadOptions {
        smiles_column: c.smiles_column,
        property_columns: c.properties,
        allow_duplicates: c.allow_duplicates,
        write_rejects: false,
    };
    let loaded = load_csv(&data, &options).map_err(data_err)?;
    ensure_dir(&out)?;
    write_csv(&loaded.dataset, &out.join("dataset.csv")).map_err(data_err)?;
    if !loaded.rejects.is_empty() {
        write_rejects(&out.join("rejects.csv"), &loaded.rejects).map_err(data_err)?;
    }
    let summaries = loaded
        .dataset
        .properties
        .iter()
        .map(|p| summarize(&loaded.dataset, p))
        .collect::<Result<Vec<_>, _>>()
        .map_err(data_err)?;
    write_json(&out.join("summary.json"), &summaries)?;
    ctx.write_manifest(&out, resolved, [ctx.cli.config.clone(), Some(data.clone())].into_iter().flatten().collect())?;

    let mut human = format!(
        "{}: {} molecules kept, {} rejected\n",
        data.display(),
        loaded.dataset.len(),
        loaded.rejects.len()
    );
    for s in &summaries {
        let unit = s.unit.as_deref().map(|u| format!(" [{u}]")).unwrap_or_default();
        let _ = writeln!(
            human,
            "  {}{unit}: min {:.4} max {:.4} mean {:.4} sd {:.4}",
            s.property, s.min, s.max, s.mean, s.stddev
        );
    }
    let _ = writeln!(human, "wrote {}", out.display());
    Ok(Report::ok(
        human,
        json!({
            "kept": loaded.dataset.len(),
            "rejected": loaded.rejects.len(),
            "rejects": loaded.rejects,
            "summary": summaries,
            "out": out,
        }),
    ))
}
