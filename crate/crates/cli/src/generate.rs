use std::fmt::Write as _;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::Ordering;

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use molgen_core::dataset::{load_csv, Dataset, LoadOptions};
use molgen_core::enumerate::{generate_with, Control, GenerationConfig, GenerationStats, Limits};
use molgen_core::pipeline::{generation_config, GenerationSpec, PoolSpec, RulesSpec};
use molgen_core::regress::TrainedModel;

use crate::args::{parse_fragment, parse_target};
use crate::{data_err, ensure_dir, usage_err, write_json, Context, CliError, Report};

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Trained model (JSON from `molgen train`).
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Dataset whose per-element maxima become the pool when `--atoms` is absent.
    #[arg(long, value_name = "CSV")]
    data: Option<PathBuf>,
    /// Atom pool, `El:count[,El:count...]`.
    #[arg(long)]
    atoms: Option<String>,
    /// `default`, `none`, or a rules TSV file.
    #[arg(long)]
    rules: Option<String>,
    /// Keep molecules whose prediction lies in range: `prop:low:high`.
    #[arg(long)]
    target: Option<String>,
    /// Fragment occurrence range `SMILES:min[:max]` (repeatable).
    #[arg(long = "fragment")]
    fragments: Vec<String>,
    /// Extra starting structure, e.g. a ring (repeatable).
    #[arg(long = "seed-smiles")]
    seed_smiles: Vec<String>,
    #[arg(long)]
    max_solutions: Option<u64>,
    #[arg(long)]
    max_nodes: Option<u64>,
    #[arg(long)]
    max_seconds: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenerateConfig {
    model: Option<PathBuf>,
    data: Option<PathBuf>,
    out: Option<PathBuf>,
    /// Property named by `--target`; must match the model's.
    target_property: Option<String>,
    generation: GenerationSpec,
}

pub fn load_model(path: &Path) -> Result<TrainedModel, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| data_err(format!("cannot read model {}: {e}", path.display())))?;
    TrainedModel::from_json(&text).map_err(|e| data_err(format!("model {}: {e}", path.display())))
}

pub fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    Ok(load_csv(path, &LoadOptions::default()).map_err(data_err)?.dataset)
}

/// Streams solutions as `smiles<TAB>predictions...` lines to `path`.
pub fn generate_to_file(config: &GenerationConfig, path: &Path) -> Result<GenerationStats, CliError> {
    let file = std::fs::File::create(path).map_err(|e| data_err(format!("cannot create {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    let control = Control::default();
    let mut failure: Option<std::io::Error> = None;
    let stats = generate_with(config, &control, |s| {
        if failure.is_none() {
            if let Err(e) = writeln!(w, "{}", s.to_line()) {
                failure = Some(e);
                control.cancel.store(true, Ordering::Relaxed);
            }
        }
    })
    .map_err(data_err)?;
    if let Some(e) = failure {
        return Err(data_err(format!("writing {}: {e}", path.display())));
    }
    w.flush().map_err(|e| data_err(format!("writing {}: {e}", path.display())))?;
    Ok(stats)
}

pub fn run(ctx: &Context, a: &GenerateArgs) -> Result<Report, CliError> {
    let target = a.target.as_deref().map(parse_target).transpose().map_err(usage_err)?;
    let fragments = a.fragments.iter().map(|f| parse_fragment(f)).collect::<Result<Vec<_>, _>>().map_err(usage_err)?;
    let spec = GenerationSpec {
        atoms: a.atoms.clone().map(PoolSpec::Text),
        fragments,
        rules: a.rules.clone().map(RulesSpec::Named).unwrap_or_default(),
        target: target.as_ref().map(|t| [t.low, t.high]),
        limits: Limits {
            max_solutions: a.max_solutions,
            max_nodes: a.max_nodes,
            max_seconds: a.max_seconds,
        },
        seeds: a.seed_smiles.clone(),
        workers: ctx.cli.workers,
    };
    let (c, resolved) = ctx.resolve(GenerateConfig {
        model: a.model.clone(),
        data: a.data.clone(),
        out: ctx.cli.out.clone(),
        target_property: target.map(|t| t.property),
        generation: spec,
    })?;
    let out = c.out.ok_or_else(|| usage_err("generate needs --out"))?;
    if c.generation.atoms.is_none() && c.data.is_none() {
        return Err(usage_err("generate needs --atoms or --data to size the atom pool"));
    }
    if c.generation.target.is_some() && c.model.is_none() {
        return Err(usage_err("--target needs --model"));
    }
    if c.generation.limits.max_seconds.is_some_and(|s| !(s >= 0.0)) {
        return Err(usage_err("--max-seconds must be non-negative"));
    }
    let model = c.model.as_deref().map(load_model).transpose()?;
    if let (Some(m), Some(p)) = (&model, &c.target_property) {
        if m.property.as_deref().is_some_and(|mp| mp != p) {
            return Err(usage_err(format!(
                "--target names {p:?} but the model predicts {:?}",
                m.property.as_deref().unwrap_or_default()
            )));
        }
    }
    let properties: Vec<String> = model
        .iter()
        .map(|m| m.property.clone().unwrap_or_else(|| "prediction".into()))
        .collect();
    let dataset = c.data.as_deref().map(load_dataset).transpose()?;
    let config = generation_config(&c.generation, model, dataset.as_ref()).map_err(|e| match e {
        molgen_core::pipeline::PipelineError::Pool(_) | molgen_core::pipeline::PipelineError::Invalid(_) => usage_err(e),
        other => data_err(other),
    })?;

    ensure_dir(&out)?;
    let stats = generate_to_file(&config, &out.join("solutions.tsv"))?;
    let report = json!({
        "pool": config.pool.to_string(),
        "properties": properties,
        "rules": config.rules.rules().iter().map(|r| r.id.clone()).collect::<Vec<_>>(),
        "stats": stats,
    });
    write_json(&out.join("stats.json"), &report)?;
    let mut paths: Vec<PathBuf> = [ctx.cli.config.clone(), c.model, c.data].into_iter().flatten().collect();
    if let RulesSpec::Named(name) = &c.generation.rules {
        if name != "default" && name != "none" && !name.is_empty() {
            paths.push(PathBuf::from(name));
        }
    }
    ctx.write_manifest(&out, resolved, paths)?;

    let mut human = format!(
        "pool {}: {} solutions from {} nodes in {:.2}s ({:.1}/s)\n",
        config.pool,
        stats.solutions_emitted,
        stats.nodes_expanded,
        stats.elapsed_seconds,
        stats.solutions_per_second
    );
    let p = &stats.prune_counts;
    let _ = writeln!(
        human,
        "pruned: forbidden {} over-max {} exhausted {} valence {}; canonical rejections {}",
        p.forbidden, p.over_max_fragment, p.termination, p.valence, stats.canonical_rejections
    );
    if let Some(limit) = stats.limit_reached {
        let _ = writeln!(human, "stopped early: {}", serde_json::to_value(limit).unwrap_or_default().as_str().unwrap_or(""));
    }
    let _ = writeln!(human, "wrote {}", out.join("solutions.tsv").display());
    Ok(Report::ok(human, report))
}
