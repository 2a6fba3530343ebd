use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use molgen_core::dataset::{load_csv, LoadOptions};
use molgen_core::pipeline::{train, FitSet, TrainOutcome, TrainingSpec};
use molgen_core::regress::{evaluate_on, CvReport};

use crate::args::{parse_families, parse_kinds, parse_split};
use crate::{data_err, ensure_dir, usage_err, write_file, write_json, Context, CliError, Report};

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training CSV.
    #[arg(long, value_name = "CSV")]
    data: Option<PathBuf>,
    /// Held-out CSV scored after training.
    #[arg(long, value_name = "CSV")]
    test_data: Option<PathBuf>,
    /// Property column to model.
    #[arg(long)]
    target: Option<String>,
    /// Feature families, e.g. `standard` or `atom_count,ring_count,edge_subgraph:2`.
    #[arg(long)]
    families: Option<String>,
    /// Model kinds to compare, e.g. `ridge,lasso,kernel_ridge`.
    #[arg(long)]
    kinds: Option<String>,
    #[arg(long)]
    folds: Option<usize>,
    /// Pin lambda to this index of the grid.
    #[arg(long)]
    lambda_index: Option<usize>,
    /// Hold out half of `--data`: `stratified` or `random`.
    #[arg(long)]
    split: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainConfig {
    data: Option<PathBuf>,
    test_data: Option<PathBuf>,
    out: Option<PathBuf>,
    training: TrainingSpec,
}

pub fn cv_table(cv: &CvReport) -> String {
    let mut s = String::from("kind\tlambda\tgamma\tmean_r2\tstd_r2\tselected\n");
    for (i, e) in cv.entries.iter().enumerate() {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            s,
            "{}\t{:e}\t{}\t{}\t{}\t{}",
            e.kind.name(),
            e.lambda,
            e.gamma.map(|g| format!("{g:e}")).unwrap_or_else(|| "-".into()),
            opt(e.mean_r2),
            opt(e.std_r2),
            if i == cv.selected { "*" } else { "" }
        );
    }
    s
}

fn fit_table(o: &TrainOutcome) -> String {
    let mut s = String::from("smiles\tset\tactual\tpredicted\n");
    for p in &o.points {
        let set = match p.set {
            FitSet::Train => "train",
            FitSet::Test => "test",
        };
        let _ = writeln!(s, "{}\t{set}\t{:?}\t{:?}", p.smiles, p.actual, p.predicted);
    }
    s
}

pub fn run(ctx: &Context, a: &TrainArgs) -> Result<Report, CliError> {
    let families = a.families.as_deref().map(parse_families).transpose().map_err(usage_err)?;
    let kinds = a.kinds.as_deref().map(parse_kinds).transpose().map_err(usage_err)?;
    let split = a.split.as_deref().map(|s| parse_split(s, a.target.as_deref())).transpose().map_err(usage_err)?;
    let (c, resolved) = ctx.resolve(TrainConfig {
        data: a.data.clone(),
        test_data: a.test_data.clone(),
        out: ctx.cli.out.clone(),
        training: TrainingSpec {
            property: a.target.clone(),
            families,
            kinds,
            grid: None,
            lambda_index: a.lambda_index,
            folds: a.folds,
            seed: ctx.seed(),
            split,
        },
    })?;
    let data = c.data.ok_or_else(|| usage_err("train needs --data"))?;
    let out = c.out.ok_or_else(|| usage_err("train needs --out"))?;
    let dataset = load_csv(&data, &LoadOptions::default()).map_err(data_err)?.dataset;
    let mut outcome = train(&dataset, &c.training).map_err(data_err)?;
    let property = outcome.model.property.clone().unwrap_or_default();
    if let Some(test_path) = &c.test_data {
        let test = load_csv(test_path, &LoadOptions::default()).map_err(data_err)?.dataset;
        let r2 = evaluate_on(&outcome.model, &test, &property).map_err(data_err)?;
        outcome.model.metrics.test_r2 = Some(r2);
        let column = test.property_index(&property).map_err(data_err)?;
        for r in &test.records {
            outcome.points.push(molgen_core::pipeline::FitPoint {
                smiles: r.smiles.clone(),
                set: FitSet::Test,
                actual: r.values[column],
                predicted: outcome.model.predict_graph(&r.graph).map_err(data_err)?,
            });
        }
        outcome.test_size += test.len();
    }

    ensure_dir(&out)?;
    write_file(&out.join("model.json"), outcome.model.to_json())?;
    let table = cv_table(&outcome.cv);
    write_file(&out.join("cv.tsv"), &table)?;
    write_file(&out.join("fit.tsv"), fit_table(&outcome))?;
    let best = outcome.cv.best().clone();
    let dimension = outcome.model.dimension();
    let summary = json!({
        "property": property,
        "kind": outcome.model.kind,
        "hyperparams": outcome.model.hyperparams,
        "metrics": outcome.model.metrics,
        "dimension": dimension,
        "train_size": outcome.train_size,
        "test_size": outcome.test_size,
        "folds": outcome.cv.folds,
        "selected": best,
    });
    write_json(&out.join("report.json"), &summary)?;
    let paths = [ctx.cli.config.clone(), Some(data), c.test_data].into_iter().flatten().collect();
    ctx.write_manifest(&out, resolved, paths)?;

    let m = &outcome.model.metrics;
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "n/a".into());
    let mut human = format!(
        "selected {} (lambda {:e}{}) for {property} on {} features\n",
        outcome.model.kind.name(),
        outcome.model.hyperparams.lambda,
        outcome.model.hyperparams.gamma.map(|g| format!(", gamma {g:e}")).unwrap_or_default(),
        dimension
    );
    let _ = writeln!(
        human,
        "R2 cv {} train {} test {}  ({} train, {} test)",
        fmt(m.cv_r2),
        fmt(m.train_r2),
        fmt(m.test_r2),
        outcome.train_size,
        outcome.test_size
    );
    human.push_str(&table);
    let _ = writeln!(human, "wrote {}", out.display());
    Ok(Report::ok(human, summary))
}
