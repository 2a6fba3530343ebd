use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use molgen_core::bench::{filter_ablation, filter_ablation_curve, speed_bench, variety_report, BenchReport};
use molgen_core::enumerate::generate_collect;
use molgen_core::pipeline::{generation_config, GenerationSpec};

use crate::generate::{load_dataset, load_model};
use crate::{data_err, ensure_dir, usage_err, write_json, Context, CliError, Report};

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Scenario JSON file.
    #[arg(value_name = "SCENARIO")]
    scenario: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchMode {
    /// Online gating against generate-then-screen.
    Speed,
    /// Rules online against rules applied afterwards, at one budget.
    Ablation,
    /// `Ablation` at each of `budgets`.
    AblationCurve,
    /// PCA of generated molecules against the training set.
    Variety,
}

/// A benchmark description. Relative paths resolve against the scenario
/// file's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub mode: BenchMode,
    #[serde(default)]
    pub generation: GenerationSpec,
    #[serde(default)]
    pub model: Option<PathBuf>,
    /// Training data: pool source, and the reference set for `variety`.
    #[serde(default)]
    pub data: Option<PathBuf>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub budgets: Vec<u64>,
}

fn default_repetitions() -> usize {
    3
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| usage_err(format!("cannot read scenario {}: {e}", path.display())))?;
        let mut s: Scenario = serde_json::from_str(&text).map_err(|e| usage_err(format!("scenario {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut s.model, &mut s.data].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(s)
    }
}

/// `<out>/<UTC timestamp>-seed<seed>`, suffixed `-2`, `-3`, ... if taken.
pub fn run_dir(out: &Path, started: chrono::DateTime<chrono::Utc>, seed: u64) -> PathBuf {
    let base = format!("{}-seed{seed}", started.format("%Y%m%dT%H%M%SZ"));
    let mut dir = out.join(&base);
    let mut n = 1;
    while dir.exists() {
        n += 1;
        dir = out.join(format!("{base}-{n}"));
    }
    dir
}

fn describe(r: &BenchReport) -> String {
    let mut s = String::new();
    for a in &r.arms {
        let _ = writeln!(
            s,
            "  {:<10} valid {:>8} invalid {:>8} nodes {:>9} {:>8.1} valid/s",
            a.name, a.valid, a.invalid, a.stats.nodes_expanded, a.valid_per_second
        );
    }
    if let Some(x) = r.speedup {
        let _ = writeln!(s, "  online/post-hoc valid-rate ratio {x:.2}");
    }
    if let Some(v) = &r.variety {
        let _ = writeln!(
            s,
            "  {} generated vs {} training; {:.1}% outside the training hull; hull area ratio {}",
            v.generated_points,
            v.training_points,
            100.0 * v.outside_fraction,
            v.area_ratio.map(|x| format!("{x:.3}")).unwrap_or_else(|| "n/a".into())
        );
    }
    s
}

pub fn run(ctx: &Context, a: &BenchArgs) -> Result<Report, CliError> {
    let scenario = Scenario::load(&a.scenario)?;
    let (mut scenario, resolved) = ctx.resolve(scenario)?;
    if let Some(w) = ctx.cli.workers {
        scenario.generation.workers = Some(w);
    }
    let out = ctx.cli.out.clone().unwrap_or_else(|| PathBuf::from("bench-runs"));
    let dir = run_dir(&out, ctx.started, ctx.seed());

    let model = scenario.model.as_deref().map(load_model).transpose()?;
    let dataset = scenario.data.as_deref().map(load_dataset).transpose()?;
    let config = generation_config(&scenario.generation, model.clone(), dataset.as_ref()).map_err(usage_err)?;

    let mut reports: Vec<BenchReport> = Vec::new();
    let mut variety_points = None;
    match scenario.mode {
        BenchMode::Speed => reports.push(speed_bench(&config, scenario.repetitions).map_err(data_err)?),
        BenchMode::Ablation => reports.push(filter_ablation(&config).map_err(data_err)?),
        BenchMode::AblationCurve => {
            if scenario.budgets.is_empty() {
                return Err(usage_err("an ablation_curve scenario needs budgets"));
            }
            reports = filter_ablation_curve(&config, &scenario.budgets).map_err(data_err)?;
        }
        BenchMode::Variety => {
            let schema = model
                .as_ref()
                .and_then(|m| m.schema.clone())
                .ok_or_else(|| usage_err("a variety scenario needs a model with a feature schema"))?;
            let training = dataset.as_ref().ok_or_else(|| usage_err("a variety scenario needs data"))?;
            if config.limits.is_unlimited() {
                return Err(usage_err("a variety scenario needs a limit in generation.limits"));
            }
            let (solutions, stats) = generate_collect(&config).map_err(data_err)?;
            let generated: Vec<_> = solutions.into_iter().map(|s| s.graph).collect();
            let training: Vec<_> = training.graphs().cloned().collect();
            let v = variety_report(&generated, &training, &schema).map_err(data_err)?;
            reports.push(BenchReport {
                scenario: "variety".into(),
                stats,
                arms: Vec::new(),
                median_solutions_per_second: None,
                speedup: None,
                variety: Some(v.summary.clone()),
            });
            variety_points = Some(v);
        }
    }
    for r in &mut reports {
        r.scenario = scenario.name.clone();
    }

    ensure_dir(&dir)?;
    let body = if reports.len() == 1 { json!(reports[0]) } else { json!(reports) };
    write_json(&dir.join("report.json"), &body)?;
    if let Some(v) = &variety_points {
        v.write_csv(&dir.join("variety.csv")).map_err(data_err)?;
    }
    let paths = [Some(a.scenario.clone()), ctx.cli.config.clone(), scenario.model.clone(), scenario.data.clone()]
        .into_iter()
        .flatten()
        .collect();
    ctx.write_manifest(&dir, resolved, paths)?;

    let mut human = format!("scenario {} ({:?})\n", scenario.name, scenario.mode);
    for (i, r) in reports.iter().enumerate() {
        if scenario.mode == BenchMode::AblationCurve {
            let _ = writeln!(human, " budget {} nodes", scenario.budgets[i]);
        }
        human.push_str(&describe(r));
    }
    let _ = writeln!(human, "wrote {}", dir.display());
    Ok(Report::ok(human, json!({ "run_dir": dir, "reports": reports })))
}
