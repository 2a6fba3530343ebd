use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use molgen_core::rules::{check_rules, load_rules, CheckMode, RuleSet};
use molgen_core::smiles;

use crate::{usage_err, Context, CliError, Report, EXIT_DATA, EXIT_OK};

#[derive(Debug, Args)]
pub struct FilterArgs {
    /// Molecule to check.
    smiles: String,
    /// `default`, `none`, or a rules TSV file.
    #[arg(long, default_value = "default")]
    rules: String,
}

pub fn run(ctx: &Context, a: &FilterArgs) -> Result<Report, CliError> {
    let rules = load_rules(&a.rules).map_err(usage_err)?;
    let g = match smiles::parse(&a.smiles) {
        Ok(g) => g,
        Err(e) => {
            return Ok(Report {
                human: format!("{}: invalid SMILES: {e}\n", a.smiles),
                json: json!({ "smiles": a.smiles, "valid": false, "error": e.to_string(), "position": e.position }),
                exit: EXIT_DATA,
            })
        }
    };
    // Each rule on its own, so every violation is listed.
    let mut violations = Vec::new();
    for rule in rules.rules() {
        let single = RuleSet::new(vec![rule.clone()]).map_err(usage_err)?;
        if let Err(v) = check_rules(&g, &single, CheckMode::Output) {
            violations.push(json!({ "rule": rule.id, "cause": v.cause, "reason": rule.reason, "pattern": rule.smiles }));
        }
    }
    let canonical = smiles::write(&g);
    let mut human = String::new();
    if violations.is_empty() {
        let _ = writeln!(human, "{canonical}: passes all {} rules", rules.len());
    } else {
        for v in &violations {
            let _ = writeln!(
                human,
                "{canonical}: violates {} ({}): {}",
                v["rule"].as_str().unwrap_or_default(),
                v["pattern"].as_str().unwrap_or_default(),
                v["reason"].as_str().unwrap_or_default()
            );
        }
    }
    let exit = if violations.is_empty() { EXIT_OK } else { EXIT_DATA };
    let report = json!({ "smiles": a.smiles, "canonical": canonical, "valid": true, "passes": violations.is_empty(), "violations": violations });
    if let Some(out) = &ctx.cli.out {
        crate::ensure_dir(out)?;
        crate::write_json(&out.join("verdict.json"), &report)?;
        let rules_path = (!matches!(a.rules.as_str(), "default" | "none" | "")).then(|| PathBuf::from(&a.rules));
        ctx.write_manifest(out, json!({ "smiles": a.smiles, "rules": a.rules }), rules_path.into_iter().collect())?;
    }
    Ok(Report { human, json: report, exit })
}
