//! Structural rules: forbidden substructures and fragment count ranges.
//!
//! Rule files are tab-separated, one rule per line:
//!
//! ```text
//! id<TAB>kind<TAB>smiles<TAB>min<TAB>max<TAB>reason
//! ```
//!
//! `kind` is `forbidden` or `count`. Empty `min` means 0 and empty `max`
//! means unbounded; both are ignored for `forbidden`. Blank lines and lines
//! starting with `#` are skipped.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::element::ValenceTable;
use crate::graph::MolGraph;
use crate::matching::{contains_fragment, count_fragment};
use crate::smiles::{self, SmilesError};

/// The built-in rule file.
pub const DEFAULT_RULES_TSV: &str = include_str!("../data/default_rules.tsv");

#[derive(Debug, thiserror::Error)]
pub enum RuleError {
    #[error("cannot read rule file: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("rule {id:?}: {source}")]
    Fragment { id: String, source: SmilesError },
    #[error("duplicate rule id {0:?}")]
    DuplicateId(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RuleKind {
    Forbidden,
    /// Occurrence count must end up within `min..=max` (`max` unbounded when `None`).
    Count { min: u32, max: Option<u32> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RuleDoc", into = "RuleDoc")]
pub struct StructuralRule {
    pub id: String,
    pub kind: RuleKind,
    pub smiles: String,
    pub fragment: MolGraph,
    pub reason: String,
}

#[derive(Serialize, Deserialize)]
struct RuleDoc {
    id: String,
    #[serde(flatten)]
    kind: RuleKind,
    smiles: String,
    #[serde(default)]
    reason: String,
}

impl TryFrom<RuleDoc> for StructuralRule {
    type Error = RuleError;

    fn try_from(doc: RuleDoc) -> Result<Self, Self::Error> {
        StructuralRule::new(&doc.id, doc.kind, &doc.smiles, &doc.reason)
    }
}

impl From<StructuralRule> for RuleDoc {
    fn from(r: StructuralRule) -> Self {
        RuleDoc {
            id: r.id,
            kind: r.kind,
            smiles: r.smiles,
            reason: r.reason,
        }
    }
}

/// Parses a fragment SMILES. Valence limits are relaxed so fragments cut from
/// molecules built under an overridden table still load.
pub fn parse_fragment(text: &str) -> Result<MolGraph, SmilesError> {
    smiles::parse_with(text, &ValenceTable::permissive())
}

impl StructuralRule {
    pub fn new(id: &str, kind: RuleKind, smiles: &str, reason: &str) -> Result<StructuralRule, RuleError> {
        if let RuleKind::Count { min, max: Some(max) } = kind {
            if min > max {
                return Err(RuleError::Format {
                    line: 0,
                    message: format!("rule {id:?}: min {min} exceeds max {max}"),
                });
            }
        }
        let fragment = parse_fragment(smiles).map_err(|source| RuleError::Fragment {
            id: id.to_string(),
            source,
        })?;
        Ok(StructuralRule {
            id: id.to_string(),
            kind,
            smiles: smiles.to_string(),
            fragment,
            reason: reason.to_string(),
        })
    }

    pub fn forbidden(id: &str, smiles: &str, reason: &str) -> Result<StructuralRule, RuleError> {
        StructuralRule::new(id, RuleKind::Forbidden, smiles, reason)
    }

    pub fn count(id: &str, smiles: &str, min: u32, max: Option<u32>) -> Result<StructuralRule, RuleError> {
        StructuralRule::new(id, RuleKind::Count { min, max }, smiles, "")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckMode {
    /// Only checks that can never recover under augmentation.
    Prune,
    /// Every check, for deciding whether a molecule is reported.
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationCause {
    Forbidden,
    AboveMax,
    BelowMin,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule_id: String,
    pub index: usize,
    pub cause: ViolationCause,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<StructuralRule>", into = "Vec<StructuralRule>")]
pub struct RuleSet {
    rules: Vec<StructuralRule>,
}

impl TryFrom<Vec<StructuralRule>> for RuleSet {
    type Error = RuleError;

    fn try_from(rules: Vec<StructuralRule>) -> Result<Self, Self::Error> {
        RuleSet::new(rules)
    }
}

impl From<RuleSet> for Vec<StructuralRule> {
    fn from(r: RuleSet) -> Self {
        r.rules
    }
}

impl RuleSet {
    pub fn new(rules: Vec<StructuralRule>) -> Result<RuleSet, RuleError> {
        let mut ids = HashSet::new();
        for r in &rules {
            if !ids.insert(r.id.as_str()) {
                return Err(RuleError::DuplicateId(r.id.clone()));
            }
        }
        Ok(RuleSet { rules })
    }

    pub fn empty() -> RuleSet {
        RuleSet::default()
    }

    pub fn default_rules() -> RuleSet {
        RuleSet::parse(DEFAULT_RULES_TSV).expect("built-in rules are valid")
    }

    pub fn rules(&self) -> &[StructuralRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&StructuralRule> {
        self.rules.iter().find(|r| r.id == id)
    }

    pub fn parse(text: &str) -> Result<RuleSet, RuleError> {
        let mut rules = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim_end_matches('\r');
            if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split('\t').map(str::trim).collect();
            if fields.len() < 3 {
                return Err(RuleError::Format {
                    line,
                    message: "expected id, kind and smiles separated by tabs".into(),
                });
            }
            let field = |k: usize| fields.get(k).copied().unwrap_or("");
            let bound = |k: usize| -> Result<Option<u32>, RuleError> {
                let v = field(k);
                if v.is_empty() || v == "*" || v.eq_ignore_ascii_case("inf") {
                    Ok(None)
                } else {
                    v.parse().map(Some).map_err(|_| RuleError::Format {
                        line,
                        message: format!("bad count {v:?}"),
                    })
                }
            };
            let kind = match field(1).to_ascii_lowercase().as_str() {
                "forbidden" => RuleKind::Forbidden,
                "count" | "range" => RuleKind::Count {
                    min: bound(3)?.unwrap_or(0),
                    max: bound(4)?,
                },
                other => {
                    return Err(RuleError::Format {
                        line,
                        message: format!("unknown rule kind {other:?}"),
                    })
                }
            };
            let rule = StructuralRule::new(field(0), kind, field(2), field(5)).map_err(|e| match e {
                RuleError::Format { message, .. } => RuleError::Format { line, message },
                other => other,
            })?;
            rules.push(rule);
        }
        RuleSet::new(rules)
    }

    pub fn load(path: &Path) -> Result<RuleSet, RuleError> {
        RuleSet::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# id\tkind\tsmiles\tmin\tmax\treason\n");
        for r in &self.rules {
            let (kind, min, max) = match r.kind {
                RuleKind::Forbidden => ("forbidden", String::new(), String::new()),
                RuleKind::Count { min, max } => ("count", min.to_string(), max.map(|m| m.to_string()).unwrap_or_default()),
            };
            out.push_str(&format!("{}\t{kind}\t{}\t{min}\t{max}\t{}\n", r.id, r.smiles, r.reason));
        }
        out
    }

    /// Rules merged with `other`; ids from `other` must not clash.
    pub fn extended(&self, other: &RuleSet) -> Result<RuleSet, RuleError> {
        RuleSet::new(self.rules.iter().chain(&other.rules).cloned().collect())
    }
}

/// Loads a rule file, or the built-in set for the name `default`.
pub fn load_rules(spec: &str) -> Result<RuleSet, RuleError> {
    match spec {
        "default" => Ok(RuleSet::default_rules()),
        "none" | "" => Ok(RuleSet::empty()),
        path => RuleSet::load(Path::new(path)),
    }
}

/// Checks `g` against every rule, reporting the first violation.
///
/// Forbidden rules fail in both modes. Count rules fail in prune mode only
/// when the maximum is exceeded, and in output mode also below the minimum.
pub fn check_rules(g: &MolGraph, rules: &RuleSet, mode: CheckMode) -> Result<(), Violation> {
    for (index, rule) in rules.rules.iter().enumerate() {
        let cause = match rule.kind {
            RuleKind::Forbidden => contains_fragment(g, &rule.fragment).then_some(ViolationCause::Forbidden),
            RuleKind::Count { min, max } => {
                let count = count_fragment(g, &rule.fragment) as u32;
                if max.is_some_and(|m| count > m) {
                    Some(ViolationCause::AboveMax)
                } else if mode == CheckMode::Output && count < min {
                    Some(ViolationCause::BelowMin)
                } else {
                    None
                }
            }
        };
        if let Some(cause) = cause {
            return Err(Violation {
                rule_id: rule.id.clone(),
                index,
                cause,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse;

    #[test]
    fn default_file_has_five_forbidden_rules() {
        let rules = RuleSet::default_rules();
        let smiles: Vec<&str> = rules.rules().iter().map(|r| r.smiles.as_str()).collect();
        assert_eq!(smiles, vec!["C=C=N", "C#CO", "C=C=CO", "ONO", "ONC=C"]);
        assert!(rules.rules().iter().all(|r| r.kind == RuleKind::Forbidden));
        assert_eq!(rules.rules()[0].id, "ketenimine");
        assert_eq!(rules.rules()[0].reason, "Unstable");
    }

    #[test]
    fn empty_file() {
        assert!(RuleSet::parse("").unwrap().is_empty());
        assert!(RuleSet::parse("# only a comment\n\n").unwrap().is_empty());
    }

    #[test]
    fn malformed_fragment_names_rule() {
        let err = RuleSet::parse("broken\tforbidden\tC1C\t\t\tx\n").unwrap_err();
        match err {
            RuleError::Fragment { id, source } => {
                assert_eq!(id, "broken");
                assert_eq!(source.kind, smiles::SmilesErrorKind::UnclosedRing);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let text = "a\tforbidden\tCC\na\tforbidden\tCO\n";
        assert!(matches!(RuleSet::parse(text), Err(RuleError::DuplicateId(_))));
    }

    #[test]
    fn bad_bounds() {
        assert!(matches!(
            RuleSet::parse("a\tcount\tCO\t3\t1\n"),
            Err(RuleError::Format { line: 1, .. })
        ));
        assert!(matches!(
            RuleSet::parse("a\tcount\tCO\tx\t1\n"),
            Err(RuleError::Format { line: 1, .. })
        ));
        assert!(matches!(
            RuleSet::parse("a\tmaybe\tCO\n"),
            Err(RuleError::Format { line: 1, .. })
        ));
    }

    #[test]
    fn ketenimine_detected_in_both_modes() {
        let rules = RuleSet::default_rules();
        let g = parse("C=C=NC").unwrap();
        for mode in [CheckMode::Prune, CheckMode::Output] {
            let v = check_rules(&g, &rules, mode).unwrap_err();
            assert_eq!(v.rule_id, "ketenimine");
            assert_eq!(v.cause, ViolationCause::Forbidden);
        }
    }

    #[test]
    fn ethanol_passes_defaults() {
        let g = parse("CCO").unwrap();
        assert!(check_rules(&g, &RuleSet::default_rules(), CheckMode::Output).is_ok());
    }

    #[test]
    fn count_rule_modes() {
        let rules = RuleSet::new(vec![StructuralRule::count("co", "CO", 1, Some(2)).unwrap()]).unwrap();
        let g = parse("CC").unwrap();
        assert!(check_rules(&g, &rules, CheckMode::Prune).is_ok());
        let v = check_rules(&g, &rules, CheckMode::Output).unwrap_err();
        assert_eq!(v.cause, ViolationCause::BelowMin);
        let many = parse("OCC(O)CO").unwrap();
        assert_eq!(check_rules(&many, &rules, CheckMode::Prune).unwrap_err().cause, ViolationCause::AboveMax);
    }

    #[test]
    fn tsv_and_json_round_trip() {
        let mut rules = RuleSet::default_rules().rules().to_vec();
        rules.push(StructuralRule::count("carbonyl", "C=O", 0, Some(1)).unwrap());
        rules.push(StructuralRule::count("ether", "COC", 2, None).unwrap());
        let set = RuleSet::new(rules).unwrap();
        let again = RuleSet::parse(&set.to_tsv()).unwrap();
        let json = serde_json::to_string(&set).unwrap();
        let from_json: RuleSet = serde_json::from_str(&json).unwrap();
        for other in [&again, &from_json] {
            assert_eq!(other.len(), set.len());
            for (a, b) in set.rules().iter().zip(other.rules()) {
                assert_eq!((&a.id, a.kind, &a.smiles, &a.reason), (&b.id, b.kind, &b.smiles, &b.reason));
            }
        }
    }

    #[test]
    fn load_rules_names() {
        assert_eq!(load_rules("default").unwrap().len(), 5);
        assert!(load_rules("none").unwrap().is_empty());
        assert!(matches!(load_rules("/nonexistent/rules.tsv"), Err(RuleError::Io(_))));
    }
}
