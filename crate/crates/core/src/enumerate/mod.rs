//! Isomorph-free molecular graph generation with online filtering.
//!
//! Graphs grow one leaf atom at a time from single-atom roots (one per
//! element in the pool) or from user seed fragments. A child is accepted only
//! along its canonical construction path: deleting its canonically last leaf
//! must give back the parent's isomorphism class. Every class is therefore
//! reached exactly once and no global visited set is needed for atom roots.
//!
//! At each node the structure is first evaluated for output (fragment ranges,
//! rules, model target ranges), then checked for termination. Only monotone
//! failures (forbidden substructures, fragment maxima) prune; predictions never
//! do.

mod augment;
mod search;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::canon::CanonicalLabel;
use crate::dataset::Dataset;
use crate::element::{Element, ValenceTable};
use crate::graph::MolGraph;
use crate::regress::TrainedModel;
use crate::rules::{parse_fragment, RuleSet};
use crate::smiles::{self, SmilesError};

pub use augment::canonical_augmentations;
pub use search::{check_termination, evaluate_structure, generate, generate_collect, generate_with, Control, Evaluation, Progress};

#[derive(Debug, thiserror::Error)]
pub enum GenerateError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training set is empty")]
    EmptyDataset,
}

/// A fragment with an allowed occurrence range.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "FragmentDoc", into = "FragmentDoc")]
pub struct FragmentRange {
    pub smiles: String,
    pub fragment: MolGraph,
    pub min: u32,
    pub max: Option<u32>,
}

#[derive(Serialize, Deserialize)]
struct FragmentDoc {
    smiles: String,
    #[serde(default)]
    min: u32,
    #[serde(default)]
    max: Option<u32>,
}

impl TryFrom<FragmentDoc> for FragmentRange {
    type Error = SmilesError;

    fn try_from(d: FragmentDoc) -> Result<Self, Self::Error> {
        FragmentRange::new(&d.smiles, d.min, d.max)
    }
}

impl From<FragmentRange> for FragmentDoc {
    fn from(f: FragmentRange) -> Self {
        FragmentDoc {
            smiles: f.smiles,
            min: f.min,
            max: f.max,
        }
    }
}

impl FragmentRange {
    pub fn new(smiles: &str, min: u32, max: Option<u32>) -> Result<FragmentRange, SmilesError> {
        Ok(FragmentRange {
            smiles: smiles.to_string(),
            fragment: parse_fragment(smiles)?,
            min,
            max,
        })
    }

    pub fn contains(&self, count: u32) -> bool {
        count >= self.min && self.max.is_none_or(|m| count <= m)
    }
}

/// Atom budget plus fragment count ranges.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ResourcePool {
    pub atoms: BTreeMap<Element, u32>,
    #[serde(default)]
    pub fragments: Vec<FragmentRange>,
}

impl ResourcePool {
    pub fn atoms(atoms: &[(Element, u32)]) -> ResourcePool {
        ResourcePool {
            atoms: atoms.iter().copied().filter(|&(_, n)| n > 0).collect(),
            fragments: Vec::new(),
        }
    }

    pub fn total_atoms(&self) -> u32 {
        self.atoms.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("bad pool entry {0:?} (expected El:count, e.g. C:7,N:2,O:2)")]
pub struct PoolSyntaxError(pub String);

/// `El:count[,El:count...]`
impl FromStr for ResourcePool {
    type Err = PoolSyntaxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut atoms = BTreeMap::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (el, n) = part.split_once(':').ok_or_else(|| PoolSyntaxError(part.to_string()))?;
            let element = Element::from_symbol(el.trim()).ok_or_else(|| PoolSyntaxError(part.to_string()))?;
            let count: u32 = n.trim().parse().map_err(|_| PoolSyntaxError(part.to_string()))?;
            *atoms.entry(element).or_insert(0) += count;
        }
        atoms.retain(|_, n| *n > 0);
        Ok(ResourcePool {
            atoms,
            fragments: Vec::new(),
        })
    }
}

impl fmt::Display for ResourcePool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.atoms.iter().map(|(e, n)| format!("{}:{n}", e.symbol())).collect();
        f.write_str(&parts.join(","))
    }
}

/// Per-element maximum count over the training molecules.
pub fn derive_pool(train: &Dataset) -> Result<ResourcePool, GenerateError> {
    if train.is_empty() {
        return Err(GenerateError::EmptyDataset);
    }
    let mut atoms: BTreeMap<Element, u32> = BTreeMap::new();
    for g in train.graphs() {
        for (e, n) in g.composition() {
            let slot = atoms.entry(e).or_insert(0);
            *slot = (*slot).max(n);
        }
    }
    Ok(ResourcePool {
        atoms,
        fragments: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_solutions: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_nodes: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_seconds: Option<f64>,
}

impl Limits {
    pub fn unlimited() -> Limits {
        Limits::default()
    }

    pub fn nodes(n: u64) -> Limits {
        Limits {
            max_nodes: Some(n),
            ..Default::default()
        }
    }

    pub fn is_unlimited(&self) -> bool {
        self.max_solutions.is_none() && self.max_nodes.is_none() && self.max_seconds.is_none()
    }
}

#[derive(Debug, Clone, Default)]
pub struct GenerationConfig {
    pub pool: ResourcePool,
    pub rules: RuleSet,
    /// Models with a target range gate output; models without one only
    /// annotate solutions with predictions.
    pub models: Vec<TrainedModel>,
    pub limits: Limits,
    /// Extra starting graphs. Their atoms do not consume the pool.
    pub seeds: Vec<MolGraph>,
    pub valence: ValenceTable,
    /// Worker threads for root branches when no limit is set; 0 or 1 runs serially.
    pub workers: usize,
}

impl GenerationConfig {
    pub fn new(pool: ResourcePool) -> GenerationConfig {
        GenerationConfig {
            pool,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), GenerateError> {
        for (i, m) in self.models.iter().enumerate() {
            let schema = m
                .schema
                .as_ref()
                .ok_or_else(|| GenerateError::Config(format!("model {i} has no feature schema")))?;
            if schema.dimension() != m.dimension() {
                return Err(GenerateError::Config(format!(
                    "model {i} expects {} features but its schema has {}",
                    m.dimension(),
                    schema.dimension()
                )));
            }
            if let Some([lo, hi]) = m.target_range {
                if !(lo <= hi) {
                    return Err(GenerateError::Config(format!("model {i} has an empty target range")));
                }
            }
        }
        for f in &self.pool.fragments {
            if f.max.is_some_and(|m| m < f.min) {
                return Err(GenerateError::Config(format!("fragment {} has min > max", f.smiles)));
            }
        }
        for (i, s) in self.seeds.iter().enumerate() {
            if s.is_empty() || !s.is_connected() {
                return Err(GenerateError::Config(format!("seed {i} is empty or disconnected")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneCounts {
    /// Atoms remain but no atom has free valence.
    pub valence: u64,
    pub forbidden: u64,
    pub over_max_fragment: u64,
    /// Atom pool exhausted.
    pub termination: u64,
}

impl PruneCounts {
    fn merge(&mut self, o: &PruneCounts) {
        self.valence += o.valence;
        self.forbidden += o.forbidden;
        self.over_max_fragment += o.over_max_fragment;
        self.termination += o.termination;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitKind {
    MaxSolutions,
    MaxNodes,
    WallClock,
    Cancelled,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub nodes_expanded: u64,
    pub canonical_rejections: u64,
    pub prune_counts: PruneCounts,
    pub solutions_emitted: u64,
    pub elapsed_seconds: f64,
    pub solutions_per_second: f64,
    /// Set when the run stopped early.
    pub limit_reached: Option<LimitKind>,
}

impl GenerationStats {
    fn merge(&mut self, o: &GenerationStats) {
        self.nodes_expanded += o.nodes_expanded;
        self.canonical_rejections += o.canonical_rejections;
        self.prune_counts.merge(&o.prune_counts);
        self.solutions_emitted += o.solutions_emitted;
        if self.limit_reached.is_none() {
            self.limit_reached = o.limit_reached;
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub smiles: String,
    pub label: CanonicalLabel,
    pub graph: MolGraph,
    /// One value per configured model, in order.
    pub predictions: Vec<f64>,
}

impl Solution {
    fn new(graph: MolGraph, label: CanonicalLabel, predictions: Vec<f64>) -> Solution {
        Solution {
            smiles: smiles::write(&graph),
            label,
            graph,
            predictions,
        }
    }

    /// `smiles<TAB>pred1<TAB>...`
    pub fn to_line(&self) -> String {
        let mut line = self.smiles.clone();
        for p in &self.predictions {
            line.push('\t');
            line.push_str(&format!("{p}"));
        }
        line
    }
}
