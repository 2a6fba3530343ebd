//! Substructure-frequency feature vectors.
//!
//! A schema fixes an ordered pattern list from a training set; encoding
//! counts each pattern in a molecule. Subgraph occurrences are counted as
//! distinct images (a connected edge set), so the count for a subgraph
//! pattern equals [`count_fragment`](crate::matching::count_fragment).
//!
//! Cost grows quickly with `EdgeSubgraph { max_edges }`; 1 is the usual
//! setting and has a constant-time lookup per bond.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::canon::{canonical_label, CanonicalLabel};
use crate::element::{Element, ValenceTable};
use crate::graph::MolGraph;
use crate::rings::perceive_rings;
use crate::smiles;

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("no training molecules")]
    EmptyDataset,
    #[error("pattern {smiles:?} does not parse: {source}")]
    BadPattern { smiles: String, source: smiles::SmilesError },
    #[error("PCA needs at least 2 vectors, got {0}")]
    TooFewVectors(usize),
    #[error("cannot project {dimension}-dimensional vectors onto {k} components")]
    TooManyComponents { k: usize, dimension: usize },
    #[error("vectors have inconsistent lengths")]
    Ragged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FeatureFamily {
    AtomCount,
    RingCount,
    AromaticRingCount,
    EdgeSubgraph { max_edges: usize },
}

impl FeatureFamily {
    /// Atoms, rings, aromatic rings and single-edge subgraphs.
    pub fn standard() -> Vec<FeatureFamily> {
        vec![
            FeatureFamily::AtomCount,
            FeatureFamily::RingCount,
            FeatureFamily::AromaticRingCount,
            FeatureFamily::EdgeSubgraph { max_edges: 1 },
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PatternDoc", into = "PatternDoc")]
pub enum Pattern {
    Atom { element: Element, charge: i8 },
    Ring { size: usize },
    AromaticRing { size: usize },
    Subgraph(Subgraph),
}

#[derive(Debug, Clone)]
pub struct Subgraph {
    pub smiles: String,
    pub edges: usize,
    pub label: CanonicalLabel,
    pub graph: MolGraph,
}

impl PartialEq for Subgraph {
    fn eq(&self, other: &Self) -> bool {
        self.label == other.label
    }
}

impl Eq for Subgraph {}

impl Subgraph {
    fn from_graph(graph: MolGraph) -> Subgraph {
        Subgraph {
            smiles: smiles::write(&graph),
            edges: graph.bond_count(),
            label: canonical_label(&graph),
            graph,
        }
    }

    fn from_smiles(text: &str) -> Result<Subgraph, FeatureError> {
        let graph = smiles::parse_with(text, &ValenceTable::permissive()).map_err(|source| FeatureError::BadPattern {
            smiles: text.to_string(),
            source,
        })?;
        Ok(Subgraph {
            smiles: text.to_string(),
            edges: graph.bond_count(),
            label: canonical_label(&graph),
            graph,
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum PatternDoc {
    Atom { element: Element, charge: i8 },
    Ring { size: usize },
    AromaticRing { size: usize },
    Subgraph { smiles: String },
}

impl TryFrom<PatternDoc> for Pattern {
    type Error = FeatureError;

    fn try_from(doc: PatternDoc) -> Result<Self, Self::Error> {
        Ok(match doc {
            PatternDoc::Atom { element, charge } => Pattern::Atom { element, charge },
            PatternDoc::Ring { size } => Pattern::Ring { size },
            PatternDoc::AromaticRing { size } => Pattern::AromaticRing { size },
            PatternDoc::Subgraph { smiles } => Pattern::Subgraph(Subgraph::from_smiles(&smiles)?),
        })
    }
}

impl From<Pattern> for PatternDoc {
    fn from(p: Pattern) -> Self {
        match p {
            Pattern::Atom { element, charge } => PatternDoc::Atom { element, charge },
            Pattern::Ring { size } => PatternDoc::Ring { size },
            Pattern::AromaticRing { size } => PatternDoc::AromaticRing { size },
            Pattern::Subgraph(s) => PatternDoc::Subgraph { smiles: s.smiles },
        }
    }
}

impl Pattern {
    /// Short human-readable name, e.g. `atom:C`, `ring:6`, `C=O`.
    pub fn name(&self) -> String {
        match self {
            Pattern::Atom { element, charge: 0 } => format!("atom:{}", element.symbol()),
            Pattern::Atom { element, charge } => format!("atom:{}{:+}", element.symbol(), charge),
            Pattern::Ring { size } => format!("ring:{size}"),
            Pattern::AromaticRing { size } => format!("aromatic_ring:{size}"),
            Pattern::Subgraph(s) => s.smiles.clone(),
        }
    }
}

type AtomKind = (Element, i8);
type EdgeKey = (AtomKind, AtomKind, u8);

fn edge_key(g: &MolGraph, a: usize, b: usize, order: u8) -> EdgeKey {
    let (x, y) = (g.atom(a).kind(), g.atom(b).kind());
    if x <= y {
        (x, y, order)
    } else {
        (y, x, order)
    }
}

/// Ordered pattern list plus lookup tables. Built once from training data.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "SchemaDoc", into = "SchemaDoc")]
pub struct FeatureSchema {
    families: Vec<FeatureFamily>,
    patterns: Vec<Pattern>,
    atoms: HashMap<AtomKind, usize>,
    rings: HashMap<usize, usize>,
    aromatic: HashMap<usize, usize>,
    edges: HashMap<EdgeKey, usize>,
    subgraphs: HashMap<CanonicalLabel, usize>,
    max_edges: usize,
}

#[derive(Serialize, Deserialize)]
struct SchemaDoc {
    families: Vec<FeatureFamily>,
    patterns: Vec<Pattern>,
}

impl TryFrom<SchemaDoc> for FeatureSchema {
    type Error = FeatureError;

    fn try_from(doc: SchemaDoc) -> Result<Self, Self::Error> {
        Ok(FeatureSchema::from_patterns(doc.families, doc.patterns))
    }
}

impl From<FeatureSchema> for SchemaDoc {
    fn from(s: FeatureSchema) -> Self {
        SchemaDoc {
            families: s.families,
            patterns: s.patterns,
        }
    }
}

impl PartialEq for FeatureSchema {
    fn eq(&self, other: &Self) -> bool {
        self.families == other.families && self.patterns == other.patterns
    }
}

impl FeatureSchema {
    pub fn build<'a>(
        train: impl IntoIterator<Item = &'a MolGraph>,
        families: &[FeatureFamily],
    ) -> Result<FeatureSchema, FeatureError> {
        let mut families = families.to_vec();
        families.sort();
        families.dedup();
        let max_edges = max_edges(&families);
        let has = |f: FeatureFamily| families.contains(&f);

        let mut atoms = BTreeSet::new();
        let mut rings = BTreeSet::new();
        let mut aromatic = BTreeSet::new();
        let mut subgraphs: BTreeMap<CanonicalLabel, MolGraph> = BTreeMap::new();
        let mut any = false;
        for g in train {
            any = true;
            if has(FeatureFamily::AtomCount) {
                atoms.extend(g.atoms().iter().map(|a| a.kind()));
            }
            if has(FeatureFamily::RingCount) || has(FeatureFamily::AromaticRingCount) {
                for ring in perceive_rings(g) {
                    rings.insert(ring.size());
                    if ring.aromatic {
                        aromatic.insert(ring.size());
                    }
                }
            }
            if max_edges > 0 {
                for set in connected_edge_subsets(g, max_edges, None) {
                    let fragment = edge_subgraph(g, &set);
                    subgraphs.entry(canonical_label(&fragment)).or_insert(fragment);
                }
            }
        }
        if !any {
            return Err(FeatureError::EmptyDataset);
        }
        let mut patterns: Vec<Pattern> = Vec::new();
        patterns.extend(atoms.into_iter().map(|(element, charge)| Pattern::Atom { element, charge }));
        if has(FeatureFamily::RingCount) {
            patterns.extend(rings.into_iter().map(|size| Pattern::Ring { size }));
        }
        if has(FeatureFamily::AromaticRingCount) {
            patterns.extend(aromatic.into_iter().map(|size| Pattern::AromaticRing { size }));
        }
        patterns.extend(subgraphs.into_values().map(|g| Pattern::Subgraph(Subgraph::from_graph(g))));
        Ok(FeatureSchema::from_patterns(families, patterns))
    }

    fn from_patterns(families: Vec<FeatureFamily>, patterns: Vec<Pattern>) -> FeatureSchema {
        let mut s = FeatureSchema {
            max_edges: max_edges(&families),
            families,
            patterns: Vec::new(),
            atoms: HashMap::new(),
            rings: HashMap::new(),
            aromatic: HashMap::new(),
            edges: HashMap::new(),
            subgraphs: HashMap::new(),
        };
        for (i, p) in patterns.iter().enumerate() {
            match p {
                Pattern::Atom { element, charge } => {
                    s.atoms.insert((*element, *charge), i);
                }
                Pattern::Ring { size } => {
                    s.rings.insert(*size, i);
                }
                Pattern::AromaticRing { size } => {
                    s.aromatic.insert(*size, i);
                }
                Pattern::Subgraph(sub) => {
                    if sub.edges == 1 {
                        let b = sub.graph.bonds()[0];
                        s.edges.insert(edge_key(&sub.graph, b.a, b.b, b.order), i);
                    }
                    s.subgraphs.insert(sub.label.clone(), i);
                }
            }
        }
        s.patterns = patterns;
        s
    }

    pub fn dimension(&self) -> usize {
        self.patterns.len()
    }

    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    pub fn families(&self) -> &[FeatureFamily] {
        &self.families
    }

    pub fn pattern_names(&self) -> Vec<String> {
        self.patterns.iter().map(Pattern::name).collect()
    }

    /// Occurrence count of every schema pattern in `g`. Substructures absent
    /// from the schema are ignored.
    pub fn encode(&self, g: &MolGraph) -> Vec<f64> {
        let mut x = vec![0.0; self.dimension()];
        for atom in g.atoms() {
            if let Some(&i) = self.atoms.get(&atom.kind()) {
                x[i] += 1.0;
            }
        }
        self.add_rings(g, &mut x);
        if self.max_edges > 0 {
            for set in connected_edge_subsets(g, self.max_edges, None) {
                self.add_subgraph(g, &set, &mut x);
            }
        }
        x
    }

    /// Encoding of `g`, where `g` is `parent` plus the leaf `u` and `parent`
    /// encodes to `previous`. Only occurrences touching `u` are counted anew.
    pub fn encode_extended(&self, previous: &[f64], g: &MolGraph, u: usize) -> Vec<f64> {
        let mut x = previous.to_vec();
        if let Some(&i) = self.atoms.get(&g.atom(u).kind()) {
            x[i] += 1.0;
        }
        if !self.rings.is_empty() || !self.aromatic.is_empty() {
            for &i in self.rings.values().chain(self.aromatic.values()) {
                x[i] = 0.0;
            }
            self.add_rings(g, &mut x);
        }
        if self.max_edges > 0 {
            let (w, _) = g.neighbors(u)[0];
            let new_edge = g
                .bonds()
                .iter()
                .position(|b| (b.a == u && b.b == w) || (b.a == w && b.b == u))
                .expect("leaf bond present");
            for set in connected_edge_subsets(g, self.max_edges, Some(new_edge)) {
                self.add_subgraph(g, &set, &mut x);
            }
        }
        x
    }

    fn add_rings(&self, g: &MolGraph, x: &mut [f64]) {
        if self.rings.is_empty() && self.aromatic.is_empty() {
            return;
        }
        if g.bond_count() < g.atom_count() {
            return;
        }
        for ring in perceive_rings(g) {
            if let Some(&i) = self.rings.get(&ring.size()) {
                x[i] += 1.0;
            }
            if ring.aromatic {
                if let Some(&i) = self.aromatic.get(&ring.size()) {
                    x[i] += 1.0;
                }
            }
        }
    }

    fn add_subgraph(&self, g: &MolGraph, set: &[usize], x: &mut [f64]) {
        let index = if set.len() == 1 {
            let b = g.bonds()[set[0]];
            self.edges.get(&edge_key(g, b.a, b.b, b.order)).copied()
        } else {
            self.subgraphs.get(&canonical_label(&edge_subgraph(g, set))).copied()
        };
        if let Some(i) = index {
            x[i] += 1.0;
        }
    }
}

fn max_edges(families: &[FeatureFamily]) -> usize {
    families
        .iter()
        .filter_map(|f| match f {
            FeatureFamily::EdgeSubgraph { max_edges } => Some(*max_edges),
            _ => None,
        })
        .max()
        .unwrap_or(0)
}

type EdgeSet = SmallVec<[usize; 4]>;

/// Every connected set of 1..=`max_edges` bonds (as sorted bond indices),
/// optionally restricted to sets containing bond `required`.
pub fn connected_edge_subsets(g: &MolGraph, max_edges: usize, required: Option<usize>) -> Vec<EdgeSet> {
    let bonds = g.bonds();
    let starts: Vec<usize> = match required {
        Some(e) => vec![e],
        None => (0..bonds.len()).collect(),
    };
    let mut out: Vec<EdgeSet> = starts.iter().map(|&e| SmallVec::from_slice(&[e])).collect();
    if max_edges <= 1 {
        return out;
    }
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); g.atom_count()];
    for (i, b) in bonds.iter().enumerate() {
        incident[b.a].push(i);
        incident[b.b].push(i);
    }
    let mut seen: HashSet<EdgeSet> = out.iter().cloned().collect();
    let mut frontier = out.clone();
    for _ in 1..max_edges {
        let mut next = Vec::new();
        for set in &frontier {
            for &e in set.iter() {
                for v in [bonds[e].a, bonds[e].b] {
                    for &f in &incident[v] {
                        if set.contains(&f) {
                            continue;
                        }
                        let mut grown = set.clone();
                        let at = grown.partition_point(|&x| x < f);
                        grown.insert(at, f);
                        if seen.insert(grown.clone()) {
                            next.push(grown);
                        }
                    }
                }
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// The fragment formed by a bond set and its endpoints.
pub fn edge_subgraph(g: &MolGraph, set: &[usize]) -> MolGraph {
    let mut map: HashMap<usize, usize> = HashMap::new();
    let mut h = MolGraph::new();
    for &e in set {
        let b = g.bonds()[e];
        for v in [b.a, b.b] {
            map.entry(v).or_insert_with(|| h.push_atom(*g.atom(v)));
        }
    }
    for &e in set {
        let b = g.bonds()[e];
        h.insert_bond_unchecked(map[&b.a], map[&b.b], b.order);
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// `k` unit-length principal axes, highest variance first.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub total_variance: f64,
}

impl Pca {
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.iter().zip(x).zip(&self.mean).map(|((c, x), m)| c * (x - m)).sum())
            .collect()
    }

    pub fn explained_ratio(&self) -> Vec<f64> {
        self.explained_variance
            .iter()
            .map(|v| if self.total_variance > 0.0 { v / self.total_variance } else { 0.0 })
            .collect()
    }
}

/// Principal component analysis by eigen-decomposition of the sample
/// covariance. Returns the fit and the projected input points.
pub fn pca_project(vectors: &[Vec<f64>], k: usize) -> Result<(Pca, Vec<Vec<f64>>), FeatureError> {
    let n = vectors.len();
    if n < 2 {
        return Err(FeatureError::TooFewVectors(n));
    }
    let d = vectors[0].len();
    if vectors.iter().any(|v| v.len() != d) {
        return Err(FeatureError::Ragged);
    }
    if k > d {
        return Err(FeatureError::TooManyComponents { k, dimension: d });
    }
    let x = DMatrix::from_fn(n, d, |i, j| vectors[i][j]);
    let mean: Vec<f64> = (0..d).map(|j| x.column(j).mean()).collect();
    let centered = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - mean[j]);
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let total_variance = cov.trace();
    let eig = SymmetricEigen::new(cov);
    let mut idx: Vec<usize> = (0..d).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut components = Vec::with_capacity(k);
    let mut explained_variance = Vec::with_capacity(k);
    for &j in idx.iter().take(k) {
        let mut axis: Vec<f64> = eig.eigenvectors.column(j).iter().copied().collect();
        // Fix the sign so the largest-magnitude entry is positive.
        let pivot = axis
            .iter()
            .copied()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(0.0);
        if pivot < 0.0 {
            axis.iter_mut().for_each(|a| *a = -*a);
        }
        components.push(axis);
        explained_variance.push(eig.eigenvalues[j].max(0.0));
    }
    let pca = Pca {
        mean,
        components,
        explained_variance,
        total_variance,
    };
    let points = vectors.iter().map(|v| pca.project(v)).collect();
    Ok((pca, points))
}
