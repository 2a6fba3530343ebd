use std::collections::{BTreeMap, HashSet};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::augment::{canonical_children, seen_children, Child};
use super::{FragmentRange, GenerateError, GenerationConfig, GenerationStats, LimitKind, Solution};
use crate::canon::{canonical_form, CanonicalLabel};
use crate::element::Element;
use crate::features::FeatureSchema;
use crate::graph::MolGraph;
use crate::matching::{contains_fragment, contains_fragment_touching, count_fragment, count_fragment_touching};
use crate::regress::TrainedModel;
use crate::rules::{check_rules, CheckMode, RuleKind, RuleSet};

/// Live counters, readable while a run is in progress.
#[derive(Debug, Default)]
pub struct Progress {
    pub nodes: AtomicU64,
    pub solutions: AtomicU64,
}

/// Cancellation flag and progress counters shared with the caller.
#[derive(Debug, Clone, Default)]
pub struct Control {
    pub cancel: Arc<AtomicBool>,
    pub progress: Arc<Progress>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruneCause {
    Forbidden,
    OverMaxFragment,
    Termination,
    Valence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accepted: bool,
    pub predictions: Vec<f64>,
}

fn fragments_ok(g: &MolGraph, fragments: &[FragmentRange]) -> bool {
    fragments.iter().all(|f| f.contains(count_fragment(g, &f.fragment) as u32))
}

/// Output decision for `g`: every fragment count in range, every rule passing
/// in output mode, and every model prediction inside its target range.
/// Predictions are returned whatever the verdict.
pub fn evaluate_structure(g: &MolGraph, fragments: &[FragmentRange], rules: &RuleSet, models: &[TrainedModel]) -> Evaluation {
    let predictions: Vec<f64> = models.iter().map(|m| m.predict_graph(g).unwrap_or(f64::NAN)).collect();
    let accepted = fragments_ok(g, fragments)
        && check_rules(g, rules, CheckMode::Output).is_ok()
        && models.iter().zip(&predictions).all(|(m, &p)| !p.is_nan() && m.in_target(p));
    Evaluation { accepted, predictions }
}

/// Why generation stops below `g`, if it does. Config limits are handled by
/// the generator itself.
pub fn check_termination(
    g: &MolGraph,
    remaining: &BTreeMap<Element, u32>,
    fragments: &[FragmentRange],
    rules: &RuleSet,
) -> Option<PruneCause> {
    if let Err(v) = check_rules(g, rules, CheckMode::Prune) {
        return Some(match rules.rules()[v.index].kind {
            RuleKind::Forbidden => PruneCause::Forbidden,
            RuleKind::Count { .. } => PruneCause::OverMaxFragment,
        });
    }
    if fragments
        .iter()
        .any(|f| f.max.is_some_and(|m| count_fragment(g, &f.fragment) as u32 > m))
    {
        return Some(PruneCause::OverMaxFragment);
    }
    if remaining.values().all(|&n| n == 0) {
        return Some(PruneCause::Termination);
    }
    if g.total_free_valence() == 0 {
        return Some(PruneCause::Valence);
    }
    None
}

struct Tracked<'a> {
    fragment: &'a MolGraph,
    min: u32,
    max: Option<u32>,
}

struct Node {
    graph: MolGraph,
    label: CanonicalLabel,
    remaining: Vec<(Element, u32)>,
    counts: Vec<u32>,
    features: Vec<Vec<f64>>,
    violation: Option<PruneCause>,
    /// False for seed-branch graphs an atom root already covers.
    reportable: bool,
}

struct Engine<'a> {
    config: &'a GenerationConfig,
    forbidden: Vec<&'a MolGraph>,
    tracked: Vec<Tracked<'a>>,
    schemas: Vec<&'a FeatureSchema>,
    start: Instant,
    control: &'a Control,
}

enum Branch<'s> {
    Canonical,
    Seeded(&'s mut HashSet<CanonicalLabel>),
}

impl<'a> Engine<'a> {
    fn new(config: &'a GenerationConfig, control: &'a Control) -> Engine<'a> {
        let mut forbidden = Vec::new();
        let mut tracked: Vec<Tracked> = config
            .pool
            .fragments
            .iter()
            .map(|f| Tracked {
                fragment: &f.fragment,
                min: f.min,
                max: f.max,
            })
            .collect();
        for r in config.rules.rules() {
            match r.kind {
                RuleKind::Forbidden => forbidden.push(&r.fragment),
                RuleKind::Count { min, max } => tracked.push(Tracked {
                    fragment: &r.fragment,
                    min,
                    max,
                }),
            }
        }
        Engine {
            config,
            forbidden,
            tracked,
            schemas: config.models.iter().map(|m| m.schema.as_ref().expect("validated")).collect(),
            start: Instant::now(),
            control,
        }
    }

    fn full_pool(&self) -> Vec<(Element, u32)> {
        self.config.pool.atoms.iter().map(|(&e, &n)| (e, n)).collect()
    }

    fn root(&self, graph: MolGraph, remaining: Vec<(Element, u32)>, reportable: bool) -> Node {
        let counts: Vec<u32> = self.tracked.iter().map(|t| count_fragment(&graph, t.fragment) as u32).collect();
        let violation = if self.forbidden.iter().any(|f| contains_fragment(&graph, f)) {
            Some(PruneCause::Forbidden)
        } else if self.over_max(&counts) {
            Some(PruneCause::OverMaxFragment)
        } else {
            None
        };
        let features = match violation {
            Some(_) => Vec::new(),
            None => self.schemas.iter().map(|s| s.encode(&graph)).collect(),
        };
        Node {
            label: canonical_form(&graph).label,
            graph,
            remaining,
            counts,
            features,
            violation,
            reportable,
        }
    }

    fn over_max(&self, counts: &[u32]) -> bool {
        self.tracked.iter().zip(counts).any(|(t, &c)| t.max.is_some_and(|m| c > m))
    }

    fn child(&self, parent: &Node, c: Child, seeded: bool) -> Node {
        let u = c.atom;
        let g = c.graph;
        let mut remaining = parent.remaining.clone();
        if let Some(slot) = remaining.iter_mut().find(|(e, _)| *e == c.element) {
            slot.1 -= 1;
        }
        let counts: Vec<u32> = self
            .tracked
            .iter()
            .zip(&parent.counts)
            .map(|(t, &before)| before + count_fragment_touching(&g, t.fragment, u) as u32)
            .collect();
        let violation = if self.forbidden.iter().any(|f| contains_fragment_touching(&g, f, u)) {
            Some(PruneCause::Forbidden)
        } else if self.over_max(&counts) {
            Some(PruneCause::OverMaxFragment)
        } else {
            None
        };
        let features = match violation {
            Some(_) => Vec::new(),
            None => self
                .schemas
                .iter()
                .zip(&parent.features)
                .map(|(s, prev)| s.encode_extended(prev, &g, u))
                .collect(),
        };
        let reportable = !seeded || !self.covered_by_atom_roots(&g);
        Node {
            graph: g,
            label: c.form.label,
            remaining,
            counts,
            features,
            violation,
            reportable,
        }
    }

    /// Neutral trees within the original pool are generated from atom roots.
    fn covered_by_atom_roots(&self, g: &MolGraph) -> bool {
        g.bond_count() + 1 == g.atom_count()
            && g.atoms().iter().all(|a| a.formal_charge == 0)
            && g
                .composition()
                .iter()
                .all(|(e, &n)| self.config.pool.atoms.get(e).is_some_and(|&have| n <= have))
    }

    fn predictions(&self, node: &Node) -> Option<Vec<f64>> {
        let mut out = Vec::with_capacity(self.config.models.len());
        let mut ok = true;
        for (m, x) in self.config.models.iter().zip(&node.features) {
            let p = m.predict_unchecked(x);
            ok &= m.in_target(p);
            out.push(p);
        }
        ok.then_some(out)
    }

    fn accepts(&self, node: &Node) -> Option<Vec<f64>> {
        if !node.reportable || node.violation.is_some() {
            return None;
        }
        let in_range = self
            .tracked
            .iter()
            .zip(&node.counts)
            .all(|(t, &c)| c >= t.min && t.max.is_none_or(|m| c <= m));
        if !in_range {
            return None;
        }
        self.predictions(node)
    }

    fn limit_hit(&self, stats: &GenerationStats) -> Option<LimitKind> {
        let limits = &self.config.limits;
        if self.control.cancel.load(Ordering::Relaxed) {
            return Some(LimitKind::Cancelled);
        }
        if limits.max_solutions.is_some_and(|m| stats.solutions_emitted >= m) {
            return Some(LimitKind::MaxSolutions);
        }
        if limits.max_nodes.is_some_and(|m| stats.nodes_expanded >= m) {
            return Some(LimitKind::MaxNodes);
        }
        if limits
            .max_seconds
            .is_some_and(|s| self.start.elapsed().as_secs_f64() >= s)
        {
            return Some(LimitKind::WallClock);
        }
        None
    }

    /// Depth-first search below `root`. Returns false when a limit stopped it.
    fn run(&self, root: Node, mut branch: Branch, stats: &mut GenerationStats, sink: &mut dyn FnMut(Solution)) -> bool {
        if let Some(kind) = self.limit_hit(stats) {
            stats.limit_reached = Some(kind);
            return false;
        }
        let mut stack = vec![root];
        while let Some(node) = stack.pop() {
            stats.nodes_expanded += 1;
            self.control.progress.nodes.fetch_add(1, Ordering::Relaxed);

            if let Some(predictions) = self.accepts(&node) {
                stats.solutions_emitted += 1;
                self.control.progress.solutions.fetch_add(1, Ordering::Relaxed);
                sink(Solution::new(node.graph.clone(), node.label.clone(), predictions));
            }

            if let Some(kind) = self.limit_hit(stats) {
                stats.limit_reached = Some(kind);
                return false;
            }
            let cause = node.violation.or_else(|| {
                if node.remaining.iter().all(|&(_, n)| n == 0) {
                    Some(PruneCause::Termination)
                } else if node.graph.total_free_valence() == 0 {
                    Some(PruneCause::Valence)
                } else {
                    None
                }
            });
            if let Some(cause) = cause {
                let p = &mut stats.prune_counts;
                match cause {
                    PruneCause::Forbidden => p.forbidden += 1,
                    PruneCause::OverMaxFragment => p.over_max_fragment += 1,
                    PruneCause::Termination => p.termination += 1,
                    PruneCause::Valence => p.valence += 1,
                }
                continue;
            }

            let table = &self.config.valence;
            let (children, rejected, seeded) = match &mut branch {
                Branch::Canonical => {
                    let (c, r) = canonical_children(&node.graph, &node.label, &node.remaining, table);
                    (c, r, false)
                }
                Branch::Seeded(seen) => {
                    let (c, r) = seen_children(&node.graph, &node.remaining, table, seen);
                    (c, r, true)
                }
            };
            stats.canonical_rejections += rejected;
            let first = stack.len();
            stack.extend(children.into_iter().map(|c| self.child(&node, c, seeded)));
            // First child on top so discovery order follows candidate order.
            stack[first..].reverse();
        }
        true
    }

    fn atom_root(&self, e: Element) -> Node {
        let atom = crate::graph::Atom::neutral(e, &self.config.valence);
        let mut remaining = self.full_pool();
        for slot in &mut remaining {
            if slot.0 == e {
                slot.1 -= 1;
            }
        }
        self.root(MolGraph::from_atom(atom), remaining, true)
    }
}

/// Runs generation, handing each solution to `sink` in discovery order.
pub fn generate(config: &GenerationConfig, sink: impl FnMut(Solution)) -> Result<GenerationStats, GenerateError> {
    generate_with(config, &Control::default(), sink)
}

pub fn generate_collect(config: &GenerationConfig) -> Result<(Vec<Solution>, GenerationStats), GenerateError> {
    let mut out = Vec::new();
    let stats = generate(config, |s| out.push(s))?;
    Ok((out, stats))
}

/// Like [`generate`], with a cancellation flag and live progress counters.
///
/// Without limits and with `workers > 1`, atom roots are explored in parallel
/// and their solutions are still delivered in root order.
pub fn generate_with(
    config: &GenerationConfig,
    control: &Control,
    mut sink: impl FnMut(Solution),
) -> Result<GenerationStats, GenerateError> {
    config.validate()?;
    let engine = Engine::new(config, control);
    let mut stats = GenerationStats::default();
    let roots: Vec<Element> = config.pool.atoms.iter().filter(|(_, &n)| n > 0).map(|(&e, _)| e).collect();

    let mut running = true;
    if config.limits.is_unlimited() && config.workers > 1 && roots.len() > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| GenerateError::Config(e.to_string()))?;
        let results: Vec<(Vec<Solution>, GenerationStats, bool)> = pool.install(|| {
            roots
                .par_iter()
                .map(|&e| {
                    let mut local = GenerationStats::default();
                    let mut found = Vec::new();
                    let done = engine.run(engine.atom_root(e), Branch::Canonical, &mut local, &mut |s| found.push(s));
                    (found, local, done)
                })
                .collect()
        });
        for (found, local, done) in results {
            found.into_iter().for_each(&mut sink);
            stats.merge(&local);
            running &= done;
        }
    } else {
        for e in roots {
            if !engine.run(engine.atom_root(e), Branch::Canonical, &mut stats, &mut sink) {
                running = false;
                break;
            }
        }
    }

    if running && !config.seeds.is_empty() {
        let mut seen = HashSet::new();
        for seed in &config.seeds {
            let label = canonical_form(seed).label;
            if !seen.insert(label) {
                continue;
            }
            let reportable = !engine.covered_by_atom_roots(seed);
            let root = engine.root(seed.clone(), engine.full_pool(), reportable);
            if !engine.run(root, Branch::Seeded(&mut seen), &mut stats, &mut sink) {
                break;
            }
        }
    }

    stats.elapsed_seconds = engine.start.elapsed().as_secs_f64();
    stats.solutions_per_second = if stats.elapsed_seconds > 0.0 {
        stats.solutions_emitted as f64 / stats.elapsed_seconds
    } else {
        0.0
    };
    Ok(stats)
}
