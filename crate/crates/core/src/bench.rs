//! Experiment harness: a naive oracle enumerator, speed and filter-ablation
//! arms around [`generate`], and a PCA variety report.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::element::{Element, ValenceTable};
use crate::enumerate::{evaluate_structure, generate, GenerateError, GenerationConfig, GenerationStats, Limits, ResourcePool, Solution};
use crate::features::{pca_project, FeatureError, FeatureSchema, Pca};
use crate::graph::MolGraph;
use crate::matching::is_isomorphic;
use crate::rules::{check_rules, CheckMode, RuleSet};
use crate::smiles;

pub const ORACLE_MAX_ATOMS: u32 = 7;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("oracle budget of {0} atoms exceeds the limit of {ORACLE_MAX_ATOMS}")]
    BudgetTooLarge(u32),
    #[error(transparent)]
    Generate(#[from] GenerateError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// Cheap isomorphism invariant used only to bucket candidates before the
/// pairwise matcher runs.
fn bucket_key(g: &MolGraph) -> (Vec<(Element, u32)>, Vec<(u8, u8, usize)>) {
    let comp = g.composition().into_iter().collect();
    let mut local: Vec<(u8, u8, usize)> = (0..g.atom_count())
        .map(|v| (g.atom(v).element.code(), g.used_valence(v), g.degree(v)))
        .collect();
    local.sort_unstable();
    (comp, local)
}

/// Every connected leaf-grown graph buildable from `pool`, one per
/// isomorphism class. Classes are separated by pairwise [`is_isomorphic`]
/// only, with no canonical labeling involved.
pub fn brute_force_enumerate(pool: &ResourcePool) -> Result<Vec<MolGraph>, BenchError> {
    let total = pool.total_atoms();
    if total > ORACLE_MAX_ATOMS {
        return Err(BenchError::BudgetTooLarge(total));
    }
    let table = ValenceTable::default();
    let mut classes: Vec<MolGraph> = Vec::new();
    let mut level: Vec<MolGraph> = pool
        .atoms
        .iter()
        .filter(|(_, &n)| n > 0)
        .map(|(&e, _)| MolGraph::single(e))
        .collect();
    while !level.is_empty() {
        classes.extend(level.iter().cloned());
        let mut buckets: HashMap<_, Vec<MolGraph>> = HashMap::new();
        let mut next = Vec::new();
        for g in &level {
            let used = g.composition();
            for (&e, &n) in &pool.atoms {
                if used.get(&e).copied().unwrap_or(0) >= n {
                    continue;
                }
                for v in 0..g.atom_count() {
                    let free = g.free_valence(v).unwrap_or(0);
                    for order in 1..=free.min(table.neutral(e)).min(3) {
                        let Ok(h) = g.add_atom_bond(v, e, order) else { continue };
                        let bucket = buckets.entry(bucket_key(&h)).or_default();
                        if bucket.iter().any(|k| is_isomorphic(k, &h)) {
                            continue;
                        }
                        bucket.push(h.clone());
                        next.push(h);
                    }
                }
            }
        }
        level = next;
    }
    Ok(classes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub name: String,
    pub stats: GenerationStats,
    pub valid: u64,
    pub invalid: u64,
    /// Valid solutions per second, screening time included.
    pub valid_per_second: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub scenario: String,
    pub stats: GenerationStats,
    pub arms: Vec<ArmReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub median_solutions_per_second: Option<f64>,
    /// Online valid rate over post-hoc valid rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speedup: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variety: Option<VarietySummary>,
}

impl BenchReport {
    pub fn arm(&self, name: &str) -> Option<&ArmReport> {
        self.arms.iter().find(|a| a.name == name)
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

fn rate(count: u64, seconds: f64) -> f64 {
    if seconds > 0.0 {
        count as f64 / seconds
    } else {
        0.0
    }
}

/// Runs `config` and counts the emitted solutions passing `screen`.
fn run_arm(
    name: &str,
    config: &GenerationConfig,
    mut screen: impl FnMut(&Solution) -> bool,
) -> Result<(ArmReport, Vec<Solution>), GenerateError> {
    let start = std::time::Instant::now();
    let (mut valid, mut invalid) = (0, 0);
    let mut kept = Vec::new();
    let stats = generate(config, |s| {
        if screen(&s) {
            valid += 1;
            kept.push(s);
        } else {
            invalid += 1;
        }
    })?;
    let elapsed = start.elapsed().as_secs_f64();
    Ok((
        ArmReport {
            name: name.to_string(),
            stats,
            valid,
            invalid,
            valid_per_second: rate(valid, elapsed),
        },
        kept,
    ))
}

/// Online gating versus generate-everything-then-screen on the same pool and
/// limits. The post-hoc arm drops rules, fragment ranges and models from the
/// search and applies them afterwards.
pub fn speed_bench(config: &GenerationConfig, repetitions: usize) -> Result<BenchReport, GenerateError> {
    let reps = repetitions.max(1);
    let mut post_config = config.clone();
    post_config.rules = RuleSet::empty();
    post_config.pool.fragments.clear();
    post_config.models.clear();

    let mut online_rates = Vec::with_capacity(reps);
    let mut online = None;
    let mut post = None;
    for _ in 0..reps {
        let (arm, _) = run_arm("online", config, |_| true)?;
        online_rates.push(arm.stats.solutions_per_second);
        online.get_or_insert(arm);
        let (arm, _) = run_arm("post_hoc", &post_config, |s| {
            evaluate_structure(&s.graph, &config.pool.fragments, &config.rules, &config.models).accepted
        })?;
        post.get_or_insert(arm);
    }
    let online = online.expect("at least one repetition");
    let post = post.expect("at least one repetition");
    let speedup = (post.valid_per_second > 0.0).then(|| online.valid_per_second / post.valid_per_second);
    Ok(BenchReport {
        scenario: "speed".to_string(),
        stats: online.stats.clone(),
        median_solutions_per_second: Some(median(online_rates)),
        speedup,
        arms: vec![online, post],
        variety: None,
    })
}

/// Rules applied online versus rules disabled and applied to the output, at
/// the same limits. Each arm's output is re-checked against the rules.
pub fn filter_ablation(config: &GenerationConfig) -> Result<BenchReport, GenerateError> {
    let rules = &config.rules;
    let passes = |s: &Solution| check_rules(&s.graph, rules, CheckMode::Output).is_ok();
    let (on, _) = run_arm("filter_on", config, passes)?;
    let mut off_config = config.clone();
    off_config.rules = RuleSet::empty();
    let (off, _) = run_arm("filter_off", &off_config, passes)?;
    Ok(BenchReport {
        scenario: "filter_ablation".to_string(),
        stats: on.stats.clone(),
        arms: vec![on, off],
        median_solutions_per_second: None,
        speedup: None,
        variety: None,
    })
}

/// Filter ablation over a range of node budgets.
pub fn filter_ablation_curve(config: &GenerationConfig, budgets: &[u64]) -> Result<Vec<BenchReport>, GenerateError> {
    budgets
        .iter()
        .map(|&b| {
            let mut c = config.clone();
            c.limits = Limits::nodes(b);
            filter_ablation(&c)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointSet {
    Training,
    Generated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaPoint {
    pub set: PointSet,
    pub smiles: String,
    pub pc1: f64,
    pub pc2: f64,
    /// Outside the training convex hull.
    pub outside: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarietySummary {
    pub training_points: usize,
    pub generated_points: usize,
    pub explained_variance: Vec<f64>,
    pub explained_ratio: Vec<f64>,
    pub training_hull_area: f64,
    pub generated_hull_area: f64,
    /// `None` when the training hull is degenerate.
    pub area_ratio: Option<f64>,
    pub outside_fraction: f64,
    /// Largest gap between a component's eigenvalue and the sample variance
    /// of the projected coordinates along it.
    pub conservation_error: f64,
}

#[derive(Debug, Clone)]
pub struct VarietyReport {
    pub pca: Pca,
    pub points: Vec<PcaPoint>,
    pub summary: VarietySummary,
}

impl VarietyReport {
    pub fn write_csv(&self, path: &Path) -> Result<(), BenchError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "set,smiles,pc1,pc2,outside")?;
        for p in &self.points {
            let set = match p.set {
                PointSet::Training => "training",
                PointSet::Generated => "generated",
            };
            writeln!(w, "{set},{},{},{},{}", p.smiles, p.pc1, p.pc2, p.outside)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Two-component PCA over the union of both sets, with hull statistics.
pub fn variety_report(generated: &[MolGraph], training: &[MolGraph], schema: &FeatureSchema) -> Result<VarietyReport, BenchError> {
    if generated.is_empty() || training.is_empty() {
        return Err(FeatureError::EmptyDataset.into());
    }
    let vectors: Vec<Vec<f64>> = training.iter().chain(generated).map(|g| schema.encode(g)).collect();
    let (pca, coords) = pca_project(&vectors, 2.min(schema.dimension()))?;
    let xy: Vec<(f64, f64)> = coords
        .iter()
        .map(|c| (c.first().copied().unwrap_or(0.0), c.get(1).copied().unwrap_or(0.0)))
        .collect();
    let (train_xy, gen_xy) = xy.split_at(training.len());
    let train_hull = convex_hull(train_xy);
    let gen_hull = convex_hull(gen_xy);
    let scale = xy.iter().fold(1.0f64, |m, &(a, b)| m.max(a.abs()).max(b.abs()));
    let tol = 1e-9 * scale;

    let mut points = Vec::with_capacity(xy.len());
    let mut outside = 0;
    for (i, (&(pc1, pc2), g)) in xy.iter().zip(training.iter().chain(generated)).enumerate() {
        let set = if i < training.len() { PointSet::Training } else { PointSet::Generated };
        let out = set == PointSet::Generated && !in_hull(&train_hull, (pc1, pc2), tol);
        outside += out as usize;
        points.push(PcaPoint {
            set,
            smiles: smiles::write(g),
            pc1,
            pc2,
            outside: out,
        });
    }

    let n = coords.len() as f64;
    let conservation_error = (0..pca.components.len())
        .map(|k| {
            let mean = coords.iter().map(|c| c[k]).sum::<f64>() / n;
            let var = coords.iter().map(|c| (c[k] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var - pca.explained_variance[k]).abs()
        })
        .fold(0.0, f64::max);

    let training_hull_area = polygon_area(&train_hull);
    let generated_hull_area = polygon_area(&gen_hull);
    let summary = VarietySummary {
        training_points: training.len(),
        generated_points: generated.len(),
        explained_variance: pca.explained_variance.clone(),
        explained_ratio: pca.explained_ratio(),
        training_hull_area,
        generated_hull_area,
        area_ratio: (training_hull_area > tol * tol).then(|| generated_hull_area / training_hull_area),
        outside_fraction: outside as f64 / generated.len() as f64,
        conservation_error,
    };
    Ok(VarietyReport { pca, points, summary })
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Counter-clockwise hull by the monotone chain, without collinear points.
pub fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut p: Vec<(f64, f64)> = points.to_vec();
    p.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> = if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for &q in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    hull
}

pub fn polygon_area(poly: &[(f64, f64)]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let s: f64 = (0..poly.len())
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum();
    s.abs() / 2.0
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    ((p.0 - a.0 - t * dx).powi(2) + (p.1 - a.1 - t * dy).powi(2)).sqrt()
}

/// Whether `p` lies in the hull or within `tol` of its boundary.
pub fn in_hull(hull: &[(f64, f64)], p: (f64, f64), tol: f64) -> bool {
    match hull.len() {
        0 => false,
        1 => segment_distance(p, hull[0], hull[0]) <= tol,
        2 => segment_distance(p, hull[0], hull[1]) <= tol,
        n => (0..n).all(|i| {
            let (a, b) = (hull[i], hull[(i + 1) % n]);
            let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
            cross(a, b, p) >= -tol * len
        }),
    }
}

/// Solutions keyed by element composition, for quick summaries.
pub fn composition_histogram(solutions: &[Solution]) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for s in solutions {
        let key: String = s
            .graph
            .composition()
            .iter()
            .map(|(e, n)| format!("{}{n}", e.symbol()))
            .collect();
        *out.entry(key).or_insert(0) += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumerate::generate_collect;
    use crate::rules::StructuralRule;
    use crate::smiles::parse;

    fn pool(atoms: &[(Element, u32)]) -> ResourcePool {
        ResourcePool::atoms(atoms)
    }

    #[test]
    fn oracle_small_pools() {
        assert_eq!(brute_force_enumerate(&pool(&[(Element::C, 1)])).unwrap().len(), 1);
        assert_eq!(brute_force_enumerate(&pool(&[(Element::C, 2)])).unwrap().len(), 4);
        let p = pool(&[(Element::C, 2), (Element::O, 1)]);
        let oracle = brute_force_enumerate(&p).unwrap();
        let (sols, _) = generate_collect(&GenerationConfig::new(p)).unwrap();
        assert_eq!(oracle.len(), sols.len());
        assert!(matches!(
            brute_force_enumerate(&pool(&[(Element::C, 8)])),
            Err(BenchError::BudgetTooLarge(8))
        ));
    }

    #[test]
    fn ablation_without_rules_is_symmetric() {
        let mut c = GenerationConfig::new(pool(&[(Element::C, 4), (Element::N, 1), (Element::O, 1)]));
        c.limits = Limits::nodes(300);
        let r = filter_ablation(&c).unwrap();
        let (on, off) = (r.arm("filter_on").unwrap(), r.arm("filter_off").unwrap());
        assert_eq!((on.valid, on.invalid), (off.valid, off.invalid));
        assert_eq!(on.stats.nodes_expanded, off.stats.nodes_expanded);
    }

    #[test]
    fn ablation_with_default_rules_dominates() {
        let mut c = GenerationConfig::new(pool(&[(Element::C, 6), (Element::N, 1), (Element::O, 1)]));
        c.rules = RuleSet::default_rules();
        c.limits = Limits::nodes(2_000);
        let r = filter_ablation(&c).unwrap();
        let (on, off) = (r.arm("filter_on").unwrap(), r.arm("filter_off").unwrap());
        assert_eq!(on.invalid, 0);
        assert!(on.valid >= off.valid);
        assert!(off.invalid > 0);
    }

    #[test]
    fn speed_bench_smoke() {
        let mut c = GenerationConfig::new(pool(&[(Element::C, 5), (Element::O, 2), (Element::N, 1)]));
        c.limits = Limits::nodes(3_000);
        c.rules = RuleSet::new(vec![StructuralRule::forbidden("oo", "OO", "").unwrap()]).unwrap();
        let r = speed_bench(&c, 3).unwrap();
        assert!(r.median_solutions_per_second.unwrap() > 0.0);
        let (on, post) = (r.arm("online").unwrap(), r.arm("post_hoc").unwrap());
        assert!(on.valid >= post.valid);
        let again = speed_bench(&c, 1).unwrap();
        assert_eq!(again.arm("online").unwrap().valid, on.valid);
    }

    #[test]
    fn hull_geometry() {
        let square = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.5, 0.5), (0.5, 0.0)];
        let h = convex_hull(&square);
        assert_eq!(h.len(), 4);
        assert!((polygon_area(&h) - 1.0).abs() < 1e-12);
        assert!(in_hull(&h, (0.5, 0.5), 1e-12));
        assert!(in_hull(&h, (1.0, 0.5), 1e-12));
        assert!(!in_hull(&h, (1.1, 0.5), 1e-12));
        let line = convex_hull(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]);
        assert_eq!(polygon_area(&line), 0.0);
    }

    #[test]
    fn variety_of_identical_sets() {
        let mols: Vec<MolGraph> = ["CCO", "CC=O", "CCN", "C#N", "CC(C)O", "OCCO", "NCCN", "C1CC1"]
            .iter()
            .map(|s| parse(s).unwrap())
            .collect();
        let schema = FeatureSchema::build(mols.iter(), &crate::features::FeatureFamily::standard()).unwrap();
        let r = variety_report(&mols, &mols, &schema).unwrap();
        assert!((r.summary.area_ratio.unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(r.summary.outside_fraction, 0.0);
        assert!(r.summary.conservation_error < 1e-6);

        let inner = vec![mols[0].clone()];
        let r = variety_report(&inner, &mols, &schema).unwrap();
        assert!(r.summary.area_ratio.unwrap() <= 1.0);
    }
}
