use std::collections::HashSet;

use proptest::prelude::*;

use molgen_core::bench::{brute_force_enumerate, filter_ablation};
use molgen_core::enumerate::{generate_collect, GenerationConfig, Limits, ResourcePool};
use molgen_core::features::{FeatureFamily, FeatureSchema};
use molgen_core::matching::contains_fragment;
use molgen_core::regress::{fit, HyperParams, ModelKind, Weights};
use molgen_core::rules::{RuleSet, StructuralRule};
use molgen_core::{canonical_label, count_fragment, is_isomorphic, smiles, Atom, Element, MolGraph, ValenceTable};

const ELEMENTS: [Element; 4] = [Element::C, Element::N, Element::O, Element::S];

/// Random connected graph: a tree from `steps`, then ring closures from `extra`.
fn build(steps: &[(usize, usize, u8)], extra: &[(usize, usize)]) -> MolGraph {
    let table = ValenceTable::default();
    let mut g = MolGraph::single(Element::C);
    for &(parent, el, order) in steps {
        let v = parent % g.atom_count();
        let e = ELEMENTS[el % ELEMENTS.len()];
        if let Ok(h) = g.add_atom_bond_with(v, Atom::neutral(e, &table), order) {
            g = h;
        } else if let Ok(h) = g.add_atom_bond_with(v, Atom::neutral(e, &table), 1) {
            g = h;
        }
    }
    for &(a, b) in extra {
        let (a, b) = (a % g.atom_count(), b % g.atom_count());
        if a != b && g.bond_order(a, b).is_none() {
            let _ = g.push_bond(a, b, 1);
        }
    }
    g
}

fn graph() -> impl Strategy<Value = MolGraph> {
    (
        prop::collection::vec((0usize..16, 0usize..4, 1u8..=3), 0..9),
        prop::collection::vec((0usize..16, 0usize..16), 0..3),
    )
        .prop_map(|(s, e)| build(&s, &e))
}

fn graph_and_perm() -> impl Strategy<Value = (MolGraph, Vec<usize>)> {
    graph().prop_flat_map(|g| {
        let n = g.atom_count();
        (Just(g), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn label_invariant_under_relabelling((g, perm) in graph_and_perm()) {
        let h = g.permuted(&perm);
        prop_assert!(is_isomorphic(&g, &h));
        prop_assert_eq!(canonical_label(&g), canonical_label(&h));
    }

    #[test]
    fn equal_labels_mean_isomorphic(a in graph(), b in graph()) {
        prop_assert_eq!(canonical_label(&a) == canonical_label(&b), is_isomorphic(&a, &b));
    }

    #[test]
    fn smiles_round_trip((g, perm) in graph_and_perm()) {
        let text = smiles::write(&g);
        let back = smiles::parse(&text).unwrap();
        prop_assert!(is_isomorphic(&g, &back), "{}", text);
        // Canonical output does not depend on input numbering.
        prop_assert_eq!(smiles::write(&g.permuted(&perm)), text);
    }

    #[test]
    fn fragment_counts_never_drop_under_augmentation(
        g in graph(),
        frag in prop::sample::select(vec!["CC", "C=O", "CO", "C=C=N", "NO", "CCC", "C#C", "CN"]),
        v in 0usize..16,
        el in 0usize..4,
        order in 1u8..=3,
    ) {
        let f = molgen_core::rules::parse_fragment(frag).unwrap();
        let before = count_fragment(&g, &f);
        let v = v % g.atom_count();
        if let Ok(h) = g.add_atom_bond(v, ELEMENTS[el], order) {
            prop_assert!(count_fragment(&h, &f) >= before);
            if contains_fragment(&g, &f) {
                prop_assert!(contains_fragment(&h, &f));
            }
        }
    }

    #[test]
    fn incremental_encoding_matches_full(g in graph(), v in 0usize..16, el in 0usize..3, order in 1u8..=2) {
        let corpus: Vec<MolGraph> = ["CCO", "C=CN", "C1CCOC1", "c1ccccc1O", "CC#N", "OCC(=O)N"]
            .iter().map(|s| smiles::parse(s).unwrap()).collect();
        let families = [
            FeatureFamily::AtomCount,
            FeatureFamily::RingCount,
            FeatureFamily::AromaticRingCount,
            FeatureFamily::EdgeSubgraph { max_edges: 2 },
        ];
        let schema = FeatureSchema::build(corpus.iter(), &families).unwrap();
        let v = v % g.atom_count();
        if let Ok(h) = g.add_atom_bond(v, ELEMENTS[el], order) {
            let prev = schema.encode(&g);
            prop_assert_eq!(schema.encode_extended(&prev, &h, h.atom_count() - 1), schema.encode(&h));
        }
    }
}

fn small_pools() -> Vec<ResourcePool> {
    vec![
        ResourcePool::atoms(&[(Element::C, 3), (Element::O, 1)]),
        ResourcePool::atoms(&[(Element::C, 3), (Element::N, 1), (Element::O, 1)]),
        ResourcePool::atoms(&[(Element::C, 2), (Element::N, 2), (Element::O, 1)]),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// No over-pruning: output equals the oracle minus classes holding a
    /// forbidden fragment.
    #[test]
    fn pruning_is_exact(
        pool in prop::sample::select(small_pools()),
        subset in prop::sample::subsequence(vec!["C#C", "C=O", "NO", "C=C=C", "OO", "C=N", "CNC"], 1..4),
    ) {
        let rules: Vec<StructuralRule> = subset
            .iter()
            .enumerate()
            .map(|(i, f)| StructuralRule::forbidden(&format!("r{i}"), f, "").unwrap())
            .collect();
        let frags: Vec<MolGraph> = rules.iter().map(|r| r.fragment.clone()).collect();
        let mut config = GenerationConfig::new(pool.clone());
        config.rules = RuleSet::new(rules).unwrap();
        let (sols, _) = generate_collect(&config).unwrap();
        let expected: Vec<MolGraph> = brute_force_enumerate(&pool)
            .unwrap()
            .into_iter()
            .filter(|g| !frags.iter().any(|f| contains_fragment(g, f)))
            .collect();
        prop_assert_eq!(sols.len(), expected.len());
        let labels: HashSet<_> = sols.iter().map(|s| s.label.clone()).collect();
        for e in &expected {
            prop_assert!(labels.contains(&canonical_label(e)));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    /// At equal node budgets the filtered arm emits nothing invalid and at
    /// least as many valid molecules as the unfiltered one.
    #[test]
    fn ablation_dominance(
        subset in prop::sample::subsequence((0..5).collect::<Vec<usize>>(), 1..=5),
        budget in 500u64..4000,
    ) {
        let defaults = RuleSet::default_rules();
        let rules = RuleSet::new(subset.iter().map(|&i| defaults.rules()[i].clone()).collect()).unwrap();
        for pool in ["C:4,N:1,O:2", "C:5,N:1,O:1", "C:3,N:2,O:2"] {
            let mut config = GenerationConfig::new(pool.parse().unwrap());
            config.rules = rules.clone();
            config.limits = Limits::nodes(budget);
            let r = filter_ablation(&config).unwrap();
            let (on, off) = (r.arm("filter_on").unwrap(), r.arm("filter_off").unwrap());
            prop_assert_eq!(on.invalid, 0);
            prop_assert!(on.valid >= off.valid, "{}: on {} off {}", pool, on.valid, off.valid);
        }
    }
}

fn linear_problem(seed: u64, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let w: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
    let y = x
        .iter()
        .map(|r| r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + rng.random_range(-0.5..0.5))
        .collect();
    (x, y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Ridge coefficients agree with plain gradient descent on the same
    /// standardized objective.
    #[test]
    fn ridge_matches_gradient_descent(seed in 0u64..10_000, lambda in 0.01f64..20.0) {
        let (x, y) = linear_problem(seed, 30, 3);
        let m = fit(ModelKind::Ridge, &x, &y, HyperParams { lambda, gamma: None }).unwrap();
        let Weights::Linear { coef } = &m.weights else { panic!("linear weights") };
        let z: Vec<Vec<f64>> = x.iter().map(|r| m.scaler.transform(r)).collect();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let mut w = vec![0.0; 3];
        let step = 1.0 / (2.0 * (30.0 * 3.0 + lambda));
        for _ in 0..20_000 {
            let mut grad: Vec<f64> = w.iter().map(|wj| 2.0 * lambda * wj).collect();
            for (row, yi) in z.iter().zip(&y) {
                let r = row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() - (yi - mean);
                for j in 0..3 {
                    grad[j] += 2.0 * r * row[j];
                }
            }
            for j in 0..3 {
                w[j] -= step * grad[j];
            }
        }
        for j in 0..3 {
            prop_assert!((w[j] - coef[j]).abs() < 1e-6, "{} vs {}", w[j], coef[j]);
        }
    }

    /// Lasso solutions satisfy the subgradient optimality conditions.
    #[test]
    fn lasso_kkt(seed in 0u64..10_000, lambda in 0.001f64..2.0) {
        let (x, y) = linear_problem(seed, 40, 4);
        let m = fit(ModelKind::Lasso, &x, &y, HyperParams { lambda, gamma: None }).unwrap();
        let Weights::Linear { coef } = &m.weights else { panic!("linear weights") };
        let z: Vec<Vec<f64>> = x.iter().map(|r| m.scaler.transform(r)).collect();
        let n = y.len() as f64;
        let resid: Vec<f64> = z
            .iter()
            .zip(&y)
            .map(|(row, yi)| yi - m.intercept - row.iter().zip(coef).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        for j in 0..4 {
            let g = z.iter().zip(&resid).map(|(row, r)| row[j] * r).sum::<f64>() / n;
            if coef[j] == 0.0 {
                prop_assert!(g.abs() <= lambda + 1e-6);
            } else {
                prop_assert!((g - lambda * coef[j].signum()).abs() < 1e-6, "j={} g={} w={}", j, g, coef[j]);
            }
        }
    }
}
