use std::collections::{BTreeMap, HashSet};

use molgen_core::bench::brute_force_enumerate;
use molgen_core::enumerate::{canonical_augmentations, generate_collect, GenerationConfig, ResourcePool};
use molgen_core::rules::{RuleSet, StructuralRule};
use molgen_core::{canonical_label, is_isomorphic, matching::contains_fragment, smiles, Element, MolGraph};

fn pools_up_to_six() -> Vec<ResourcePool> {
    let mut out = Vec::new();
    for c in 0..=6u32 {
        for n in 0..=(6 - c) {
            for o in 0..=(6 - c - n) {
                if c + n + o == 0 {
                    continue;
                }
                out.push(ResourcePool::atoms(&[(Element::C, c), (Element::N, n), (Element::O, o)]));
            }
        }
    }
    out
}

/// Emitted classes match the oracle: nothing missing, duplicated or spurious.
fn assert_equivalent(pool: &ResourcePool) -> usize {
    let oracle = brute_force_enumerate(pool).unwrap();
    let (sols, stats) = generate_collect(&GenerationConfig::new(pool.clone())).unwrap();
    let labels: HashSet<_> = sols.iter().map(|s| s.label.clone()).collect();
    assert_eq!(labels.len(), sols.len(), "duplicate emission for {pool}");
    assert_eq!(sols.len(), oracle.len(), "class count differs for {pool}");
    for o in &oracle {
        let hits = sols.iter().filter(|s| is_isomorphic(&s.graph, o)).count();
        assert_eq!(hits, 1, "{} matched {hits} times for {pool}", smiles::write(o));
    }
    assert!(stats.solutions_emitted <= stats.nodes_expanded);
    sols.len()
}

#[test]
fn generation_matches_brute_force_oracle() {
    let pools = pools_up_to_six();
    assert!(pools.len() >= 10);
    for p in &pools {
        assert_equivalent(p);
    }
}

#[test]
fn central_pool_c4_o1_n1() {
    let p = ResourcePool::atoms(&[(Element::C, 4), (Element::O, 1), (Element::N, 1)]);
    assert!(assert_equivalent(&p) > 100);
}

#[test]
fn accepted_augmentations_count_classes_minus_roots() {
    let pool = BTreeMap::from([(Element::C, 3u32)]);
    let mut accepted = 0;
    let mut stack = vec![MolGraph::single(Element::C)];
    while let Some(g) = stack.pop() {
        let used = g.atom_count() as u32;
        let remaining = BTreeMap::from([(Element::C, pool[&Element::C] - used)]);
        if remaining[&Element::C] == 0 {
            continue;
        }
        for (v, e, b) in canonical_augmentations(&g, &remaining) {
            accepted += 1;
            stack.push(g.add_atom_bond(v, e, b).unwrap());
        }
    }
    let classes = brute_force_enumerate(&ResourcePool::atoms(&[(Element::C, 3)])).unwrap().len();
    assert_eq!(accepted, classes - 1);
}

#[test]
fn label_equality_agrees_with_matcher_on_c3() {
    let graphs = brute_force_enumerate(&ResourcePool::atoms(&[(Element::C, 3)])).unwrap();
    // Add relabelled copies so equal pairs exist.
    let mut all = graphs.clone();
    for g in &graphs {
        let perm: Vec<usize> = (0..g.atom_count()).rev().collect();
        all.push(g.permuted(&perm));
    }
    for a in &all {
        for b in &all {
            assert_eq!(canonical_label(a) == canonical_label(b), is_isomorphic(a, b));
        }
    }
}

#[test]
fn forbidden_rule_removes_exactly_the_matching_classes() {
    let pool = ResourcePool::atoms(&[(Element::C, 4), (Element::N, 1), (Element::O, 1)]);
    for frag in ["C#C", "C=O", "NO", "C=C=C"] {
        let rule = StructuralRule::forbidden("r", frag, "").unwrap();
        let fragment = rule.fragment.clone();
        let mut config = GenerationConfig::new(pool.clone());
        config.rules = RuleSet::new(vec![rule]).unwrap();
        let (sols, _) = generate_collect(&config).unwrap();
        let expected: Vec<MolGraph> = brute_force_enumerate(&pool)
            .unwrap()
            .into_iter()
            .filter(|g| !contains_fragment(g, &fragment))
            .collect();
        assert_eq!(sols.len(), expected.len(), "fragment {frag}");
        for e in &expected {
            assert!(sols.iter().any(|s| is_isomorphic(&s.graph, e)), "missing under {frag}");
        }
    }
}

#[test]
fn smiles_round_trip_over_oracle_corpus() {
    let pool = ResourcePool::atoms(&[(Element::C, 4), (Element::N, 1), (Element::O, 1)]);
    let mut corpus = brute_force_enumerate(&pool).unwrap();
    corpus.push(smiles::parse("CN1C=NC2=C1C(=O)N(C(=O)N2C)C").unwrap());
    corpus.push(smiles::parse("Cn1cnc2c1c(=O)n(C)c(=O)n2C").unwrap());
    for g in &corpus {
        let text = smiles::write(g);
        let back = smiles::parse(&text).unwrap();
        assert!(is_isomorphic(g, &back), "{text}");
        assert_eq!(smiles::write(&back), text);
    }
}
