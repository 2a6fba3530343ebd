use std::collections::{BTreeMap, HashSet};

use crate::canon::{canonical_form, canonical_form_from_equitable, canonical_label, equitable_colors, CanonicalForm, CanonicalLabel};
use crate::element::{Element, ValenceTable};
use crate::graph::{Atom, MolGraph};

pub(super) struct Child {
    pub graph: MolGraph,
    pub form: CanonicalForm,
    pub element: Element,
    /// Index of the new atom (always the last vertex).
    pub atom: usize,
}

/// Every valence-feasible single-leaf augmentation of `g` in a fixed order:
/// attachment vertex, then element, then bond order.
pub(super) fn candidates<'a>(
    g: &'a MolGraph,
    elements: &'a [(Element, u32)],
    table: &'a ValenceTable,
) -> impl Iterator<Item = (usize, Element, u8)> + 'a {
    (0..g.atom_count()).flat_map(move |v| {
        let free = g.free(v);
        elements
            .iter()
            .filter(|&&(_, left)| left > 0)
            .flat_map(move |&(e, _)| {
                let cap = free.min(table.neutral(e)).min(3);
                (1..=cap).map(move |order| (v, e, order))
            })
    })
}

/// Children of `g` on their canonical construction path, plus the number of
/// candidates rejected as non-canonical or duplicate.
///
/// A child is kept when its new atom `u` is the canonically last leaf `m`, or
/// when deleting `m` yields a graph isomorphic to `g`. Siblings are deduplicated
/// by label. As canonical positions respect the equitable partition, any `u`
/// outside the highest cell holding a leaf is rejected before labeling.
pub(super) fn canonical_children(
    g: &MolGraph,
    parent: &CanonicalLabel,
    elements: &[(Element, u32)],
    table: &ValenceTable,
) -> (Vec<Child>, u64) {
    let mut children = Vec::new();
    let mut labels: HashSet<CanonicalLabel> = HashSet::new();
    let mut rejected = 0;
    let u = g.atom_count();
    for (v, e, order) in candidates(g, elements, table) {
        let g0 = g
            .add_atom_bond_with(v, Atom::neutral(e, table), order)
            .expect("candidate is valence-feasible");
        let colors = equitable_colors(&g0);
        let top_leaf_cell = (0..=u).filter(|&x| g0.degree(x) <= 1).map(|x| colors[x]).max();
        if top_leaf_cell != Some(colors[u]) {
            rejected += 1;
            continue;
        }
        let form = canonical_form_from_equitable(&g0, colors);
        let m = (0..=u)
            .filter(|&x| g0.degree(x) <= 1)
            .max_by_key(|&x| form.position[x])
            .expect("a tree has leaves");
        if m != u && canonical_label(&g0.remove_vertex(m)) != *parent {
            rejected += 1;
            continue;
        }
        if !labels.insert(form.label.clone()) {
            rejected += 1;
            continue;
        }
        children.push(Child {
            graph: g0,
            form,
            element: e,
            atom: u,
        });
    }
    (children, rejected)
}

/// Children of a seed-grown graph, deduplicated against every graph seen so
/// far in the seed branches.
pub(super) fn seen_children(
    g: &MolGraph,
    elements: &[(Element, u32)],
    table: &ValenceTable,
    seen: &mut HashSet<CanonicalLabel>,
) -> (Vec<Child>, u64) {
    let mut children = Vec::new();
    let mut rejected = 0;
    let u = g.atom_count();
    for (v, e, order) in candidates(g, elements, table) {
        let g0 = g
            .add_atom_bond_with(v, Atom::neutral(e, table), order)
            .expect("candidate is valence-feasible");
        let form = canonical_form(&g0);
        if !seen.insert(form.label.clone()) {
            rejected += 1;
            continue;
        }
        children.push(Child {
            graph: g0,
            form,
            element: e,
            atom: u,
        });
    }
    (children, rejected)
}

/// The canonical augmentations `(vertex, element, bond order)` of a tree `g`
/// given the remaining atom counts, under the default valence table.
pub fn canonical_augmentations(g: &MolGraph, remaining: &BTreeMap<Element, u32>) -> Vec<(usize, Element, u8)> {
    let elements: Vec<(Element, u32)> = remaining.iter().map(|(&e, &n)| (e, n)).collect();
    let label = canonical_label(g);
    let (children, _) = canonical_children(g, &label, &elements, &ValenceTable::default());
    children
        .into_iter()
        .map(|c| {
            let (v, order) = c.graph.neighbors(c.atom)[0];
            (v, c.element, order)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse;

    #[test]
    fn symmetric_ethane_yields_one_propane() {
        let g = parse("CC").unwrap();
        let aug = canonical_augmentations(&g, &BTreeMap::from([(Element::C, 1)]));
        let singles: Vec<_> = aug.iter().filter(|a| a.2 == 1).collect();
        assert_eq!(singles.len(), 1);
        // C-C plus =C and #C give propane, propene and propyne.
        assert_eq!(aug.len(), 3);
    }

    #[test]
    fn oxygen_capped_by_valence() {
        let g = MolGraph::single(Element::C);
        let aug = canonical_augmentations(&g, &BTreeMap::from([(Element::O, 1)]));
        assert_eq!(aug, vec![(0, Element::O, 1), (0, Element::O, 2)]);
    }

    #[test]
    fn saturated_vertex_offers_nothing() {
        let g = parse("C=C=C").unwrap();
        let aug = canonical_augmentations(&g, &BTreeMap::from([(Element::C, 1)]));
        assert!(aug.iter().all(|&(v, _, _)| v != 1));
        assert!(!aug.is_empty());
    }
}
