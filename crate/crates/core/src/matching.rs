//! Backtracking vertex matchers: whole-graph isomorphism and fragment
//! (subgraph monomorphism) search.
//!
//! Nothing here depends on canonical labeling, so [`is_isomorphic`] serves as
//! an independent check of [`crate::canon`].

use std::collections::HashSet;
use std::ops::ControlFlow;

use crate::graph::MolGraph;

/// True iff an element-, charge- and bond-order-preserving bijection exists.
pub fn is_isomorphic(a: &MolGraph, b: &MolGraph) -> bool {
    if a.atom_count() != b.atom_count() || a.bond_count() != b.bond_count() {
        return false;
    }
    let n = a.atom_count();
    if n == 0 {
        return true;
    }
    let signature = |g: &MolGraph| {
        let mut s: Vec<_> = (0..g.atom_count())
            .map(|v| {
                let mut orders: Vec<u8> = g.neighbors(v).iter().map(|&(_, o)| o).collect();
                orders.sort_unstable();
                (g.atom(v).kind(), orders)
            })
            .collect();
        s.sort();
        s
    };
    if signature(a) != signature(b) {
        return false;
    }
    let order = search_order(a, 0);
    let mut state = MatchState::new(a, b, order, true);
    state.extend(0, &mut |_| ControlFlow::Break(())).is_break()
}

/// Number of distinct images (vertex set plus edge set) of `fragment` in `g`.
/// Elements, charges and bond orders must match exactly; hydrogens are ignored.
pub fn count_fragment(g: &MolGraph, fragment: &MolGraph) -> usize {
    let mut images = HashSet::new();
    let _ = for_each_embedding(g, fragment, None, |map| {
        images.insert(image_key(g, fragment, map));
        ControlFlow::Continue(())
    });
    images.len()
}

/// Whether `fragment` occurs anywhere in `g`.
pub fn contains_fragment(g: &MolGraph, fragment: &MolGraph) -> bool {
    for_each_embedding(g, fragment, None, |_| ControlFlow::Break(())).is_break()
}

/// Whether `fragment` occurs in `g` with an image that includes vertex `u`.
pub fn contains_fragment_touching(g: &MolGraph, fragment: &MolGraph, u: usize) -> bool {
    for_each_embedding(g, fragment, Some(u), |_| ControlFlow::Break(())).is_break()
}

/// Number of distinct images of `fragment` in `g` that include vertex `u`.
pub fn count_fragment_touching(g: &MolGraph, fragment: &MolGraph, u: usize) -> usize {
    let mut images = HashSet::new();
    let _ = for_each_embedding(g, fragment, Some(u), |map| {
        images.insert(image_key(g, fragment, map));
        ControlFlow::Continue(())
    });
    images.len()
}

fn image_key(g: &MolGraph, fragment: &MolGraph, map: &[usize]) -> Vec<u32> {
    let mut vertices: Vec<u32> = map.iter().map(|&v| v as u32).collect();
    vertices.sort_unstable();
    let mut edges: Vec<u32> = fragment
        .bonds()
        .iter()
        .map(|b| {
            let (x, y) = (map[b.a], map[b.b]);
            (x.min(y) * g.atom_count() + x.max(y)) as u32
        })
        .collect();
    edges.sort_unstable();
    vertices.push(u32::MAX);
    vertices.extend(edges);
    vertices
}

/// Calls `visit` with every monomorphism `fragment -> g` (as a vertex map).
/// With `pinned = Some(u)` only maps whose image contains `u` are produced,
/// each exactly once.
fn for_each_embedding<F>(g: &MolGraph, fragment: &MolGraph, pinned: Option<usize>, mut visit: F) -> ControlFlow<()>
where
    F: FnMut(&[usize]) -> ControlFlow<()>,
{
    let k = fragment.atom_count();
    if k == 0 || k > g.atom_count() || fragment.bond_count() > g.bond_count() {
        return ControlFlow::Continue(());
    }
    match pinned {
        None => {
            let root = rarest_vertex(fragment, g);
            let order = search_order(fragment, root);
            MatchState::new(fragment, g, order, false).extend(0, &mut visit)
        }
        Some(u) => {
            // Pin each fragment vertex to `u` in turn; a map containing `u`
            // sends exactly one fragment vertex there, so no map repeats.
            for root in 0..k {
                if fragment.atom(root).kind() != g.atom(u).kind() || fragment.degree(root) > g.degree(u) {
                    continue;
                }
                let order = search_order(fragment, root);
                let mut state = MatchState::new(fragment, g, order, false);
                state.map[root] = u;
                state.used[u] = true;
                state.extend(1, &mut visit)?;
            }
            ControlFlow::Continue(())
        }
    }
}

fn rarest_vertex(fragment: &MolGraph, g: &MolGraph) -> usize {
    (0..fragment.atom_count())
        .min_by_key(|&v| {
            let kind = fragment.atom(v).kind();
            let frequency = g.atoms().iter().filter(|a| a.kind() == kind).count();
            (frequency, usize::MAX - fragment.degree(v))
        })
        .unwrap_or(0)
}

/// Breadth-first order starting at `root`, then any unreached vertices.
fn search_order(g: &MolGraph, root: usize) -> Vec<usize> {
    let n = g.atom_count();
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for start in std::iter::once(root).chain(0..n) {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        order.push(start);
        let mut head = order.len() - 1;
        while head < order.len() {
            let v = order[head];
            head += 1;
            for &(w, _) in g.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    order.push(w);
                }
            }
        }
    }
    order
}

struct MatchState<'a> {
    pattern: &'a MolGraph,
    target: &'a MolGraph,
    order: Vec<usize>,
    /// For each position in `order`, an earlier-ordered neighbor if any.
    anchor: Vec<Option<usize>>,
    map: Vec<usize>,
    used: Vec<bool>,
    exact_degree: bool,
}

impl<'a> MatchState<'a> {
    fn new(pattern: &'a MolGraph, target: &'a MolGraph, order: Vec<usize>, exact_degree: bool) -> Self {
        let mut rank = vec![usize::MAX; pattern.atom_count()];
        for (i, &v) in order.iter().enumerate() {
            rank[v] = i;
        }
        let anchor = order
            .iter()
            .map(|&v| {
                pattern
                    .neighbors(v)
                    .iter()
                    .map(|&(w, _)| w)
                    .filter(|&w| rank[w] < rank[v])
                    .min_by_key(|&w| rank[w])
            })
            .collect();
        MatchState {
            pattern,
            target,
            order,
            anchor,
            map: vec![usize::MAX; pattern.atom_count()],
            used: vec![false; target.atom_count()],
            exact_degree,
        }
    }

    fn feasible(&self, v: usize, c: usize) -> bool {
        if self.used[c] || self.pattern.atom(v).kind() != self.target.atom(c).kind() {
            return false;
        }
        let (dv, dc) = (self.pattern.degree(v), self.target.degree(c));
        if if self.exact_degree { dv != dc } else { dv > dc } {
            return false;
        }
        self.pattern.neighbors(v).iter().all(|&(w, order)| {
            let mw = self.map[w];
            mw == usize::MAX || self.target.bond_order(c, mw) == Some(order)
        })
    }

    fn extend<F>(&mut self, depth: usize, visit: &mut F) -> ControlFlow<()>
    where
        F: FnMut(&[usize]) -> ControlFlow<()>,
    {
        if depth == self.order.len() {
            return visit(&self.map);
        }
        let v = self.order[depth];
        let candidates: Vec<usize> = match self.anchor[depth] {
            Some(a) => self.target.neighbors(self.map[a]).iter().map(|&(c, _)| c).collect(),
            None => (0..self.target.atom_count()).collect(),
        };
        for c in candidates {
            if !self.feasible(v, c) {
                continue;
            }
            self.map[v] = c;
            self.used[c] = true;
            let flow = self.extend(depth + 1, visit);
            self.used[c] = false;
            self.map[v] = usize::MAX;
            flow?;
        }
        ControlFlow::Continue(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::element::Element::{self, *};

    fn chain(elements: &[Element], orders: &[u8]) -> MolGraph {
        let mut g = MolGraph::single(elements[0]);
        for (i, (&e, &o)) in elements[1..].iter().zip(orders).enumerate() {
            g = g.add_atom_bond(i, e, o).unwrap();
        }
        g
    }

    #[test]
    fn isomorphism_examples() {
        let cco = chain(&[C, C, O], &[1, 1]);
        let occ = chain(&[O, C, C], &[1, 1]);
        let cc_o = chain(&[C, C, O], &[1, 2]);
        assert!(is_isomorphic(&cco, &occ));
        assert!(!is_isomorphic(&cco, &cc_o));
        assert!(is_isomorphic(&MolGraph::new(), &MolGraph::new()));
    }

    #[test]
    fn branched_versus_linear() {
        let butane = chain(&[C, C, C, C], &[1, 1, 1]);
        let isobutane = MolGraph::single(C)
            .add_atom_bond(0, C, 1)
            .unwrap()
            .add_atom_bond(0, C, 1)
            .unwrap()
            .add_atom_bond(0, C, 1)
            .unwrap();
        assert!(!is_isomorphic(&butane, &isobutane));
    }

    #[test]
    fn fragment_counts() {
        let ketenimine = chain(&[C, C, N], &[2, 2]);
        assert_eq!(count_fragment(&ketenimine, &ketenimine), 1);
        assert_eq!(count_fragment(&MolGraph::single(O), &MolGraph::single(C)), 0);
        let propane = chain(&[C, C, C], &[1, 1]);
        let ethane = chain(&[C, C], &[1]);
        assert_eq!(count_fragment(&propane, &ethane), 2);
        assert_eq!(count_fragment(&propane, &MolGraph::single(C)), 3);
    }

    #[test]
    fn touching_counts_only_new_images() {
        let propane = chain(&[C, C, C], &[1, 1]);
        let ethane = chain(&[C, C], &[1]);
        assert_eq!(count_fragment_touching(&propane, &ethane, 2), 1);
        assert_eq!(count_fragment_touching(&propane, &ethane, 1), 2);
        assert!(contains_fragment_touching(&propane, &ethane, 0));
        assert!(!contains_fragment_touching(&propane, &chain(&[C, O], &[1]), 0));
    }

    #[test]
    fn bond_order_must_match_exactly() {
        let ethene = chain(&[C, C], &[2]);
        let ethane = chain(&[C, C], &[1]);
        assert!(!contains_fragment(&ethene, &ethane));
    }
}
