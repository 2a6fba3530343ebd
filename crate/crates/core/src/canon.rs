//! Canonical labeling by partition refinement with individualization.
//!
//! Vertices start colored by `(element, charge, degree, incident bond orders)`
//! and are refined by the multiset of `(bond order, neighbor color)` pairs
//! until the partition is equitable. A non-discrete partition is resolved by
//! branching on every vertex of its first non-singleton cell; the smallest
//! complete adjacency encoding over all leaves is the label. Automorphisms
//! discovered at equal leaves prune sibling branches in the same orbit.

use std::fmt;

use smallvec::SmallVec;

use crate::graph::MolGraph;

/// Byte string that is equal for two graphs iff they are isomorphic
/// (respecting element, formal charge and bond order).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalLabel(Vec<u8>);

impl CanonicalLabel {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for CanonicalLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CanonicalLabel(")?;
        for b in &self.0 {
            write!(f, "{b:02x}")?;
        }
        write!(f, ")")
    }
}

/// A canonical label together with the vertex ordering that produced it.
#[derive(Debug, Clone)]
pub struct CanonicalForm {
    pub label: CanonicalLabel,
    /// `order[i]` is the vertex at canonical position `i`.
    pub order: Vec<usize>,
    /// `position[v]` is the canonical position of vertex `v`.
    pub position: Vec<usize>,
}

pub fn canonical_label(g: &MolGraph) -> CanonicalLabel {
    canonical_form(g).label
}

pub fn canonical_form(g: &MolGraph) -> CanonicalForm {
    let n = g.atom_count();
    if n == 0 {
        return CanonicalForm {
            label: CanonicalLabel(encode_header(g, 0)),
            order: Vec::new(),
            position: Vec::new(),
        };
    }
    canonical_form_from_equitable(g, equitable_colors(g))
}

/// `canonical_form` when the equitable coloring is already known.
pub(crate) fn canonical_form_from_equitable(g: &MolGraph, colors: Vec<u32>) -> CanonicalForm {
    let n = g.atom_count();
    let mut search = Search {
        g,
        best: None,
        automorphisms: Vec::new(),
        prefix: Vec::new(),
    };
    search.run(colors);
    let (label, position) = search.best.expect("at least one leaf");
    let mut order = vec![0; n];
    for (v, &p) in position.iter().enumerate() {
        order[p as usize] = v;
    }
    CanonicalForm {
        label: CanonicalLabel(label),
        order,
        position: position.into_iter().map(|p| p as usize).collect(),
    }
}

/// The coarsest equitable partition refining the initial invariant coloring.
/// Colors are ranks; canonical positions always respect this cell order.
pub fn equitable_colors(g: &MolGraph) -> Vec<u32> {
    let mut colors = initial_colors(g);
    if !colors.is_empty() {
        refine(g, &mut colors);
    }
    colors
}

fn initial_colors(g: &MolGraph) -> Vec<u32> {
    let n = g.atom_count();
    let keys: Vec<(u8, i8, usize, SmallVec<[u8; 4]>)> = (0..n)
        .map(|v| {
            let atom = g.atom(v);
            let mut orders: SmallVec<[u8; 4]> = g.neighbors(v).iter().map(|&(_, o)| o).collect();
            orders.sort_unstable();
            (atom.element.code(), atom.formal_charge, g.degree(v), orders)
        })
        .collect();
    rank(&keys)
}

fn rank<K: Ord>(keys: &[K]) -> Vec<u32> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
    let mut colors = vec![0u32; keys.len()];
    let mut c = 0u32;
    for w in 0..idx.len() {
        if w > 0 && keys[idx[w]] != keys[idx[w - 1]] {
            c += 1;
        }
        colors[idx[w]] = c;
    }
    colors
}

fn cell_count(colors: &[u32]) -> usize {
    colors.iter().copied().max().map_or(0, |m| m as usize + 1)
}

/// Refines `colors` in place until the partition is equitable.
fn refine(g: &MolGraph, colors: &mut Vec<u32>) {
    let n = colors.len();
    // Colors may be sparse after individualization; compress first.
    *colors = rank(colors);
    let mut cells = cell_count(colors);
    loop {
        if cells == n {
            return;
        }
        let keys: Vec<(u32, SmallVec<[u32; 4]>)> = (0..n)
            .map(|v| {
                let mut sig: SmallVec<[u32; 4]> = g
                    .neighbors(v)
                    .iter()
                    .map(|&(w, o)| colors[w] * 4 + o as u32)
                    .collect();
                sig.sort_unstable();
                (colors[v], sig)
            })
            .collect();
        let next = rank(&keys);
        let next_cells = cell_count(&next);
        *colors = next;
        if next_cells == cells {
            return;
        }
        cells = next_cells;
    }
}

fn encode_header(g: &MolGraph, n: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 2 * n + 5 * g.bond_count());
    out.extend_from_slice(&(n as u16).to_be_bytes());
    out
}

/// Complete encoding of the graph relabeled by a discrete coloring.
fn encode(g: &MolGraph, position: &[u32]) -> Vec<u8> {
    let n = position.len();
    let mut order = vec![0usize; n];
    for (v, &p) in position.iter().enumerate() {
        order[p as usize] = v;
    }
    let mut out = encode_header(g, n);
    for &v in &order {
        let atom = g.atom(v);
        out.push(atom.element.code());
        out.push(atom.formal_charge as u8);
    }
    let mut edges: Vec<(u32, u32, u8)> = g
        .bonds()
        .iter()
        .map(|b| {
            let (pa, pb) = (position[b.a], position[b.b]);
            (pa.min(pb), pa.max(pb), b.order)
        })
        .collect();
    edges.sort_unstable();
    for (a, b, o) in edges {
        out.extend_from_slice(&(a as u16).to_be_bytes());
        out.extend_from_slice(&(b as u16).to_be_bytes());
        out.push(o);
    }
    out
}

struct Search<'a> {
    g: &'a MolGraph,
    best: Option<(Vec<u8>, Vec<u32>)>,
    automorphisms: Vec<Vec<usize>>,
    prefix: Vec<usize>,
}

impl Search<'_> {
    fn run(&mut self, colors: Vec<u32>) {
        let n = colors.len();
        if cell_count(&colors) == n {
            self.leaf(colors);
            return;
        }
        // First non-singleton cell in color order.
        let mut sizes = vec![0usize; n];
        for &c in &colors {
            sizes[c as usize] += 1;
        }
        let target = sizes.iter().position(|&s| s > 1).expect("non-discrete") as u32;
        let members: Vec<usize> = (0..n).filter(|&v| colors[v] == target).collect();

        let mut explored: Vec<usize> = Vec::new();
        for &x in &members {
            if !explored.is_empty() && self.in_explored_orbit(x, &explored) {
                continue;
            }
            let mut child: Vec<u32> = colors
                .iter()
                .enumerate()
                .map(|(u, &c)| 2 * c + u32::from(c == target && u != x))
                .collect();
            refine(self.g, &mut child);
            self.prefix.push(x);
            self.run(child);
            self.prefix.pop();
            explored.push(x);
        }
    }

    fn leaf(&mut self, position: Vec<u32>) {
        let code = encode(self.g, &position);
        match &self.best {
            None => self.best = Some((code, position)),
            Some((best_code, best_pos)) => match code.cmp(best_code) {
                std::cmp::Ordering::Less => self.best = Some((code, position)),
                std::cmp::Ordering::Equal => {
                    // v sits where best_order[position[v]] sits in the best leaf.
                    let mut best_order = vec![0usize; best_pos.len()];
                    for (v, &p) in best_pos.iter().enumerate() {
                        best_order[p as usize] = v;
                    }
                    let gamma: Vec<usize> = position.iter().map(|&p| best_order[p as usize]).collect();
                    if gamma.iter().enumerate().any(|(v, &w)| v != w) {
                        self.automorphisms.push(gamma);
                    }
                }
                std::cmp::Ordering::Greater => {}
            },
        }
    }

    /// Whether `x` lies in the orbit of an explored vertex under the known
    /// automorphisms that fix the current prefix pointwise.
    fn in_explored_orbit(&self, x: usize, explored: &[usize]) -> bool {
        let n = self.g.atom_count();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut v: usize) -> usize {
            while parent[v] != v {
                parent[v] = parent[parent[v]];
                v = parent[v];
            }
            v
        }
        let mut any = false;
        for gamma in &self.automorphisms {
            if self.prefix.iter().any(|&p| gamma[p] != p) {
                continue;
            }
            any = true;
            for (v, &w) in gamma.iter().enumerate() {
                let (rv, rw) = (find(&mut parent, v), find(&mut parent, w));
                if rv != rw {
                    parent[rv] = rw;
                }
            }
        }
        if !any {
            return false;
        }
        let rx = find(&mut parent, x);
        explored.iter().any(|&e| find(&mut parent, e) == rx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::element::Element;

    fn chain(elements: &[Element], orders: &[u8]) -> MolGraph {
        let mut g = MolGraph::single(elements[0]);
        for (i, (&e, &o)) in elements[1..].iter().zip(orders).enumerate() {
            g = g.add_atom_bond(i, e, o).unwrap();
        }
        g
    }

    #[test]
    fn atom_order_does_not_matter() {
        use Element::*;
        let cco = chain(&[C, C, O], &[1, 1]);
        let occ = chain(&[O, C, C], &[1, 1]);
        assert_eq!(canonical_label(&cco), canonical_label(&occ));
    }

    #[test]
    fn bond_order_distinguishes() {
        use Element::*;
        let acetaldehyde = chain(&[C, C, O], &[1, 2]);
        let ethanol = chain(&[C, C, O], &[1, 1]);
        assert_ne!(canonical_label(&acetaldehyde), canonical_label(&ethanol));
    }

    #[test]
    fn symmetric_star_is_stable() {
        // neopentane: every permutation gives the same label
        let mut g = MolGraph::single(Element::C);
        for _ in 0..4 {
            g = g.add_atom_bond(0, Element::C, 1).unwrap();
        }
        let label = canonical_label(&g);
        let perms = [[4, 3, 2, 1, 0], [1, 0, 2, 3, 4], [2, 4, 0, 1, 3]];
        for p in perms {
            assert_eq!(canonical_label(&g.permuted(&p)), label);
        }
    }

    #[test]
    fn order_is_a_permutation() {
        use Element::*;
        let g = chain(&[C, N, C, O, C], &[1, 2, 1, 1]);
        let form = canonical_form(&g);
        let mut sorted = form.order.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2, 3, 4]);
        for (p, &v) in form.order.iter().enumerate() {
            assert_eq!(form.position[v], p);
        }
    }

    #[test]
    fn relabeled_by_order_reproduces_label() {
        use Element::*;
        let g = chain(&[C, C, C, N, O], &[1, 1, 2, 1]);
        let form = canonical_form(&g);
        let relabeled = g.permuted(&form.position);
        let again = canonical_form(&relabeled);
        assert_eq!(again.label, form.label);
        assert_eq!(again.order, (0..5).collect::<Vec<_>>());
    }
}
