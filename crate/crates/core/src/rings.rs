//! Ring perception: smallest set of smallest rings and an aromaticity proxy.

use crate::element::Element;
use crate::graph::MolGraph;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ring {
    /// Vertices in cycle order, starting from the smallest index.
    pub atoms: Vec<usize>,
    pub aromatic: bool,
}

impl Ring {
    pub fn size(&self) -> usize {
        self.atoms.len()
    }
}

/// Smallest set of smallest rings (a minimum cycle basis built from Horton's
/// candidate cycles), each flagged aromatic when:
///
/// * it has 5 or 6 members, all C, N, O or S;
/// * in a 6-ring every member carries a double bond inside the ring system;
/// * in a 5-ring four members do and the fifth is an N, O or S lone-pair donor
///   with no double bond.
///
/// This is a conjugation proxy on the Kekulé form, weaker than Hückel rules.
pub fn perceive_rings(g: &MolGraph) -> Vec<Ring> {
    let n = g.atom_count();
    let m = g.bond_count();
    let components = component_count(g);
    let cyclomatic = (m + components).saturating_sub(n);
    if cyclomatic == 0 {
        return Vec::new();
    }

    let mut bond_index = vec![usize::MAX; n * n];
    for (i, b) in g.bonds().iter().enumerate() {
        bond_index[b.a * n + b.b] = i;
        bond_index[b.b * n + b.a] = i;
    }
    let words = m.div_ceil(64);

    let mut candidates: Vec<(Vec<usize>, Vec<u64>)> = Vec::new();
    for root in 0..n {
        let (parent, _) = bfs_tree(g, root);
        let path_to_root = |mut v: usize| {
            let mut path = vec![v];
            while v != root {
                v = parent[v];
                if v == usize::MAX {
                    return None;
                }
                path.push(v);
            }
            Some(path)
        };
        for bond in g.bonds() {
            let (x, y) = (bond.a, bond.b);
            if parent[x] == y || parent[y] == x {
                continue;
            }
            let (Some(px), Some(py)) = (path_to_root(x), path_to_root(y)) else {
                continue;
            };
            // Paths may share only the root.
            if px[..px.len() - 1].iter().any(|v| py[..py.len() - 1].contains(v)) {
                continue;
            }
            // root .. x, then y .. (child of root)
            let mut cycle: Vec<usize> = px.iter().rev().copied().collect();
            cycle.extend(py[..py.len() - 1].iter().copied());
            let bits = cycle_bits(&cycle, n, &bond_index, words);
            candidates.push((normalize_cycle(cycle), bits));
        }
    }
    candidates.sort_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| a.0.cmp(&b.0)));
    candidates.dedup_by(|a, b| a.1 == b.1);

    let mut basis: Vec<Vec<u64>> = Vec::new();
    let mut rings: Vec<Vec<usize>> = Vec::new();
    for (cycle, bits) in candidates {
        if rings.len() == cyclomatic {
            break;
        }
        if let Some(reduced) = reduce(&basis, bits) {
            basis.push(reduced);
            rings.push(cycle);
        }
    }

    let mut ring_bond = vec![false; m];
    for ring in &rings {
        for i in 0..ring.len() {
            let (a, b) = (ring[i], ring[(i + 1) % ring.len()]);
            ring_bond[bond_index[a * n + b]] = true;
        }
    }
    let has_ring_double = |v: usize| {
        g.neighbors(v)
            .iter()
            .any(|&(w, o)| o == 2 && ring_bond[bond_index[v * n + w]])
    };
    let has_any_double = |v: usize| g.neighbors(v).iter().any(|&(_, o)| o >= 2);

    rings
        .into_iter()
        .map(|atoms| {
            let aromatic = (atoms.len() == 5 || atoms.len() == 6)
                && atoms.iter().all(|&v| {
                    matches!(g.atom(v).element, Element::C | Element::N | Element::O | Element::S)
                })
                && {
                    let pi: Vec<bool> = atoms.iter().map(|&v| has_ring_double(v)).collect();
                    let with_pi = pi.iter().filter(|&&p| p).count();
                    if atoms.len() == 6 {
                        with_pi == 6
                    } else {
                        with_pi == 4 && {
                            let donor = atoms[pi.iter().position(|&p| !p).unwrap()];
                            matches!(g.atom(donor).element, Element::N | Element::O | Element::S)
                                && !has_any_double(donor)
                        }
                    }
                };
            Ring { atoms, aromatic }
        })
        .collect()
}

fn component_count(g: &MolGraph) -> usize {
    let n = g.atom_count();
    let mut seen = vec![false; n];
    let mut count = 0;
    for s in 0..n {
        if seen[s] {
            continue;
        }
        count += 1;
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for &(w, _) in g.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    count
}

fn bfs_tree(g: &MolGraph, root: usize) -> (Vec<usize>, Vec<usize>) {
    let n = g.atom_count();
    let mut parent = vec![usize::MAX; n];
    let mut dist = vec![usize::MAX; n];
    dist[root] = 0;
    parent[root] = root;
    let mut queue = std::collections::VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        let mut nbrs: Vec<usize> = g.neighbors(v).iter().map(|&(w, _)| w).collect();
        nbrs.sort_unstable();
        for w in nbrs {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                parent[w] = v;
                queue.push_back(w);
            }
        }
    }
    (parent, dist)
}

fn cycle_bits(cycle: &[usize], n: usize, bond_index: &[usize], words: usize) -> Vec<u64> {
    let mut bits = vec![0u64; words];
    for i in 0..cycle.len() {
        let (a, b) = (cycle[i], cycle[(i + 1) % cycle.len()]);
        let e = bond_index[a * n + b];
        bits[e / 64] ^= 1 << (e % 64);
    }
    bits
}

fn normalize_cycle(mut cycle: Vec<usize>) -> Vec<usize> {
    let start = (0..cycle.len()).min_by_key(|&i| cycle[i]).unwrap();
    cycle.rotate_left(start);
    if cycle.len() > 2 && cycle[cycle.len() - 1] < cycle[1] {
        cycle[1..].reverse();
    }
    cycle
}

fn lowest_bit(v: &[u64]) -> Option<usize> {
    v.iter()
        .enumerate()
        .find(|(_, &w)| w != 0)
        .map(|(i, &w)| i * 64 + w.trailing_zeros() as usize)
}

/// Reduces `v` against a basis kept with distinct lowest bits; `None` if dependent.
fn reduce(basis: &[Vec<u64>], mut v: Vec<u64>) -> Option<Vec<u64>> {
    loop {
        let pivot = lowest_bit(&v)?;
        match basis.iter().find(|row| lowest_bit(row) == Some(pivot)) {
            Some(row) => {
                for (x, y) in v.iter_mut().zip(row) {
                    *x ^= y;
                }
            }
            None => return Some(v),
        }
    }
}
