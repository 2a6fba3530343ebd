//! Molecular graph with valence accounting.
//!
//! A [`MolGraph`] is a simple, undirected graph of heavy atoms. Hydrogens are
//! implicit: every unit of unused valence on an atom is one hydrogen.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::element::{Element, ValenceTable};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("vertex {0} does not exist")]
    InvalidVertex(usize),
    #[error("bond order {0} is not one of 1, 2, 3")]
    InvalidBondOrder(u8),
    #[error("valence exceeded at vertex {vertex}")]
    ValenceExceeded { vertex: usize },
    #[error("atom charge {charge} leaves {element} without valence")]
    ChargeLeavesNoValence { element: Element, charge: i8 },
    #[error("vertices {0} and {1} are already bonded")]
    DuplicateBond(usize, usize),
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub element: Element,
    pub formal_charge: i8,
    /// Bond-order capacity after the charge adjustment.
    pub max_valence: u8,
}

impl Atom {
    pub fn neutral(element: Element, table: &ValenceTable) -> Atom {
        Atom {
            element,
            formal_charge: 0,
            max_valence: table.neutral(element),
        }
    }

    pub fn charged(element: Element, charge: i8, table: &ValenceTable) -> Result<Atom, GraphError> {
        let max_valence = table
            .charged(element, charge)
            .ok_or(GraphError::ChargeLeavesNoValence { element, charge })?;
        Ok(Atom {
            element,
            formal_charge: charge,
            max_valence,
        })
    }

    /// Vertex label used by matching and canonical labeling.
    pub fn kind(&self) -> (Element, i8) {
        (self.element, self.formal_charge)
    }
}

/// Bond between `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: u8,
}

impl Bond {
    pub fn other(&self, v: usize) -> usize {
        if self.a == v {
            self.b
        } else {
            self.a
        }
    }
}

pub(crate) type Neighbors = SmallVec<[(usize, u8); 4]>;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MolGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adjacency: Vec<Neighbors>,
    used: Vec<u8>,
}

impl MolGraph {
    pub fn new() -> MolGraph {
        MolGraph::default()
    }

    /// One neutral atom of `element` under the default valence table.
    pub fn single(element: Element) -> MolGraph {
        MolGraph::from_atom(Atom::neutral(element, &ValenceTable::default()))
    }

    pub fn from_atom(atom: Atom) -> MolGraph {
        let mut g = MolGraph::new();
        g.push_atom(atom);
        g
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom(&self, v: usize) -> &Atom {
        &self.atoms[v]
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, u8)] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn bond_order(&self, a: usize, b: usize) -> Option<u8> {
        self.adjacency[a]
            .iter()
            .find(|&&(n, _)| n == b)
            .map(|&(_, o)| o)
    }

    /// Sum of incident bond orders.
    pub fn used_valence(&self, v: usize) -> u8 {
        self.used[v]
    }

    /// Unused bond-order capacity of `v`, which is also its implicit hydrogen count.
    pub fn free_valence(&self, v: usize) -> Result<u8, GraphError> {
        if v >= self.atoms.len() {
            return Err(GraphError::InvalidVertex(v));
        }
        Ok(self.free(v))
    }

    #[inline]
    pub(crate) fn free(&self, v: usize) -> u8 {
        self.atoms[v].max_valence - self.used[v]
    }

    pub fn total_free_valence(&self) -> u32 {
        (0..self.atoms.len()).map(|v| self.free(v) as u32).sum()
    }

    /// Heavy-atom composition.
    pub fn composition(&self) -> BTreeMap<Element, u32> {
        let mut counts = BTreeMap::new();
        for atom in &self.atoms {
            *counts.entry(atom.element).or_insert(0) += 1;
        }
        counts
    }

    pub fn push_atom(&mut self, atom: Atom) -> usize {
        self.atoms.push(atom);
        self.adjacency.push(Neighbors::new());
        self.used.push(0);
        self.atoms.len() - 1
    }

    /// Adds a bond in place, enforcing the simple-graph and valence invariants.
    pub fn push_bond(&mut self, a: usize, b: usize, order: u8) -> Result<(), GraphError> {
        let n = self.atoms.len();
        for v in [a, b] {
            if v >= n {
                return Err(GraphError::InvalidVertex(v));
            }
        }
        if !(1..=3).contains(&order) {
            return Err(GraphError::InvalidBondOrder(order));
        }
        if a == b {
            return Err(GraphError::SelfLoop(a));
        }
        if self.bond_order(a, b).is_some() {
            return Err(GraphError::DuplicateBond(a.min(b), a.max(b)));
        }
        for v in [a, b] {
            if self.free(v) < order {
                return Err(GraphError::ValenceExceeded { vertex: v });
            }
        }
        self.insert_bond_unchecked(a, b, order);
        Ok(())
    }

    pub(crate) fn insert_bond_unchecked(&mut self, a: usize, b: usize, order: u8) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        self.bonds.push(Bond {
            a: lo,
            b: hi,
            order,
        });
        self.adjacency[a].push((b, order));
        self.adjacency[b].push((a, order));
        self.used[a] += order;
        self.used[b] += order;
    }

    /// Changes the order of an existing bond. Used by kekulization.
    pub(crate) fn set_bond_order(&mut self, a: usize, b: usize, order: u8) {
        let old = self.bond_order(a, b).expect("bond exists");
        for bond in &mut self.bonds {
            if (bond.a == a && bond.b == b) || (bond.a == b && bond.b == a) {
                bond.order = order;
            }
        }
        for (x, y) in [(a, b), (b, a)] {
            for entry in self.adjacency[x].iter_mut() {
                if entry.0 == y {
                    entry.1 = order;
                }
            }
            self.used[x] = self.used[x] - old + order;
        }
    }

    /// Returns a new graph with one more atom of `element`, bonded to `v`
    /// with the given order. `self` is left untouched.
    pub fn add_atom_bond(&self, v: usize, element: Element, order: u8) -> Result<MolGraph, GraphError> {
        self.add_atom_bond_with(v, Atom::neutral(element, &ValenceTable::default()), order)
    }

    pub fn add_atom_bond_with(&self, v: usize, atom: Atom, order: u8) -> Result<MolGraph, GraphError> {
        if v >= self.atoms.len() {
            return Err(GraphError::InvalidVertex(v));
        }
        if !(1..=3).contains(&order) {
            return Err(GraphError::InvalidBondOrder(order));
        }
        if self.free(v) < order {
            return Err(GraphError::ValenceExceeded { vertex: v });
        }
        if atom.max_valence < order {
            return Err(GraphError::ValenceExceeded {
                vertex: self.atoms.len(),
            });
        }
        let mut g = self.clone();
        let u = g.push_atom(atom);
        g.insert_bond_unchecked(v, u, order);
        Ok(g)
    }

    /// The graph with vertex `v` and its bonds removed. Higher indices shift down by one.
    pub fn remove_vertex(&self, v: usize) -> MolGraph {
        let mut g = MolGraph::new();
        for (i, atom) in self.atoms.iter().enumerate() {
            if i != v {
                g.push_atom(*atom);
            }
        }
        let shift = |x: usize| if x > v { x - 1 } else { x };
        for bond in &self.bonds {
            if bond.a != v && bond.b != v {
                g.insert_bond_unchecked(shift(bond.a), shift(bond.b), bond.order);
            }
        }
        g
    }

    pub fn is_connected(&self) -> bool {
        let n = self.atoms.len();
        if n <= 1 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &(w, _) in &self.adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == n
    }

    /// Relabels vertices so that old vertex `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> MolGraph {
        assert_eq!(perm.len(), self.atoms.len());
        let mut inverse = vec![0; perm.len()];
        for (old, &new) in perm.iter().enumerate() {
            inverse[new] = old;
        }
        let mut g = MolGraph::new();
        for &old in &inverse {
            g.push_atom(self.atoms[old]);
        }
        for bond in &self.bonds {
            g.insert_bond_unchecked(perm[bond.a], perm[bond.b], bond.order);
        }
        g
    }
}
