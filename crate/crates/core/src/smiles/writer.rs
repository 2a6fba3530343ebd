use std::fmt::Write as _;

use crate::canon::canonical_form;
use crate::graph::MolGraph;

/// Canonical, kekulized SMILES. Atoms are visited depth-first from canonical
/// position 0, neighbors in canonical order, so isomorphic inputs produce
/// identical strings.
pub fn write(g: &MolGraph) -> String {
    if g.is_empty() {
        return String::new();
    }
    let form = canonical_form(g);
    let h = g.permuted(&form.position);
    Writer::new(&h).run()
}

struct Writer<'a> {
    g: &'a MolGraph,
    children: Vec<Vec<usize>>,
    /// Ring-closure partners per atom, with the bond order.
    closures: Vec<Vec<(usize, u8)>>,
    visit_rank: Vec<usize>,
    digit_of: std::collections::HashMap<(usize, usize), u32>,
    free_digits: std::collections::BTreeSet<u32>,
    next_digit: u32,
    out: String,
}

impl<'a> Writer<'a> {
    fn new(g: &'a MolGraph) -> Self {
        let n = g.atom_count();
        let mut w = Writer {
            g,
            children: vec![Vec::new(); n],
            closures: vec![Vec::new(); n],
            visit_rank: vec![usize::MAX; n],
            digit_of: Default::default(),
            free_digits: Default::default(),
            next_digit: 1,
            out: String::new(),
        };
        w.spanning_tree();
        w
    }

    fn sorted_neighbors(&self, v: usize) -> Vec<(usize, u8)> {
        let mut nbrs = self.g.neighbors(v).to_vec();
        nbrs.sort_unstable();
        nbrs
    }

    fn spanning_tree(&mut self) {
        let mut rank = 0;
        let mut stack: Vec<(usize, usize)> = vec![(0, usize::MAX)];
        let mut parent = vec![usize::MAX; self.g.atom_count()];
        while let Some((v, from)) = stack.pop() {
            if self.visit_rank[v] != usize::MAX {
                continue;
            }
            self.visit_rank[v] = rank;
            rank += 1;
            parent[v] = from;
            if from != usize::MAX {
                self.children[from].push(v);
            }
            for (w, _) in self.sorted_neighbors(v).into_iter().rev() {
                if self.visit_rank[w] == usize::MAX {
                    stack.push((w, v));
                }
            }
        }
        for bond in self.g.bonds() {
            let (a, b) = (bond.a, bond.b);
            if parent[a] != b && parent[b] != a {
                self.closures[a].push((b, bond.order));
                self.closures[b].push((a, bond.order));
            }
        }
        for list in &mut self.closures {
            list.sort_by_key(|&(w, _)| w);
        }
    }

    fn run(mut self) -> String {
        self.emit(0);
        self.out
    }

    fn emit(&mut self, root: usize) {
        enum Step {
            Atom(usize, u8),
            Open,
            Close,
        }
        let mut steps = vec![Step::Atom(root, 1)];
        while let Some(step) = steps.pop() {
            match step {
                Step::Close => self.out.push(')'),
                Step::Atom(v, order) => {
                    self.out.push_str(bond_symbol(order));
                    self.atom(v);
                    self.ring_bonds(v);
                    let kids = self.children[v].clone();
                    let last = kids.len().saturating_sub(1);
                    // Push in reverse so the first child is written first.
                    for (i, &c) in kids.iter().enumerate().rev() {
                        let o = self.g.bond_order(v, c).unwrap();
                        if i == last {
                            steps.push(Step::Atom(c, o));
                        } else {
                            steps.push(Step::Close);
                            steps.push(Step::Atom(c, o));
                            steps.push(Step::Open);
                        }
                    }
                }
                Step::Open => self.out.push('('),
            }
        }
    }

    fn atom(&mut self, v: usize) {
        let atom = self.g.atom(v);
        if atom.formal_charge == 0 {
            self.out.push_str(atom.element.symbol());
            return;
        }
        let hydrogens = self.g.free(v);
        self.out.push('[');
        self.out.push_str(atom.element.symbol());
        match hydrogens {
            0 => {}
            1 => self.out.push('H'),
            h => write!(self.out, "H{h}").unwrap(),
        }
        let sign = if atom.formal_charge > 0 { '+' } else { '-' };
        self.out.push(sign);
        let magnitude = atom.formal_charge.unsigned_abs();
        if magnitude > 1 {
            write!(self.out, "{magnitude}").unwrap();
        }
        self.out.push(']');
    }

    fn ring_bonds(&mut self, v: usize) {
        let closures = self.closures[v].clone();
        let here = self.visit_rank[v];
        // Close rings opened earlier, then open new ones.
        let (closing, opening): (Vec<_>, Vec<_>) = closures.into_iter().partition(|&(w, _)| self.visit_rank[w] < here);
        for (w, _) in closing {
            let key = (w.min(v), w.max(v));
            let digit = self.digit_of[&key];
            self.push_digit(digit);
            self.free_digits.insert(digit);
        }
        for (w, order) in opening {
            let digit = match self.free_digits.pop_first() {
                Some(d) => d,
                None => {
                    self.next_digit += 1;
                    self.next_digit - 1
                }
            };
            self.digit_of.insert((w.min(v), w.max(v)), digit);
            self.out.push_str(bond_symbol(order));
            self.push_digit(digit);
        }
    }

    fn push_digit(&mut self, d: u32) {
        if d < 10 {
            write!(self.out, "{d}").unwrap();
        } else {
            write!(self.out, "%{d:02}").unwrap();
        }
    }
}

fn bond_symbol(order: u8) -> &'static str {
    match order {
        2 => "=",
        3 => "#",
        _ => "",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::element::Element;
    use crate::matching::is_isomorphic;
    use crate::smiles::parse;

    #[test]
    fn order_independent_output() {
        assert_eq!(write(&parse("OCC").unwrap()), write(&parse("CCO").unwrap()));
    }

    #[test]
    fn single_carbon() {
        assert_eq!(write(&MolGraph::single(Element::C)), "C");
    }

    #[test]
    fn round_trips() {
        for s in [
            "CN1C=NC2=C1C(=O)N(C(=O)N2C)C",
            "c1ccccc1",
            "C12C3C4C1C5C2C3C45",
            "C[N+](C)(C)C",
            "[NH4+]",
            "CC(=O)[O-]",
            "C1CC2CCC1C2",
            "N#CC(C#N)=C(C#N)C#N",
            "FC(F)(Cl)Br",
            "OC1=CC=CC=C1O",
        ] {
            let g = parse(s).unwrap();
            let written = write(&g);
            let back = parse(&written).unwrap_or_else(|e| panic!("{s} -> {written}: {e}"));
            assert!(is_isomorphic(&g, &back), "{s} -> {written}");
            assert!(!written.chars().any(|c| c.is_ascii_lowercase() && c != 'l' && c != 'r'));
        }
    }
}
