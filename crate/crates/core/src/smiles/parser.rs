use std::collections::BTreeMap;

use super::kekulize::kekulize;
use super::SmilesErrorKind::*;
use super::{SmilesError, SmilesErrorKind};
use crate::element::{Element, ValenceTable};
use crate::graph::{Atom, GraphError, MolGraph};

struct ParsedAtom {
    element: Element,
    charge: i8,
    aromatic: bool,
    hydrogens: u8,
    position: usize,
}

struct ParsedBond {
    a: usize,
    b: usize,
    /// `None` means no explicit symbol was written.
    order: Option<u8>,
    position: usize,
}

struct RingOpening {
    atom: usize,
    order: Option<u8>,
    position: usize,
}

/// Parses with the default valence table.
pub fn parse(text: &str) -> Result<MolGraph, SmilesError> {
    parse_with(text, &ValenceTable::default())
}

pub fn parse_with(text: &str, table: &ValenceTable) -> Result<MolGraph, SmilesError> {
    let (atoms, bonds) = Tokenizer::new(text).run()?;
    build(text, atoms, bonds, table)
}

struct Tokenizer {
    chars: Vec<char>,
    i: usize,
    atoms: Vec<ParsedAtom>,
    bonds: Vec<ParsedBond>,
    previous: Option<usize>,
    branches: Vec<(usize, usize)>,
    pending: Option<(u8, usize)>,
    rings: BTreeMap<u32, RingOpening>,
}

impl Tokenizer {
    fn new(text: &str) -> Self {
        Tokenizer {
            chars: text.chars().collect(),
            i: 0,
            atoms: Vec::new(),
            bonds: Vec::new(),
            previous: None,
            branches: Vec::new(),
            pending: None,
            rings: BTreeMap::new(),
        }
    }

    fn err(&self, kind: SmilesErrorKind, position: usize, detail: impl Into<String>) -> SmilesError {
        SmilesError::new(kind, position, detail)
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.i).copied()
    }

    fn run(mut self) -> Result<(Vec<ParsedAtom>, Vec<ParsedBond>), SmilesError> {
        if self.chars.is_empty() {
            return Err(self.err(UnexpectedChar, 0, "empty input"));
        }
        while let Some(c) = self.peek() {
            let pos = self.i;
            match c {
                '(' => {
                    let Some(prev) = self.previous else {
                        return Err(self.err(UnexpectedChar, pos, "branch before any atom"));
                    };
                    if self.pending.is_some() {
                        return Err(self.err(UnexpectedChar, pos, "bond symbol before branch"));
                    }
                    self.branches.push((prev, pos));
                    self.i += 1;
                }
                ')' => {
                    let Some((atom, _)) = self.branches.pop() else {
                        return Err(self.err(UnexpectedChar, pos, "unmatched ')'"));
                    };
                    if self.pending.is_some() {
                        return Err(self.err(UnexpectedChar, pos, "dangling bond symbol"));
                    }
                    self.previous = Some(atom);
                    self.i += 1;
                }
                '-' | '=' | '#' => {
                    if self.pending.is_some() || self.previous.is_none() {
                        return Err(self.err(UnexpectedChar, pos, format!("misplaced bond symbol '{c}'")));
                    }
                    let order = match c {
                        '-' => 1,
                        '=' => 2,
                        _ => 3,
                    };
                    self.pending = Some((order, pos));
                    self.i += 1;
                }
                '/' | '\\' => return Err(self.err(UnsupportedFeature, pos, "directional bonds")),
                ':' | '$' => return Err(self.err(UnsupportedFeature, pos, format!("bond symbol '{c}'"))),
                '.' => return Err(self.err(UnsupportedFeature, pos, "disconnected components")),
                '*' => return Err(self.err(UnsupportedFeature, pos, "wildcard atom")),
                '0'..='9' => {
                    self.i += 1;
                    self.ring_bond(c.to_digit(10).unwrap(), pos)?;
                }
                '%' => {
                    let digits: String = self.chars[pos + 1..].iter().take(2).collect();
                    if digits.len() != 2 || !digits.chars().all(|d| d.is_ascii_digit()) {
                        return Err(self.err(UnexpectedChar, pos, "'%' must be followed by two digits"));
                    }
                    self.i += 3;
                    self.ring_bond(digits.parse().unwrap(), pos)?;
                }
                '[' => {
                    let atom = self.bracket_atom()?;
                    self.add_atom(atom);
                }
                _ => {
                    let atom = self.organic_atom()?;
                    self.add_atom(atom);
                }
            }
        }
        if let Some((_, pos)) = self.pending {
            return Err(self.err(UnexpectedChar, pos, "bond symbol at end of input"));
        }
        if let Some((_, opening)) = self.rings.iter().next() {
            return Err(self.err(UnclosedRing, opening.position, "ring bond never closed"));
        }
        if let Some(&(_, pos)) = self.branches.last() {
            return Err(self.err(UnclosedBranch, pos, "branch never closed"));
        }
        Ok((self.atoms, self.bonds))
    }

    fn add_atom(&mut self, atom: ParsedAtom) {
        let index = self.atoms.len();
        let position = atom.position;
        self.atoms.push(atom);
        if let Some(prev) = self.previous {
            let order = self.pending.take().map(|(o, _)| o);
            self.bonds.push(ParsedBond {
                a: prev,
                b: index,
                order,
                position,
            });
        }
        self.previous = Some(index);
    }

    fn ring_bond(&mut self, number: u32, pos: usize) -> Result<(), SmilesError> {
        let Some(current) = self.previous else {
            return Err(self.err(UnexpectedChar, pos, "ring bond before any atom"));
        };
        let here = self.pending.take().map(|(o, _)| o);
        match self.rings.remove(&number) {
            Some(opening) => {
                let order = match (opening.order, here) {
                    (Some(a), Some(b)) if a != b => {
                        return Err(self.err(UnexpectedChar, pos, "conflicting ring bond symbols"))
                    }
                    (a, b) => a.or(b),
                };
                if opening.atom == current {
                    return Err(self.err(UnexpectedChar, pos, "ring bond to the same atom"));
                }
                self.bonds.push(ParsedBond {
                    a: opening.atom,
                    b: current,
                    order,
                    position: pos,
                });
            }
            None => {
                self.rings.insert(
                    number,
                    RingOpening {
                        atom: current,
                        order: here,
                        position: pos,
                    },
                );
            }
        }
        Ok(())
    }

    fn organic_atom(&mut self) -> Result<ParsedAtom, SmilesError> {
        let pos = self.i;
        let c = self.peek().unwrap();
        let next = self.chars.get(pos + 1).copied();
        let (symbol, aromatic, len) = match (c, next) {
            ('C', Some('l')) => ("Cl".to_string(), false, 2),
            ('B', Some('r')) => ("Br".to_string(), false, 2),
            ('B' | 'C' | 'N' | 'O' | 'P' | 'S' | 'F' | 'I', _) => (c.to_string(), false, 1),
            ('b' | 'c' | 'n' | 'o' | 'p' | 's', _) => (c.to_ascii_uppercase().to_string(), true, 1),
            _ => return Err(self.err(UnexpectedChar, pos, format!("unexpected character '{c}'"))),
        };
        self.i += len;
        Ok(ParsedAtom {
            element: Element::from_symbol(&symbol).expect("organic subset"),
            charge: 0,
            aromatic,
            hydrogens: 0,
            position: pos,
        })
    }

    fn bracket_atom(&mut self) -> Result<ParsedAtom, SmilesError> {
        let open = self.i;
        self.i += 1;
        if matches!(self.peek(), Some(d) if d.is_ascii_digit()) {
            return Err(self.err(UnsupportedFeature, self.i, "isotopes"));
        }
        let start = self.i;
        let first = self
            .peek()
            .ok_or_else(|| self.err(UnexpectedChar, start, "unterminated bracket atom"))?;
        let (element, aromatic) = if first.is_ascii_uppercase() {
            let second = self.chars.get(start + 1).copied().filter(char::is_ascii_lowercase);
            if let Some(second) = second {
                let two: String = [first, second].iter().collect();
                let e = Element::from_symbol(&two)
                    .ok_or_else(|| self.err(UnsupportedFeature, start, "element outside the supported set"))?;
                self.i += 2;
                (e, false)
            } else if let Some(e) = Element::from_symbol(&first.to_string()) {
                self.i += 1;
                (e, false)
            } else if first == 'H' {
                return Err(self.err(UnsupportedFeature, start, "explicit hydrogen atoms"));
            } else {
                return Err(self.err(UnsupportedFeature, start, "element outside the supported set"));
            }
        } else if first == '*' {
            return Err(self.err(UnsupportedFeature, start, "wildcard atom"));
        } else if matches!(first, 'b' | 'c' | 'n' | 'o' | 'p' | 's') {
            if matches!(self.chars.get(start + 1), Some('e' | 's')) {
                return Err(self.err(UnsupportedFeature, start, "element outside the supported set"));
            }
            self.i += 1;
            (Element::from_symbol(&first.to_ascii_uppercase().to_string()).unwrap(), true)
        } else {
            return Err(self.err(UnexpectedChar, start, format!("unexpected '{first}' in bracket atom")));
        };
        if self.peek() == Some('@') {
            return Err(self.err(UnsupportedFeature, self.i, "chirality"));
        }
        let mut hydrogens = 0u8;
        if self.peek() == Some('H') {
            self.i += 1;
            hydrogens = 1;
            if let Some(d) = self.peek().filter(char::is_ascii_digit) {
                hydrogens = d.to_digit(10).unwrap() as u8;
                self.i += 1;
            }
        }
        let mut charge: i8 = 0;
        if let Some(sign @ ('+' | '-')) = self.peek() {
            let unit: i8 = if sign == '+' { 1 } else { -1 };
            self.i += 1;
            charge = unit;
            if let Some(d) = self.peek().filter(char::is_ascii_digit) {
                charge = unit * d.to_digit(10).unwrap() as i8;
                self.i += 1;
            } else {
                while self.peek() == Some(sign) {
                    charge += unit;
                    self.i += 1;
                }
            }
        }
        match self.peek() {
            Some(']') => self.i += 1,
            Some(':') => return Err(self.err(UnsupportedFeature, self.i, "atom classes")),
            Some('@') => return Err(self.err(UnsupportedFeature, self.i, "chirality")),
            Some(c) => return Err(self.err(UnexpectedChar, self.i, format!("unexpected '{c}' in bracket atom"))),
            None => return Err(self.err(UnexpectedChar, open, "unterminated bracket atom")),
        }
        Ok(ParsedAtom {
            element,
            charge,
            aromatic,
            hydrogens,
            position: open,
        })
    }
}

fn build(
    text: &str,
    atoms: Vec<ParsedAtom>,
    bonds: Vec<ParsedBond>,
    table: &ValenceTable,
) -> Result<MolGraph, SmilesError> {
    let mut g = MolGraph::new();
    for atom in &atoms {
        let built = Atom::charged(atom.element, atom.charge, table)
            .map_err(|e| SmilesError::new(ValenceViolation, atom.position, e.to_string()))?;
        g.push_atom(built);
    }
    let mut aromatic_bonds = Vec::new();
    for bond in &bonds {
        let aromatic = bond.order.is_none() && atoms[bond.a].aromatic && atoms[bond.b].aromatic;
        let order = bond.order.unwrap_or(1);
        g.push_bond(bond.a, bond.b, order).map_err(|e| match e {
            GraphError::ValenceExceeded { vertex } => {
                SmilesError::new(ValenceViolation, atoms[vertex].position, e.to_string())
            }
            other => SmilesError::new(UnexpectedChar, bond.position, other.to_string()),
        })?;
        if aromatic {
            aromatic_bonds.push((bond.a, bond.b));
        }
    }
    for (v, atom) in atoms.iter().enumerate() {
        if g.free(v) < atom.hydrogens {
            return Err(SmilesError::new(
                ValenceViolation,
                atom.position,
                format!("{} hydrogens exceed the free valence", atom.hydrogens),
            ));
        }
    }
    let needs_double: Vec<bool> = atoms
        .iter()
        .enumerate()
        .map(|(v, a)| a.aromatic && g.free(v) - a.hydrogens >= 1)
        .collect();
    kekulize(&mut g, &needs_double, &aromatic_bonds).map_err(|v| {
        SmilesError::new(
            KekulizationFailure,
            atoms[v].position,
            "no alternating single/double assignment exists",
        )
    })?;
    if !g.is_connected() {
        return Err(SmilesError::new(Disconnected, text.len(), "graph is not connected"));
    }
    Ok(g)
}
