//! Element alphabet and the valence model.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Heavy-atom elements understood by the toolkit, ordered by atomic number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Element {
    B,
    C,
    N,
    O,
    F,
    P,
    S,
    Cl,
    Br,
    I,
}

impl Element {
    pub const ALL: [Element; 10] = [
        Element::B,
        Element::C,
        Element::N,
        Element::O,
        Element::F,
        Element::P,
        Element::S,
        Element::Cl,
        Element::Br,
        Element::I,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Element::B => "B",
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::F => "F",
            Element::P => "P",
            Element::S => "S",
            Element::Cl => "Cl",
            Element::Br => "Br",
            Element::I => "I",
        }
    }

    pub fn from_symbol(symbol: &str) -> Option<Element> {
        Element::ALL.iter().copied().find(|e| e.symbol() == symbol)
    }

    /// Stable small integer code, used in canonical encodings.
    pub fn code(self) -> u8 {
        self as u8
    }

    /// Default bond-order capacity of the neutral atom.
    pub fn default_valence(self) -> u8 {
        match self {
            Element::C => 4,
            Element::N | Element::P | Element::B => 3,
            Element::O | Element::S => 2,
            Element::F | Element::Cl | Element::Br | Element::I => 1,
        }
    }

    /// Pnictogens and chalcogens gain a bond per positive charge and lose one
    /// per negative charge; every other element loses one per unit of charge.
    fn charge_shifts_up(self) -> bool {
        matches!(self, Element::N | Element::P | Element::O | Element::S)
    }

    /// Elements that may carry a lowercase aromatic symbol in SMILES.
    pub fn aromatic_capable(self) -> bool {
        matches!(
            self,
            Element::B | Element::C | Element::N | Element::O | Element::P | Element::S
        )
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown element symbol `{0}`")]
pub struct UnknownElement(pub String);

impl FromStr for Element {
    type Err = UnknownElement;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Element::from_symbol(s).ok_or_else(|| UnknownElement(s.to_string()))
    }
}

/// Maximum valence per element. Defaults to [`Element::default_valence`];
/// individual entries can be overridden.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValenceTable {
    overrides: BTreeMap<Element, u8>,
}

impl Default for ValenceTable {
    fn default() -> Self {
        ValenceTable {
            overrides: BTreeMap::new(),
        }
    }
}

impl ValenceTable {
    pub fn with_override(mut self, element: Element, max_valence: u8) -> Self {
        assert!(max_valence >= 1, "max valence must be at least 1");
        self.overrides.insert(element, max_valence);
        self
    }

    /// Every element at valence 8, for parsing fragments whose atoms may have
    /// been built under an overridden table.
    pub fn permissive() -> Self {
        Element::ALL.iter().fold(ValenceTable::default(), |t, &e| t.with_override(e, 8))
    }

    pub fn neutral(&self, element: Element) -> u8 {
        self.overrides
            .get(&element)
            .copied()
            .unwrap_or_else(|| element.default_valence())
    }

    /// Capacity after the formal-charge adjustment, or `None` when the charge
    /// leaves no valence at all.
    pub fn charged(&self, element: Element, charge: i8) -> Option<u8> {
        let base = self.neutral(element) as i16;
        let adjusted = if element.charge_shifts_up() {
            base + charge as i16
        } else {
            base - (charge as i16).abs()
        };
        (adjusted >= 0).then_some(adjusted as u8)
    }
}
