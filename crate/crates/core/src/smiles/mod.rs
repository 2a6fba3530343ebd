//! SMILES subset reader and canonical writer.
//!
//! Accepted: organic-subset atoms `B C N O P S F Cl Br I`, bracket atoms with
//! an explicit hydrogen count and charge (`[NH4+]`, `[O-]`, `[nH]`), bond
//! symbols `- = #`, branches, ring closures `1`-`9` and `%nn`, and lowercase
//! aromatic atoms `b c n o p s`, which are kekulized on input.
//!
//! Stereo marks, isotopes, atom classes, wildcards and dot-disconnected
//! inputs are rejected with the offending character position.

mod kekulize;
mod parser;
mod writer;

use std::fmt;

pub use parser::{parse, parse_with};
pub use writer::write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum SmilesErrorKind {
    UnexpectedChar,
    UnclosedRing,
    UnclosedBranch,
    UnsupportedFeature,
    ValenceViolation,
    Disconnected,
    KekulizationFailure,
}

impl fmt::Display for SmilesErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{kind} at position {position}: {detail}")]
pub struct SmilesError {
    pub position: usize,
    pub kind: SmilesErrorKind,
    pub detail: String,
}

impl SmilesError {
    pub(crate) fn new(kind: SmilesErrorKind, position: usize, detail: impl Into<String>) -> Self {
        SmilesError {
            position,
            kind,
            detail: detail.into(),
        }
    }
}
