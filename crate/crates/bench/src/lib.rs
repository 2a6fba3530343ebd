//! Inputs shared by the criterion benches in `benches/`.

use molgen_core::{smiles, MolGraph};

/// Small drug-like molecules with rings, branches and heteroatoms.
pub const CORPUS: [&str; 8] = [
    "CN1C=NC2=C1C(=O)N(C(=O)N2C)C",
    "CC(=O)OC1=CC=CC=C1C(=O)O",
    "CC(C)CC1=CC=C(C=C1)C(C)C(=O)O",
    "OC1CCCCC1N",
    "C1CC2CCC1C2",
    "CCN(CC)CCOC(=O)C1=CC=C(N)C=C1",
    "O=C1NC(=O)C=C1",
    "CCCCCCCCO",
];

pub fn corpus() -> Vec<MolGraph> {
    CORPUS.iter().map(|s| smiles::parse(s).expect("corpus parses")).collect()
}
