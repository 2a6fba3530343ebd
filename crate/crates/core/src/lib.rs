pub mod bench;
pub mod canon;
pub mod dataset;
pub mod element;
pub mod enumerate;
pub mod features;
pub mod graph;
pub mod matching;
pub mod pipeline;
pub mod regress;
pub mod rings;
pub mod rules;
pub mod smiles;

pub use canon::{canonical_form, canonical_label, CanonicalForm, CanonicalLabel};
pub use element::{Element, ValenceTable};
pub use graph::{Atom, Bond, GraphError, MolGraph};
pub use matching::{count_fragment, is_isomorphic};
pub use rings::{perceive_rings, Ring};
