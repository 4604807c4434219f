//! Constructive machinery for the edge-removal phenomenon in product graphs.
//!
//! The pipeline: tensor powers of a small reversible Markov chain carry
//! bounded functions whose structure is probed spectrally (product
//! eigenbasis, noise operators, influences), combinatorially (independent
//! sets of the pattern graph, exact maximum-weight search), and through an
//! entropy potential that certifies progress of iterative refinement. A
//! biased-cube specialization handles intersecting families of k-sets.
//!
//! Everything runs at desk scale on dense tables in `f64`. Independence is
//! always decided on the transition pattern, never by thresholding floats,
//! and every derived quantity has a brute-force twin in [`oracle`].

#![forbid(unsafe_code)]

pub mod chain;
pub mod functions;
pub mod independent;
pub mod junta;
pub mod kneser;
mod linalg;
pub mod oracle;
pub mod refine;

pub use chain::{complete_graph_chain, BaseChain, ChainError, ChainSpectrum, ProductSpace};
pub use functions::{CoordinateSet, FourierExpansion, FunctionError, PointFunction, Range};
