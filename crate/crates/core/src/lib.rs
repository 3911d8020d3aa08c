//! smart-boost: regression-tree functional-gradient boosting over factorized
//! structured outputs, instantiated for non-overlapping mention-lattice
//! entity linking.
//!
//! The pieces compose bottom-up:
//!
//! - [`lattice`]: mention lattices, validity, and exact inference (partition
//!   function, marginals, Viterbi) plus a brute-force oracle.
//! - [`trees`]: axis-aligned CART regression trees, the base learner.
//! - [`boosting`]: the structured trainer (each round fits one tree to the
//!   pooled point-wise negative functional gradients of the chosen loss)
//!   and the non-structured (independent) baseline mode.
//! - [`linking`]: entity-linking data model, candidate generation, features,
//!   two-stage entity-entity training.
//! - [`eval`]: IE- and IR-driven precision/recall/F1 and Nil-bias tuning.
//! - [`synth`]: deterministic synthetic corpora with a planted nonlinear
//!   ground truth.
//! - [`model`] / [`io`]: model bundles and the file formats the CLI speaks.

pub mod boosting;
pub mod error;
pub mod eval;
pub mod io;
pub mod lattice;
pub mod linking;
pub mod math;
pub mod model;
pub mod synth;
pub mod trees;

pub use error::{Error, Result};
