//! Reference-free taxonomy quality evaluation.
//!
//! The crate scores taxonomies for robustness (CSC and the SP baseline) and
//! logical adequacy (NLIV), compares them against a gold standard with
//! triplet F1, and runs seeded degradation studies that relate the
//! reference-free scores to F1.
//!
//! ```
//! use taxometer::gateway::mock::MockNli;
//! use taxometer::taxonomy::{Concept, Taxonomy};
//! use taxometer::adequacy::{nliv, Mode};
//!
//! let concepts = vec![
//!     Concept::new("food", "food", "any substance eaten for nourishment"),
//!     Concept::new("fruit", "fruit", "the sweet ripened ovary of a plant eaten as food"),
//! ];
//! let t = Taxonomy::from_edges(concepts, [("food", "fruit")]).unwrap();
//! assert_eq!(t.wu_palmer("food", "fruit").unwrap(), 2.0 * 2.0 / (2.0 + 3.0));
//! let score = nliv(&t, &MockNli::lexical(0), Mode::Weak).unwrap();
//! assert!(score.score > 0.0 && score.score <= 1.0);
//! ```

pub mod adequacy;
pub mod gateway;
pub mod harness;
pub mod mutation;
pub mod reference;
pub mod robustness;
pub mod taxonomy;

pub use reference::{triplet_prf, Prf, ReferenceError};
pub use taxonomy::{load_taxonomy, Concept, Taxonomy, TaxonomyError, TaxonomyFormat, Triplet};
