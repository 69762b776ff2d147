//! Periodic forms `X = (Q, t)` and certificates of local packing optimality.
//!
//! The crate computes the generalized arithmetical minimum and packing
//! density of periodic point sets, builds the generalized Voronoi domain of
//! a periodic form, and decides m-perfection and m-eutaxy. On top of that it
//! searches bounded families of sublattice representations for floating
//! (translationally free) configurations, and offers an empirical
//! local-improvement search.

pub mod certify;
pub mod error;
pub mod exact;
pub mod fixtures;
pub mod floating;
pub mod form;
pub mod linalg;
pub mod minima;
pub mod optimizer;

pub use error::{Error, Result};
pub use form::{density, inner_product, sdm_dimension, MinTriple, PeriodicForm, Pqf, SdmVector};
pub use minima::{arithmetical_minimum, arithmetical_minimum_with, evaluate_p, packing_density, EnumerationLimits, MinimumResult};
