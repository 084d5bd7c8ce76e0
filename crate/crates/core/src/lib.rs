//! Next-basket recommendation toolkit.
//!
//! The crate splits a basket recommender into a repetition step (re-rank the
//! items a user already bought) and an exploration step (fill the remaining
//! slots with new items chosen for fairness or diversity), and evaluates any
//! recommender on accuracy, item-exposure fairness and list diversity.

pub mod baselines;
pub mod corpus;
pub mod error;
pub mod experiments;
pub mod io;
pub mod metrics;
pub mod recommendation;
pub mod trex;
pub(crate) mod util;

pub use error::{Error, Result};
pub use recommendation::{Provenance, Recommendation};
