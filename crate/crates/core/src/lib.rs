//! Fair boosted density estimation over finite domains.
//!
//! A target distribution `P` over `𝒳 × 𝒜` (features × sensitive attribute) is
//! approximated by an exponential family grown from a fair anchor `Q₀` whose
//! sensitive marginal is uniform. Each round tilts the current density by a
//! bounded classifier `c_t` separating data from model samples, with a
//! leveraging coefficient small enough to keep the representation rate above a
//! user target.

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boosted;
pub mod data;
pub mod engine;
pub mod error;
pub mod guarantees;
pub mod manifest;
pub mod model;
pub mod numeric;
pub mod pipeline;
pub mod tabular;
pub mod weak_learner;

pub use boosted::{BoostedDensity, Estimate, ExpectationMode, InitialDensity, Normalizers, Round};
pub use error::{FbdeError, Result};
