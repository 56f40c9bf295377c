//! Finite-domain probability tables, fairness measures and KL divergence.

mod dataset;
mod density;
mod divergence;
mod fairness;
mod mollifier;
mod schema;

pub use dataset::Dataset;
pub(crate) use density::{check_distribution, normalized};
pub use density::{TabularDensity, NORMALIZATION_TOLERANCE};
pub use divergence::{kl_divergence, kl_divergence_slices};
pub use fairness::{
    class_conditionals, discrimination_control, joint_representation_rate, pairwise_rates,
    representation_rate, representation_rate_of, statistical_rate,
};
pub use mollifier::{is_fair_mollifier, mollifier_membership, relative_membership};
pub use schema::{Attribute, AttributeKind, AttributeSchema};
