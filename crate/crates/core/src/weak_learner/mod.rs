//! Bounded classifiers used as sufficient statistics, and their training.

mod classifier;
mod tree;
mod wla;

pub use classifier::{Classifier, LookupClassifier};
pub use tree::{
    gini, train_tree, training_gini, DecisionTreeClassifier, LeafValue, Split, TreeConfig, TreeNode,
};
pub use wla::{estimate_wla, Regime, WlaEstimate};
