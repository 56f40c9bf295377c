use serde::{Deserialize, Serialize};

use crate::error::{FbdeError, Result};
use crate::tabular::AttributeSchema;
use crate::weak_learner::tree::DecisionTreeClassifier;

/// A bounded sufficient statistic `c : 𝒳 → [−C, C]`.
///
/// Classifiers only read the non-sensitive codes of a cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classifier {
    Tree(DecisionTreeClassifier),
    /// One value per feature cell, indexed like [`AttributeSchema::x_index`].
    Lookup(LookupClassifier),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LookupClassifier {
    pub c_bound: f64,
    pub values: Vec<f64>,
}

impl LookupClassifier {
    pub fn new(c_bound: f64, values: Vec<f64>) -> Result<Self> {
        let lookup = LookupClassifier { c_bound, values };
        lookup.check_bounds()?;
        Ok(lookup)
    }

    fn check_bounds(&self) -> Result<()> {
        if !(self.c_bound > 0.0 && self.c_bound.is_finite()) {
            return Err(FbdeError::InvalidArgument(format!(
                "classifier bound must be positive, got {}",
                self.c_bound
            )));
        }
        for &v in &self.values {
            if !v.is_finite() {
                return Err(FbdeError::ClassifierUnbounded(v));
            }
            if v.abs() > self.c_bound {
                return Err(FbdeError::InvalidArgument(format!(
                    "lookup value {v} outside [-{0}, {0}]",
                    self.c_bound
                )));
            }
        }
        Ok(())
    }
}

impl Classifier {
    pub fn bound(&self) -> f64 {
        match self {
            Classifier::Tree(t) => t.c_bound(),
            Classifier::Lookup(l) => l.c_bound,
        }
    }

    /// `c(x)` for a full coordinate vector; the sensitive code is ignored.
    pub fn score(&self, schema: &AttributeSchema, coords: &[u32]) -> f64 {
        match self {
            Classifier::Tree(t) => t.score(coords),
            Classifier::Lookup(l) => l.values[schema.x_index(coords)],
        }
    }

    /// `c(x)` for every feature cell.
    pub fn x_scores(&self, schema: &AttributeSchema) -> Vec<f64> {
        match self {
            Classifier::Lookup(l) => l.values.clone(),
            Classifier::Tree(t) => (0..schema.num_x_cells())
                .map(|x| t.score(&schema.coords_of(x, 0)))
                .collect(),
        }
    }

    /// Checks that the classifier fits `schema`, never reads the sensitive
    /// attribute and only produces finite values within its bound.
    pub fn validate(&self, schema: &AttributeSchema) -> Result<()> {
        match self {
            Classifier::Lookup(l) => {
                if l.values.len() != schema.num_x_cells() {
                    return Err(FbdeError::SchemaMismatch(format!(
                        "lookup has {} values for {} feature cells",
                        l.values.len(),
                        schema.num_x_cells()
                    )));
                }
                l.check_bounds()
            }
            Classifier::Tree(t) => t.validate(schema),
        }
    }
}

impl From<DecisionTreeClassifier> for Classifier {
    fn from(t: DecisionTreeClassifier) -> Self {
        Classifier::Tree(t)
    }
}

impl From<LookupClassifier> for Classifier {
    fn from(l: LookupClassifier) -> Self {
        Classifier::Lookup(l)
    }
}
