use serde::{Deserialize, Serialize};

use crate::error::{FbdeError, Result};
use crate::numeric::kahan_sum;
use crate::tabular::{AttributeSchema, Dataset};

pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

#[derive(Deserialize)]
struct RawDensity {
    schema: AttributeSchema,
    mass: Vec<f64>,
}

/// An explicit joint probability table over every cell of a schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDensity")]
pub struct TabularDensity {
    schema: AttributeSchema,
    mass: Vec<f64>,
}

impl TryFrom<RawDensity> for TabularDensity {
    type Error = FbdeError;

    fn try_from(raw: RawDensity) -> Result<Self> {
        TabularDensity::new(raw.schema, raw.mass)
    }
}

pub(crate) fn check_distribution(mass: &[f64], what: &str) -> Result<()> {
    if let Some((i, m)) = mass
        .iter()
        .enumerate()
        .find(|(_, m)| !(m.is_finite() && **m >= 0.0))
    {
        return Err(FbdeError::InvalidDensity(format!(
            "{what}: entry {i} is {m}"
        )));
    }
    let total = kahan_sum(mass.iter().copied());
    if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(FbdeError::InvalidDensity(format!(
            "{what}: mass sums to {total}"
        )));
    }
    Ok(())
}

pub(crate) fn normalized(weights: Vec<f64>, what: &str) -> Result<Vec<f64>> {
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(FbdeError::InvalidDensity(format!("{what}: weight {w}")));
    }
    let total = kahan_sum(weights.iter().copied());
    if total <= 0.0 {
        return Err(FbdeError::InvalidDensity(format!(
            "{what}: zero total mass"
        )));
    }
    Ok(weights.into_iter().map(|w| w / total).collect())
}

impl TabularDensity {
    /// Wraps a probability vector; it must already be normalized.
    pub fn new(schema: AttributeSchema, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != schema.num_cells() {
            return Err(FbdeError::SchemaMismatch(format!(
                "{} masses for {} cells",
                mass.len(),
                schema.num_cells()
            )));
        }
        check_distribution(&mass, "density")?;
        Ok(TabularDensity { schema, mass })
    }

    /// Normalizes nonnegative weights into a density.
    pub fn from_weights(schema: AttributeSchema, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != schema.num_cells() {
            return Err(FbdeError::SchemaMismatch(format!(
                "{} weights for {} cells",
                weights.len(),
                schema.num_cells()
            )));
        }
        let mass = normalized(weights, "density")?;
        Self::new(schema, mass)
    }

    pub fn uniform(schema: AttributeSchema) -> Self {
        let n = schema.num_cells();
        TabularDensity {
            schema,
            mass: vec![1.0 / n as f64; n],
        }
    }

    /// Laplace-smoothed empirical table:
    /// `(count(cell) + smoothing) / (N + smoothing·|cells|)`, with weighted counts.
    pub fn fit_empirical(dataset: &Dataset, smoothing: f64) -> Result<Self> {
        if dataset.is_empty() {
            return Err(FbdeError::EmptyDataset);
        }
        if !(smoothing >= 0.0) || !smoothing.is_finite() {
            return Err(FbdeError::NegativeSmoothing(smoothing));
        }
        let schema = dataset.schema().clone();
        let mut counts = vec![smoothing; schema.num_cells()];
        for i in 0..dataset.len() {
            counts[dataset.cell(i)] += dataset.weight(i);
        }
        Self::from_weights(schema, counts)
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn prob(&self, cell: usize) -> f64 {
        self.mass[cell]
    }

    pub fn prob_at(&self, x: usize, a: usize) -> f64 {
        self.mass[self.schema.joint_index(x, a)]
    }

    /// p[A = a] for every sensitive value.
    pub fn sensitive_marginal(&self) -> Vec<f64> {
        self.marginal(self.schema.sensitive_index())
    }

    /// Marginal of a single attribute.
    pub fn marginal(&self, attr: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.schema.attribute(attr).cardinality];
        for (cell, &m) in self.mass.iter().enumerate() {
            let coords = self.schema.cell_coords(cell);
            out[coords[attr] as usize] += m;
        }
        out
    }

    /// Joint marginal of two attributes as `[first][second]`.
    pub fn pair_marginal(&self, first: usize, second: usize) -> Vec<Vec<f64>> {
        let mut out = vec![
            vec![0.0; self.schema.attribute(second).cardinality];
            self.schema.attribute(first).cardinality
        ];
        for (cell, &m) in self.mass.iter().enumerate() {
            let coords = self.schema.cell_coords(cell);
            out[coords[first] as usize][coords[second] as usize] += m;
        }
        out
    }

    /// Marginal over the feature space 𝒳.
    pub fn x_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.schema.num_x_cells()];
        for (cell, &m) in self.mass.iter().enumerate() {
            out[self.schema.split_cell(cell).0] += m;
        }
        out
    }

    /// Expectation of `g(cell)`.
    pub fn expect<F: Fn(usize) -> f64>(&self, g: F) -> f64 {
        kahan_sum(
            self.mass
                .iter()
                .enumerate()
                .map(|(c, &m)| if m == 0.0 { 0.0 } else { m * g(c) }),
        )
    }
}
