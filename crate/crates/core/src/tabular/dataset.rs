use crate::error::{FbdeError, Result};
use crate::tabular::AttributeSchema;

/// Rows of cell coordinates over a schema, optionally weighted.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    schema: AttributeSchema,
    rows: Vec<Vec<u32>>,
    weights: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(schema: AttributeSchema, rows: Vec<Vec<u32>>) -> Result<Self> {
        for row in &rows {
            schema.check_coords(row)?;
        }
        Ok(Dataset {
            schema,
            rows,
            weights: None,
        })
    }

    pub fn with_weights(
        schema: AttributeSchema,
        rows: Vec<Vec<u32>>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if weights.len() != rows.len() {
            return Err(FbdeError::InvalidArgument(format!(
                "{} weights for {} rows",
                weights.len(),
                rows.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(FbdeError::InvalidArgument(format!(
                "invalid row weight {w}"
            )));
        }
        let mut ds = Self::new(schema, rows)?;
        ds.weights = Some(weights);
        Ok(ds)
    }

    /// Builds a dataset from joint cell indices.
    pub fn from_cells(schema: AttributeSchema, cells: &[usize]) -> Result<Self> {
        let n = schema.num_cells();
        if let Some(&c) = cells.iter().find(|&&c| c >= n) {
            return Err(FbdeError::SchemaMismatch(format!(
                "cell {c} out of range for {n} cells"
            )));
        }
        let rows = cells.iter().map(|&c| schema.cell_coords(c)).collect();
        Ok(Dataset {
            schema,
            rows,
            weights: None,
        })
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.rows
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }

    pub fn total_weight(&self) -> f64 {
        self.weights
            .as_ref()
            .map_or(self.rows.len() as f64, |w| w.iter().sum())
    }

    pub fn cell(&self, i: usize) -> usize {
        self.schema.cell_index(&self.rows[i])
    }

    pub fn cells(&self) -> Vec<usize> {
        self.rows
            .iter()
            .map(|r| self.schema.cell_index(r))
            .collect()
    }

    pub fn x_cells(&self) -> Vec<usize> {
        self.rows.iter().map(|r| self.schema.x_index(r)).collect()
    }

    pub fn group(&self, i: usize) -> usize {
        self.rows[i][self.schema.sensitive_index()] as usize
    }

    /// Subset of rows by index, preserving weights.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            weights: self
                .weights
                .as_ref()
                .map(|w| indices.iter().map(|&i| w[i]).collect()),
        }
    }

    /// Weighted count per sensitive value.
    pub fn group_weights(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.schema.num_groups()];
        for i in 0..self.rows.len() {
            out[self.group(i)] += self.weight(i);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_codes_and_bad_weights() {
        let s = AttributeSchema::categorical(&[("x", 2), ("a", 2)], 1, None).unwrap();
        assert!(Dataset::new(s.clone(), vec![vec![2, 0]]).is_err());
        assert!(Dataset::new(s.clone(), vec![vec![0]]).is_err());
        assert!(Dataset::with_weights(s.clone(), vec![vec![0, 0]], vec![-1.0]).is_err());
        let ds = Dataset::with_weights(s, vec![vec![0, 0], vec![1, 1]], vec![2.0, 0.5]).unwrap();
        assert_eq!(ds.total_weight(), 2.5);
        assert_eq!(ds.group_weights(), vec![2.0, 0.5]);
    }
}
