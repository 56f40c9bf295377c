use serde::{Deserialize, Serialize};

use crate::error::{FbdeError, Result};

/// How the integer codes of an attribute relate to raw values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AttributeKind {
    /// Unordered categories; `levels[k]` is the raw string for code `k`.
    Categorical { levels: Vec<String> },
    /// Equal-width bins over `[lo, hi]`; codes are ordered.
    Binned { lo: f64, hi: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub cardinality: usize,
    pub kind: AttributeKind,
}

impl Attribute {
    /// Categorical attribute whose levels are the decimal codes `0..cardinality`.
    pub fn categorical(name: impl Into<String>, cardinality: usize) -> Self {
        Attribute {
            name: name.into(),
            cardinality,
            kind: AttributeKind::Categorical {
                levels: (0..cardinality).map(|k| k.to_string()).collect(),
            },
        }
    }

    pub fn with_levels(name: impl Into<String>, levels: Vec<String>) -> Self {
        Attribute {
            name: name.into(),
            cardinality: levels.len(),
            kind: AttributeKind::Categorical { levels },
        }
    }

    pub fn binned(name: impl Into<String>, bins: usize, lo: f64, hi: f64) -> Self {
        Attribute {
            name: name.into(),
            cardinality: bins,
            kind: AttributeKind::Binned { lo, hi },
        }
    }

    /// Whether codes carry an order (threshold splits apply).
    pub fn is_ordered(&self) -> bool {
        matches!(self.kind, AttributeKind::Binned { .. })
    }

    /// Bin code for a raw value. Values outside `[lo, hi]` clamp to the edge bins.
    pub fn bin_of(&self, value: f64) -> Option<u32> {
        match self.kind {
            AttributeKind::Binned { lo, hi } => {
                let bins = self.cardinality;
                let width = hi - lo;
                let idx = if width <= 0.0 {
                    0
                } else {
                    let pos = ((value - lo) / width * bins as f64).floor();
                    pos.clamp(0.0, (bins - 1) as f64) as usize
                };
                Some(idx as u32)
            }
            AttributeKind::Categorical { .. } => None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.cardinality == 0 {
            return Err(FbdeError::InvalidSchema(format!(
                "attribute {} has cardinality 0",
                self.name
            )));
        }
        match &self.kind {
            AttributeKind::Categorical { levels } if levels.len() != self.cardinality => {
                Err(FbdeError::InvalidSchema(format!(
                    "attribute {} declares {} levels for cardinality {}",
                    self.name,
                    levels.len(),
                    self.cardinality
                )))
            }
            AttributeKind::Binned { lo, hi } if !(lo.is_finite() && hi.is_finite() && lo <= hi) => {
                Err(FbdeError::InvalidSchema(format!(
                    "attribute {} has invalid bin range [{lo}, {hi}]",
                    self.name
                )))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Deserialize)]
struct RawSchema {
    attributes: Vec<Attribute>,
    sensitive_index: usize,
    #[serde(default)]
    target_index: Option<usize>,
}

/// Attributes of a finite domain, one of which is sensitive.
///
/// Cells are indexed row-major over all attributes: attribute 0 is the most
/// significant digit and the last attribute varies fastest. The non-sensitive
/// attributes form the feature space 𝒳, indexed row-major in the same order
/// with the sensitive attribute removed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema")]
pub struct AttributeSchema {
    attributes: Vec<Attribute>,
    sensitive_index: usize,
    target_index: Option<usize>,
}

impl TryFrom<RawSchema> for AttributeSchema {
    type Error = FbdeError;

    fn try_from(raw: RawSchema) -> Result<Self> {
        AttributeSchema::new(raw.attributes, raw.sensitive_index, raw.target_index)
    }
}

impl AttributeSchema {
    pub fn new(
        attributes: Vec<Attribute>,
        sensitive_index: usize,
        target_index: Option<usize>,
    ) -> Result<Self> {
        if sensitive_index >= attributes.len() {
            return Err(FbdeError::InvalidSchema(format!(
                "sensitive index {sensitive_index} out of range for {} attributes",
                attributes.len()
            )));
        }
        if let Some(t) = target_index {
            if t >= attributes.len() || t == sensitive_index {
                return Err(FbdeError::InvalidSchema(format!(
                    "target index {t} must be a valid non-sensitive attribute"
                )));
            }
        }
        for attr in &attributes {
            attr.validate()?;
        }
        let cells = attributes
            .iter()
            .try_fold(1usize, |acc, a| acc.checked_mul(a.cardinality));
        if cells.is_none() {
            return Err(FbdeError::InvalidSchema("domain too large".into()));
        }
        Ok(AttributeSchema {
            attributes,
            sensitive_index,
            target_index,
        })
    }

    /// Schema of categorical attributes with numeric levels.
    pub fn categorical(
        cards: &[(&str, usize)],
        sensitive_index: usize,
        target_index: Option<usize>,
    ) -> Result<Self> {
        let attrs = cards
            .iter()
            .map(|(n, c)| Attribute::categorical(*n, *c))
            .collect();
        Self::new(attrs, sensitive_index, target_index)
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn attribute(&self, index: usize) -> &Attribute {
        &self.attributes[index]
    }

    pub fn num_attributes(&self) -> usize {
        self.attributes.len()
    }

    pub fn sensitive_index(&self) -> usize {
        self.sensitive_index
    }

    pub fn target_index(&self) -> Option<usize> {
        self.target_index
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    /// |𝒜|
    pub fn num_groups(&self) -> usize {
        self.attributes[self.sensitive_index].cardinality
    }

    pub fn num_cells(&self) -> usize {
        self.attributes.iter().map(|a| a.cardinality).product()
    }

    /// |𝒳|
    pub fn num_x_cells(&self) -> usize {
        self.num_cells() / self.num_groups()
    }

    /// Indices of the non-sensitive attributes, in schema order.
    pub fn feature_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.attributes.len()).filter(move |&i| i != self.sensitive_index)
    }

    pub fn check_coords(&self, coords: &[u32]) -> Result<()> {
        if coords.len() != self.attributes.len() {
            return Err(FbdeError::SchemaMismatch(format!(
                "row has {} codes, schema has {} attributes",
                coords.len(),
                self.attributes.len()
            )));
        }
        for (attr, &c) in self.attributes.iter().zip(coords) {
            if c as usize >= attr.cardinality {
                return Err(FbdeError::SchemaMismatch(format!(
                    "code {c} out of range for attribute {} (cardinality {})",
                    attr.name, attr.cardinality
                )));
            }
        }
        Ok(())
    }

    /// Row-major cell index of a coordinate vector. Codes are assumed valid.
    pub fn cell_index(&self, coords: &[u32]) -> usize {
        self.attributes
            .iter()
            .zip(coords)
            .fold(0usize, |acc, (a, &c)| acc * a.cardinality + c as usize)
    }

    pub fn cell_coords(&self, mut cell: usize) -> Vec<u32> {
        let mut coords = vec![0u32; self.attributes.len()];
        for (slot, attr) in coords.iter_mut().zip(&self.attributes).rev() {
            *slot = (cell % attr.cardinality) as u32;
            cell /= attr.cardinality;
        }
        coords
    }

    /// Feature-space index of a coordinate vector, ignoring the sensitive code.
    pub fn x_index(&self, coords: &[u32]) -> usize {
        self.feature_indices().fold(0usize, |acc, i| {
            acc * self.attributes[i].cardinality + coords[i] as usize
        })
    }

    /// Full coordinates for feature cell `x` with the sensitive code set to `a`.
    pub fn coords_of(&self, mut x: usize, a: usize) -> Vec<u32> {
        let mut coords = vec![0u32; self.attributes.len()];
        for i in (0..self.attributes.len()).rev() {
            if i == self.sensitive_index {
                coords[i] = a as u32;
            } else {
                let card = self.attributes[i].cardinality;
                coords[i] = (x % card) as u32;
                x /= card;
            }
        }
        coords
    }

    pub fn joint_index(&self, x: usize, a: usize) -> usize {
        self.cell_index(&self.coords_of(x, a))
    }

    /// `(x, a)` for a joint cell index.
    pub fn split_cell(&self, cell: usize) -> (usize, usize) {
        let coords = self.cell_coords(cell);
        (self.x_index(&coords), coords[self.sensitive_index] as usize)
    }

    /// Table mapping `[x][a]` to the joint cell index.
    pub fn joint_layout(&self) -> Vec<Vec<usize>> {
        let groups = self.num_groups();
        (0..self.num_x_cells())
            .map(|x| (0..groups).map(|a| self.joint_index(x, a)).collect())
            .collect()
    }

    /// True when both schemas describe the same domain (names, cardinalities, roles).
    pub fn same_domain(&self, other: &AttributeSchema) -> bool {
        self.sensitive_index == other.sensitive_index
            && self.attributes.len() == other.attributes.len()
            && self
                .attributes
                .iter()
                .zip(&other.attributes)
                .all(|(a, b)| a.name == b.name && a.cardinality == b.cardinality)
    }

    pub fn ensure_same_domain(&self, other: &AttributeSchema) -> Result<()> {
        if self.same_domain(other) {
            Ok(())
        } else {
            Err(FbdeError::SchemaMismatch(
                "attribute names, cardinalities or sensitive index differ".into(),
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> AttributeSchema {
        AttributeSchema::categorical(&[("x", 3), ("a", 2), ("y", 2)], 1, Some(2)).unwrap()
    }

    #[test]
    fn rejects_bad_indices() {
        assert!(AttributeSchema::categorical(&[("x", 2)], 1, None).is_err());
        assert!(AttributeSchema::categorical(&[("x", 2), ("a", 2)], 1, Some(1)).is_err());
        assert!(AttributeSchema::categorical(&[("x", 0), ("a", 2)], 1, None).is_err());
    }

    #[test]
    fn cell_index_round_trips() {
        let s = schema();
        assert_eq!(s.num_cells(), 12);
        for cell in 0..s.num_cells() {
            assert_eq!(s.cell_index(&s.cell_coords(cell)), cell);
        }
        assert_eq!(s.cell_index(&[2, 1, 1]), 11);
        assert_eq!(s.cell_index(&[1, 0, 1]), 5);
    }

    #[test]
    fn x_and_a_decompose_every_cell() {
        let s = schema();
        assert_eq!(s.num_x_cells(), 6);
        let mut seen = vec![false; s.num_cells()];
        for x in 0..s.num_x_cells() {
            for a in 0..s.num_groups() {
                let cell = s.joint_index(x, a);
                assert_eq!(s.split_cell(cell), (x, a));
                seen[cell] = true;
            }
        }
        assert!(seen.into_iter().all(|b| b));
    }

    #[test]
    fn binning_clamps_and_is_monotone() {
        let attr = Attribute::binned("x", 50, -1.0, 1.0);
        assert_eq!(attr.bin_of(-5.0), Some(0));
        assert_eq!(attr.bin_of(5.0), Some(49));
        assert_eq!(attr.bin_of(1.0), Some(49));
        let mut prev = 0;
        for k in 0..1000 {
            let v = -1.2 + 2.4 * k as f64 / 999.0;
            let b = attr.bin_of(v).unwrap();
            assert!(b >= prev);
            prev = b;
        }
    }

    #[test]
    fn schema_json_is_validated() {
        let s = schema();
        let json = serde_json::to_string(&s).unwrap();
        let back: AttributeSchema = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        let bad = json.replace("\"sensitive_index\":1", "\"sensitive_index\":7");
        assert!(serde_json::from_str::<AttributeSchema>(&bad).is_err());
    }
}
