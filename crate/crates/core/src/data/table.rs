use std::collections::{BTreeMap, HashSet};
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{FbdeError, Result};
use crate::tabular::{Attribute, AttributeKind, AttributeSchema, Dataset};

/// Numeric columns with more distinct values than this are binned unless a
/// kind is declared for them.
pub const AUTO_CONTINUOUS_DISTINCT: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnRole {
    Feature,
    Sensitive,
    Target,
    Ignore,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ColumnKind {
    Categorical,
    Continuous { bins: usize },
}

/// How to turn a CSV file into coded rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvSpec {
    pub path: PathBuf,
    pub sensitive: String,
    pub target: Option<String>,
    pub ignore: Vec<String>,
    /// Declared kinds; undeclared feature columns are detected.
    pub kinds: BTreeMap<String, ColumnKind>,
    /// Bin count for detected continuous columns.
    pub default_bins: usize,
}

impl CsvSpec {
    pub fn new(path: impl Into<PathBuf>, sensitive: impl Into<String>) -> Self {
        CsvSpec {
            path: path.into(),
            sensitive: sensitive.into(),
            target: None,
            ignore: Vec::new(),
            kinds: BTreeMap::new(),
            default_bins: 50,
        }
    }

    pub fn role(&self, column: &str) -> ColumnRole {
        if column == self.sensitive {
            ColumnRole::Sensitive
        } else if self.target.as_deref() == Some(column) {
            ColumnRole::Target
        } else if self.ignore.iter().any(|c| c == column) {
            ColumnRole::Ignore
        } else {
            ColumnRole::Feature
        }
    }
}

/// A CSV file as strings, header required.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn read<R: Read>(input: R) -> Result<RawTable> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(input);
        let headers: Vec<String> = reader
            .headers()?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        if headers.is_empty() || headers.iter().all(String::is_empty) {
            return Err(FbdeError::Format("CSV header row is missing".into()));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = headers.iter().find(|h| !seen.insert(h.as_str())) {
            return Err(FbdeError::Format(format!("duplicate column {dup:?}")));
        }
        let rows = reader
            .records()
            .map(|r| r.map(|rec| rec.iter().map(|f| f.trim().to_string()).collect()))
            .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
        Ok(RawTable { headers, rows })
    }

    pub fn from_path(path: &Path) -> Result<RawTable> {
        Self::read(std::fs::File::open(path)?)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| FbdeError::SchemaMismatch(format!("column {name:?} not found")))
    }
}

fn parse_number(value: &str, column: &str, row: usize) -> Result<f64> {
    match value.parse::<f64>() {
        Ok(v) if v.is_nan() => Err(FbdeError::NanCell {
            column: column.to_string(),
            row,
        }),
        Ok(v) => Ok(v),
        Err(_) if value.is_empty() || value.eq_ignore_ascii_case("nan") => {
            Err(FbdeError::NanCell {
                column: column.to_string(),
                row,
            })
        }
        Err(_) => Err(FbdeError::Format(format!(
            "non-numeric value {value:?} in continuous column {column} at row {row}"
        ))),
    }
}

fn detect_kind(table: &RawTable, col: usize, default_bins: usize) -> ColumnKind {
    let mut distinct = HashSet::new();
    for row in &table.rows {
        if row[col].parse::<f64>().is_err() {
            return ColumnKind::Categorical;
        }
        distinct.insert(row[col].as_str());
    }
    if distinct.len() > AUTO_CONTINUOUS_DISTINCT {
        ColumnKind::Continuous { bins: default_bins }
    } else {
        ColumnKind::Categorical
    }
}

/// Builds the schema of `table`.
///
/// Categorical levels are numbered by first appearance over all rows; bin ranges
/// are the min/max over `fit_rows` (all rows when `None`). Row indices in errors
/// count data rows from 0.
pub fn infer_schema(
    table: &RawTable,
    spec: &CsvSpec,
    fit_rows: Option<&[usize]>,
) -> Result<AttributeSchema> {
    if table.is_empty() {
        return Err(FbdeError::EmptyDataset);
    }
    table.column(&spec.sensitive)?;
    if let Some(t) = &spec.target {
        table.column(t)?;
        if t == &spec.sensitive {
            return Err(FbdeError::InvalidSchema(
                "target and sensitive column coincide".into(),
            ));
        }
    }
    for name in spec.kinds.keys().chain(&spec.ignore) {
        table.column(name)?;
    }
    let all: Vec<usize> = (0..table.len()).collect();
    let fit_rows = fit_rows.unwrap_or(&all);
    if fit_rows.is_empty() {
        return Err(FbdeError::EmptyDataset);
    }

    let mut attributes = Vec::new();
    let mut sensitive_index = 0;
    let mut target_index = None;
    for (col, name) in table.headers.iter().enumerate() {
        let role = spec.role(name);
        let kind = match role {
            ColumnRole::Ignore => continue,
            ColumnRole::Sensitive | ColumnRole::Target => ColumnKind::Categorical,
            ColumnRole::Feature => match spec.kinds.get(name) {
                Some(k) => *k,
                None => detect_kind(table, col, spec.default_bins),
            },
        };
        let attr = match kind {
            ColumnKind::Categorical => {
                let mut levels: Vec<String> = Vec::new();
                let mut seen = HashSet::new();
                for row in &table.rows {
                    if seen.insert(row[col].as_str()) {
                        levels.push(row[col].clone());
                    }
                }
                Attribute::with_levels(name.clone(), levels)
            }
            ColumnKind::Continuous { bins } => {
                if bins == 0 {
                    return Err(FbdeError::InvalidArgument(format!(
                        "column {name} needs at least one bin"
                    )));
                }
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for &r in fit_rows {
                    let v = parse_number(&table.rows[r][col], name, r)?;
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                Attribute::binned(name.clone(), bins, lo, hi)
            }
        };
        match role {
            ColumnRole::Sensitive => sensitive_index = attributes.len(),
            ColumnRole::Target => target_index = Some(attributes.len()),
            _ => {}
        }
        attributes.push(attr);
    }
    AttributeSchema::new(attributes, sensitive_index, target_index)
}

/// Codes every row of `table` against `schema`, matching columns by name.
pub fn encode_table(table: &RawTable, schema: &AttributeSchema) -> Result<Dataset> {
    let cols = schema
        .attributes()
        .iter()
        .map(|a| table.column(&a.name))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(table.len());
    for (r, raw) in table.rows.iter().enumerate() {
        let coded = schema
            .attributes()
            .iter()
            .zip(&cols)
            .map(|(attr, &c)| encode_value(attr, &raw[c], r))
            .collect::<Result<Vec<u32>>>()?;
        rows.push(coded);
    }
    Dataset::new(schema.clone(), rows)
}

fn encode_value(attr: &Attribute, value: &str, row: usize) -> Result<u32> {
    match &attr.kind {
        AttributeKind::Categorical { levels } => levels
            .iter()
            .position(|l| l == value)
            .map(|k| k as u32)
            .ok_or_else(|| FbdeError::UnseenCategory {
                column: attr.name.clone(),
                value: value.to_string(),
            }),
        AttributeKind::Binned { .. } => {
            let v = parse_number(value, &attr.name, row)?;
            Ok(attr.bin_of(v).expect("binned attribute"))
        }
    }
}

/// The raw representation of a coded value: the level for categorical codes,
/// the bin midpoint for binned ones.
pub fn decode_value(attr: &Attribute, code: u32) -> String {
    match &attr.kind {
        AttributeKind::Categorical { levels } => levels[code as usize].clone(),
        AttributeKind::Binned { lo, hi } => {
            let width = (hi - lo) / attr.cardinality as f64;
            (lo + width * (code as f64 + 0.5)).to_string()
        }
    }
}

/// Reads, infers a schema over all rows and encodes.
pub fn load_csv(spec: &CsvSpec) -> Result<(Dataset, AttributeSchema)> {
    let table = RawTable::from_path(&spec.path)?;
    let schema = infer_schema(&table, spec, None)?;
    let ds = encode_table(&table, &schema)?;
    Ok((ds, schema))
}
