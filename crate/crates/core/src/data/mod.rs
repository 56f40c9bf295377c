//! CSV ingestion, discretization, fold splitting and the synthetic mixture.

mod mixture;
mod split;
mod table;

pub use mixture::{generate_mixture, write_mixture_csv, MixtureParams, MixturePoint};
pub use split::{build_initial, kfold, kfold_indices};
pub use table::{
    decode_value, encode_table, infer_schema, load_csv, ColumnKind, ColumnRole, CsvSpec, RawTable,
    AUTO_CONTINUOUS_DISTINCT,
};
