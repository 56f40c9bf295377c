//! Versioned JSON model files.
//!
//! ```json
//! {
//!   "format": "fbde-model",
//!   "version": 1,
//!   "schema": { "attributes": [...], "sensitive_index": 1, "target_index": null },
//!   "scheme": { "kind": { "kind": "exact" }, "tau": 0.7, "c_bound": 0.693... },
//!   "q0": { "conditionals": [[...], [...]] },
//!   "rounds": [ { "theta": ..., "classifier": {...}, "z": ..., "z_by_group": [...] } ],
//!   "manifest": "run.manifest.json"
//! }
//! ```
//!
//! `rounds[k]` is round `k + 1`; its normalizers are the ones frozen at fit
//! time and are checked, never recomputed, on load. Conditionals are indexed by
//! sensitive code, then by feature cell.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::boosted::{BoostedDensity, InitialDensity, Round};
use crate::engine::LeveragingScheme;
use crate::error::{FbdeError, Result};
use crate::tabular::AttributeSchema;

pub const MODEL_FORMAT: &str = "fbde-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct InitialDoc {
    conditionals: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    format: String,
    version: u32,
    schema: AttributeSchema,
    scheme: Option<LeveragingScheme>,
    q0: InitialDoc,
    rounds: Vec<Round>,
    #[serde(default)]
    manifest: Option<String>,
}

/// A fitted density with the scheme that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub density: BoostedDensity,
    pub scheme: Option<LeveragingScheme>,
    /// File name of the run manifest, if any.
    pub manifest: Option<String>,
}

impl Model {
    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDoc {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            schema: self.density.schema().clone(),
            scheme: self.scheme,
            q0: InitialDoc {
                conditionals: self.density.initial().conditionals().to_vec(),
            },
            rounds: self.density.rounds().to_vec(),
            manifest: self.manifest.clone(),
        };
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Model> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        if doc.format != MODEL_FORMAT {
            return Err(FbdeError::Format(format!(
                "not a model file: format {:?}",
                doc.format
            )));
        }
        if doc.version != MODEL_VERSION {
            return Err(FbdeError::Format(format!(
                "model version {} is not supported (expected {MODEL_VERSION})",
                doc.version
            )));
        }
        if let Some(s) = &doc.scheme {
            s.validate()?;
        }
        let q0 = InitialDensity::new(doc.schema, doc.q0.conditionals)?;
        let mut density = BoostedDensity::new(q0);
        for round in doc.rounds {
            density.push_frozen_round(round)?;
        }
        Ok(Model {
            density,
            scheme: doc.scheme,
            manifest: doc.manifest,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Model> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
