//! End-to-end runs over a raw table: schema inference, `Q₀`, boosting, and
//! optional k-fold evaluation.

use rayon::prelude::*;

use crate::boosted::InitialDensity;
use crate::data::{build_initial, encode_table, infer_schema, kfold_indices, CsvSpec, RawTable};
use crate::engine::{fbde_fit, fbde_fit_holdout, FitConfig, FitResult, KlEval};
use crate::error::Result;
use crate::numeric::sub_seed;
use crate::tabular::{AttributeSchema, Dataset};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub fit: FitConfig,
    /// Laplace smoothing of the per-group conditionals of `Q₀`.
    pub q0_smoothing: f64,
    /// `None` fits once on all rows.
    pub folds: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct FoldOutcome {
    /// 0-based fold index; 0 for a single fit.
    pub fold: usize,
    pub schema: AttributeSchema,
    pub train: Dataset,
    pub test: Option<Dataset>,
    pub q0: InitialDensity,
    pub result: FitResult,
}

/// Seed of the fit in fold `fold`.
pub fn fold_seed(root: u64, fold: usize) -> u64 {
    sub_seed(root, "fit", fold as u64)
}

/// Seed of the fold shuffle.
pub fn shuffle_seed(root: u64) -> u64 {
    sub_seed(root, "folds", 0)
}

fn fit_one(
    table: &RawTable,
    spec: &CsvSpec,
    cfg: &RunConfig,
    fold: usize,
    split: Option<(&[usize], &[usize])>,
) -> Result<FoldOutcome> {
    let schema = infer_schema(table, spec, split.map(|(train, _)| train))?;
    let all = encode_table(table, &schema)?;
    let mut fit = cfg.fit.clone();
    fit.seed = fold_seed(cfg.fit.seed, fold);
    let (train, test) = match split {
        Some((tr, te)) => (all.select(tr), Some(all.select(te))),
        None => (all, None),
    };
    let q0 = build_initial(&train, cfg.q0_smoothing)?;
    let result = match &test {
        Some(test) => {
            if fit.kl_eval == KlEval::Train {
                fit.kl_eval = KlEval::HeldOut;
            }
            fbde_fit_holdout(&train, test, q0.clone(), &fit)?
        }
        None => fbde_fit(&train, q0.clone(), &fit)?,
    };
    Ok(FoldOutcome {
        fold,
        schema,
        train,
        test,
        q0,
        result,
    })
}

/// Fits every fold (concurrently) or the whole table once. Outcomes are sorted
/// by fold index.
pub fn run(table: &RawTable, spec: &CsvSpec, cfg: &RunConfig) -> Result<Vec<FoldOutcome>> {
    match cfg.folds {
        None => Ok(vec![fit_one(table, spec, cfg, 0, None)?]),
        Some(k) => {
            let splits = kfold_indices(table.len(), k, shuffle_seed(cfg.fit.seed))?;
            splits
                .par_iter()
                .enumerate()
                .map(|(f, (train, test))| fit_one(table, spec, cfg, f, Some((train, test))))
                .collect()
        }
    }
}
