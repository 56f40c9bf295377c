use rand::seq::SliceRandom;

use crate::boosted::InitialDensity;
use crate::error::{FbdeError, Result};
use crate::numeric::rng_from_seed;
use crate::tabular::Dataset;

/// `(train, test)` row indices for `k` shuffled folds of `n` rows.
///
/// The first `n mod k` test folds hold one extra row. Indices within each part
/// are sorted.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k < 2 {
        return Err(FbdeError::InvalidArgument(format!(
            "k-fold needs k >= 2, got {k}"
        )));
    }
    if k > n {
        return Err(FbdeError::InvalidArgument(format!(
            "{k} folds for {n} rows"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let mut fold_of = vec![0usize; n];
    let (base, extra) = (n / k, n % k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        for &i in &order[start..start + size] {
            fold_of[i] = f;
        }
        start += size;
    }
    Ok((0..k)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| fold_of[i] == f);
            (train, test)
        })
        .collect())
}

/// `(train, test)` datasets for `k` shuffled folds.
pub fn kfold(dataset: &Dataset, k: usize, seed: u64) -> Result<Vec<(Dataset, Dataset)>> {
    Ok(kfold_indices(dataset.len(), k, seed)?
        .into_iter()
        .map(|(train, test)| (dataset.select(&train), dataset.select(&test)))
        .collect())
}

/// `Q₀` from per-group smoothed empirical conditionals and a uniform sensitive
/// marginal.
pub fn build_initial(train: &Dataset, smoothing: f64) -> Result<InitialDensity> {
    if train.is_empty() {
        return Err(FbdeError::EmptyDataset);
    }
    if !(smoothing >= 0.0 && smoothing.is_finite()) {
        return Err(FbdeError::NegativeSmoothing(smoothing));
    }
    let schema = train.schema().clone();
    let mut counts = vec![vec![smoothing; schema.num_x_cells()]; schema.num_groups()];
    let mut group_weight = vec![0.0; schema.num_groups()];
    for i in 0..train.len() {
        let (x, a) = schema.split_cell(train.cell(i));
        counts[a][x] += train.weight(i);
        group_weight[a] += train.weight(i);
    }
    if let Some(a) = group_weight.iter().position(|&w| w <= 0.0) {
        return Err(FbdeError::UnrepresentedSensitive(a));
    }
    InitialDensity::from_weights(schema, counts)
}
