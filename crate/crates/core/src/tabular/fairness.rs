//! Representation rate and the class-conditional fairness measures derived from it.

use crate::error::{FbdeError, Result};
use crate::tabular::TabularDensity;

/// Ratio `p[a_i] / p[a_j]` for every ordered pair.
pub fn pairwise_rates(marginal: &[f64]) -> Result<Vec<Vec<f64>>> {
    check_positive(marginal)?;
    Ok(marginal
        .iter()
        .map(|pi| marginal.iter().map(|pj| pi / pj).collect())
        .collect())
}

fn check_positive(marginal: &[f64]) -> Result<()> {
    match marginal.iter().position(|&p| !(p > 0.0)) {
        Some(a) => Err(FbdeError::DegenerateMarginal(a)),
        None => Ok(()),
    }
}

/// Minimum over ordered pairs of `p[a_i] / p[a_j]`.
pub fn representation_rate_of(marginal: &[f64]) -> Result<f64> {
    check_positive(marginal)?;
    let mut rr = 1.0f64;
    for pi in marginal {
        for pj in marginal {
            rr = rr.min(pi / pj);
        }
    }
    Ok(rr)
}

/// RR of the sensitive marginal of `density`.
pub fn representation_rate(density: &TabularDensity) -> Result<f64> {
    representation_rate_of(&density.sensitive_marginal())
}

/// RR taken over the cells of the 𝒴×𝒜 pair marginal: the minimum ratio between
/// any two (y, a) cells.
pub fn joint_representation_rate(density: &TabularDensity) -> Result<f64> {
    let target = density.schema().target_index().ok_or(FbdeError::NoTarget)?;
    let pair = density.pair_marginal(target, density.schema().sensitive_index());
    let flat: Vec<f64> = pair.into_iter().flatten().collect();
    representation_rate_of(&flat)
}

/// `p[Y = y | A = a]` for every sensitive value.
pub fn class_conditionals(density: &TabularDensity, y: usize) -> Result<Vec<f64>> {
    let schema = density.schema();
    let target = schema.target_index().ok_or(FbdeError::NoTarget)?;
    if y >= schema.attribute(target).cardinality {
        return Err(FbdeError::InvalidArgument(format!(
            "class value {y} out of range"
        )));
    }
    let pair = density.pair_marginal(target, schema.sensitive_index());
    let groups = schema.num_groups();
    (0..groups)
        .map(|a| {
            let pa: f64 = pair.iter().map(|row| row[a]).sum();
            if !(pa > 0.0) {
                return Err(FbdeError::DegenerateMarginal(a));
            }
            let cond = pair[y][a] / pa;
            if cond > 0.0 {
                Ok(cond)
            } else {
                Err(FbdeError::DegenerateConditional(a))
            }
        })
        .collect()
}

/// Minimum over ordered pairs of `p[Y=y|A=a_i] / p[Y=y|A=a_j]`.
pub fn statistical_rate(density: &TabularDensity, y: usize) -> Result<f64> {
    let cond = class_conditionals(density, y)?;
    let mut rate = 1.0f64;
    for ci in &cond {
        for cj in &cond {
            rate = rate.min(ci / cj);
        }
    }
    Ok(rate)
}

/// Maximum over ordered pairs of `|p[Y=y|A=a_i] / p[Y=y|A=a_j] − 1|`.
pub fn discrimination_control(density: &TabularDensity, y: usize) -> Result<f64> {
    let cond = class_conditionals(density, y)?;
    let mut worst = 0.0f64;
    for ci in &cond {
        for cj in &cond {
            worst = worst.max((ci / cj - 1.0).abs());
        }
    }
    Ok(worst)
}
