use crate::error::{FbdeError, Result};
use crate::numeric::kahan_sum;
use crate::tabular::TabularDensity;

/// `KL(p ‖ q)` in nats between two probability vectors, with `0·ln 0 = 0`.
pub fn kl_divergence_slices(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(FbdeError::SchemaMismatch(format!(
            "KL between tables of length {} and {}",
            p.len(),
            q.len()
        )));
    }
    let mut terms = Vec::with_capacity(p.len());
    for (cell, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if !(qi > 0.0) {
            return Err(FbdeError::AbsoluteContinuity(cell));
        }
        terms.push(pi * (pi.ln() - qi.ln()));
    }
    // rounding can leave tiny negatives when p == q
    Ok(kahan_sum(terms).max(0.0))
}

/// `KL(p ‖ q)` in nats. Both densities must share a domain.
pub fn kl_divergence(p: &TabularDensity, q: &TabularDensity) -> Result<f64> {
    p.schema().ensure_same_domain(q.schema())?;
    kl_divergence_slices(p.mass(), q.mass())
}
