//! Membership checks for ε-fair mollifiers.

use crate::error::{FbdeError, Result};
use crate::tabular::fairness::pairwise_rates;
use crate::tabular::TabularDensity;

/// Relative slack on the `≤ exp(·)` comparisons so boundary members are accepted.
const BOUNDARY_SLACK: f64 = 1e-12;

/// Relative mollifier constraint on sensitive marginals: for every ordered pair,
/// `max{RR(Q)/RR(Q₀), RR(Q₀)/RR(Q)} ≤ exp(ε/2)`.
pub fn relative_membership(q_marginal: &[f64], q0_marginal: &[f64], eps: f64) -> Result<bool> {
    if !(eps > 0.0) {
        return Err(FbdeError::InvalidArgument(format!(
            "epsilon must be positive, got {eps}"
        )));
    }
    if q_marginal.len() != q0_marginal.len() {
        return Err(FbdeError::SchemaMismatch(
            "different sensitive domains".into(),
        ));
    }
    let q = pairwise_rates(q_marginal)?;
    let q0 = pairwise_rates(q0_marginal)?;
    let limit = (eps / 2.0).exp() * (1.0 + BOUNDARY_SLACK);
    Ok(q.iter()
        .flatten()
        .zip(q0.iter().flatten())
        .all(|(&r, &r0)| (r / r0).max(r0 / r) <= limit))
}

/// Whether `q` lies in the relative mollifier anchored at `q0` with size `eps`.
pub fn mollifier_membership(q: &TabularDensity, q0: &TabularDensity, eps: f64) -> Result<bool> {
    q.schema().ensure_same_domain(q0.schema())?;
    relative_membership(&q.sensitive_marginal(), &q0.sensitive_marginal(), eps)
}

/// Whether a set of sensitive marginals forms an ε-fair mollifier: for every
/// pair of members and every ordered pair of groups,
/// `RR(Q, a_i, a_j) ≤ exp(ε)·RR(Q', a_i, a_j)`.
pub fn is_fair_mollifier(marginals: &[Vec<f64>], eps: f64) -> Result<bool> {
    let rates = marginals
        .iter()
        .map(|m| pairwise_rates(m))
        .collect::<Result<Vec<_>>>()?;
    let limit = eps.exp() * (1.0 + BOUNDARY_SLACK);
    for r in &rates {
        for r2 in &rates {
            if r.len() != r2.len() {
                return Err(FbdeError::SchemaMismatch(
                    "different sensitive domains".into(),
                ));
            }
            let ok = r
                .iter()
                .flatten()
                .zip(r2.iter().flatten())
                .all(|(&a, &b)| a <= limit * b);
            if !ok {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{representation_rate_of, AttributeSchema};

    fn two_group(p0: f64) -> TabularDensity {
        let s = AttributeSchema::categorical(&[("x", 2), ("a", 2)], 1, None).unwrap();
        TabularDensity::from_weights(
            s,
            vec![p0 * 0.3, (1.0 - p0) * 0.6, p0 * 0.7, (1.0 - p0) * 0.4],
        )
        .unwrap()
    }

    fn with_ratio(r: f64) -> TabularDensity {
        // p0 / p1 = r
        two_group(r / (1.0 + r))
    }

    #[test]
    fn self_membership() {
        let q = two_group(0.3);
        for eps in [1e-6, 0.1, 2.0] {
            assert!(mollifier_membership(&q, &q, eps).unwrap());
        }
    }

    #[test]
    fn boundary_member_is_accepted() {
        let q0 = two_group(0.5);
        for eps in [0.05f64, 0.5, 1.3] {
            let q = with_ratio((-eps / 2.0).exp());
            let rr = representation_rate_of(&q.sensitive_marginal()).unwrap();
            assert!((rr - (-eps / 2.0f64).exp()).abs() < 1e-12);
            assert!(mollifier_membership(&q, &q0, eps).unwrap());
        }
    }

    #[test]
    fn violation_is_rejected() {
        let q0 = two_group(0.5);
        let eps: f64 = 0.4;
        let q = with_ratio((-eps).exp() - 1e-3);
        assert!(!mollifier_membership(&q, &q0, eps).unwrap());
        // just past exp(-eps/2)
        let q = with_ratio((-eps / 2.0f64).exp() - 1e-6);
        assert!(!mollifier_membership(&q, &q0, eps).unwrap());
    }

    #[test]
    fn degenerate_marginal_errors() {
        assert!(relative_membership(&[1.0, 0.0], &[0.5, 0.5], 1.0).is_err());
    }

    #[test]
    fn two_relative_members_form_a_fair_mollifier() {
        let eps = 0.6;
        let q0 = vec![0.5, 0.5];
        let a = vec![0.55, 0.45];
        let b = vec![0.43, 0.57];
        assert!(relative_membership(&a, &q0, eps).unwrap());
        assert!(relative_membership(&b, &q0, eps).unwrap());
        assert!(is_fair_mollifier(&[a, b, q0], eps).unwrap());
    }
}
