//! Closed-form bounds on KL progress, divergence from `Q₀` and downstream
//! fairness notions, and verifiers that compare them with measured values.

use serde::{Deserialize, Serialize};

use crate::boosted::BoostedDensity;
use crate::engine::{LeveragingScheme, SchemeKind, Trace};
use crate::error::{FbdeError, Result};
use crate::tabular::{
    mollifier_membership, pairwise_rates, representation_rate_of, TabularDensity,
};
use crate::weak_learner::Regime;

/// Slack for comparing measured quantities with closed-form bounds.
pub const BOUND_TOLERANCE: f64 = 1e-9;

/// `Γ(z) = ln(4 / (5 − 3z))`.
pub fn gamma_fn(z: f64) -> f64 {
    (4.0 / (5.0 - 3.0 * z)).ln()
}

/// `α(γ) = Γ(γ) / (γ ln 2)`.
pub fn alpha(gamma: f64) -> f64 {
    gamma_fn(gamma) / (gamma * std::f64::consts::LN_2)
}

/// Guaranteed one-round decrease `ϑ·Λ` of `KL(P, Q)` for `C = ln 2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlDropBound {
    pub lambda: f64,
    pub bound: f64,
    pub regime: Regime,
    pub positive: bool,
}

/// HBS (`γ_Q ≥ 1/3`): `Λ = γ_P ln 2 + Γ(γ_Q)`; LBS: `Λ = γ_P + γ_Q − ϑ ln 2 / 2`.
pub fn kl_drop_bound(theta: f64, gamma_p: f64, gamma_q: f64) -> Result<KlDropBound> {
    let regime = Regime::classify(gamma_p, gamma_q);
    let lambda = match regime {
        Regime::Fail => return Err(FbdeError::WlaViolated { gamma_p, gamma_q }),
        Regime::Hbs => gamma_p * std::f64::consts::LN_2 + gamma_fn(gamma_q),
        Regime::Lbs => gamma_p + gamma_q - std::f64::consts::LN_2 * theta / 2.0,
    };
    let bound = theta * lambda;
    Ok(KlDropBound {
        lambda,
        bound,
        regime,
        positive: bound > 0.0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaBounds {
    pub lower: f64,
    pub upper: f64,
}

/// Upper bound on `Δ(Q_T) = KL(P, Q₀) − KL(P, Q_T)`, valid for any target:
/// `2C Σ_t ϑ_t`, which the exact and relative schemes bound by `−ln τ` and
/// `−(1 + ln T) ln τ`.
pub fn delta_upper(scheme: &LeveragingScheme, rounds: usize) -> f64 {
    scheme.mollifier_size(rounds)
}

/// Both bounds on `Δ(Q_T)` when the margins stay at `(γ_P, γ_Q)` in HBS.
pub fn delta_bounds(
    scheme: &LeveragingScheme,
    rounds: usize,
    gamma_p: f64,
    gamma_q: f64,
) -> Result<DeltaBounds> {
    let tau = scheme.tau;
    if !(tau > (-1.0f64).exp() && tau < 1.0) {
        return Err(FbdeError::InvalidArgument(format!(
            "divergence bounds need tau in (1/e, 1), got {tau}"
        )));
    }
    if rounds == 0 {
        return Err(FbdeError::InvalidArgument(
            "divergence bounds need T >= 1".into(),
        ));
    }
    match Regime::classify(gamma_p, gamma_q) {
        Regime::Fail => return Err(FbdeError::WlaViolated { gamma_p, gamma_q }),
        Regime::Lbs => {
            return Err(FbdeError::InvalidArgument(format!(
                "divergence lower bound needs gamma_q >= 1/3, got {gamma_q}"
            )))
        }
        Regime::Hbs => {}
    }
    let neg_log_tau = -tau.ln();
    let rate = (gamma_p + gamma_q * alpha(gamma_q)) / 2.0;
    let t = rounds as f64;
    let (lower, upper) = match scheme.kind {
        SchemeKind::Exact => (
            neg_log_tau * rate * (1.0 - 2f64.powf(-(t - 1.0))),
            neg_log_tau,
        ),
        SchemeKind::Relative => (neg_log_tau * rate * t.ln(), (1.0 + t.ln()) * neg_log_tau),
        SchemeKind::Constant { .. } => {
            return Err(FbdeError::InvalidArgument(
                "divergence lower bound is defined for the exact and relative schemes".into(),
            ))
        }
    };
    Ok(DeltaBounds { lower, upper })
}

/// Largest false negative rate for which RR-fairness `τ` implies `ρ`-equal
/// opportunity: `(τ − ρ)/(1 + τ)`.
pub fn eo_fnr_bound(tau: f64, rho: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&tau) || !(0.0..=1.0).contains(&rho) {
        return Err(FbdeError::InvalidArgument(format!(
            "tau and rho must lie in [0, 1], got {tau} and {rho}"
        )));
    }
    if rho > tau {
        return Err(FbdeError::InvalidArgument(format!(
            "rho {rho} exceeds tau {tau}"
        )));
    }
    Ok((tau - rho) / (1.0 + tau))
}

/// Statistical rate implied by a joint `𝒴 × 𝒜` representation rate `τ`: `τ²`.
pub fn sr_from_rr(tau: f64) -> f64 {
    tau * tau
}

/// Discrimination control implied by a joint representation rate `τ`:
/// `(1 − τ²)/τ²`.
pub fn dc_from_rr(tau: f64) -> f64 {
    (1.0 - tau * tau) / (tau * tau)
}

/// Equal-opportunity diagnostics of a predictor on a binary-`Y`, binary-`A`
/// table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EoReport {
    /// `p[Ŷ = 0 | Y = 1]`
    pub fnr: f64,
    /// `min_{i,j} p[Ŷ=1 | A=a_i, Y=1] / p[Ŷ=1 | A=a_j, Y=1]`
    pub eo_ratio: f64,
    /// Representation rate of `p[A]`.
    pub rr_marginal: f64,
    /// Representation rate of `p[A | Y = 1]`, the quantity the FNR argument uses.
    pub rr_positive: f64,
    pub rho: f64,
    /// `ρ ≤ τ` and `fnr ≤ (τ − ρ)/(1 + τ)` with `τ = rr_positive`.
    pub premise: bool,
    /// The same premise with `τ = rr_marginal`.
    pub marginal_premise: bool,
    pub conclusion: bool,
    /// `premise ⇒ conclusion`
    pub holds: bool,
}

fn premise(tau: f64, rho: f64, fnr: f64) -> bool {
    rho <= tau && fnr <= (tau - rho) / (1.0 + tau) + BOUND_TOLERANCE
}

/// Evaluates the FNR route to `ρ`-equal opportunity on `density`.
///
/// `predictor[cell]` is `p[Ŷ = 1 | cell]` over the full cell index.
pub fn verify_eo(density: &TabularDensity, predictor: &[f64], rho: f64) -> Result<EoReport> {
    let schema = density.schema();
    let y_idx = schema.target_index().ok_or(FbdeError::NoTarget)?;
    let a_idx = schema.sensitive_index();
    if schema.attribute(y_idx).cardinality != 2 || schema.num_groups() != 2 {
        return Err(FbdeError::InvalidArgument(
            "equal opportunity check needs binary target and sensitive attributes".into(),
        ));
    }
    if predictor.len() != schema.num_cells() {
        return Err(FbdeError::SchemaMismatch(format!(
            "{} predictor entries for {} cells",
            predictor.len(),
            schema.num_cells()
        )));
    }
    if let Some(v) = predictor.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(FbdeError::InvalidArgument(format!(
            "predictor probability {v}"
        )));
    }
    // p[A = a, Y = 1] and p[Ŷ = 1, A = a, Y = 1]
    let mut pos = [0.0f64; 2];
    let mut hit = [0.0f64; 2];
    for (cell, &m) in density.mass().iter().enumerate() {
        let coords = schema.cell_coords(cell);
        if coords[y_idx] == 1 {
            let a = coords[a_idx] as usize;
            pos[a] += m;
            hit[a] += m * predictor[cell];
        }
    }
    let total_pos = pos[0] + pos[1];
    if total_pos <= 0.0 {
        return Err(FbdeError::DegenerateConditional(0));
    }
    if let Some(a) = pos.iter().position(|&p| p <= 0.0) {
        return Err(FbdeError::DegenerateConditional(a));
    }
    let fnr = 1.0 - (hit[0] + hit[1]) / total_pos;
    let tpr = [hit[0] / pos[0], hit[1] / pos[1]];
    let eo_ratio = if tpr[0] <= 0.0 && tpr[1] <= 0.0 {
        return Err(FbdeError::InvalidArgument(
            "predictor never outputs 1 on Y = 1".into(),
        ));
    } else if tpr[0] <= 0.0 || tpr[1] <= 0.0 {
        0.0
    } else {
        (tpr[0] / tpr[1]).min(tpr[1] / tpr[0])
    };
    let rr_marginal = representation_rate_of(&density.sensitive_marginal())?;
    let rr_positive = (pos[0] / pos[1]).min(pos[1] / pos[0]);
    let premise_ok = premise(rr_positive, rho, fnr);
    let conclusion = eo_ratio >= rho - BOUND_TOLERANCE;
    Ok(EoReport {
        fnr,
        eo_ratio,
        rr_marginal,
        rr_positive,
        rho,
        premise: premise_ok,
        marginal_premise: premise(rr_marginal, rho, fnr),
        conclusion,
        holds: !premise_ok || conclusion,
    })
}

/// One row of the per-round comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundCheck {
    pub t: usize,
    pub theta: f64,
    pub rr: f64,
    pub rr_bound: f64,
    pub rr_ok: bool,
    pub gamma_p: f64,
    pub gamma_q: f64,
    pub regime: Regime,
    pub lambda: Option<f64>,
    pub kl_drop_bound: Option<f64>,
    pub kl_drop_measured: Option<f64>,
    /// Only HBS rounds with `Λ > 0` under `C = ln 2` are checked.
    pub kl_drop_checked: bool,
    pub kl_drop_ok: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaCheck {
    pub measured: Option<f64>,
    pub upper: f64,
    pub upper_ok: Option<bool>,
    /// With the smallest per-round margins; reported, not asserted.
    pub lower: Option<f64>,
    pub gamma_p_min: Option<f64>,
    pub gamma_q_min: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpliedConstants {
    pub rr: f64,
    /// Statistical rate implied when `rr` holds over joint `𝒴 × 𝒜` cells.
    pub sr_bound: f64,
    pub dc_bound: f64,
    /// `(ρ, largest FNR)` pairs for ρ ≤ rr.
    pub eo_fnr_bounds: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeReport {
    pub scheme: LeveragingScheme,
    pub rounds: usize,
    pub c_bound_is_ln2: bool,
    pub per_round: Vec<RoundCheck>,
    pub delta: DeltaCheck,
    pub mollifier_epsilon: f64,
    pub mollifier_member: bool,
    pub rr_normalizers: f64,
    pub rr_table: f64,
    pub implied: ImpliedConstants,
    pub all_ok: bool,
}

impl GuaranteeReport {
    /// Compares a fitted model and its trace with every applicable bound.
    ///
    /// Per-round RR is recomputed from the model; KL drops and margins come
    /// from the trace.
    pub fn build(model: &BoostedDensity, scheme: &LeveragingScheme, trace: &Trace) -> Result<Self> {
        let t_max = model.num_rounds();
        if trace.rows.len() != t_max {
            return Err(FbdeError::InvalidArgument(format!(
                "trace has {} rounds, model has {t_max}",
                trace.rows.len()
            )));
        }
        let ln2_bound = model
            .rounds()
            .iter()
            .all(|r| (r.classifier.bound() - std::f64::consts::LN_2).abs() < 1e-12);

        let mut per_round = Vec::with_capacity(t_max);
        let mut prev_kl = trace.kl_train_initial;
        for (k, row) in trace.rows.iter().enumerate() {
            let t = k + 1;
            let rr = model.prefix(t).representation_rate_via_normalizers()?;
            let rr_bound = scheme.rr_lower_bound(t);
            let drop = match (prev_kl, row.kl_train) {
                (Some(a), Some(b)) if a.is_finite() && b.is_finite() => Some(a - b),
                _ => None,
            };
            prev_kl = row.kl_train;
            let bound = kl_drop_bound(row.theta, row.gamma_p, row.gamma_q).ok();
            let checked = ln2_bound
                && drop.is_some()
                && matches!(bound, Some(b) if b.regime == Regime::Hbs && b.lambda > 0.0);
            let drop_ok = if checked {
                Some(drop.unwrap() >= bound.unwrap().bound - BOUND_TOLERANCE)
            } else {
                None
            };
            per_round.push(RoundCheck {
                t,
                theta: row.theta,
                rr,
                rr_bound,
                rr_ok: rr >= rr_bound - BOUND_TOLERANCE,
                gamma_p: row.gamma_p,
                gamma_q: row.gamma_q,
                regime: row.regime,
                lambda: bound.map(|b| b.lambda),
                kl_drop_bound: bound.map(|b| b.bound),
                kl_drop_measured: drop,
                kl_drop_checked: checked,
                kl_drop_ok: drop_ok,
            });
        }

        let measured = match (
            trace.kl_train_initial,
            trace.final_row().and_then(|r| r.kl_train),
        ) {
            (Some(a), Some(b)) if a.is_finite() && b.is_finite() => Some(a - b),
            (Some(_), None) if t_max == 0 => Some(0.0),
            _ => None,
        };
        let upper = delta_upper(scheme, t_max);
        let gp_min = trace.rows.iter().map(|r| r.gamma_p).reduce(f64::min);
        let gq_min = trace.rows.iter().map(|r| r.gamma_q).reduce(f64::min);
        let lower = match (gp_min, gq_min) {
            (Some(gp), Some(gq)) => delta_bounds(scheme, t_max, gp, gq).ok().map(|b| b.lower),
            _ => None,
        };
        let delta = DeltaCheck {
            measured,
            upper,
            upper_ok: measured.map(|m| m <= upper + BOUND_TOLERANCE),
            lower,
            gamma_p_min: gp_min,
            gamma_q_min: gq_min,
        };

        let joint = model.joint();
        let eps = 2.0 * scheme.mollifier_size(t_max);
        let member = mollifier_membership(&joint, &model.initial().joint(), eps)?;
        let rr_normalizers = model.representation_rate_via_normalizers()?;
        let rr_table = representation_rate_of(&joint.sensitive_marginal())?;
        let eo_fnr_bounds = [0.5, 0.6, 0.7, 0.8, 0.9]
            .into_iter()
            .filter(|&rho| rho <= rr_normalizers)
            .map(|rho| Ok((rho, eo_fnr_bound(rr_normalizers, rho)?)))
            .collect::<Result<Vec<_>>>()?;
        let all_ok = per_round
            .iter()
            .all(|r| r.rr_ok && r.kl_drop_ok != Some(false))
            && delta.upper_ok != Some(false)
            && member;
        Ok(GuaranteeReport {
            scheme: *scheme,
            rounds: t_max,
            c_bound_is_ln2: ln2_bound,
            per_round,
            delta,
            mollifier_epsilon: eps,
            mollifier_member: member,
            rr_normalizers,
            rr_table,
            implied: ImpliedConstants {
                rr: rr_normalizers,
                sr_bound: sr_from_rr(rr_normalizers),
                dc_bound: dc_from_rr(rr_normalizers),
                eo_fnr_bounds,
            },
            all_ok,
        })
    }
}

/// Pairwise ratios of a marginal, exposed for reports.
pub fn ratio_table(marginal: &[f64]) -> Result<Vec<Vec<f64>>> {
    pairwise_rates(marginal)
}
