use serde::{Deserialize, Serialize};

use crate::numeric::kahan_sum;
use crate::tabular::Dataset;
use crate::weak_learner::Classifier;

/// Boosting regime implied by the weak-learning margins.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// High boosting: γ_Q ∈ [1/3, 1].
    #[serde(rename = "HBS")]
    Hbs,
    /// Low boosting: γ_Q ∈ (0, 1/3).
    #[serde(rename = "LBS")]
    Lbs,
    /// Either margin is nonpositive.
    #[serde(rename = "FAIL")]
    Fail,
}

impl Regime {
    /// γ_Q = 1/3 belongs to HBS, where both Λ forms are defined and Γ(1/3) = 0.
    pub fn classify(gamma_p: f64, gamma_q: f64) -> Regime {
        if !(gamma_p > 0.0) || !(gamma_q > 0.0) {
            Regime::Fail
        } else if gamma_q >= 1.0 / 3.0 {
            Regime::Hbs
        } else {
            Regime::Lbs
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Hbs => "HBS",
            Regime::Lbs => "LBS",
            Regime::Fail => "FAIL",
        }
    }

    pub fn parse(s: &str) -> Option<Regime> {
        match s {
            "HBS" => Some(Regime::Hbs),
            "LBS" => Some(Regime::Lbs),
            "FAIL" => Some(Regime::Fail),
            _ => None,
        }
    }
}

/// Normalized weak-learning margins `γ_P = E_P[c]/C`, `γ_Q = E_Q[−c]/C`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WlaEstimate {
    pub gamma_p: f64,
    pub gamma_q: f64,
    pub regime: Regime,
}

impl WlaEstimate {
    pub fn new(gamma_p: f64, gamma_q: f64) -> Self {
        WlaEstimate {
            gamma_p,
            gamma_q,
            regime: Regime::classify(gamma_p, gamma_q),
        }
    }

    /// Margins from exact expectations of per-feature-cell scores under two
    /// distributions over 𝒳.
    pub fn exact(x_scores: &[f64], p_x: &[f64], q_x: &[f64], c_bound: f64) -> Self {
        let ep = kahan_sum(x_scores.iter().zip(p_x).map(|(c, w)| c * w));
        let eq = kahan_sum(x_scores.iter().zip(q_x).map(|(c, w)| c * w));
        WlaEstimate::new(ep / c_bound, -eq / c_bound)
    }
}

fn weighted_mean(c: &Classifier, ds: &Dataset) -> f64 {
    let schema = ds.schema();
    let total = ds.total_weight();
    let sum = kahan_sum(
        ds.rows()
            .iter()
            .enumerate()
            .map(|(i, row)| ds.weight(i) * c.score(schema, row)),
    );
    if total > 0.0 {
        sum / total
    } else {
        0.0
    }
}

/// Sample estimate of the weak-learning margins of `c`.
pub fn estimate_wla(c: &Classifier, p_samples: &Dataset, q_samples: &Dataset) -> WlaEstimate {
    let bound = c.bound();
    WlaEstimate::new(
        weighted_mean(c, p_samples) / bound,
        -weighted_mean(c, q_samples) / bound,
    )
}
