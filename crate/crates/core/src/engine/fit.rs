use serde::{Deserialize, Serialize};

use crate::boosted::{BoostedDensity, InitialDensity};
use crate::engine::scheme::LeveragingScheme;
use crate::engine::trace::{Trace, TraceRow};
use crate::error::{FbdeError, Result};
use crate::numeric::sub_seed;
use crate::tabular::{kl_divergence, Dataset, TabularDensity};
use crate::weak_learner::{train_tree, Classifier, TreeConfig, WlaEstimate};

/// Where the negatives of each round come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeSampling {
    /// Fresh exact draws from `Q_{t−1}` every round.
    #[default]
    Fresh,
    /// One pool drawn from `Q₀`, reweighted by `Q_{t−1} / Q₀` every round.
    ReweightedPool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlEval {
    None,
    /// `KL(P̂_train, Q_t)` each round.
    #[default]
    Train,
    /// Train and held-out divergences; requires a test set.
    HeldOut,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub rounds: usize,
    pub scheme: LeveragingScheme,
    pub tree: TreeConfig,
    pub negatives_multiplier: f64,
    pub negatives: NegativeSampling,
    pub kl_eval: KlEval,
    /// Laplace smoothing of the empirical target used for margins and KL.
    pub p_smoothing: f64,
    pub seed: u64,
}

impl FitConfig {
    pub fn new(rounds: usize, scheme: LeveragingScheme, seed: u64) -> Self {
        FitConfig {
            rounds,
            tree: TreeConfig {
                c_bound: scheme.c_bound,
                ..TreeConfig::default()
            },
            scheme,
            negatives_multiplier: 2.0,
            negatives: NegativeSampling::Fresh,
            kl_eval: KlEval::Train,
            p_smoothing: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scheme.validate()?;
        self.tree.validate()?;
        if self.tree.c_bound != self.scheme.c_bound {
            return Err(FbdeError::InvalidArgument(format!(
                "tree bound {} differs from scheme bound {}",
                self.tree.c_bound, self.scheme.c_bound
            )));
        }
        if !(self.negatives_multiplier > 0.0 && self.negatives_multiplier.is_finite()) {
            return Err(FbdeError::InvalidArgument(format!(
                "negatives multiplier must be positive, got {}",
                self.negatives_multiplier
            )));
        }
        if !(self.p_smoothing >= 0.0 && self.p_smoothing.is_finite()) {
            return Err(FbdeError::NegativeSmoothing(self.p_smoothing));
        }
        Ok(())
    }
}

/// What a weak learner sees in round `t`.
pub struct RoundContext<'a> {
    pub t: usize,
    pub seed: u64,
    /// `Q_{t−1}`
    pub current: &'a BoostedDensity,
}

/// Produces the sufficient statistic `c_t` from P-samples and Q-samples.
pub trait WeakLearner {
    fn train(&self, p: &Dataset, q: &Dataset, ctx: &RoundContext<'_>) -> Result<Classifier>;
}

/// Gini decision trees.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeLearner {
    pub config: TreeConfig,
}

impl WeakLearner for TreeLearner {
    fn train(&self, p: &Dataset, q: &Dataset, _ctx: &RoundContext<'_>) -> Result<Classifier> {
        Ok(train_tree(p, q, &self.config)?.into())
    }
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub density: BoostedDensity,
    pub trace: Trace,
}

/// Runs the boosting loop with the configured decision-tree learner.
pub fn fbde_fit(p: &Dataset, q0: InitialDensity, cfg: &FitConfig) -> Result<FitResult> {
    let learner = TreeLearner {
        config: cfg.tree.clone(),
    };
    fbde_fit_with(p, q0, cfg, &learner, None)
}

/// As [`fbde_fit`], also tracking `KL(P̂_test, Q_t)` when `test` is given.
pub fn fbde_fit_holdout(
    p: &Dataset,
    test: &Dataset,
    q0: InitialDensity,
    cfg: &FitConfig,
) -> Result<FitResult> {
    let learner = TreeLearner {
        config: cfg.tree.clone(),
    };
    fbde_fit_with(p, q0, cfg, &learner, Some(test))
}

/// `KL(p, q)`, with an absolute-continuity failure reported as `+∞`.
pub fn kl_or_infinite(p: &TabularDensity, q: &TabularDensity) -> Result<f64> {
    match kl_divergence(p, q) {
        Err(FbdeError::AbsoluteContinuity(_)) => Ok(f64::INFINITY),
        other => other,
    }
}

fn x_marginal_of(bd: &BoostedDensity) -> Vec<f64> {
    let schema = bd.schema();
    (0..schema.num_x_cells())
        .map(|x| (0..schema.num_groups()).map(|a| bd.density_at(x, a)).sum())
        .collect()
}

/// The boosting loop with any weak learner.
pub fn fbde_fit_with<L: WeakLearner + ?Sized>(
    p: &Dataset,
    q0: InitialDensity,
    cfg: &FitConfig,
    learner: &L,
    test: Option<&Dataset>,
) -> Result<FitResult> {
    cfg.validate()?;
    if p.is_empty() {
        return Err(FbdeError::EmptyDataset);
    }
    p.schema().ensure_same_domain(q0.schema())?;
    if let Some(test) = test {
        test.schema().ensure_same_domain(q0.schema())?;
    }
    if cfg.kl_eval == KlEval::HeldOut && test.is_none() {
        return Err(FbdeError::InvalidArgument(
            "held-out KL requires a test set".into(),
        ));
    }

    let p_hat = TabularDensity::fit_empirical(p, cfg.p_smoothing)?;
    let p_x = p_hat.x_marginal();
    let test_hat = match (cfg.kl_eval, test) {
        (KlEval::HeldOut, Some(t)) => Some(TabularDensity::fit_empirical(t, cfg.p_smoothing)?),
        _ => None,
    };
    let kl_against = |bd: &BoostedDensity| -> Result<(Option<f64>, Option<f64>)> {
        if cfg.kl_eval == KlEval::None {
            return Ok((None, None));
        }
        let joint = bd.joint();
        let train = kl_or_infinite(&p_hat, &joint)?;
        let held = test_hat
            .as_ref()
            .map(|t| kl_or_infinite(t, &joint))
            .transpose()?;
        Ok((Some(train), held))
    };

    let mut bd = BoostedDensity::new(q0);
    let (kl_train_initial, kl_test_initial) = kl_against(&bd)?;
    let mut trace = Trace {
        kl_train_initial,
        kl_test_initial,
        rows: Vec::with_capacity(cfg.rounds),
    };

    let n_neg = ((cfg.negatives_multiplier * p.len() as f64).ceil() as usize).max(1);
    let pool = match cfg.negatives {
        NegativeSampling::ReweightedPool => Some(bd.sample(n_neg, sub_seed(cfg.seed, "pool", 0))?),
        NegativeSampling::Fresh => None,
    };

    for t in 1..=cfg.rounds {
        let round_seed = sub_seed(cfg.seed, "round", t as u64);
        let negatives = match &pool {
            None => bd.sample(n_neg, sub_seed(cfg.seed, "negatives", t as u64))?,
            Some(pool) => {
                let schema = pool.schema();
                let weights = pool
                    .rows()
                    .iter()
                    .map(|row| bd.importance_weight(schema.x_index(row)))
                    .collect();
                Dataset::with_weights(schema.clone(), pool.rows().to_vec(), weights)?
            }
        };
        let ctx = RoundContext {
            t,
            seed: round_seed,
            current: &bd,
        };
        let classifier = learner.train(p, &negatives, &ctx)?;
        let theta = cfg.scheme.leverage(t);
        let scores = bd.classifier_scores(&classifier)?;
        let wla = WlaEstimate::exact(&scores, &p_x, &x_marginal_of(&bd), classifier.bound());
        bd.push_round(theta, classifier)?;

        let rr = bd.representation_rate_via_normalizers()?;
        let (kl_train, kl_test) = kl_against(&bd)?;
        let round = &bd.rounds()[t - 1];
        log::debug!(
            "round {t}: theta={theta:.6} gamma_p={:.4} gamma_q={:.4} rr={rr:.6} kl={kl_train:?}",
            wla.gamma_p,
            wla.gamma_q
        );
        trace.rows.push(TraceRow {
            t,
            theta,
            gamma_p: wla.gamma_p,
            gamma_q: wla.gamma_q,
            regime: wla.regime,
            rr,
            rr_bound: cfg.scheme.rr_lower_bound(t),
            kl_train,
            kl_test,
            z: round.z,
            z_by_group: round.z_by_group.clone(),
        });
    }
    Ok(FitResult { density: bd, trace })
}

/// Recomputes the per-round diagnostics of a fitted stack against target
/// tables, e.g. for a model loaded from disk.
pub fn replay_trace(
    model: &BoostedDensity,
    scheme: &LeveragingScheme,
    p_hat: &TabularDensity,
    test_hat: Option<&TabularDensity>,
) -> Result<Trace> {
    model.schema().ensure_same_domain(p_hat.schema())?;
    if let Some(t) = test_hat {
        model.schema().ensure_same_domain(t.schema())?;
    }
    let p_x = p_hat.x_marginal();
    let kl = |bd: &BoostedDensity| -> Result<(Option<f64>, Option<f64>)> {
        let joint = bd.joint();
        Ok((
            Some(kl_or_infinite(p_hat, &joint)?),
            test_hat.map(|t| kl_or_infinite(t, &joint)).transpose()?,
        ))
    };
    let mut prev = BoostedDensity::new(model.initial().clone());
    let (kl_train_initial, kl_test_initial) = kl(&prev)?;
    let mut rows = Vec::with_capacity(model.num_rounds());
    for (k, round) in model.rounds().iter().enumerate() {
        let t = k + 1;
        let wla = WlaEstimate::exact(
            model.round_scores(k),
            &p_x,
            &x_marginal_of(&prev),
            round.classifier.bound(),
        );
        let current = model.prefix(t);
        let (kl_train, kl_test) = kl(&current)?;
        rows.push(TraceRow {
            t,
            theta: round.theta,
            gamma_p: wla.gamma_p,
            gamma_q: wla.gamma_q,
            regime: wla.regime,
            rr: current.representation_rate_via_normalizers()?,
            rr_bound: scheme.rr_lower_bound(t),
            kl_train,
            kl_test,
            z: round.z,
            z_by_group: round.z_by_group.clone(),
        });
        prev = current;
    }
    Ok(Trace {
        kl_train_initial,
        kl_test_initial,
        rows,
    })
}
