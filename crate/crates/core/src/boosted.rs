//! The exponential-family stack `Q_t ∝ exp(ϑ_t c_t(x)) Q_{t−1}(x, a)`.
//!
//! A [`BoostedDensity`] stores the fair anchor `Q₀` and, per round, the
//! leveraging coefficient, the classifier and the normalizers frozen at fit
//! time. Everything else (joint table, conditionals, sensitive marginal) is
//! derived from those in log space.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FbdeError, Result};
use crate::numeric::{cumulative, inverse_cdf, kahan_sum, log_sum_exp, rng_from_seed};
use crate::tabular::{
    check_distribution, normalized, representation_rate_of, AttributeSchema, Dataset,
    TabularDensity,
};
use crate::weak_learner::Classifier;

/// Tolerance for `Z = Σ_a q_{t−1}(a) Z(a)` when loading frozen normalizers.
pub const NORMALIZER_CONSISTENCY: f64 = 1e-10;

/// `Q₀(x, a) = q₀(x | a) · 1/|𝒜|`.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialDensity {
    schema: AttributeSchema,
    conditionals: Vec<Vec<f64>>,
}

impl InitialDensity {
    /// Per-group conditionals over the feature cells; each must sum to 1.
    pub fn new(schema: AttributeSchema, conditionals: Vec<Vec<f64>>) -> Result<Self> {
        if conditionals.len() != schema.num_groups() {
            return Err(FbdeError::SchemaMismatch(format!(
                "{} conditionals for {} sensitive values",
                conditionals.len(),
                schema.num_groups()
            )));
        }
        for (a, cond) in conditionals.iter().enumerate() {
            if cond.len() != schema.num_x_cells() {
                return Err(FbdeError::SchemaMismatch(format!(
                    "conditional {a} has {} entries for {} feature cells",
                    cond.len(),
                    schema.num_x_cells()
                )));
            }
            check_distribution(cond, &format!("conditional q0(x|a={a})"))?;
        }
        Ok(InitialDensity {
            schema,
            conditionals,
        })
    }

    /// Normalizes each group's nonnegative weights.
    pub fn from_weights(schema: AttributeSchema, weights: Vec<Vec<f64>>) -> Result<Self> {
        let conds = weights
            .into_iter()
            .enumerate()
            .map(|(a, w)| normalized(w, &format!("conditional q0(x|a={a})")))
            .collect::<Result<Vec<_>>>()?;
        Self::new(schema, conds)
    }

    /// Every group gets the conditional of `density` over 𝒳 given that group.
    pub fn from_density_conditionals(density: &TabularDensity) -> Result<Self> {
        let schema = density.schema().clone();
        let weights = (0..schema.num_groups())
            .map(|a| {
                (0..schema.num_x_cells())
                    .map(|x| density.prob_at(x, a))
                    .collect()
            })
            .collect();
        Self::from_weights(schema, weights)
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn conditionals(&self) -> &[Vec<f64>] {
        &self.conditionals
    }

    pub fn conditional(&self, a: usize) -> &[f64] {
        &self.conditionals[a]
    }

    pub fn group_prob(&self) -> f64 {
        1.0 / self.schema.num_groups() as f64
    }

    pub fn prob_at(&self, x: usize, a: usize) -> f64 {
        self.conditionals[a][x] * self.group_prob()
    }

    /// The constant `1/|𝒜|` marginal, not a sum over the table.
    pub fn sensitive_marginal(&self) -> Vec<f64> {
        vec![self.group_prob(); self.schema.num_groups()]
    }

    /// Exactly 1: the sensitive marginal is set, not estimated.
    pub fn representation_rate(&self) -> f64 {
        1.0
    }

    pub fn joint(&self) -> TabularDensity {
        let mut mass = vec![0.0; self.schema.num_cells()];
        for (x, row) in self.schema.joint_layout().iter().enumerate() {
            for (a, &cell) in row.iter().enumerate() {
                mass[cell] = self.prob_at(x, a);
            }
        }
        // conditionals are validated and the marginal is exactly 1/|A|
        TabularDensity::from_weights(self.schema.clone(), mass)
            .expect("initial density is normalized")
    }
}

/// One boosting round: `(ϑ_t, c_t, Z_t, Z_t(a))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub theta: f64,
    pub classifier: Classifier,
    pub z: f64,
    pub z_by_group: Vec<f64>,
}

/// `Z_t` and `Z_t(a)` for a candidate round.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalizers {
    pub z: f64,
    pub z_by_group: Vec<f64>,
}

/// How an expectation is computed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExpectationMode {
    /// Full sum over the finite domain.
    Exact,
    /// Importance-weighted average over draws from `Q₀` (or `q₀(·|a)`).
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    /// Sample standard error; zero in exact mode.
    pub std_error: f64,
}

/// `Q_T(x, a) = Q₀(x, a) Π_k exp(ϑ_k c_k(x)) / Z_k`.
#[derive(Clone, Debug)]
pub struct BoostedDensity {
    q0: InitialDensity,
    rounds: Vec<Round>,
    /// `c_k(x)` per round and feature cell.
    scores: Vec<Vec<f64>>,
    /// `Σ_k ϑ_k c_k(x)` per feature cell.
    log_tilt: Vec<f64>,
    /// `Σ_k ln Z_k`
    log_z: f64,
    /// `Σ_k ln Z_k(a)`
    log_z_group: Vec<f64>,
}

impl PartialEq for BoostedDensity {
    fn eq(&self, other: &Self) -> bool {
        self.q0 == other.q0 && self.rounds == other.rounds
    }
}

impl BoostedDensity {
    pub fn new(q0: InitialDensity) -> Self {
        let nx = q0.schema.num_x_cells();
        let groups = q0.schema.num_groups();
        BoostedDensity {
            q0,
            rounds: Vec::new(),
            scores: Vec::new(),
            log_tilt: vec![0.0; nx],
            log_z: 0.0,
            log_z_group: vec![0.0; groups],
        }
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.q0.schema
    }

    pub fn initial(&self) -> &InitialDensity {
        &self.q0
    }

    pub fn rounds(&self) -> &[Round] {
        &self.rounds
    }

    pub fn num_rounds(&self) -> usize {
        self.rounds.len()
    }

    /// Per-feature-cell scores of round `k` (0-based).
    pub fn round_scores(&self, k: usize) -> &[f64] {
        &self.scores[k]
    }

    /// `Σ_k ϑ_k c_k(x)` per feature cell.
    pub fn log_tilt(&self) -> &[f64] {
        &self.log_tilt
    }

    /// `Σ_k ln Z_k`
    pub fn log_normalizer(&self) -> f64 {
        self.log_z
    }

    /// `Σ_k ln Z_k(a)`
    pub fn log_group_normalizers(&self) -> &[f64] {
        &self.log_z_group
    }

    /// Scores of `classifier` on every feature cell, checked to be finite.
    pub fn classifier_scores(&self, classifier: &Classifier) -> Result<Vec<f64>> {
        let scores = classifier.x_scores(self.schema());
        if let Some(&v) = scores.iter().find(|v| !v.is_finite()) {
            return Err(FbdeError::ClassifierUnbounded(v));
        }
        Ok(scores)
    }

    /// `ln q_t(x | a)` per feature cell.
    fn log_conditional(&self, a: usize) -> Vec<f64> {
        self.q0.conditionals[a]
            .iter()
            .zip(&self.log_tilt)
            .map(|(&q, &t)| q.ln() + t - self.log_z_group[a])
            .collect()
    }

    /// `q_t(x | a)` per feature cell.
    pub fn conditional(&self, a: usize) -> Vec<f64> {
        self.log_conditional(a).into_iter().map(f64::exp).collect()
    }

    /// `q_t(a) = q₀(a) Π_k Z_k(a) / Z_k`.
    pub fn sensitive_marginal(&self) -> Vec<f64> {
        let q0a = self.q0.group_prob();
        self.log_z_group
            .iter()
            .map(|lz| q0a * (lz - self.log_z).exp())
            .collect()
    }

    /// `RR(Q_t) = min_{i,j} Π_k Z_k(a_i) / Z_k(a_j)`.
    pub fn representation_rate_via_normalizers(&self) -> Result<f64> {
        let lz = &self.log_z_group;
        if let Some(a) = lz.iter().position(|v| !v.is_finite()) {
            return Err(FbdeError::DegenerateMarginal(a));
        }
        let mut min_log = 0.0f64;
        for li in lz {
            for lj in lz {
                min_log = min_log.min(li - lj);
            }
        }
        Ok(min_log.exp())
    }

    /// Representation rate of the explicit joint table.
    pub fn representation_rate(&self) -> Result<f64> {
        representation_rate_of(&self.joint().sensitive_marginal())
    }

    pub fn density_at(&self, x: usize, a: usize) -> f64 {
        let q0 = self.q0.prob_at(x, a);
        if q0 == 0.0 {
            return 0.0;
        }
        (q0.ln() + self.log_tilt[x] - self.log_z).exp()
    }

    pub fn density_at_cell(&self, cell: usize) -> f64 {
        let (x, a) = self.schema().split_cell(cell);
        self.density_at(x, a)
    }

    /// The explicit joint table of `Q_t`.
    pub fn joint(&self) -> TabularDensity {
        let schema = self.schema();
        let mut mass = vec![0.0; schema.num_cells()];
        for (x, row) in schema.joint_layout().iter().enumerate() {
            for (a, &cell) in row.iter().enumerate() {
                mass[cell] = self.density_at(x, a);
            }
        }
        TabularDensity::from_weights(schema.clone(), mass).expect("boosted joint has positive mass")
    }

    /// Unnormalized sum of the unrolled joint; 1 up to rounding.
    pub fn total_mass(&self) -> f64 {
        let schema = self.schema();
        kahan_sum(
            (0..schema.num_x_cells())
                .flat_map(|x| (0..schema.num_groups()).map(move |a| (x, a)))
                .map(|(x, a)| self.density_at(x, a)),
        )
    }

    /// Exact `Z_t(a) = E_{q_{t−1}(·|a)}[exp(ϑ c(x))]` and
    /// `Z_t = Σ_a q_{t−1}(a) Z_t(a)` for appending `(ϑ, c)` to this stack.
    pub fn compute_normalizers(&self, classifier: &Classifier, theta: f64) -> Result<Normalizers> {
        let scores = self.classifier_scores(classifier)?;
        self.normalizers_from_scores(&scores, theta)
    }

    pub fn normalizers_from_scores(&self, scores: &[f64], theta: f64) -> Result<Normalizers> {
        if !theta.is_finite() {
            return Err(FbdeError::InvalidArgument(format!(
                "theta {theta} is not finite"
            )));
        }
        if let Some(&v) = scores.iter().find(|v| !v.is_finite()) {
            return Err(FbdeError::ClassifierUnbounded(v));
        }
        let groups = self.schema().num_groups();
        let log_z_group: Vec<f64> = (0..groups)
            .map(|a| {
                let terms: Vec<f64> = self
                    .log_conditional(a)
                    .iter()
                    .zip(scores)
                    .map(|(lq, c)| lq + theta * c)
                    .collect();
                log_sum_exp(&terms)
            })
            .collect();
        let marginal = self.sensitive_marginal();
        let weighted: Vec<f64> = marginal
            .iter()
            .zip(&log_z_group)
            .map(|(m, lz)| m.ln() + lz)
            .collect();
        let log_z = log_sum_exp(&weighted);
        Ok(Normalizers {
            z: log_z.exp(),
            z_by_group: log_z_group.iter().map(|l| l.exp()).collect(),
        })
    }

    /// Appends a round, computing its normalizers exactly.
    pub fn push_round(&mut self, theta: f64, classifier: Classifier) -> Result<&Round> {
        classifier.validate(self.schema())?;
        let scores = self.classifier_scores(&classifier)?;
        let norm = self.normalizers_from_scores(&scores, theta)?;
        self.append(theta, classifier, scores, norm.z, norm.z_by_group);
        Ok(self.rounds.last().expect("just pushed"))
    }

    /// Appends a round with normalizers frozen elsewhere (e.g. a model file).
    pub fn push_frozen_round(&mut self, round: Round) -> Result<()> {
        round.classifier.validate(self.schema())?;
        let scores = self.classifier_scores(&round.classifier)?;
        let groups = self.schema().num_groups();
        if round.z_by_group.len() != groups {
            return Err(FbdeError::SchemaMismatch(format!(
                "{} group normalizers for {groups} sensitive values",
                round.z_by_group.len()
            )));
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(round.z) || !round.z_by_group.iter().all(|&v| positive(v)) {
            return Err(FbdeError::InvalidDensity(
                "normalizers must be positive".into(),
            ));
        }
        let implied = kahan_sum(
            self.sensitive_marginal()
                .iter()
                .zip(&round.z_by_group)
                .map(|(m, z)| m * z),
        );
        if (implied - round.z).abs() > NORMALIZER_CONSISTENCY * round.z.max(1.0) {
            return Err(FbdeError::InvalidDensity(format!(
                "normalizer {} disagrees with group mixture {implied}",
                round.z
            )));
        }
        self.append(
            round.theta,
            round.classifier,
            scores,
            round.z,
            round.z_by_group,
        );
        Ok(())
    }

    fn append(
        &mut self,
        theta: f64,
        classifier: Classifier,
        scores: Vec<f64>,
        z: f64,
        z_by_group: Vec<f64>,
    ) {
        for (t, c) in self.log_tilt.iter_mut().zip(&scores) {
            *t += theta * c;
        }
        self.log_z += z.ln();
        for (lz, zg) in self.log_z_group.iter_mut().zip(&z_by_group) {
            *lz += zg.ln();
        }
        self.scores.push(scores);
        self.rounds.push(Round {
            theta,
            classifier,
            z,
            z_by_group,
        });
    }

    /// The stack truncated to its first `t` rounds.
    pub fn prefix(&self, t: usize) -> BoostedDensity {
        let mut out = BoostedDensity::new(self.q0.clone());
        for (round, scores) in self.rounds.iter().zip(&self.scores).take(t) {
            out.append(
                round.theta,
                round.classifier.clone(),
                scores.clone(),
                round.z,
                round.z_by_group.clone(),
            );
        }
        out
    }

    /// `Π_k exp(ϑ_k c_k(x)) / Z_k`: the density ratio `Q_t / Q₀` at feature cell `x`.
    pub fn importance_weight(&self, x: usize) -> f64 {
        (self.log_tilt[x] - self.log_z).exp()
    }

    /// `Π_k exp(ϑ_k c_k(x)) / Z_k(a)`: the ratio `q_t(x|a) / q₀(x|a)`.
    pub fn conditional_importance_weight(&self, x: usize, a: usize) -> f64 {
        (self.log_tilt[x] - self.log_z_group[a]).exp()
    }

    /// `E_{Q_t}[g(x, a)]`. Monte Carlo mode samples `Q₀` and reweights.
    pub fn expectation<G: Fn(usize, usize) -> f64>(
        &self,
        g: G,
        mode: ExpectationMode,
    ) -> Result<Estimate> {
        let schema = self.schema();
        match mode {
            ExpectationMode::Exact => {
                let mut terms = Vec::with_capacity(schema.num_cells());
                for x in 0..schema.num_x_cells() {
                    for a in 0..schema.num_groups() {
                        let q = self.density_at(x, a);
                        if q > 0.0 {
                            terms.push(q * g(x, a));
                        }
                    }
                }
                Ok(exact(kahan_sum(terms)))
            }
            ExpectationMode::MonteCarlo { samples, seed } => {
                check_budget(samples)?;
                let cdfs: Vec<Vec<f64>> =
                    self.q0.conditionals.iter().map(|c| cumulative(c)).collect();
                let groups = schema.num_groups();
                let mut rng = rng_from_seed(seed);
                let values = (0..samples).map(|_| {
                    let a = rng.gen_range(0..groups);
                    let x = inverse_cdf(&cdfs[a], rng.gen::<f64>());
                    self.importance_weight(x) * g(x, a)
                });
                Ok(mean_and_error(values, samples))
            }
        }
    }

    /// `E_{q_t(·|a)}[g(x)]`. Monte Carlo mode samples `q₀(·|a)` and reweights by
    /// `Π_k exp(ϑ_k c_k(x)) / Z_k(a)`.
    pub fn conditional_expectation<G: Fn(usize) -> f64>(
        &self,
        g: G,
        a: usize,
        mode: ExpectationMode,
    ) -> Result<Estimate> {
        if a >= self.schema().num_groups() {
            return Err(FbdeError::InvalidArgument(format!(
                "sensitive value {a} out of range"
            )));
        }
        match mode {
            ExpectationMode::Exact => {
                let cond = self.conditional(a);
                Ok(exact(kahan_sum(
                    cond.iter()
                        .enumerate()
                        .filter(|(_, &q)| q > 0.0)
                        .map(|(x, &q)| q * g(x)),
                )))
            }
            ExpectationMode::MonteCarlo { samples, seed } => {
                check_budget(samples)?;
                let cdf = cumulative(&self.q0.conditionals[a]);
                let mut rng = rng_from_seed(seed);
                let values = (0..samples).map(|_| {
                    let x = inverse_cdf(&cdf, rng.gen::<f64>());
                    self.conditional_importance_weight(x, a) * g(x)
                });
                Ok(mean_and_error(values, samples))
            }
        }
    }

    /// `n` exact draws from the joint table by inverse CDF.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        if n == 0 {
            return Err(FbdeError::InvalidArgument(
                "sample size must be at least 1".into(),
            ));
        }
        let joint = self.joint();
        let cdf = cumulative(joint.mass());
        let mut rng = rng_from_seed(seed);
        let cells: Vec<usize> = (0..n)
            .map(|_| inverse_cdf(&cdf, rng.gen::<f64>()))
            .collect();
        Dataset::from_cells(self.schema().clone(), &cells)
    }

    /// Sampling-importance-resampling: draw `pool` points from `Q₀`, then resample
    /// `n` of them with weights `Π_k exp(ϑ_k c_k(x)) / Z_k`.
    pub fn sample_sir(&self, n: usize, pool: usize, seed: u64) -> Result<Dataset> {
        if n == 0 || pool == 0 {
            return Err(FbdeError::InvalidArgument(
                "sample and pool sizes must be positive".into(),
            ));
        }
        let schema = self.schema();
        let cdfs: Vec<Vec<f64>> = self.q0.conditionals.iter().map(|c| cumulative(c)).collect();
        let mut rng = rng_from_seed(seed);
        let groups = schema.num_groups();
        let draws: Vec<(usize, usize)> = (0..pool)
            .map(|_| {
                let a = rng.gen_range(0..groups);
                (inverse_cdf(&cdfs[a], rng.gen::<f64>()), a)
            })
            .collect();
        let weights: Vec<f64> = draws
            .iter()
            .map(|&(x, _)| self.importance_weight(x))
            .collect();
        let cdf = cumulative(&weights);
        let cells: Vec<usize> = (0..n)
            .map(|_| {
                let (x, a) = draws[inverse_cdf(&cdf, rng.gen::<f64>())];
                schema.joint_index(x, a)
            })
            .collect();
        Dataset::from_cells(schema.clone(), &cells)
    }
}

fn exact(value: f64) -> Estimate {
    Estimate {
        value,
        std_error: 0.0,
    }
}

fn check_budget(samples: usize) -> Result<()> {
    if samples < 2 {
        return Err(FbdeError::InvalidArgument(format!(
            "Monte Carlo needs at least 2 samples, got {samples}"
        )));
    }
    Ok(())
}

/// Mean and standard error by Welford's recurrence.
fn mean_and_error(values: impl Iterator<Item = f64>, n: usize) -> Estimate {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, v) in values.enumerate() {
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
    }
    let var = m2 / (n - 1) as f64;
    Estimate {
        value: mean,
        std_error: (var / n as f64).sqrt(),
    }
}
