//! Random instances shared by the integration suites.
#![allow(dead_code)]

use std::f64::consts::LN_2;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use fbde::engine::{FitConfig, LeveragingScheme, RoundContext, WeakLearner};
use fbde::numeric::rng_from_seed;
use fbde::tabular::{AttributeSchema, Dataset, TabularDensity};
use fbde::weak_learner::{Classifier, LookupClassifier};
use fbde::{BoostedDensity, InitialDensity, Result};

pub fn rng(seed: u64) -> ChaCha8Rng {
    rng_from_seed(seed)
}

/// One or two feature attributes and a sensitive attribute, all small.
pub fn random_schema(rng: &mut ChaCha8Rng) -> AttributeSchema {
    let nx = rng.gen_range(1..=2);
    let mut cards: Vec<(String, usize)> = (0..nx)
        .map(|i| (format!("x{i}"), rng.gen_range(2..=5)))
        .collect();
    let sens = rng.gen_range(0..=nx);
    cards.insert(sens, ("a".to_string(), rng.gen_range(2..=4)));
    let refs: Vec<(&str, usize)> = cards.iter().map(|(n, c)| (n.as_str(), *c)).collect();
    AttributeSchema::categorical(&refs, sens, None).unwrap()
}

/// Positive weights, occasionally with a few zero cells.
pub fn random_weights(rng: &mut ChaCha8Rng, n: usize, allow_zeros: bool) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..n)
            .map(|_| {
                if allow_zeros && rng.gen_bool(0.15) {
                    0.0
                } else {
                    // heavy spread so conditionals differ a lot across groups
                    rng.gen::<f64>().powi(3) + 1e-3
                }
            })
            .collect();
        if w.iter().any(|&v| v > 0.0) {
            return w;
        }
    }
}

pub fn random_initial(
    rng: &mut ChaCha8Rng,
    schema: &AttributeSchema,
    allow_zeros: bool,
) -> InitialDensity {
    let weights = (0..schema.num_groups())
        .map(|_| random_weights(rng, schema.num_x_cells(), allow_zeros))
        .collect();
    InitialDensity::from_weights(schema.clone(), weights).unwrap()
}

pub fn random_density(rng: &mut ChaCha8Rng, schema: &AttributeSchema) -> TabularDensity {
    TabularDensity::from_weights(
        schema.clone(),
        random_weights(rng, schema.num_cells(), false),
    )
    .unwrap()
}

pub fn random_dataset(rng: &mut ChaCha8Rng, schema: &AttributeSchema, n: usize) -> Dataset {
    let cells: Vec<usize> = (0..n)
        .map(|_| rng.gen_range(0..schema.num_cells()))
        .collect();
    Dataset::from_cells(schema.clone(), &cells).unwrap()
}

pub fn random_lookup(rng: &mut ChaCha8Rng, schema: &AttributeSchema, c: f64) -> Classifier {
    let values = (0..schema.num_x_cells())
        .map(|_| match rng.gen_range(0..3) {
            0 => c,
            1 => -c,
            _ => rng.gen_range(-c..=c),
        })
        .collect();
    LookupClassifier::new(c, values).unwrap().into()
}

/// Classifiers chosen to push the sensitive marginal apart as hard as a
/// bounded statistic can.
pub struct AdversarialLearner {
    pub c_bound: f64,
    pub seed: u64,
}

impl AdversarialLearner {
    fn pick(&self, current: &BoostedDensity, t: usize) -> Vec<f64> {
        let schema = current.schema();
        let groups = schema.num_groups();
        let marg = current.sensitive_marginal();
        let (hi, lo) = extremes(&marg);
        let mut r = rng(self.seed ^ (t as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let c = self.c_bound;
        let mode = r.gen_range(0..4);
        (0..schema.num_x_cells())
            .map(|x| {
                let (qh, ql) = (current.conditional(hi)[x], current.conditional(lo)[x]);
                match mode {
                    // grow the majority group
                    0 => {
                        if qh > ql {
                            c
                        } else {
                            -c
                        }
                    }
                    // favour one random group
                    1 => {
                        let g = (self.seed as usize + t) % groups;
                        let others: f64 = (0..groups)
                            .filter(|&b| b != g)
                            .map(|b| current.conditional(b)[x])
                            .sum::<f64>()
                            / (groups - 1) as f64;
                        if current.conditional(g)[x] > others {
                            c
                        } else {
                            -c
                        }
                    }
                    // graded by how lopsided the cell is
                    2 => {
                        let d = qh - ql;
                        c * (d / (qh + ql).max(1e-300)).clamp(-1.0, 1.0)
                    }
                    _ => {
                        if r.gen_bool(0.5) {
                            c
                        } else {
                            -c
                        }
                    }
                }
            })
            .collect()
    }
}

fn extremes(marg: &[f64]) -> (usize, usize) {
    let mut hi = 0;
    let mut lo = 0;
    for (i, &m) in marg.iter().enumerate() {
        if m > marg[hi] {
            hi = i;
        }
        if m < marg[lo] {
            lo = i;
        }
    }
    if hi == lo {
        lo = (hi + 1) % marg.len();
    }
    (hi, lo)
}

impl WeakLearner for AdversarialLearner {
    fn train(&self, _p: &Dataset, _q: &Dataset, ctx: &RoundContext<'_>) -> Result<Classifier> {
        Ok(LookupClassifier::new(self.c_bound, self.pick(ctx.current, ctx.t))?.into())
    }
}

pub const TAUS: [f64; 3] = [0.5, 0.7, 0.9];
pub const C_BOUNDS: [f64; 3] = [LN_2, 1.0, 0.25];

/// A fitted stack of `rounds` adversarial rounds under `scheme`.
pub fn adversarial_fit(
    rng: &mut ChaCha8Rng,
    scheme: LeveragingScheme,
    rounds: usize,
    seed: u64,
) -> (Dataset, BoostedDensity) {
    let schema = random_schema(rng);
    let zeros = rng.gen_bool(0.2);
    let q0 = random_initial(rng, &schema, zeros);
    let p = random_dataset(rng, &schema, 60);
    let mut cfg = FitConfig::new(rounds, scheme, seed);
    cfg.kl_eval = fbde::engine::KlEval::None;
    let learner = AdversarialLearner {
        c_bound: scheme.c_bound,
        seed,
    };
    let fit = fbde::engine::fbde_fit_with(&p, q0, &cfg, &learner, None).unwrap();
    (p, fit.density)
}

/// A stack built directly from random lookups and coefficients.
pub fn random_stack(rng: &mut ChaCha8Rng, max_rounds: usize) -> BoostedDensity {
    let schema = random_schema(rng);
    let zeros = rng.gen_bool(0.2);
    let q0 = random_initial(rng, &schema, zeros);
    let c = C_BOUNDS[rng.gen_range(0..C_BOUNDS.len())];
    let mut bd = BoostedDensity::new(q0);
    for _ in 0..rng.gen_range(1..=max_rounds) {
        let theta = rng.gen_range(0.0..1.5);
        bd.push_round(theta, random_lookup(rng, &schema, c))
            .unwrap();
    }
    bd
}

/// Brute-force `Q_T` table: `q₀(x|a)/|A| · exp(Σ ϑ c(x))`, normalized by a
/// plain sum. Indexed `[a][x]`.
pub fn brute_force_table(bd: &BoostedDensity) -> Vec<Vec<f64>> {
    let schema = bd.schema();
    let groups = schema.num_groups();
    let nx = schema.num_x_cells();
    let mut tilt = vec![0.0; nx];
    for r in bd.rounds() {
        for (x, s) in r.classifier.x_scores(schema).iter().enumerate() {
            tilt[x] += r.theta * s;
        }
    }
    let mut t: Vec<Vec<f64>> = (0..groups)
        .map(|a| {
            (0..nx)
                .map(|x| bd.initial().conditional(a)[x] / groups as f64 * tilt[x].exp())
                .collect()
        })
        .collect();
    let total: f64 = t.iter().flatten().sum();
    for row in &mut t {
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    t
}

pub fn rr_of(marg: &[f64]) -> f64 {
    let max = marg.iter().cloned().fold(f64::MIN, f64::max);
    let min = marg.iter().cloned().fold(f64::MAX, f64::min);
    min / max
}
