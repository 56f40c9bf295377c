use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FbdeError, Result};
use crate::numeric::rng_from_seed;

/// Two-component Gaussian mixture: `a ~ Bernoulli(s)`, `x ~ N(μ_a, σ_a)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    /// Means for `a = 0` and `a = 1`.
    pub mu: [f64; 2],
    pub sigma: [f64; 2],
    /// Probability of `a = 1`.
    pub s: f64,
    pub n: usize,
    pub seed: u64,
}

impl Default for MixtureParams {
    fn default() -> Self {
        MixtureParams {
            mu: [-0.5, 0.7],
            sigma: [0.4, 0.2],
            s: 0.9,
            n: 5000,
            seed: 0,
        }
    }
}

impl MixtureParams {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(FbdeError::InvalidArgument(
                "mixture size must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.s) {
            return Err(FbdeError::InvalidArgument(format!(
                "mixture balance must lie in [0, 1], got {}",
                self.s
            )));
        }
        for (a, (&m, &sd)) in self.mu.iter().zip(&self.sigma).enumerate() {
            if !m.is_finite() || !(sd > 0.0 && sd.is_finite()) {
                return Err(FbdeError::InvalidArgument(format!(
                    "invalid component {a}: mean {m}, std {sd}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixturePoint {
    pub x: f64,
    pub a: u32,
}

/// Draws the mixture with a ChaCha8 stream seeded from `params.seed`.
///
/// Each point consumes three uniforms in order: `u_a` for the group
/// (`a = 1` iff `u_a < s`), then `u₁ ∈ (0, 1]` and `u₂ ∈ [0, 1)` for one
/// Box–Muller normal `√(−2 ln u₁)·cos(2π u₂)`.
pub fn generate_mixture(params: &MixtureParams) -> Result<Vec<MixturePoint>> {
    params.validate()?;
    let mut rng = rng_from_seed(params.seed);
    Ok((0..params.n)
        .map(|_| {
            let a = u32::from(rng.gen::<f64>() < params.s);
            let u1 = 1.0 - rng.gen::<f64>();
            let u2 = rng.gen::<f64>();
            let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
            let k = a as usize;
            MixturePoint {
                x: params.mu[k] + params.sigma[k] * z,
                a,
            }
        })
        .collect())
}

/// Writes `x,a` rows with shortest round-trip float formatting.
pub fn write_mixture_csv<W: Write>(points: &[MixturePoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "a"])?;
    for p in points {
        w.write_record([p.x.to_string(), p.a.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
