use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::MCVerdict;
use crate::error::{Error, Result};
use crate::rng::{self, purpose};
use crate::stats::Estimate;

/// Centered bounded multiplier law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Noise {
    Rademacher,
    /// Uniform on `[−1, 1]`.
    Uniform,
    /// `B − p` with `B ~ Bernoulli(p)`.
    Bernoulli {
        p: f64,
    },
}

impl Noise {
    fn range(&self) -> (f64, f64) {
        match *self {
            Noise::Rademacher | Noise::Uniform => (-1.0, 1.0),
            Noise::Bernoulli { p } => (-p, 1.0 - p),
        }
    }

    fn variance(&self) -> f64 {
        match *self {
            Noise::Rademacher => 1.0,
            Noise::Uniform => 1.0 / 3.0,
            Noise::Bernoulli { p } => p * (1.0 - p),
        }
    }

    fn draw<R: Rng>(&self, r: &mut R) -> f64 {
        match *self {
            Noise::Rademacher => {
                if r.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Noise::Uniform => r.random_range(-1.0..=1.0),
            Noise::Bernoulli { p } => f64::from(u8::from(r.random::<f64>() < p)) - p,
        }
    }
}

/// Processes `f_i(u) = ξ_i a_i(u)` over a finite index grid, with `ξ_i`
/// independent draws of `noise`. `coefficients[u][i]` is `a_i(u)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationSpec {
    pub coefficients: Vec<Vec<f64>>,
    pub noise: Noise,
}

impl ConcentrationSpec {
    fn n(&self) -> usize {
        self.coefficients.first().map_or(0, Vec::len)
    }

    fn validate(&self) -> Result<()> {
        if self.coefficients.is_empty() || self.n() == 0 {
            return Err(Error::invalid(
                "process needs at least one index point and one summand",
            ));
        }
        if self.coefficients.iter().any(|c| c.len() != self.n()) {
            return Err(Error::dims(
                "every index point needs the same number of summands",
            ));
        }
        if let Noise::Bernoulli { p } = self.noise {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::invalid("Bernoulli noise needs p in (0, 1)"));
            }
        }
        Ok(())
    }

    /// `W = sup_u |Σ_i ξ_i a_i(u)|`.
    fn draw_sup<R: Rng>(&self, r: &mut R, xi: &mut [f64]) -> f64 {
        xi.iter_mut().for_each(|x| *x = self.noise.draw(r));
        self.coefficients
            .iter()
            .map(|a| {
                a.iter()
                    .zip(xi.iter())
                    .map(|(a, x)| a * x)
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationLevel {
    pub s: f64,
    pub nominal: f64,
    pub hoeffding_threshold: f64,
    pub hoeffding: MCVerdict,
    pub bousquet_threshold: f64,
    pub bousquet: MCVerdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub pilot_mean: Estimate,
    /// `Σ_i (b_i − a_i)²`.
    pub width_sq_sum: f64,
    /// Uniform bound `M` on `|f_i(u)|`.
    pub m: f64,
    /// `S` with `Σ_i Var f_i(u) ≤ S²`.
    pub s_var: f64,
    pub levels: Vec<ConcentrationLevel>,
    pub pass: bool,
}

/// Exceedance frequencies of the functional Hoeffding event
/// `W > EW + √(2s Σ(b_i − a_i)²)` and the Bousquet-type event
/// `W > 2EW + S√(2s) + 4Ms` against `e^{−s}`.
///
/// `EW` comes from an independent pilot batch of size `pilot`.
pub fn verify_functional_concentration(
    spec: &ConcentrationSpec,
    s_grid: &[f64],
    replicates: usize,
    pilot: usize,
    seed: u64,
) -> Result<ConcentrationReport> {
    spec.validate()?;
    if s_grid.is_empty() || s_grid.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::invalid("levels s must be positive"));
    }
    if replicates == 0 || pilot < 2 {
        return Err(Error::invalid("need replicates >= 1 and pilot >= 2"));
    }
    let n = spec.n();
    let (lo, hi) = spec.noise.range();
    let mut width_sq_sum = 0.0;
    let mut range = 0.0;
    let mut m = 0.0f64;
    for i in 0..n {
        let (mut a, mut b) = (0.0f64, 0.0f64);
        for row in &spec.coefficients {
            let c = row[i];
            a = a.min(c * lo).min(c * hi);
            b = b.max(c * lo).max(c * hi);
            m = m.max(c.abs() * lo.abs().max(hi.abs()));
        }
        width_sq_sum += (b - a) * (b - a);
        range += b - a;
    }
    let var = spec.noise.variance();
    let s_var = spec
        .coefficients
        .iter()
        .map(|row| row.iter().map(|c| c * c * var).sum::<f64>())
        .fold(0.0, f64::max)
        .sqrt();

    let batch = |tag: u64, count: usize| -> Vec<f64> {
        (0..count)
            .into_par_iter()
            .map_init(
                || vec![0.0; n],
                |xi, r| {
                    let mut g = rng::stream(seed, tag, r as u64);
                    spec.draw_sup(&mut g, xi)
                },
            )
            .collect()
    };
    let pilot_mean = Estimate::from_samples(&batch(purpose::PILOT, pilot));
    if pilot_mean.se > 0.01 * range {
        return Err(Error::invalid(format!(
            "pilot batch too small: standard error {} exceeds 1% of the range {range}",
            pilot_mean.se
        )));
    }
    let w = batch(purpose::REPLICATE, replicates);
    let ew = pilot_mean.mean;
    let levels: Vec<ConcentrationLevel> = s_grid
        .iter()
        .map(|&s| {
            let nominal = (-s).exp();
            let th = ew + (2.0 * s * width_sq_sum).sqrt();
            let tb = 2.0 * ew + s_var * (2.0 * s).sqrt() + 4.0 * m * s;
            let hits_h = w.iter().filter(|&&x| x > th).count();
            let hits_b = w.iter().filter(|&&x| x > tb).count();
            ConcentrationLevel {
                s,
                nominal,
                hoeffding_threshold: th,
                hoeffding: MCVerdict::exceedance(hits_h, replicates, nominal, 0.0, seed),
                bousquet_threshold: tb,
                bousquet: MCVerdict::exceedance(hits_b, replicates, nominal, 0.0, seed),
            }
        })
        .collect();
    let pass = levels.iter().all(|l| l.hoeffding.pass && l.bousquet.pass);
    Ok(ConcentrationReport {
        pilot_mean,
        width_sq_sum,
        m,
        s_var,
        levels,
        pass,
    })
}
