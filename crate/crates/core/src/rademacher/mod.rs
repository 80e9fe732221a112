//! Monte Carlo and exact-enumeration checks of the comparison inequalities,
//! the concentration lemmas and the stochastic Lipschitz tail bounds.
//!
//! Every check compares a left side against a right side or a nominal level
//! and records enough to recompute the verdict. Checks over finite grids test
//! a necessary condition only: the grid supremum never exceeds the supremum
//! over the whole domain.

mod comparison;
mod concentration;
mod functions;
mod residual;
mod tail;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::stats::{binomial_se, Estimate};

pub use comparison::{
    verify_l1_comparison, verify_massart, verify_multivariate_contraction,
    verify_univariate_contraction, IndexSet,
};
pub use concentration::{
    verify_functional_concentration, ConcentrationLevel, ConcentrationReport, ConcentrationSpec,
    Noise,
};
pub use functions::{ConvexMap, TestFamily, TestFunction, UnivariateMap};
pub use residual::ResidualProcess;
pub use tail::{verify_global_lip, verify_local_lip, verify_local_tail, TailReport, TailSetup};

/// Sign patterns up to this many are enumerated exactly under [`SignMode::Auto`].
pub const EXACT_SIGN_LIMIT: u32 = 20;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignMode {
    /// Exact when the pattern count allows it, sampled otherwise.
    #[default]
    Auto,
    Exact,
    Sampled,
}

/// Outcome of one inequality check. `pass` is `lhs.mean ≤ rhs.mean + slack`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MCVerdict {
    pub lhs: Estimate,
    pub rhs: Estimate,
    pub slack: f64,
    /// Sampled replicates per side, or `0` when both sides were enumerated.
    pub replicates: usize,
    pub exact: bool,
    pub pass: bool,
    pub seed: u64,
}

impl MCVerdict {
    pub(crate) fn comparison(
        lhs: Estimate,
        rhs: Estimate,
        exact: bool,
        replicates: usize,
        seed: u64,
    ) -> Self {
        let slack = if exact {
            1e-12 * rhs.mean.abs().max(1.0)
        } else {
            3.0 * (lhs.se * lhs.se + rhs.se * rhs.se).sqrt()
        };
        Self::finish(
            lhs,
            rhs,
            slack,
            exact,
            if exact { 0 } else { replicates },
            seed,
        )
    }

    /// Exceedance frequency against a nominal probability, plus `extra` slack.
    pub(crate) fn exceedance(
        hits: usize,
        trials: usize,
        nominal: f64,
        extra: f64,
        seed: u64,
    ) -> Self {
        let se = binomial_se(nominal.min(1.0), trials);
        let freq = if trials == 0 {
            0.0
        } else {
            hits as f64 / trials as f64
        };
        Self::finish(
            Estimate { mean: freq, se },
            Estimate::exact(nominal),
            3.0 * se + extra,
            false,
            trials,
            seed,
        )
    }

    fn finish(
        lhs: Estimate,
        rhs: Estimate,
        slack: f64,
        exact: bool,
        replicates: usize,
        seed: u64,
    ) -> Self {
        let pass = lhs.mean <= rhs.mean + slack;
        MCVerdict {
            lhs,
            rhs,
            slack,
            replicates,
            exact,
            pass,
            seed,
        }
    }

    /// Recomputes the verdict from the stored numbers.
    pub fn recompute_pass(&self) -> bool {
        self.lhs.mean <= self.rhs.mean + self.slack
    }
}

/// Fills `out` with independent Rademacher signs.
pub(crate) fn draw_signs<R: Rng>(r: &mut R, out: &mut [f64]) {
    for chunk in out.chunks_mut(64) {
        let bits: u64 = r.random();
        for (b, e) in chunk.iter_mut().enumerate() {
            *e = if bits >> b & 1 == 1 { 1.0 } else { -1.0 };
        }
    }
}

/// Signs of pattern `index`: bit `i` set means `+1`.
pub(crate) fn pattern_signs(index: u64, out: &mut [f64]) {
    for (b, e) in out.iter_mut().enumerate() {
        *e = if index >> b & 1 == 1 { 1.0 } else { -1.0 };
    }
}

/// Mean of `f` over all `2^bits` sign patterns, in a fixed summation order.
pub(crate) fn enumerate_mean<F>(bits: u32, f: F) -> f64
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let count = 1u64 << bits;
    let values: Vec<f64> = (0..count)
        .into_par_iter()
        .map_init(
            || vec![0.0; bits as usize],
            |signs, idx| {
                pattern_signs(idx, signs);
                f(signs)
            },
        )
        .collect();
    values.iter().sum::<f64>() / count as f64
}

/// Per-replicate values of `f` under sampled signs from `(seed, purpose, r)`.
pub(crate) fn sample_values<F>(
    len: usize,
    replicates: usize,
    seed: u64,
    purpose: u64,
    f: F,
) -> Estimate
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let values: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map_init(
            || vec![0.0; len],
            |signs, r| {
                let mut g = crate::rng::stream(seed, purpose, r as u64);
                draw_signs(&mut g, signs);
                f(signs)
            },
        )
        .collect();
    Estimate::from_samples(&values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_recomputes() {
        let v = MCVerdict::comparison(
            Estimate { mean: 1.0, se: 0.1 },
            Estimate {
                mean: 0.8,
                se: 0.05,
            },
            false,
            100,
            3,
        );
        assert!(v.pass);
        assert_eq!(v.pass, v.recompute_pass());
        let e = MCVerdict::exceedance(30, 100, 0.1, 0.0, 1);
        assert!(!e.pass);
        assert_eq!(e.pass, e.recompute_pass());
    }

    #[test]
    fn enumeration_covers_every_pattern() {
        let m = enumerate_mean(3, |s| s.iter().filter(|&&x| x > 0.0).count() as f64);
        assert_eq!(m, 1.5);
    }

    #[test]
    fn sampled_signs_are_balanced() {
        let e = sample_values(70, 4000, 5, 99, |s| s.iter().sum::<f64>());
        assert!(e.mean.abs() <= 4.0 * e.se);
    }
}
