use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{HiddenDataset, HiddenModel};
use crate::error::{Error, Result};
use crate::rademacher::MCVerdict;
use crate::rng;
use crate::solver::{solve_with_restarts, SolveResult, SolverOptions};
use crate::stats::{log_sum_exp, quantile, Estimate};
use crate::theory::{
    hidden_lip_threshold, prop_hidden_error, prop_hidden_lambda, BoundReport, HiddenConstants,
};

/// Pilot standard errors above this share of the threshold make the check inconclusive.
pub const PILOT_SE_LIMIT: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Pass,
    Fail,
    Inconclusive,
}

/// Grid check of the hidden-model Lipschitz tail bound.
///
/// The expectation `E[ℓ(u) − ℓ(θ)]` is replaced by a pilot estimate; the
/// replicates whose statistic lies within `inflation` of the threshold could
/// flip under exact centering, and their share is added to the allowed
/// exceedance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HiddenLipReport {
    pub threshold: BoundReport,
    pub constants: HiddenConstants,
    /// Monte Carlo `E S_X` from the pilot datasets.
    pub e_sx: Estimate,
    /// Deterministic bound `M_X √N` with `M_X = 1`.
    pub e_sx_bound: f64,
    /// `max_u se(Ê[ℓ(u) − ℓ(θ)]) / ‖u − θ‖₁`.
    pub pilot_se: f64,
    /// `3 · pilot_se`.
    pub inflation: f64,
    pub verdict: MCVerdict,
    pub status: VerdictStatus,
    pub suprema: Vec<f64>,
    pub level: f64,
    /// Empirical `level`-quantile of the suprema, an empirical `M_q`.
    pub empirical_quantile: f64,
    pub grid_size: usize,
}

/// Per grid point: `ln π₀ + x(z)ᵀu` and `ln Z(u) − ln Z(θ)`.
struct GridTerms {
    weights: Vec<Vec<f64>>,
    log_z: Vec<f64>,
    base: Vec<f64>,
}

impl GridTerms {
    fn new(model: &HiddenModel, grid: &[Vec<f64>]) -> Self {
        let base = model.log_weights(model.theta());
        let z0 = log_sum_exp(&base);
        let weights: Vec<Vec<f64>> = grid.iter().map(|u| model.log_weights(u)).collect();
        let log_z = weights.iter().map(|w| log_sum_exp(w) - z0).collect();
        GridTerms {
            weights,
            log_z,
            base,
        }
    }

    /// `ℓ(u) − ℓ(θ)` at every grid point.
    fn gaps(&self, emissions: &[Vec<f64>]) -> Vec<f64> {
        let n = emissions.len() as f64;
        let mut buf = vec![0.0; self.base.len()];
        let mut sum_at = |w: &[f64], e: &[f64]| {
            for ((b, a), x) in buf.iter_mut().zip(w).zip(e) {
                *b = a + x;
            }
            log_sum_exp(&buf)
        };
        let at_theta: f64 = emissions.iter().map(|e| sum_at(&self.base, e)).sum();
        self.weights
            .iter()
            .zip(&self.log_z)
            .map(|(w, lz)| {
                let at_u: f64 = emissions.iter().map(|e| sum_at(w, e)).sum();
                n * lz - at_u + at_theta
            })
            .collect()
    }
}

/// Verifies the level `1 − q₀ − q₁` bound on
/// `sup_u |dev(ℓ(u) − ℓ(θ))| / ‖u − θ‖₁` over `grid` (θ excluded).
///
/// `pilot` datasets, from `(seed, pilot, r)`, estimate the centering and
/// `E S_X`; `outer` datasets, from `(seed, replicate, r)`, give the suprema.
#[allow(clippy::too_many_arguments)]
pub fn verify_hidden_lip(
    model: &HiddenModel,
    grid: &[Vec<f64>],
    n_obs: usize,
    q0: f64,
    q1: f64,
    pilot: usize,
    outer: usize,
    seed: u64,
) -> Result<HiddenLipReport> {
    if pilot < 2 || outer == 0 || n_obs == 0 {
        return Err(Error::invalid("need pilot >= 2, outer >= 1 and N >= 1"));
    }
    let theta = model.theta();
    for u in grid {
        model.check_point(u)?;
        if !model.domain().contains(u) {
            return Err(Error::invalid("grid point outside the domain"));
        }
    }
    let grid: Vec<Vec<f64>> = grid
        .iter()
        .filter(|u| u.as_slice() != theta)
        .cloned()
        .collect();
    let dist: Vec<f64> = grid
        .iter()
        .map(|u| u.iter().zip(theta).map(|(a, b)| (a - b).abs()).sum())
        .collect();
    let terms = GridTerms::new(model, &grid);
    let draw = |purpose: u64, r: usize| -> Result<(HiddenDataset, Vec<f64>)> {
        let mut g = rng::stream(seed, purpose, r as u64);
        let data = model.sample_with(n_obs, &mut g)?;
        let gaps = terms.gaps(&model.emission_table(&data)?);
        Ok((data, gaps))
    };

    let pilot_runs: Vec<(f64, Vec<f64>)> = (0..pilot)
        .into_par_iter()
        .map(|r| {
            let (data, gaps) = draw(rng::purpose::PILOT, r)?;
            Ok((model.s_x(&data)?, gaps))
        })
        .collect::<Result<_>>()?;
    let e_sx = Estimate::from_samples(&pilot_runs.iter().map(|(s, _)| *s).collect::<Vec<_>>());
    let centers: Vec<Estimate> = (0..grid.len())
        .map(|g| Estimate::from_samples(&pilot_runs.iter().map(|(_, v)| v[g]).collect::<Vec<_>>()))
        .collect();
    let pilot_se = centers
        .iter()
        .zip(&dist)
        .map(|(c, d)| c.se / d)
        .fold(0.0, f64::max);
    let inflation = 3.0 * pilot_se;

    let constants = model.constants()?;
    let threshold = hidden_lip_threshold(&constants, e_sx.mean, n_obs, model.dim(), q0, q1)?;

    let suprema: Vec<f64> = (0..outer)
        .into_par_iter()
        .map(|r| {
            let (_, gaps) = draw(rng::purpose::REPLICATE, r)?;
            Ok(gaps
                .iter()
                .zip(&centers)
                .zip(&dist)
                .map(|((v, c), d)| (v - c.mean).abs() / d)
                .fold(0.0, f64::max))
        })
        .collect::<Result<_>>()?;
    let t = threshold.value;
    let hits = suprema.iter().filter(|s| **s > t).count();
    let near = suprema
        .iter()
        .filter(|s| (**s - t).abs() <= inflation)
        .count();
    let miss = q0 + q1;
    let verdict = MCVerdict::exceedance(hits, outer, miss, near as f64 / outer as f64, seed);
    let status = if pilot_se > PILOT_SE_LIMIT * t {
        VerdictStatus::Inconclusive
    } else if verdict.pass {
        VerdictStatus::Pass
    } else {
        VerdictStatus::Fail
    };
    Ok(HiddenLipReport {
        threshold,
        constants,
        e_sx,
        e_sx_bound: (n_obs as f64).sqrt(),
        pilot_se,
        inflation,
        verdict,
        status,
        empirical_quantile: quantile(&suprema, 1.0 - miss),
        suprema,
        level: 1.0 - miss,
        grid_size: grid.len(),
    })
}

/// Hidden-model Lasso fit with its tuning and error bound.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HiddenFit {
    pub result: SolveResult,
    pub lambda: BoundReport,
    pub error_bound: BoundReport,
    /// `|supp θ|`.
    pub support_size: usize,
}

/// Minimizes `ℓ(u) + λ‖u‖₁` over the model's box with `λ = K M_q`.
#[allow(clippy::too_many_arguments)]
pub fn fit_hidden_lasso(
    model: &HiddenModel,
    data: &HiddenDataset,
    k_cone: f64,
    m_q: f64,
    c_ell: f64,
    opts: &SolverOptions,
    restarts: usize,
    seed: u64,
) -> Result<HiddenFit> {
    let lambda = prop_hidden_lambda(k_cone, m_q)?;
    let support_size = model.theta().iter().filter(|v| **v != 0.0).count();
    let error_bound = prop_hidden_error(k_cone, m_q, support_size, c_ell)?;
    let f = model.objective(data)?;
    let result = solve_with_restarts(&f, lambda.value, model.domain(), opts, restarts, seed)?;
    Ok(HiddenFit {
        result,
        lambda,
        error_bound,
        support_size,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HiddenReplicateRow {
    pub replicate: usize,
    pub error: f64,
    pub within: bool,
    pub objective: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HiddenExperimentReport {
    pub lambda: BoundReport,
    pub error_bound: BoundReport,
    pub rows: Vec<HiddenReplicateRow>,
    pub fraction_within: f64,
}

/// Fits `replicates` fresh datasets of `n_obs` observations, drawn from
/// `(seed, hidden sample, r)`, and records `‖θ̂ − θ‖₂` against the bound.
#[allow(clippy::too_many_arguments)]
pub fn run_hidden_experiment(
    model: &HiddenModel,
    n_obs: usize,
    k_cone: f64,
    m_q: f64,
    c_ell: f64,
    replicates: usize,
    opts: &SolverOptions,
    restarts: usize,
    seed: u64,
) -> Result<HiddenExperimentReport> {
    if replicates == 0 {
        return Err(Error::invalid("replicates must be >= 1"));
    }
    let fits: Vec<HiddenFit> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut g = rng::stream(seed, rng::purpose::HIDDEN_SAMPLE, r as u64);
            let data = model.sample_with(n_obs, &mut g)?;
            fit_hidden_lasso(
                model,
                &data,
                k_cone,
                m_q,
                c_ell,
                opts,
                restarts,
                rng::derive_seed(seed, rng::purpose::RESTART, r as u64),
            )
        })
        .collect::<Result<_>>()?;
    let rows: Vec<HiddenReplicateRow> = fits
        .iter()
        .enumerate()
        .map(|(r, f)| {
            let error = f
                .result
                .theta_hat
                .iter()
                .zip(model.theta())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            HiddenReplicateRow {
                replicate: r,
                error,
                within: error <= f.error_bound.value,
                objective: f.result.objective,
                converged: f.result.converged,
            }
        })
        .collect();
    let fraction_within = rows.iter().filter(|r| r.within).count() as f64 / replicates as f64;
    Ok(HiddenExperimentReport {
        lambda: fits[0].lambda.clone(),
        error_bound: fits[0].error_bound.clone(),
        rows,
        fraction_within,
    })
}
