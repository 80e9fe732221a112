//! Grid checks of the stochastic Lipschitz tail bounds. A grid supremum never
//! exceeds the supremum over the whole domain, so every check here tests a
//! necessary condition of the bound.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::residual::ResidualProcess;
use super::MCVerdict;
use crate::error::{Error, Result};
use crate::model::{sample_responses_with, BoxDomain, DesignSet, LossFamily};
use crate::rng;
use crate::stats::quantile;
use crate::theory::{
    global_lip_constants, global_lip_threshold, local_lip_constants, local_lip_threshold,
    local_tail_threshold, BoundReport, ColumnStats, LipConstants,
};

/// Grids larger than this are rejected.
pub const MAX_GRID: usize = 512;

/// Model, truth and finite grid shared by the tail checks.
pub struct TailSetup<'a> {
    pub loss: &'a dyn LossFamily,
    pub design: &'a DesignSet,
    pub theta: &'a [f64],
    pub domain: &'a BoxDomain,
    /// Grid points with θ removed.
    pub grid: Vec<Vec<f64>>,
}

impl<'a> TailSetup<'a> {
    /// Grid of `points` box corners and interior points from `grid_seed`.
    pub fn new(
        loss: &'a dyn LossFamily,
        design: &'a DesignSet,
        theta: &'a [f64],
        domain: &'a BoxDomain,
        points: usize,
        grid_seed: u64,
    ) -> Result<Self> {
        let grid = domain.sample_grid(points, grid_seed);
        Self::with_grid(loss, design, theta, domain, grid)
    }

    pub fn with_grid(
        loss: &'a dyn LossFamily,
        design: &'a DesignSet,
        theta: &'a [f64],
        domain: &'a BoxDomain,
        grid: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if loss.k() != design.k() || theta.len() != design.p() || domain.dim() != design.p() {
            return Err(Error::dims(
                "loss, design, θ and domain dimensions disagree",
            ));
        }
        if loss.response_support().is_none() {
            return Err(Error::Unsupported(format!(
                "loss `{}` has no discrete response",
                loss.name()
            )));
        }
        if !domain.contains(theta) {
            return Err(Error::invalid("θ lies outside the domain"));
        }
        if grid.len() > MAX_GRID {
            return Err(Error::invalid(format!(
                "grid has {} points, limit {MAX_GRID}",
                grid.len()
            )));
        }
        if grid
            .iter()
            .any(|u| u.len() != design.p() || !domain.contains(u))
        {
            return Err(Error::invalid("grid point outside the domain"));
        }
        let grid: Vec<Vec<f64>> = grid.into_iter().filter(|u| u.as_slice() != theta).collect();
        Ok(TailSetup {
            loss,
            design,
            theta,
            domain,
            grid,
        })
    }

    fn stats(&self) -> ColumnStats {
        ColumnStats::from_design(self.design)
    }

    fn constants(&self, global: bool) -> Result<LipConstants> {
        let (f1, f2, m_z, r_d, k) = (
            self.loss.f1(),
            self.loss.f2(),
            self.design.m_z(),
            self.domain.l1_diameter(),
            self.design.k(),
        );
        if global {
            global_lip_constants(f1, f2, m_z, r_d, k)
        } else {
            local_lip_constants(f1, f2, m_z, r_d, k)
        }
    }

    /// Per-replicate suprema of `stat(Y)`, responses from `(seed, replicate, r)`.
    fn suprema<F>(&self, replicates: usize, seed: u64, stat: F) -> Result<Vec<f64>>
    where
        F: Fn(&[usize]) -> f64 + Sync,
    {
        (0..replicates)
            .into_par_iter()
            .map(|r| {
                let mut g = rng::stream(seed, rng::purpose::REPLICATE, r as u64);
                let y = sample_responses_with(self.loss, self.design, self.theta, &mut g)?;
                Ok(stat(&y))
            })
            .collect()
    }

    /// `δ(u, i, y) − E δ(u, i, Y)` with `δ = γ(Z_iu, y) − γ(Z_iθ, y)`, at `[i][y]`.
    fn centered_increments(&self, u: &[f64]) -> Result<Vec<Vec<f64>>> {
        let k = self.design.k();
        let classes = self.loss.response_support().unwrap_or(0);
        let mut t = vec![0.0; k];
        let mut c = vec![0.0; k];
        let mut prob = vec![0.0; classes];
        let mut out = Vec::with_capacity(self.design.n());
        for i in 0..self.design.n() {
            self.design.predictor(i, u, &mut t);
            self.design.predictor(i, self.theta, &mut c);
            self.loss.probabilities(&c, &mut prob)?;
            let delta: Vec<f64> = (0..classes)
                .map(|y| self.loss.value(&t, y) - self.loss.value(&c, y))
                .collect();
            let mean: f64 = delta.iter().zip(&prob).map(|(d, p)| d * p).sum();
            out.push(delta.into_iter().map(|d| d - mean).collect());
        }
        Ok(out)
    }
}

/// Threshold, exceedance verdict and the per-replicate grid suprema.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TailReport {
    pub threshold: BoundReport,
    pub verdict: MCVerdict,
    pub suprema: Vec<f64>,
    /// Confidence level of the threshold.
    pub level: f64,
    /// Empirical `level`-quantile of the suprema.
    pub empirical_quantile: f64,
    pub grid_size: usize,
}

fn report(
    threshold: BoundReport,
    suprema: Vec<f64>,
    miss: f64,
    grid_size: usize,
    seed: u64,
) -> TailReport {
    let hits = suprema.iter().filter(|s| **s > threshold.value).count();
    let verdict = MCVerdict::exceedance(hits, suprema.len(), miss, 0.0, seed);
    let empirical_quantile = if suprema.is_empty() {
        0.0
    } else {
        quantile(&suprema, 1.0 - miss)
    };
    TailReport {
        threshold,
        verdict,
        suprema,
        level: 1.0 - miss,
        empirical_quantile,
        grid_size,
    }
}

/// `sup_u ‖ξ(u)‖∞` over the grid against the level-`q` local tail threshold.
pub fn verify_local_tail(
    setup: &TailSetup<'_>,
    q: f64,
    replicates: usize,
    seed: u64,
) -> Result<TailReport> {
    let threshold = local_tail_threshold(&setup.stats(), &setup.constants(false)?, q)?;
    let process = ResidualProcess::new(setup.loss, setup.design, setup.theta)?;
    let (k, m, n) = (setup.design.k(), setup.design.m(), setup.design.n());
    let classes = process.classes();
    // Centered remainders at [g][i][y·k + j].
    let table: Vec<Vec<Vec<f64>>> = setup
        .grid
        .par_iter()
        .map(|u| {
            let mut t = vec![0.0; k];
            let mut d = vec![0.0; k];
            (0..n)
                .map(|i| {
                    process.offset(i, u, &mut t);
                    let mut row = vec![0.0; classes * k];
                    for y in 0..classes {
                        process.centered_phi(i, &t, y, &mut d);
                        row[y * k..(y + 1) * k].copy_from_slice(&d);
                    }
                    row
                })
                .collect()
        })
        .collect();
    let x = setup.design.x();
    let suprema = setup.suprema(replicates, seed, |y| {
        let mut best = 0.0f64;
        let mut acc = vec![0.0; k * m];
        for per_point in &table {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for (i, &yi) in y.iter().enumerate() {
                let d = &per_point[i][yi * k..(yi + 1) * k];
                for j in 0..k {
                    for c in 0..m {
                        acc[j * m + c] += d[j] * x[[i, c]];
                    }
                }
            }
            best = acc.iter().fold(best, |b, a| b.max(a.abs()));
        }
        best
    })?;
    Ok(report(threshold, suprema, q, setup.grid.len(), seed))
}

/// `sup_u |Σ_i dev(γ(Z_iu) − γ(Z_iθ))| / ‖u − θ‖₁` over the grid against the
/// level `q + q′` local Lipschitz threshold. The report's empirical quantile
/// serves as an empirical `M_q`.
pub fn verify_local_lip(
    setup: &TailSetup<'_>,
    q: f64,
    q_prime: f64,
    replicates: usize,
    seed: u64,
) -> Result<TailReport> {
    let threshold = local_lip_threshold(&setup.stats(), &setup.constants(false)?, q, q_prime)?;
    let table: Vec<(Vec<Vec<f64>>, f64)> = setup
        .grid
        .par_iter()
        .map(|u| {
            let dist: f64 = u.iter().zip(setup.theta).map(|(a, b)| (a - b).abs()).sum();
            Ok((setup.centered_increments(u)?, dist))
        })
        .collect::<Result<_>>()?;
    let suprema = setup.suprema(replicates, seed, |y| {
        table.iter().fold(0.0f64, |best, (inc, dist)| {
            let s: f64 = y.iter().enumerate().map(|(i, &yi)| inc[i][yi]).sum();
            best.max(s.abs() / dist)
        })
    })?;
    Ok(report(
        threshold,
        suprema,
        q + q_prime,
        setup.grid.len(),
        seed,
    ))
}

/// Pairwise version of [`verify_local_lip`] over distinct grid points, against
/// the global threshold.
pub fn verify_global_lip(
    setup: &TailSetup<'_>,
    q: f64,
    q_prime: f64,
    replicates: usize,
    seed: u64,
) -> Result<TailReport> {
    let threshold = global_lip_threshold(&setup.stats(), &setup.constants(true)?, q, q_prime)?;
    let tables: Vec<Vec<Vec<f64>>> = setup
        .grid
        .par_iter()
        .map(|u| setup.centered_increments(u))
        .collect::<Result<_>>()?;
    let g = setup.grid.len();
    let mut pairs = Vec::new();
    for a in 0..g {
        for b in a + 1..g {
            let dist: f64 = setup.grid[a]
                .iter()
                .zip(&setup.grid[b])
                .map(|(x, y)| (x - y).abs())
                .sum();
            if dist > 0.0 {
                pairs.push((a, b, dist));
            }
        }
    }
    let suprema = setup.suprema(replicates, seed, |y| {
        let sums: Vec<f64> = tables
            .iter()
            .map(|inc| y.iter().enumerate().map(|(i, &yi)| inc[i][yi]).sum())
            .collect();
        pairs.iter().fold(0.0f64, |best, &(a, b, dist)| {
            best.max((sums[a] - sums[b]).abs() / dist)
        })
    })?;
    Ok(report(threshold, suprema, q + q_prime, g, seed))
}
