use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{HiddenDataset, HiddenModel};
use crate::error::{Error, Result};
use crate::rng;
use crate::stats::{log_sum_exp, symmetric_eigenvalues, Estimate};

/// Monte Carlo estimate of `E[ℓ(u) − ℓ(θ)]` over `replicates` fresh datasets
/// of `n_obs` observations.
pub fn expected_loglik_gap(
    model: &HiddenModel,
    u: &[f64],
    n_obs: usize,
    replicates: usize,
    seed: u64,
) -> Result<Estimate> {
    if replicates < 2 {
        return Err(Error::invalid("need at least 2 replicates"));
    }
    model.check_point(u)?;
    let values: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut g = rng::stream(seed, rng::purpose::HIDDEN_MOMENTS, r as u64);
            let data = model.sample_with(n_obs, &mut g)?;
            gap(model, u, &data)
        })
        .collect::<Result<_>>()?;
    Ok(Estimate::from_samples(&values))
}

/// `ℓ(u) − ℓ(θ)` on one dataset.
pub(crate) fn gap(model: &HiddenModel, u: &[f64], data: &HiddenDataset) -> Result<f64> {
    let f = model.objective(data)?;
    use crate::solver::Objective;
    Ok(f.value(u) - f.value(model.theta()))
}

/// Local curvature of `E ℓ` at θ and the resulting `C_ℓ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CEllEstimate {
    /// Sample covariance of `E[x(ω) | Y; θ]` over single-observation draws.
    pub h_hat: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub lambda_min: f64,
    /// Largest standard error of an entry of `h_hat`.
    pub entry_se: f64,
    /// `λ_min > 3 p · entry_se`.
    pub identifiable: bool,
    /// `N λ_min / 2`.
    pub c_ell_local: f64,
    /// Smallest `E[ℓ(u) − ℓ(θ)] / ‖u − θ‖₂²` over the check grid.
    pub grid_ratio_min: Option<f64>,
    /// `min(c_ell_local, grid_ratio_min)`.
    pub c_ell: f64,
    pub grid_size: usize,
    pub replicates: usize,
    pub n_obs: usize,
}

/// Estimates `H = Var(E[x(ω) | Y; θ])`, the Hessian of `E ℓ / N` at θ, from
/// `replicates` draws of a single observation; conditional expectations are
/// exact. `C_ℓ = N λ_min(H) / 2` is then shrunk to the smallest ratio
/// `E[ℓ(u) − ℓ(θ)] / ‖u − θ‖₂²` seen on `grid`, estimated from the same draws.
pub fn estimate_c_ell(
    model: &HiddenModel,
    n_obs: usize,
    replicates: usize,
    grid: &[Vec<f64>],
    seed: u64,
) -> Result<CEllEstimate> {
    if replicates < 2 || n_obs == 0 {
        return Err(Error::invalid("need replicates >= 2 and N >= 1"));
    }
    for u in grid {
        model.check_point(u)?;
    }
    let p = model.dim();
    let theta = model.theta();
    let base = model.log_weights(theta);
    let grid: Vec<&Vec<f64>> = grid.iter().filter(|u| u.as_slice() != theta).collect();
    let shifted: Vec<(Vec<f64>, f64)> = grid
        .iter()
        .map(|u| {
            let a = model.log_weights(u);
            let z = log_sum_exp(&a) - log_sum_exp(&base);
            (a, z)
        })
        .collect();
    // Per draw: posterior mean at θ and the per-observation gaps on the grid.
    let draws: Vec<(Vec<f64>, Vec<f64>)> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut g = rng::stream(seed, rng::purpose::HIDDEN_MOMENTS, r as u64);
            let data = model.sample_with(1, &mut g)?;
            let e = &model.emission_table(&data)?[0];
            let mut mean = vec![0.0; p];
            model.posterior_mean(&base, e, &mut mean);
            let at_theta = log_sum_exp(&base.iter().zip(e).map(|(a, b)| a + b).collect::<Vec<_>>());
            let gaps = shifted
                .iter()
                .map(|(a, z)| {
                    z - (log_sum_exp(&a.iter().zip(e).map(|(x, y)| x + y).collect::<Vec<_>>())
                        - at_theta)
                })
                .collect();
            Ok((mean, gaps))
        })
        .collect::<Result<_>>()?;

    let rf = replicates as f64;
    let mut mu = vec![0.0; p];
    for (m, _) in &draws {
        for (a, b) in mu.iter_mut().zip(m) {
            *a += b / rf;
        }
    }
    let mut h = vec![vec![0.0; p]; p];
    let mut entry_se = 0.0f64;
    for a in 0..p {
        for b in a..p {
            let prods: Vec<f64> = draws
                .iter()
                .map(|(m, _)| (m[a] - mu[a]) * (m[b] - mu[b]))
                .collect();
            let est = Estimate::from_samples(&prods);
            let cov = prods.iter().sum::<f64>() / (rf - 1.0);
            h[a][b] = cov;
            h[b][a] = cov;
            entry_se = entry_se.max(est.se);
        }
    }
    let eigenvalues = symmetric_eigenvalues(&DMatrix::from_fn(p, p, |a, b| h[a][b]));
    let lambda_min = eigenvalues[0];
    let c_ell_local = n_obs as f64 * lambda_min / 2.0;
    let grid_ratio_min = if grid.is_empty() {
        None
    } else {
        let ratios = grid.iter().enumerate().map(|(g, u)| {
            let mean = draws.iter().map(|(_, gaps)| gaps[g]).sum::<f64>() / rf;
            let dist2: f64 = u.iter().zip(theta).map(|(a, b)| (a - b) * (a - b)).sum();
            n_obs as f64 * mean / dist2
        });
        Some(ratios.fold(f64::INFINITY, f64::min))
    };
    let c_ell = grid_ratio_min.map_or(c_ell_local, |r| r.min(c_ell_local));
    Ok(CEllEstimate {
        h_hat: h,
        eigenvalues,
        lambda_min,
        entry_se,
        identifiable: lambda_min > 3.0 * p as f64 * entry_se,
        c_ell_local,
        grid_ratio_min,
        c_ell,
        grid_size: grid.len(),
        replicates,
        n_obs,
    })
}

#[cfg(test)]
mod tests {
    use super::super::tests::spec;
    use super::super::{Baseline, HiddenModel};
    use super::*;

    /// Gauss–Hermite nodes and weights for `∫ e^{−x²} f(x) dx` (Golub–Welsch).
    fn gauss_hermite(order: usize) -> (Vec<f64>, Vec<f64>) {
        let jacobi = DMatrix::from_fn(order, order, |a, b| {
            if a + 1 == b || b + 1 == a {
                (a.max(b) as f64 / 2.0).sqrt()
            } else {
                0.0
            }
        });
        let eig = nalgebra::SymmetricEigen::new(jacobi);
        let nodes = eig.eigenvalues.iter().copied().collect();
        let weights = (0..order)
            .map(|c| std::f64::consts::PI.sqrt() * eig.eigenvectors[(0, c)].powi(2))
            .collect();
        (nodes, weights)
    }

    #[test]
    fn quadrature_rule_integrates_moments() {
        let (x, w) = gauss_hermite(40);
        let m0: f64 = w.iter().sum();
        let m2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        assert!((m0 - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        assert!((m2 - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn h_hat_matches_quadrature_on_one_position() {
        let mut s = spec(1, 2, 0.6, vec![0.4, -0.3]);
        s.pi0 = Baseline::Table(vec![0.2, 0.5, 0.3]);
        let m = HiddenModel::new(s).unwrap();
        let base = m.log_weights(m.theta());
        let law = m.tilted_law(m.theta()).unwrap();
        let (nodes, weights) = gauss_hermite(80);
        // E[g(Y)] = Σ_z π(z) Σ_k w_k g(z + σ√2 x_k) / √π.
        let expect = |f: &dyn Fn(&[f64]) -> f64| -> f64 {
            let mut total = 0.0;
            for (z, pz) in law.iter().enumerate() {
                for (x, w) in nodes.iter().zip(&weights) {
                    let y = (z + 1) as f64 + 0.6 * 2f64.sqrt() * x;
                    let data = HiddenDataset {
                        omega: vec![vec![z + 1]],
                        y: vec![vec![y]],
                    };
                    let e = &m.emission_table(&data).unwrap()[0];
                    let mut mean = vec![0.0; 2];
                    m.posterior_mean(&base, e, &mut mean);
                    total += pz * w / std::f64::consts::PI.sqrt() * f(&mean);
                }
            }
            total
        };
        let mu = [expect(&|v| v[0]), expect(&|v| v[1])];
        let est = estimate_c_ell(&m, 10, 40_000, &[], 1).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                let exact = expect(&|v| (v[a] - mu[a]) * (v[b] - mu[b]));
                assert!(
                    (est.h_hat[a][b] - exact).abs() <= 3.0 * est.entry_se,
                    "{a}{b}: {} vs {exact}",
                    est.h_hat[a][b]
                );
            }
        }
        assert!(est.identifiable);
    }

    #[test]
    fn curvature_vanishes_as_emissions_flatten() {
        let sharp = HiddenModel::new(spec(1, 1, 0.1, vec![0.0])).unwrap();
        let e = estimate_c_ell(&sharp, 20, 4000, &[], 2).unwrap();
        assert!(e.lambda_min > 0.2 && e.identifiable);
        let flat = HiddenModel::new(spec(1, 1, 1e3, vec![0.0])).unwrap();
        let f = estimate_c_ell(&flat, 20, 4000, &[], 2).unwrap();
        assert!(f.lambda_min < 1e-5);
    }

    #[test]
    fn h_hat_psd_and_grid_shrinks_c_ell() {
        let m = HiddenModel::new(spec(3, 1, 0.5, vec![0.8, 0.0, 0.0])).unwrap();
        let grid = m.domain().sample_grid(64, 3);
        let e = estimate_c_ell(&m, 40, 20_000, &grid, 4).unwrap();
        assert!(e.eigenvalues.iter().all(|v| *v >= -3.0 * e.entry_se));
        assert!(e.identifiable);
        assert!(e.c_ell <= e.c_ell_local);
        assert_eq!(e.c_ell, e.grid_ratio_min.unwrap().min(e.c_ell_local));
        assert!(e.c_ell > 0.0);
    }

    #[test]
    fn expected_gap_zero_at_truth_and_nonnegative_elsewhere() {
        let m = HiddenModel::new(spec(3, 1, 0.5, vec![0.8, 0.0, 0.0])).unwrap();
        let at = expected_loglik_gap(&m, m.theta(), 40, 50, 1).unwrap();
        assert_eq!((at.mean, at.se), (0.0, 0.0));
        for u in m.domain().sample_grid(16, 2) {
            let g = expected_loglik_gap(&m, &u, 40, 200, 3).unwrap();
            assert!(g.mean >= -3.0 * g.se, "{u:?}: {g:?}");
        }
    }

    #[test]
    fn gap_is_symmetric_under_letter_relabeling() {
        // With a symmetric baseline, swapping the two letters at one position
        // flips the sign of its tilt and reflects the emission means about 1.5.
        let m = HiddenModel::new(spec(1, 1, 0.5, vec![0.6])).unwrap();
        let data = m.sample(30, 8).unwrap();
        let mirrored = HiddenDataset {
            omega: data.omega.iter().map(|z| vec![3 - z[0]]).collect(),
            y: data.y.iter().map(|y| vec![3.0 - y[0]]).collect(),
        };
        let flipped = HiddenModel::new(spec(1, 1, 0.5, vec![-0.6])).unwrap();
        let a = gap(&m, &[0.2], &data).unwrap();
        let b = gap(&flipped, &[-0.2], &mirrored).unwrap();
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}
