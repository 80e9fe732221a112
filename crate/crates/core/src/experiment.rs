//! End-to-end multi-index Lasso run: generate a design, estimate κ, `C_γ` and
//! `M_q`, then fit fresh response draws and count how often the squared
//! error stays within the bound.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{kappa_re, support_stats, REEstimate};
use crate::error::{Error, Result};
use crate::model::{
    estimate_c_gamma, loss_by_name, sample_responses_with, BoxDomain, CGammaEstimate, DesignSet,
    ParamVector,
};
use crate::rademacher::{verify_local_lip, TailReport, TailSetup};
use crate::rng;
use crate::solver::{fit_multi_lasso, SolverOptions, Sparsity};
use crate::theory::{
    local_lip_constants, local_lip_threshold, BoundReport, ColumnStats, LassoTuning,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignGenerator {
    Gaussian,
    Orthogonalized,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    pub generator: DesignGenerator,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
}

/// How `M_q` is obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum MqSource {
    /// `(1 − q)`-quantile of grid suprema of the local Lipschitz statistic.
    Empirical {
        grid_points: usize,
        replicates: usize,
    },
    /// Local Lipschitz threshold at `(q/2, q/2)`.
    Theoretical,
    Fixed {
        value: f64,
    },
}

/// How κ is obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum KappaSource {
    Search { budget: usize },
    Fixed { value: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LassoExperimentSpec {
    #[serde(default = "default_loss")]
    pub loss: String,
    pub k: usize,
    pub design: DesignSpec,
    pub theta: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub q: f64,
    #[serde(rename = "K")]
    pub k_cone: f64,
    pub replicates: usize,
    pub m_q: MqSource,
    pub kappa: KappaSource,
    /// Lattice points per unit in predictor space for `C_γ`.
    pub c_gamma_grid: usize,
    #[serde(default)]
    pub solver: SolverOptions,
}

fn default_loss() -> String {
    "multinomial_logistic".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub replicate: usize,
    pub squared_error: f64,
    pub bound: f64,
    pub within: bool,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LassoExperimentReport {
    pub sparsity: usize,
    pub kappa: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_search: Option<REEstimate>,
    pub c_gamma: CGammaEstimate,
    pub m_q: f64,
    /// Threshold behind a theoretical `M_q`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_q_threshold: Option<BoundReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_q_tail: Option<TailReport>,
    pub tuning: LassoTuning,
    pub sigma_xs: f64,
    pub error_bound: BoundReport,
    pub rows: Vec<ReplicateRow>,
    pub fraction_within: f64,
    /// `fraction_within ≥ 1 − q`.
    pub pass: bool,
}

/// Runs the pipeline. Responses of replicate `r` come from `(seed, responses, r)`.
pub fn run_lasso_experiment(
    spec: &LassoExperimentSpec,
    seed: u64,
) -> Result<LassoExperimentReport> {
    if !(spec.q > 0.0 && spec.q < 1.0) {
        return Err(Error::invalid(format!(
            "q must lie in (0, 1) (got {})",
            spec.q
        )));
    }
    if spec.replicates == 0 {
        return Err(Error::invalid("replicates must be >= 1"));
    }
    let loss = loss_by_name(&spec.loss, spec.k)?;
    let d = &spec.design;
    let design = match d.generator {
        DesignGenerator::Gaussian => DesignSet::gaussian(d.n, d.m, spec.k, d.seed)?,
        DesignGenerator::Orthogonalized => DesignSet::orthogonalized(d.n, d.m, spec.k, d.seed)?,
    };
    let theta = ParamVector::new(spec.theta.clone(), spec.k)?;
    if theta.m() != d.m {
        return Err(Error::dims(format!(
            "theta has {} entries per block, design has m = {}",
            theta.m(),
            d.m
        )));
    }
    let domain = BoxDomain::new(spec.lo.clone(), spec.hi.clone())?;
    let s = support_stats(&theta).s;

    let (kappa, kappa_search) = match spec.kappa {
        KappaSource::Search { budget } => {
            let est = kappa_re(design.x(), s, spec.k_cone, budget, seed)?;
            (est.kappa_hat, Some(est))
        }
        KappaSource::Fixed { value } => (value, None),
    };
    let c_gamma = estimate_c_gamma(
        loss.as_ref(),
        &design,
        theta.as_slice(),
        &domain,
        spec.c_gamma_grid,
    )?;
    if c_gamma.value <= 0.0 {
        return Err(Error::IllPosed(format!(
            "grid C_gamma estimate {} is not positive",
            c_gamma.value
        )));
    }

    let half = spec.q / 2.0;
    let (m_q, m_q_threshold, m_q_tail) = match &spec.m_q {
        MqSource::Empirical {
            grid_points,
            replicates,
        } => {
            let setup = TailSetup::new(
                loss.as_ref(),
                &design,
                theta.as_slice(),
                &domain,
                *grid_points,
                seed,
            )?;
            let tail = verify_local_lip(&setup, half, half, *replicates, seed)?;
            (tail.empirical_quantile, None, Some(tail))
        }
        MqSource::Theoretical => {
            let consts = local_lip_constants(
                loss.f1(),
                loss.f2(),
                design.m_z(),
                domain.l1_diameter(),
                spec.k,
            )?;
            let th = local_lip_threshold(&ColumnStats::from_design(&design), &consts, half, half)?;
            (th.value, Some(th), None)
        }
        MqSource::Fixed { value } => (*value, None, None),
    };

    let first = fit_once(
        spec,
        loss.as_ref(),
        &design,
        &theta,
        &domain,
        kappa,
        c_gamma.value,
        m_q,
        seed,
        0,
    )?;
    let (tuning, sigma_xs, error_bound) = (
        first.1.tuning.clone(),
        first.1.sigma_xs,
        first.1.error_bound.clone(),
    );
    let mut rows = vec![first.0];
    let rest: Vec<ReplicateRow> = (1..spec.replicates)
        .into_par_iter()
        .map(|r| {
            fit_once(
                spec,
                loss.as_ref(),
                &design,
                &theta,
                &domain,
                kappa,
                c_gamma.value,
                m_q,
                seed,
                r,
            )
            .map(|f| f.0)
        })
        .collect::<Result<_>>()?;
    rows.extend(rest);
    let fraction_within = rows.iter().filter(|r| r.within).count() as f64 / rows.len() as f64;
    Ok(LassoExperimentReport {
        sparsity: s,
        kappa,
        kappa_search,
        c_gamma,
        m_q,
        m_q_threshold,
        m_q_tail,
        tuning,
        sigma_xs,
        error_bound,
        rows,
        fraction_within,
        pass: fraction_within >= 1.0 - spec.q,
    })
}

#[allow(clippy::too_many_arguments)]
fn fit_once(
    spec: &LassoExperimentSpec,
    loss: &dyn crate::model::LossFamily,
    design: &DesignSet,
    theta: &ParamVector,
    domain: &BoxDomain,
    kappa: f64,
    c_gamma: f64,
    m_q: f64,
    seed: u64,
    r: usize,
) -> Result<(ReplicateRow, crate::solver::MultiLassoFit)> {
    let mut g = rng::stream(seed, rng::purpose::RESPONSES, r as u64);
    let y = sample_responses_with(loss, design, theta.as_slice(), &mut g)?;
    let fit = fit_multi_lasso(
        loss,
        design,
        &y,
        spec.k_cone,
        m_q,
        kappa,
        c_gamma,
        domain,
        Sparsity::Truth(theta),
        &spec.solver,
    )?;
    let squared_error: f64 = fit
        .theta_hat
        .as_slice()
        .iter()
        .zip(theta.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let row = ReplicateRow {
        replicate: r,
        squared_error,
        bound: fit.error_bound.value,
        within: squared_error <= fit.error_bound.value,
        objective: fit.result.objective,
        iterations: fit.result.iterations,
        converged: fit.result.converged,
    };
    Ok((row, fit))
}
