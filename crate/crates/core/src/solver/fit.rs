use serde::{Deserialize, Serialize};

use super::{solve, SolveResult, SolverOptions};
use crate::diagnostics::{sigma_xl, support_stats};
use crate::error::{Error, Result};
use crate::model::{BoxDomain, DesignSet, LossFamily, ParamVector, TotalLoss};
use crate::theory::{lasso_error_bound, lasso_tuning, BoundReport, LassoTuning};

/// Where the sparsity level of the error bound comes from.
#[derive(Clone, Copy, Debug)]
pub enum Sparsity<'a> {
    Truth(&'a ParamVector),
    Given(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiLassoFit {
    pub result: SolveResult,
    pub theta_hat: ParamVector,
    pub tuning: LassoTuning,
    pub sparsity: usize,
    /// `σ_{X,S}`; zero when `k = 1`, where it does not enter the bound.
    pub sigma_xs: f64,
    pub error_bound: BoundReport,
}

/// Tunes λ from `(K, M_q, κ, C_γ)`, solves the penalized problem over the box
/// and attaches the squared-error bound.
#[allow(clippy::too_many_arguments)]
pub fn fit_multi_lasso(
    loss: &dyn LossFamily,
    design: &DesignSet,
    responses: &[usize],
    k_cone: f64,
    m_q: f64,
    kappa: f64,
    c_gamma: f64,
    domain: &BoxDomain,
    sparsity: Sparsity<'_>,
    opts: &SolverOptions,
) -> Result<MultiLassoFit> {
    let tuning = lasso_tuning(k_cone, m_q, design.n(), kappa, c_gamma)?;
    let s = match sparsity {
        Sparsity::Truth(theta) => {
            if theta.k() != design.k() || theta.m() != design.m() {
                return Err(Error::dims("true parameter does not match the design"));
            }
            support_stats(theta).s
        }
        Sparsity::Given(s) => s,
    };
    let sigma_xs = if design.k() > 1 && s > 0 {
        sigma_xl(design.x(), s)?
    } else {
        0.0
    };
    let error_bound = lasso_error_bound(
        design.k(),
        k_cone,
        tuning.l_n.value,
        s,
        design.n(),
        kappa,
        sigma_xs,
    )?;
    let objective = TotalLoss::new(loss, design, responses)?;
    let result = solve(&objective, tuning.lambda.value, domain, opts)?;
    let theta_hat = ParamVector::new(result.theta_hat.clone(), design.k())?;
    Ok(MultiLassoFit {
        result,
        theta_hat,
        tuning,
        sparsity: s,
        sigma_xs,
        error_bound,
    })
}
