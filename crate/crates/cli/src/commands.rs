//! Subcommand bodies: config in, report and per-row table out.

use std::path::Path;

use multilasso_core::diagnostics::{kappa_re, sigma_xl};
use multilasso_core::experiment::{run_lasso_experiment, DesignGenerator};
use multilasso_core::hidden::{estimate_c_ell, fit_hidden_lasso, verify_hidden_lip, HiddenModel};
use multilasso_core::model::{sample_responses, DesignSet, ModelDocument, TotalLoss};
use multilasso_core::rademacher::{
    verify_functional_concentration, verify_global_lip, verify_l1_comparison, verify_local_lip,
    verify_local_tail, verify_massart, verify_multivariate_contraction,
    verify_univariate_contraction, MCVerdict, TailSetup,
};
use multilasso_core::solver::{fit_multi_lasso, solve_with_restarts, Sparsity};
use multilasso_core::theory::{
    beta, global_lip_constants, hidden_constants, lasso_error_bound, lasso_tuning,
    local_lip_constants, mean_max_bound, prop_hidden_error, prop_hidden_lambda, BoundReport,
};
use serde::Serialize;
use serde_json::Value;

use crate::config::*;
use crate::CliError;

/// Rows for `--format csv`.
#[derive(Debug, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

pub struct Output {
    pub report: Value,
    pub table: Table,
}

fn output<T: Serialize>(report: &T, table: Table) -> Result<Output, CliError> {
    let report = serde_json::to_value(report)
        .map_err(|e| CliError::Io(format!("serializing report: {e}")))?;
    Ok(Output { report, table })
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn verdict_table(v: &MCVerdict) -> Table {
    Table {
        header: vec![
            "lhs",
            "lhs_se",
            "rhs",
            "rhs_se",
            "slack",
            "replicates",
            "exact",
            "pass",
        ],
        rows: vec![vec![
            num(v.lhs.mean),
            num(v.lhs.se),
            num(v.rhs.mean),
            num(v.rhs.se),
            num(v.slack),
            v.replicates.to_string(),
            v.exact.to_string(),
            v.pass.to_string(),
        ]],
    }
}

fn suprema_table(suprema: &[f64]) -> Table {
    Table {
        header: vec!["replicate", "supremum"],
        rows: suprema
            .iter()
            .enumerate()
            .map(|(r, s)| vec![r.to_string(), num(*s)])
            .collect(),
    }
}

fn coordinate_table(estimate: &[f64], truth: Option<&[f64]>) -> Table {
    Table {
        header: vec!["coordinate", "estimate", "truth"],
        rows: estimate
            .iter()
            .enumerate()
            .map(|(h, v)| {
                vec![
                    h.to_string(),
                    num(*v),
                    truth.map_or(String::new(), |t| num(t[h])),
                ]
            })
            .collect(),
    }
}

#[derive(Serialize)]
struct SolveReport {
    lambda: f64,
    responses_sampled: bool,
    result: multilasso_core::solver::SolveResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    tuning: Option<multilasso_core::theory::LassoTuning>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error_bound: Option<BoundReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_xs: Option<f64>,
}

pub fn solve(cfg: SolveConfig, seed: u64, base: &Path) -> Result<Output, CliError> {
    let doc: ModelDocument = cfg.model.resolve(base)?;
    let design = doc.design()?;
    let domain = doc.domain()?;
    let loss = doc.loss()?;
    let theta = doc.theta()?;
    let (responses, sampled) = match (&doc.responses, &theta) {
        (Some(y), _) => (y.clone(), false),
        (None, Some(t)) => (
            sample_responses(loss.as_ref(), &design, t.as_slice(), seed)?,
            true,
        ),
        (None, None) => {
            return Err(CliError::Schema(
                "model needs observed \"Y\" or a \"theta\" to sample from".into(),
            ))
        }
    };
    let report = match (cfg.lambda, &cfg.tuning) {
        (Some(lambda), None) => {
            let f = TotalLoss::new(loss.as_ref(), &design, &responses)?;
            let result = solve_with_restarts(&f, lambda, &domain, &cfg.solver, cfg.restarts, seed)?;
            SolveReport {
                lambda,
                responses_sampled: sampled,
                result,
                tuning: None,
                error_bound: None,
                sigma_xs: None,
            }
        }
        (None, Some(t)) => {
            let sparsity = match (t.s, &theta) {
                (Some(s), _) => Sparsity::Given(s),
                (None, Some(th)) => Sparsity::Truth(th),
                (None, None) => {
                    return Err(CliError::Schema(
                        "tuning needs \"S\" or a model \"theta\"".into(),
                    ))
                }
            };
            let fit = fit_multi_lasso(
                loss.as_ref(),
                &design,
                &responses,
                t.k_cone,
                t.m_q,
                t.kappa,
                t.c_gamma,
                &domain,
                sparsity,
                &cfg.solver,
            )?;
            SolveReport {
                lambda: fit.tuning.lambda.value,
                responses_sampled: sampled,
                result: fit.result,
                tuning: Some(fit.tuning),
                error_bound: Some(fit.error_bound),
                sigma_xs: Some(fit.sigma_xs),
            }
        }
        _ => {
            return Err(CliError::Schema(
                "give exactly one of \"lambda\" and \"tuning\"".into(),
            ))
        }
    };
    let table = coordinate_table(&report.result.theta_hat, doc.theta.as_deref());
    output(&report, table)
}

#[derive(Serialize)]
struct BetaValue {
    k: usize,
    /// Decimal string; the value can exceed 2⁶⁴.
    value: String,
}

#[derive(Serialize)]
struct ConstantsReport {
    beta: Vec<BetaValue>,
    reports: Vec<BoundReport>,
}

pub fn constants(cfg: ConstantsConfig) -> Result<Output, CliError> {
    let beta_values = cfg
        .beta
        .iter()
        .map(|&k| {
            Ok(BetaValue {
                k,
                value: beta(k)?.to_string(),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut reports = Vec::new();
    let mut l_n = None;
    if let Some(t) = &cfg.tuning {
        let tuning = lasso_tuning(t.k_cone, t.m_q, t.n, t.kappa, t.c_gamma)?;
        l_n = Some(tuning.l_n.value);
        reports.push(tuning.lambda);
        reports.push(tuning.l_n);
    }
    if let Some(e) = &cfg.error_bound {
        let l = e.l_n.or(l_n).ok_or_else(|| {
            CliError::Schema("error_bound needs \"L_N\" or a \"tuning\" block".into())
        })?;
        reports.push(lasso_error_bound(
            e.k, e.k_cone, l, e.s, e.n, e.kappa, e.sigma_xs,
        )?);
    }
    if let Some(l) = &cfg.lip {
        let c = if l.global {
            global_lip_constants(l.f1, l.f2, l.m_z, l.r_d, l.k)?
        } else {
            local_lip_constants(l.f1, l.f2, l.m_z, l.r_d, l.k)?
        };
        reports.extend(c.reports()?);
    }
    if let Some(h) = &cfg.hidden {
        let c = hidden_constants(h.f1, h.f2, h.a_g, h.b_g, h.m_x, h.r_d)?;
        reports.extend(c.reports()?);
    }
    if let Some(h) = &cfg.hidden_tuning {
        reports.push(prop_hidden_lambda(h.k_cone, h.m_q)?);
        match (h.s, h.c_ell) {
            (Some(s), Some(c)) => reports.push(prop_hidden_error(h.k_cone, h.m_q, s, c)?),
            (None, None) => {}
            _ => {
                return Err(CliError::Schema(
                    "hidden_tuning needs both \"S\" and \"C_ell\" for the error bound".into(),
                ))
            }
        }
    }
    if let Some(m) = &cfg.mean_max {
        reports.push(mean_max_bound(m.a, m.b, m.c, m.d)?);
    }
    let mut table = Table {
        header: vec!["name", "value"],
        rows: Vec::new(),
    };
    for b in &beta_values {
        table
            .rows
            .push(vec![format!("beta_{}", b.k), b.value.clone()]);
    }
    for r in &reports {
        table.rows.push(vec![r.name.clone(), num(r.value)]);
    }
    output(
        &ConstantsReport {
            beta: beta_values,
            reports,
        },
        table,
    )
}

#[derive(Serialize)]
struct SigmaValue {
    l: usize,
    value: f64,
}

#[derive(Serialize)]
struct ReDiagReport {
    kappa: multilasso_core::diagnostics::REEstimate,
    sigma: Vec<SigmaValue>,
}

pub fn re_diag(cfg: ReDiagConfig, seed: u64, base: &Path) -> Result<Output, CliError> {
    let design = match (&cfg.model, &cfg.generate) {
        (Some(m), None) => m.resolve(base)?.design()?,
        (None, Some(g)) => match g.generator {
            DesignGenerator::Gaussian => DesignSet::gaussian(g.n, g.m, g.k, g.seed)?,
            DesignGenerator::Orthogonalized => DesignSet::orthogonalized(g.n, g.m, g.k, g.seed)?,
        },
        _ => {
            return Err(CliError::Schema(
                "give exactly one of \"model\" and \"generate\"".into(),
            ))
        }
    };
    let kappa = kappa_re(design.x(), cfg.s, cfg.k_cone, cfg.budget, seed)?;
    let sigma = cfg
        .sigma_l
        .iter()
        .map(|&l| {
            Ok(SigmaValue {
                l,
                value: sigma_xl(design.x(), l)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut table = Table {
        header: vec!["quantity", "value"],
        rows: vec![vec!["kappa_hat".into(), num(kappa.kappa_hat)]],
    };
    for s in &sigma {
        table
            .rows
            .push(vec![format!("sigma_x_{}", s.l), num(s.value)]);
    }
    output(&ReDiagReport { kappa, sigma }, table)
}

pub fn verify_comparison(cfg: ComparisonConfig, seed: u64) -> Result<Output, CliError> {
    let (r, mode) = (cfg.replicates, cfg.mode);
    let verdict = match &cfg.check {
        ComparisonCheck::MultivariateContraction {
            family,
            index_set,
            convex_map,
        } => verify_multivariate_contraction(family, index_set, *convex_map, r, mode, seed)?,
        ComparisonCheck::L1Comparison { family, index_set } => {
            verify_l1_comparison(family, index_set, r, mode, seed)?
        }
        ComparisonCheck::UnivariateContraction { gammas, maps } => {
            verify_univariate_contraction(gammas, maps, r, mode, seed)?
        }
        ComparisonCheck::Massart { vectors } => verify_massart(vectors, r, mode, seed)?,
    };
    let table = verdict_table(&verdict);
    output(&verdict, table)
}

pub fn verify_tail(cfg: TailConfig, seed: u64, base: &Path) -> Result<Output, CliError> {
    let doc = cfg.model.resolve(base)?;
    let design = doc.design()?;
    let domain = doc.domain()?;
    let loss = doc.loss()?;
    let theta = doc
        .theta()?
        .ok_or_else(|| CliError::Schema("verify-tail needs the model's \"theta\"".into()))?;
    let setup = TailSetup::new(
        loss.as_ref(),
        &design,
        theta.as_slice(),
        &domain,
        cfg.grid_points,
        cfg.grid_seed.unwrap_or(seed),
    )?;
    let q_prime = || {
        cfg.q_prime
            .ok_or_else(|| CliError::Schema("Lipschitz checks need \"q_prime\"".into()))
    };
    let report = match cfg.check {
        TailCheck::LocalTail => verify_local_tail(&setup, cfg.q, cfg.replicates, seed)?,
        TailCheck::LocalLip => verify_local_lip(&setup, cfg.q, q_prime()?, cfg.replicates, seed)?,
        TailCheck::GlobalLip => verify_global_lip(&setup, cfg.q, q_prime()?, cfg.replicates, seed)?,
    };
    let table = suprema_table(&report.suprema);
    output(&report, table)
}

pub fn verify_concentration(cfg: ConcentrationConfig, seed: u64) -> Result<Output, CliError> {
    let report = verify_functional_concentration(
        &cfg.process,
        &cfg.s_grid,
        cfg.replicates,
        cfg.pilot,
        seed,
    )?;
    let table = Table {
        header: vec![
            "s",
            "nominal",
            "hoeffding_threshold",
            "hoeffding_freq",
            "bousquet_threshold",
            "bousquet_freq",
        ],
        rows: report
            .levels
            .iter()
            .map(|l| {
                vec![
                    num(l.s),
                    num(l.nominal),
                    num(l.hoeffding_threshold),
                    num(l.hoeffding.lhs.mean),
                    num(l.bousquet_threshold),
                    num(l.bousquet.lhs.mean),
                ]
            })
            .collect(),
    };
    output(&report, table)
}

pub fn hidden_sample(cfg: HiddenSampleConfig, seed: u64) -> Result<Output, CliError> {
    let model = HiddenModel::new(cfg.spec)?;
    let data = model.sample(cfg.n_obs, seed)?;
    let mut table = Table {
        header: vec!["observation", "position", "omega", "y"],
        rows: Vec::new(),
    };
    for (i, (z, y)) in data.omega.iter().zip(&data.y).enumerate() {
        for (t, (a, v)) in z.iter().zip(y).enumerate() {
            table.rows.push(vec![
                i.to_string(),
                (t + 1).to_string(),
                a.to_string(),
                num(*v),
            ]);
        }
    }
    output(&data, table)
}

#[derive(Serialize)]
struct HiddenFitReport {
    data_sampled: bool,
    m_q: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    m_q_check: Option<multilasso_core::hidden::HiddenLipReport>,
    c_ell: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    c_ell_estimate: Option<multilasso_core::hidden::CEllEstimate>,
    fit: multilasso_core::hidden::HiddenFit,
}

pub fn hidden_fit(cfg: HiddenFitConfig, seed: u64) -> Result<Output, CliError> {
    let model = HiddenModel::new(cfg.spec)?;
    let (data, sampled) = match cfg.data {
        Some(d) => (d, false),
        None => (model.sample(cfg.n_obs, seed)?, true),
    };
    let n_obs = data.len();
    let (m_q, m_q_check) = match cfg.m_q {
        HiddenMq::Fixed { value } => (value, None),
        HiddenMq::Theoretical {
            q,
            grid_points,
            pilot,
        } => {
            let grid = model.domain().sample_grid(grid_points, seed);
            let r = verify_hidden_lip(&model, &grid, n_obs, q / 2.0, q / 2.0, pilot, 1, seed)?;
            (r.threshold.value, Some(r))
        }
        HiddenMq::Empirical {
            q,
            grid_points,
            pilot,
            outer,
        } => {
            let grid = model.domain().sample_grid(grid_points, seed);
            let r = verify_hidden_lip(&model, &grid, n_obs, q / 2.0, q / 2.0, pilot, outer, seed)?;
            (r.empirical_quantile, Some(r))
        }
    };
    let (c_ell, c_ell_estimate) = match cfg.c_ell {
        CEllInput::Fixed { value } => (value, None),
        CEllInput::Estimate {
            replicates,
            grid_points,
        } => {
            let grid = model.domain().sample_grid(grid_points, seed);
            let e = estimate_c_ell(&model, n_obs, replicates, &grid, seed)?;
            if !e.identifiable {
                return Err(CliError::Numeric(format!(
                    "curvature estimate λ_min = {} is within noise ({}); the model may not be identifiable",
                    e.lambda_min, e.entry_se
                )));
            }
            (e.c_ell, Some(e))
        }
    };
    let fit = fit_hidden_lasso(
        &model,
        &data,
        cfg.k_cone,
        m_q,
        c_ell,
        &cfg.solver,
        cfg.restarts,
        seed,
    )?;
    let table = coordinate_table(&fit.result.theta_hat, Some(model.theta()));
    output(
        &HiddenFitReport {
            data_sampled: sampled,
            m_q,
            m_q_check,
            c_ell,
            c_ell_estimate,
            fit,
        },
        table,
    )
}

pub fn hidden_verify(cfg: HiddenVerifyConfig, seed: u64) -> Result<Output, CliError> {
    let model = HiddenModel::new(cfg.spec)?;
    let grid = model.domain().sample_grid(cfg.grid_points, seed);
    let report = verify_hidden_lip(
        &model, &grid, cfg.n_obs, cfg.q0, cfg.q1, cfg.pilot, cfg.outer, seed,
    )?;
    let table = suprema_table(&report.suprema);
    output(&report, table)
}

pub fn e2e_lasso(cfg: E2eConfig, seed: u64) -> Result<Output, CliError> {
    let report = run_lasso_experiment(&cfg.experiment, seed)?;
    let table = Table {
        header: vec![
            "replicate",
            "squared_error",
            "bound",
            "within",
            "objective",
            "iterations",
            "converged",
        ],
        rows: report
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.replicate.to_string(),
                    num(r.squared_error),
                    num(r.bound),
                    r.within.to_string(),
                    num(r.objective),
                    r.iterations.to_string(),
                    r.converged.to_string(),
                ]
            })
            .collect(),
    };
    output(&report, table)
}
