use serde::{Deserialize, Serialize};

use super::{require_nonneg, require_positive, BoundReport};
use crate::error::{Error, Result};

/// Regularization level and the matching error scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LassoTuning {
    pub lambda: BoundReport,
    pub l_n: BoundReport,
}

fn require_cone(k_cone: f64) -> Result<()> {
    if !(k_cone.is_finite() && k_cone > 1.0) {
        return Err(Error::invalid(format!(
            "cone constant K must be > 1 (got {k_cone})"
        )));
    }
    Ok(())
}

fn require_sparsity(s: usize) -> Result<()> {
    if s == 0 {
        return Err(Error::invalid(
            "sparsity S must be >= 1; the bound is vacuous for a null parameter",
        ));
    }
    Ok(())
}

/// `λ = (K+1) M_q / (K−1)` and `L_N = 2 M_q K / (N κ² C_γ (K−1))`.
pub fn lasso_tuning(
    k_cone: f64,
    m_q: f64,
    n: usize,
    kappa: f64,
    c_gamma: f64,
) -> Result<LassoTuning> {
    require_cone(k_cone)?;
    require_nonneg("M_q", m_q)?;
    require_positive("kappa", kappa)?;
    require_positive("C_gamma", c_gamma)?;
    if n == 0 {
        return Err(Error::invalid("N must be >= 1"));
    }
    let nf = n as f64;
    let lambda = (k_cone + 1.0) * m_q / (k_cone - 1.0);
    let l_n = 2.0 * m_q * k_cone / (nf * kappa * kappa * c_gamma * (k_cone - 1.0));
    Ok(LassoTuning {
        lambda: BoundReport::new(
            "lambda",
            "(K+1) M_q / (K-1)",
            &[("K", k_cone), ("M_q", m_q)],
            lambda,
        )?,
        l_n: BoundReport::new(
            "L_N",
            "2 M_q K / (N kappa^2 C_gamma (K-1))",
            &[
                ("K", k_cone),
                ("M_q", m_q),
                ("N", nf),
                ("kappa", kappa),
                ("C_gamma", c_gamma),
            ],
            l_n,
        )?,
    })
}

/// Bound on `‖θ̂ − θ‖₂²` for the multi-index Lasso.
pub fn lasso_error_bound(
    k: usize,
    k_cone: f64,
    l_n: f64,
    s: usize,
    n: usize,
    kappa: f64,
    sigma_xs: f64,
) -> Result<BoundReport> {
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    require_sparsity(s)?;
    require_cone(k_cone)?;
    require_nonneg("L_N", l_n)?;
    require_nonneg("sigma_XS", sigma_xs)?;
    let (kf, nf, sf) = (k as f64, n as f64, s as f64);
    let kk = k_cone * k_cone;
    let mut bracket = 2.0 + kk;
    if k > 1 {
        require_positive("kappa", kappa)?;
        if n == 0 {
            return Err(Error::invalid("N must be >= 1"));
        }
        let nk2 = nf * kappa * kappa;
        bracket += 2.0 * (1.0 + kk) * (nk2 + sigma_xs * sigma_xs * kf) / nk2;
    }
    BoundReport::new(
        "lasso_error",
        "k L_N^2 S [2 + K^2 + 2 (1+K^2) (N kappa^2 + sigma_XS^2 k) / (N kappa^2) 1{k>1}]",
        &[
            ("k", kf),
            ("K", k_cone),
            ("L_N", l_n),
            ("S", sf),
            ("N", nf),
            ("kappa", kappa),
            ("sigma_XS", sigma_xs),
        ],
        kf * l_n * l_n * sf * bracket,
    )
}

/// `λ = K M_q` for the hidden-covariate Lasso.
pub fn prop_hidden_lambda(k_cone: f64, m_q: f64) -> Result<BoundReport> {
    require_cone(k_cone)?;
    require_nonneg("M_q", m_q)?;
    BoundReport::new(
        "hidden_lambda",
        "K M_q",
        &[("K", k_cone), ("M_q", m_q)],
        k_cone * m_q,
    )
}

/// ℓ2 error bound for the hidden-covariate Lasso run with [`prop_hidden_lambda`].
pub fn prop_hidden_error(k_cone: f64, m_q: f64, s: usize, c_ell: f64) -> Result<BoundReport> {
    require_cone(k_cone)?;
    require_nonneg("M_q", m_q)?;
    require_sparsity(s)?;
    require_positive("C_ell", c_ell)?;
    let r = (k_cone + 1.0) / (k_cone - 1.0);
    let value = (2.0 + r * r).sqrt() * (k_cone + 1.0) * m_q * (s as f64).sqrt() / c_ell;
    BoundReport::new(
        "hidden_error",
        "sqrt(2 + (K+1)^2/(K-1)^2) (K+1) M_q sqrt(S) / C_ell",
        &[
            ("K", k_cone),
            ("M_q", m_q),
            ("S", s as f64),
            ("C_ell", c_ell),
        ],
        value,
    )
}
