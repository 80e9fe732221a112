//! Closed-form evaluators for the constants, thresholds and error bounds.
//!
//! Every evaluator validates its preconditions and returns an error rather
//! than clamping. Results come back as [`BoundReport`]s that carry the inputs
//! next to the value, so a report is self-describing once written to disk.

mod hidden;
mod lasso;
mod lemmas;
mod lipschitz;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use hidden::{hidden_constants, hidden_lip_threshold, rho, rho_prime, HiddenConstants};
pub use lasso::{
    lasso_error_bound, lasso_tuning, prop_hidden_error, prop_hidden_lambda, LassoTuning,
};
pub use lemmas::{massart_bound, mean_max_bound};
pub use lipschitz::{
    global_lip_constants, global_lip_threshold, local_lip_constants, local_lip_threshold,
    local_tail_threshold, ColumnStats, LipConstants,
};

/// A computed bound or constant together with every input symbol that
/// entered it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub formula: String,
    pub inputs: BTreeMap<String, f64>,
    pub value: f64,
}

impl BoundReport {
    pub(crate) fn new(
        name: &str,
        formula: &str,
        inputs: &[(&str, f64)],
        value: f64,
    ) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("{name} evaluated to {value}")));
        }
        Ok(BoundReport {
            name: name.to_string(),
            formula: formula.to_string(),
            inputs: inputs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            value,
        })
    }

    pub fn input(&self, symbol: &str) -> Option<f64> {
        self.inputs.get(symbol).copied()
    }
}

pub(crate) fn require_nonneg(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::invalid(format!(
            "{name} must be finite and >= 0 (got {v})"
        )));
    }
    Ok(())
}

pub(crate) fn require_positive(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v <= 0.0 {
        return Err(Error::invalid(format!(
            "{name} must be finite and > 0 (got {v})"
        )));
    }
    Ok(())
}

pub(crate) fn require_probability(name: &str, q: f64) -> Result<()> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid(format!(
            "{name} must lie in (0, 1) (got {q})"
        )));
    }
    Ok(())
}

/// Multivariate comparison constant `β_k = 3ᵏ + 3ᵏ⁻¹ − 2ᵏ`.
pub fn beta(k: usize) -> Result<u128> {
    if k == 0 {
        return Err(Error::invalid("beta needs k >= 1"));
    }
    let k32 = u32::try_from(k).map_err(|_| Error::invalid("k too large"))?;
    let p3 = 3u128
        .checked_pow(k32)
        .ok_or_else(|| Error::invalid(format!("beta({k}) overflows")))?;
    Ok(p3 + p3 / 3 - (1u128 << k32.min(127)))
}
