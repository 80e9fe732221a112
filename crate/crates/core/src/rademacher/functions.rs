use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Built-in maps `ℝᵏ → ℝ` with a known `ℓ∞`-Lipschitz constant and `h(0) = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunction {
    /// `scale · Π_j tanh(t_j / width)`; vanishes whenever any coordinate does.
    TanhProduct {
        scale: f64,
        width: f64,
    },
    /// `tanh(Σ_j w_j t_j)`.
    TanhOfSum {
        weights: Vec<f64>,
    },
    /// `Σ_j w_j t_j`.
    Linear {
        weights: Vec<f64>,
    },
    Zero,
}

impl TestFunction {
    pub fn eval(&self, t: &[f64]) -> f64 {
        match self {
            TestFunction::TanhProduct { scale, width } => {
                scale * t.iter().map(|x| (x / width).tanh()).product::<f64>()
            }
            TestFunction::TanhOfSum { weights } => weights
                .iter()
                .zip(t)
                .map(|(w, x)| w * x)
                .sum::<f64>()
                .tanh(),
            TestFunction::Linear { weights } => weights.iter().zip(t).map(|(w, x)| w * x).sum(),
            TestFunction::Zero => 0.0,
        }
    }

    /// Declared `ℓ∞`-Lipschitz constant.
    ///
    /// For the tanh product, with `x_j = tanh(t_j/c)` the gradient has `ℓ1`
    /// norm `(M/c) Σ_j (1 − x_j²) Π_{l≠j} |x_l| ≤ M/c` for every `k`.
    pub fn lipschitz(&self) -> f64 {
        match self {
            TestFunction::TanhProduct { scale, width } => scale.abs() / width,
            TestFunction::TanhOfSum { weights } | TestFunction::Linear { weights } => {
                weights.iter().map(|w| w.abs()).sum()
            }
            TestFunction::Zero => 0.0,
        }
    }

    /// Whether `h(t) = 0` as soon as one coordinate of `t` is zero.
    pub fn vanishing(&self, k: usize) -> bool {
        match self {
            TestFunction::TanhProduct { .. } | TestFunction::Zero => true,
            TestFunction::TanhOfSum { .. } | TestFunction::Linear { .. } => k == 1,
        }
    }

    fn check(&self, k: usize) -> Result<()> {
        match self {
            TestFunction::TanhProduct { scale, width } => {
                if !(width.is_finite() && *width > 0.0 && scale.is_finite()) {
                    return Err(Error::invalid(
                        "tanh product needs finite scale and width > 0",
                    ));
                }
            }
            TestFunction::TanhOfSum { weights } | TestFunction::Linear { weights } => {
                if weights.len() != k {
                    return Err(Error::dims(format!(
                        "function has {} weights, k = {k}",
                        weights.len()
                    )));
                }
            }
            TestFunction::Zero => {}
        }
        Ok(())
    }
}

/// `N` test functions on `ℝᵏ` with Lipschitz constants `M_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFamily {
    pub k: usize,
    pub functions: Vec<TestFunction>,
    /// `M_i`; defaults to the declared constants.
    #[serde(default)]
    pub lipschitz: Option<Vec<f64>>,
}

impl TestFamily {
    pub fn new(k: usize, functions: Vec<TestFunction>) -> Result<Self> {
        let f = TestFamily {
            k,
            functions,
            lipschitz: None,
        };
        f.validate()?;
        Ok(f)
    }

    /// Replaces the constants; each must dominate the declared one.
    pub fn with_lipschitz(mut self, m: Vec<f64>) -> Result<Self> {
        self.lipschitz = Some(m);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.functions.is_empty() {
            return Err(Error::invalid(
                "test family needs k >= 1 and at least one function",
            ));
        }
        for f in &self.functions {
            f.check(self.k)?;
        }
        if let Some(m) = &self.lipschitz {
            if m.len() != self.functions.len() {
                return Err(Error::dims("one Lipschitz constant per function"));
            }
            for (mi, f) in m.iter().zip(&self.functions) {
                if !(mi.is_finite() && *mi >= f.lipschitz()) {
                    return Err(Error::invalid(format!(
                        "constant {mi} is below the declared {}",
                        f.lipschitz()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.functions.len()
    }

    pub fn constants(&self) -> Vec<f64> {
        match &self.lipschitz {
            Some(m) => m.clone(),
            None => self.functions.iter().map(TestFunction::lipschitz).collect(),
        }
    }

    pub fn all_vanishing(&self) -> bool {
        self.functions.iter().all(|f| f.vanishing(self.k))
    }
}

/// Univariate contractions `ℝ → ℝ` fixing zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UnivariateMap {
    Identity,
    Clamp { bound: f64 },
    Tanh,
    Zero,
}

impl UnivariateMap {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            UnivariateMap::Identity => x,
            UnivariateMap::Clamp { bound } => x.clamp(-bound, *bound),
            UnivariateMap::Tanh => x.tanh(),
            UnivariateMap::Zero => 0.0,
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            UnivariateMap::Zero => 0.0,
            _ => 1.0,
        }
    }
}

/// Convex nondecreasing `G: ℝ → ℝ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConvexMap {
    Identity,
    PositivePart,
    /// `exp(x / scale)`.
    Exp {
        scale: f64,
    },
}

impl ConvexMap {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ConvexMap::Identity => x,
            ConvexMap::PositivePart => x.max(0.0),
            ConvexMap::Exp { scale } => (x / scale).exp(),
        }
    }
}
