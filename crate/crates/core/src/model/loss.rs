use std::fmt::Debug;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

/// A per-observation loss `γ(t, y)` of `k` linear predictors `t ∈ ℝᵏ`.
///
/// Implementations declare `F1`, a uniform bound on every partial derivative,
/// and `F2`, an ℓ∞-Lipschitz constant of every partial derivative. Responses
/// are class labels; discrete families also expose their class probabilities
/// so that expectations over the response can be taken exactly.
pub trait LossFamily: Send + Sync + Debug {
    fn name(&self) -> &str;

    fn k(&self) -> usize;

    fn value(&self, t: &[f64], y: usize) -> f64;

    /// Writes `∇_t γ(t, y)` into `out` (length `k`).
    fn gradient(&self, t: &[f64], y: usize, out: &mut [f64]);

    fn f1(&self) -> f64;

    fn f2(&self) -> f64;

    /// Number of response values when the response is discrete.
    fn response_support(&self) -> Option<usize> {
        None
    }

    /// `P(y | t)` for every response value `y`, written into `out`.
    fn probabilities(&self, _t: &[f64], _out: &mut [f64]) -> Result<()> {
        Err(Error::Unsupported(format!(
            "loss `{}` has no discrete response law",
            self.name()
        )))
    }

    /// Known quadratic lower-bound constant of the expected loss, if any.
    fn c_gamma(&self) -> Option<f64> {
        None
    }
}

/// Negative log-likelihood of the multinomial logit with baseline class 0:
///
/// ```text
/// γ(t, y) = ln(1 + Σ_j e^{t_j}) − t_y        (t_0 := 0)
/// ∂_j γ   = softmax_j(t) − 1{y = j}
/// ```
///
/// Classes are `0..=k`. The softmax Jacobian `diag(p) − ppᵀ` has absolute row
/// sums `2 p_j (1 − p_j) ≤ 1/2`, which is attained, so `F2 = 1/2`.
#[derive(Clone, Debug)]
pub struct MultinomialLogistic {
    k: usize,
}

impl MultinomialLogistic {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("multinomial logistic needs k >= 1"));
        }
        Ok(MultinomialLogistic { k })
    }

    /// ln(1 + Σ e^{t_j}), stabilised.
    fn log_partition(t: &[f64]) -> f64 {
        let max = t.iter().copied().fold(0.0f64, f64::max);
        let mut s = (-max).exp();
        for &tj in t {
            s += (tj - max).exp();
        }
        max + s.ln()
    }

    /// Class probabilities `(p_0, …, p_k)`.
    fn softmax(t: &[f64], out: &mut [f64]) {
        let max = t.iter().copied().fold(0.0f64, f64::max);
        out[0] = (-max).exp();
        let mut s = out[0];
        for (o, &tj) in out[1..].iter_mut().zip(t) {
            *o = (tj - max).exp();
            s += *o;
        }
        for o in out.iter_mut() {
            *o /= s;
        }
    }
}

impl LossFamily for MultinomialLogistic {
    fn name(&self) -> &str {
        "multinomial_logistic"
    }

    fn k(&self) -> usize {
        self.k
    }

    fn value(&self, t: &[f64], y: usize) -> f64 {
        let lp = Self::log_partition(t);
        if y == 0 {
            lp
        } else {
            lp - t[y - 1]
        }
    }

    fn gradient(&self, t: &[f64], y: usize, out: &mut [f64]) {
        let max = t.iter().copied().fold(0.0f64, f64::max);
        let mut s = (-max).exp();
        for (o, &tj) in out.iter_mut().zip(t) {
            *o = (tj - max).exp();
            s += *o;
        }
        for o in out.iter_mut() {
            *o /= s;
        }
        if y > 0 {
            out[y - 1] -= 1.0;
        }
    }

    fn f1(&self) -> f64 {
        1.0
    }

    fn f2(&self) -> f64 {
        0.5
    }

    fn response_support(&self) -> Option<usize> {
        Some(self.k + 1)
    }

    fn probabilities(&self, t: &[f64], out: &mut [f64]) -> Result<()> {
        Self::softmax(t, out);
        Ok(())
    }
}

/// Look up a built-in loss family by its configuration name.
pub fn loss_by_name(name: &str, k: usize) -> Result<Box<dyn LossFamily>> {
    match name {
        "multinomial_logistic" => Ok(Box::new(MultinomialLogistic::new(k)?)),
        other => Err(Error::invalid(format!("unknown loss family `{other}`"))),
    }
}

/// Largest values observed by [`scan_loss_constants`].
#[derive(Clone, Copy, Debug)]
pub struct LossConstantsScan {
    /// max |∂_j γ(t, y)| over the scanned points.
    pub max_abs_partial: f64,
    /// max |∂_j γ(s, y) − ∂_j γ(t, y)| / ‖s − t‖∞ over the scanned pairs.
    pub max_lipschitz_ratio: f64,
}

/// Randomized audit of a loss family's declared `F1`/`F2`.
///
/// Points are drawn uniformly from `[-scale, scale]ᵏ`; each is paired with a
/// perturbation whose ℓ∞ size is log-uniform between 1e-4 and `scale`.
pub fn scan_loss_constants(
    loss: &dyn LossFamily,
    responses: usize,
    samples: usize,
    scale: f64,
    seed: u64,
) -> LossConstantsScan {
    let k = loss.k();
    let mut r = rng::stream(seed, rng::purpose::SCAN, 0);
    let mut s = vec![0.0; k];
    let mut t = vec![0.0; k];
    let mut gs = vec![0.0; k];
    let mut gt = vec![0.0; k];
    let mut max_abs = 0.0f64;
    let mut max_ratio = 0.0f64;
    for _ in 0..samples {
        for v in s.iter_mut() {
            *v = r.random_range(-scale..=scale);
        }
        let size = (r.random_range((1e-4f64).ln()..=scale.ln())).exp();
        for (tv, sv) in t.iter_mut().zip(&s) {
            *tv = sv + r.random_range(-size..=size);
        }
        let y = r.random_range(0..responses);
        loss.gradient(&s, y, &mut gs);
        loss.gradient(&t, y, &mut gt);
        let dist = s
            .iter()
            .zip(&t)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        for j in 0..k {
            max_abs = max_abs.max(gs[j].abs());
            if dist > 0.0 {
                max_ratio = max_ratio.max((gs[j] - gt[j]).abs() / dist);
            }
        }
    }
    LossConstantsScan {
        max_abs_partial: max_abs,
        max_lipschitz_ratio: max_ratio,
    }
}
