use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{loss_by_name, BoxDomain, DesignSet, LossFamily, ParamVector};
use crate::error::{Error, Result};
use crate::rng;
use crate::solver::Objective;

fn check_dims(
    design: &DesignSet,
    loss: &dyn LossFamily,
    u: &[f64],
    responses: Option<&[usize]>,
) -> Result<()> {
    if loss.k() != design.k() {
        return Err(Error::dims(format!(
            "loss has k={}, design has k={}",
            loss.k(),
            design.k()
        )));
    }
    if u.len() != design.p() {
        return Err(Error::dims(format!(
            "parameter has length {}, design needs p={}",
            u.len(),
            design.p()
        )));
    }
    if let Some(y) = responses {
        if y.len() != design.n() {
            return Err(Error::dims(format!(
                "{} responses for {} observations",
                y.len(),
                design.n()
            )));
        }
        if let Some(classes) = loss.response_support() {
            if let Some(bad) = y.iter().find(|&&v| v >= classes) {
                return Err(Error::invalid(format!(
                    "response {bad} outside 0..{classes}"
                )));
            }
        }
    }
    Ok(())
}

/// `Σ_i γ(Z_i u, Y_i)`.
pub fn total_loss(
    loss: &dyn LossFamily,
    design: &DesignSet,
    responses: &[usize],
    u: &[f64],
) -> Result<f64> {
    check_dims(design, loss, u, Some(responses))?;
    let mut t = vec![0.0; design.k()];
    let mut total = 0.0;
    for (i, &y) in responses.iter().enumerate() {
        design.predictor(i, u, &mut t);
        total += loss.value(&t, y);
    }
    Ok(total)
}

/// `Σ_i Z_iᵀ ∇γ(Z_i u, Y_i)`.
pub fn total_loss_gradient(
    loss: &dyn LossFamily,
    design: &DesignSet,
    responses: &[usize],
    u: &[f64],
) -> Result<Vec<f64>> {
    check_dims(design, loss, u, Some(responses))?;
    let mut grad = vec![0.0; design.p()];
    TotalLoss {
        loss,
        design,
        responses,
    }
    .value_and_gradient(u, &mut grad);
    Ok(grad)
}

/// The empirical total loss as a solver objective. Dimensions are checked by
/// [`TotalLoss::new`].
#[derive(Clone, Copy, Debug)]
pub struct TotalLoss<'a> {
    loss: &'a dyn LossFamily,
    design: &'a DesignSet,
    responses: &'a [usize],
}

impl<'a> TotalLoss<'a> {
    pub fn new(
        loss: &'a dyn LossFamily,
        design: &'a DesignSet,
        responses: &'a [usize],
    ) -> Result<Self> {
        check_dims(design, loss, &vec![0.0; design.p()], Some(responses))?;
        Ok(TotalLoss {
            loss,
            design,
            responses,
        })
    }
}

impl Objective for TotalLoss<'_> {
    fn dim(&self) -> usize {
        self.design.p()
    }

    fn value(&self, u: &[f64]) -> f64 {
        let mut t = vec![0.0; self.design.k()];
        let mut total = 0.0;
        for (i, &y) in self.responses.iter().enumerate() {
            self.design.predictor(i, u, &mut t);
            total += self.loss.value(&t, y);
        }
        total
    }

    fn value_and_gradient(&self, u: &[f64], grad: &mut [f64]) -> f64 {
        let k = self.design.k();
        let mut t = vec![0.0; k];
        let mut g = vec![0.0; k];
        grad.iter_mut().for_each(|v| *v = 0.0);
        let mut total = 0.0;
        for (i, &y) in self.responses.iter().enumerate() {
            self.design.predictor(i, u, &mut t);
            total += self.loss.value(&t, y);
            self.loss.gradient(&t, y, &mut g);
            self.design.add_transpose(i, &g, grad);
        }
        total
    }
}

/// Exact `L(u) = Σ_i Σ_y P(y | Z_iθ) γ(Z_i u, y)` for discrete response laws.
pub fn expected_total_loss(
    loss: &dyn LossFamily,
    design: &DesignSet,
    u: &[f64],
    theta: &[f64],
) -> Result<f64> {
    check_dims(design, loss, u, None)?;
    check_dims(design, loss, theta, None)?;
    let classes = loss.response_support().ok_or_else(|| {
        Error::Unsupported(format!(
            "loss `{}` has a continuous response; estimate the expected loss by Monte Carlo",
            loss.name()
        ))
    })?;
    let k = design.k();
    let mut c = vec![0.0; k];
    let mut t = vec![0.0; k];
    let mut prob = vec![0.0; classes];
    let mut total = 0.0;
    for i in 0..design.n() {
        design.predictor(i, theta, &mut c);
        design.predictor(i, u, &mut t);
        loss.probabilities(&c, &mut prob)?;
        total += prob
            .iter()
            .enumerate()
            .map(|(y, p)| p * loss.value(&t, y))
            .sum::<f64>();
    }
    Ok(total)
}

/// Draw `Y_i ~ P(· | Z_iθ)` independently, from the stream `(seed, responses, 0)`.
pub fn sample_responses(
    loss: &dyn LossFamily,
    design: &DesignSet,
    theta: &[f64],
    seed: u64,
) -> Result<Vec<usize>> {
    let mut r = rng::stream(seed, rng::purpose::RESPONSES, 0);
    sample_responses_with(loss, design, theta, &mut r)
}

/// As [`sample_responses`] with a caller-supplied generator.
pub fn sample_responses_with<R: Rng>(
    loss: &dyn LossFamily,
    design: &DesignSet,
    theta: &[f64],
    r: &mut R,
) -> Result<Vec<usize>> {
    check_dims(design, loss, theta, None)?;
    let classes = loss
        .response_support()
        .ok_or_else(|| Error::Unsupported(format!("loss `{}` cannot be sampled", loss.name())))?;
    let mut c = vec![0.0; design.k()];
    let mut prob = vec![0.0; classes];
    let mut out = Vec::with_capacity(design.n());
    for i in 0..design.n() {
        design.predictor(i, theta, &mut c);
        loss.probabilities(&c, &mut prob)?;
        out.push(draw_categorical(&prob, r.random::<f64>()));
    }
    Ok(out)
}

pub(crate) fn draw_categorical(prob: &[f64], uniform: f64) -> usize {
    let mut acc = 0.0;
    for (y, p) in prob.iter().enumerate() {
        acc += p;
        if uniform < acc {
            return y;
        }
    }
    // Rounding left the cumulative sum just under 1: take the last class with
    // positive mass.
    prob.iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(prob.len() - 1)
}

/// Grid estimate of the quadratic lower-bound constant `C_γ`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CGammaEstimate {
    pub value: f64,
    /// Lattice spacing in predictor space.
    pub resolution: f64,
    pub pairs_evaluated: u64,
    /// Observation index and predictor `t = Z_i u` attaining the minimum.
    pub argmin_observation: usize,
    pub argmin_predictor: Vec<f64>,
}

const DEGENERATE_PAIR: f64 = 1e-9;
const C_GAMMA_POINT_CAP: u128 = 200_000_000;

/// Minimum over a deterministic lattice of
/// `[Eγ(Z_i u, Y) − Eγ(Z_iθ, Y)] / ‖Z_i(u − θ)‖₂²`.
///
/// As `u` ranges over the box, `Z_i u` ranges over a box `B_i ⊂ ℝᵏ` whose
/// sides follow from the signs of `X_i`. The lattice is `Z_iθ + δℤᵏ ∩ B_i` with
/// `δ = 1 / grid_size`, so it is anchored at the truth and a smaller domain
/// always yields a subset of the pairs. Pairs with `‖Z_i(u−θ)‖₂ < 1e-9` are
/// skipped. The result upper-bounds the true constant up to lattice resolution.
pub fn estimate_c_gamma(
    loss: &dyn LossFamily,
    design: &DesignSet,
    theta: &[f64],
    domain: &BoxDomain,
    grid_size: usize,
) -> Result<CGammaEstimate> {
    check_dims(design, loss, theta, None)?;
    if domain.dim() != design.p() {
        return Err(Error::dims("domain dimension differs from p"));
    }
    if grid_size == 0 {
        return Err(Error::invalid("grid_size must be >= 1"));
    }
    if !domain.contains(theta) {
        return Err(Error::invalid("theta lies outside the domain"));
    }
    let classes = loss
        .response_support()
        .ok_or_else(|| Error::Unsupported(format!("loss `{}` is not discrete", loss.name())))?;
    let k = design.k();
    let m = design.m();
    let delta = 1.0 / grid_size as f64;

    // Integer lattice ranges per observation.
    let mut ranges: Vec<Vec<(i64, i64)>> = Vec::with_capacity(design.n());
    let mut total: u128 = 0;
    let mut c = vec![0.0; k];
    for i in 0..design.n() {
        design.predictor(i, theta, &mut c);
        let row = design.row(i);
        let mut r = Vec::with_capacity(k);
        let mut count: u128 = 1;
        for (j, cj) in c.iter().enumerate() {
            let (mut a, mut b) = (0.0, 0.0);
            for h in 0..m {
                let x = row[h];
                let (l, u) = (x * domain.lo()[j * m + h], x * domain.hi()[j * m + h]);
                a += l.min(u);
                b += l.max(u);
            }
            let zlo = ((a - cj) / delta - 1e-9).ceil() as i64;
            let zhi = ((b - cj) / delta + 1e-9).floor() as i64;
            let (zlo, zhi) = (zlo.min(0), zhi.max(0));
            count *= (zhi - zlo + 1) as u128;
            r.push((zlo, zhi));
        }
        total += count;
        ranges.push(r);
    }
    if total > C_GAMMA_POINT_CAP {
        return Err(Error::CapExceeded {
            what: "C_gamma lattice points".into(),
            needed: total,
            cap: C_GAMMA_POINT_CAP,
        });
    }

    let mut best = f64::INFINITY;
    let mut arg = (0usize, Vec::new());
    let mut pairs = 0u64;
    let mut prob = vec![0.0; classes];
    let mut base = vec![0.0; classes];
    let mut t = vec![0.0; k];
    let mut z = vec![0i64; k];
    for (i, r) in ranges.iter().enumerate() {
        design.predictor(i, theta, &mut c);
        loss.probabilities(&c, &mut prob)?;
        for (y, b) in base.iter_mut().enumerate() {
            *b = loss.value(&c, y);
        }
        for (zj, (lo, _)) in z.iter_mut().zip(r) {
            *zj = *lo;
        }
        loop {
            let mut sq = 0.0;
            for j in 0..k {
                let d = delta * z[j] as f64;
                t[j] = c[j] + d;
                sq += d * d;
            }
            if sq.sqrt() >= DEGENERATE_PAIR {
                let gap: f64 = (0..classes)
                    .map(|y| prob[y] * (loss.value(&t, y) - base[y]))
                    .sum();
                let ratio = gap / sq;
                pairs += 1;
                if ratio < best {
                    best = ratio;
                    arg = (i, t.clone());
                }
            }
            // Odometer increment.
            let mut j = 0;
            loop {
                if j == k {
                    break;
                }
                if z[j] < r[j].1 {
                    z[j] += 1;
                    break;
                }
                z[j] = r[j].0;
                j += 1;
            }
            if j == k {
                break;
            }
        }
    }
    if pairs == 0 {
        return Err(Error::IllPosed(
            "every (i, u) pair has Z_i(u - theta) = 0".into(),
        ));
    }
    Ok(CGammaEstimate {
        value: best,
        resolution: delta,
        pairs_evaluated: pairs,
        argmin_observation: arg.0,
        argmin_predictor: arg.1,
    })
}

/// JSON model document: `{"X": [[…]], "k": int, "theta": […], "lo": […], "hi": […]}`,
/// optionally with `"loss"` (defaults to `multinomial_logistic`) and observed
/// responses `"Y"`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    #[serde(rename = "X")]
    pub x: Vec<Vec<f64>>,
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<String>,
    #[serde(rename = "Y", default, skip_serializing_if = "Option::is_none")]
    pub responses: Option<Vec<usize>>,
}

impl ModelDocument {
    pub fn design(&self) -> Result<DesignSet> {
        DesignSet::from_rows(&self.x, self.k)
    }

    pub fn domain(&self) -> Result<BoxDomain> {
        BoxDomain::new(self.lo.clone(), self.hi.clone())
    }

    pub fn loss(&self) -> Result<Box<dyn LossFamily>> {
        loss_by_name(
            self.loss.as_deref().unwrap_or("multinomial_logistic"),
            self.k,
        )
    }

    pub fn theta(&self) -> Result<Option<ParamVector>> {
        self.theta
            .as_ref()
            .map(|t| ParamVector::new(t.clone(), self.k))
            .transpose()
    }
}
