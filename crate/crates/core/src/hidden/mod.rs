//! Hidden-letter model: latent sequences `ω ∈ Aⁿ`, `A = {1, …, L+1}`, drawn
//! from a tilted baseline law
//!
//! ```text
//! π(z | θ) ∝ π₀(z) exp(x(z)ᵀθ),   x(z)_{(t−1)L+a} = 1{z_t = a}
//! ```
//!
//! observed through `Y_t ~ N(ω_t, σ²)`. All latent sums are exact enumerations
//! over the `(L+1)ⁿ` states.

mod identify;
mod verify;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{draw_categorical, BoxDomain};
use crate::rng;
use crate::solver::Objective;
use crate::stats::log_sum_exp;
use crate::theory::{hidden_constants, HiddenConstants};

pub use identify::{estimate_c_ell, expected_loglik_gap, CEllEstimate};
pub use verify::{
    fit_hidden_lasso, run_hidden_experiment, verify_hidden_lip, HiddenExperimentReport, HiddenFit,
    HiddenLipReport, HiddenReplicateRow, VerdictStatus,
};

/// Largest latent state space that is enumerated.
pub const STATE_CAP: usize = 65_536;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineName {
    Uniform,
}

/// Baseline law `π₀`: `"uniform"` or a dense table over `Aⁿ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Baseline {
    Named(BaselineName),
    Table(Vec<f64>),
}

/// Model description as read from configuration.
///
/// Table entries of `pi0` are indexed by `Σ_t (z_t − 1)(L+1)^{n−t}`, i.e. the
/// first position is the most significant digit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HiddenModelSpec {
    pub n: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub pi0: Baseline,
    pub sigma: f64,
    pub theta: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Indicator features of a letter sequence; letter `L+1` encodes as zeros.
pub fn feature(z: &[usize], l: usize) -> Result<Vec<f64>> {
    let mut x = vec![0.0; z.len() * l];
    for (t, &a) in z.iter().enumerate() {
        if a == 0 || a > l + 1 {
            return Err(Error::invalid(format!(
                "letter {a} at position {} outside 1..={}",
                t + 1,
                l + 1
            )));
        }
        if a <= l {
            x[t * l + a - 1] = 1.0;
        }
    }
    Ok(x)
}

/// Inputs of the hidden-model constants derived from the domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HiddenConstantsInput {
    pub m_x: f64,
    pub a_g: f64,
    pub b_g: f64,
    pub f1: f64,
    pub f2: f64,
    /// `sup_{u ∈ D} ‖u − θ‖₁`.
    pub r_d: f64,
}

/// Validated model with the latent state space laid out.
#[derive(Clone, Debug)]
pub struct HiddenModel {
    spec: HiddenModelSpec,
    domain: BoxDomain,
    /// Letters of every state.
    letters: Vec<Vec<usize>>,
    /// Active feature coordinates of every state.
    active: Vec<Vec<usize>>,
    log_pi0: Vec<f64>,
}

/// Observed sequences and the latent letters that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HiddenDataset {
    pub omega: Vec<Vec<usize>>,
    pub y: Vec<Vec<f64>>,
}

impl HiddenDataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

impl HiddenModel {
    pub fn new(spec: HiddenModelSpec) -> Result<Self> {
        let (n, l) = (spec.n, spec.l);
        if n == 0 || l == 0 {
            return Err(Error::invalid("n and L must be >= 1"));
        }
        let states = (l as u128 + 1)
            .checked_pow(n as u32)
            .filter(|s| *s <= STATE_CAP as u128)
            .ok_or(Error::CapExceeded {
                what: "latent states".into(),
                needed: (l as u128 + 1).saturating_pow(n.min(u32::MAX as usize) as u32),
                cap: STATE_CAP as u128,
            })? as usize;
        if !(spec.sigma.is_finite() && spec.sigma >= 0.0) {
            return Err(Error::invalid("sigma must be finite and >= 0"));
        }
        let p = n * l;
        if spec.theta.len() != p {
            return Err(Error::dims(format!(
                "theta has {} entries, nL = {p}",
                spec.theta.len()
            )));
        }
        if spec.theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("theta".into()));
        }
        let domain = BoxDomain::new(spec.lo.clone(), spec.hi.clone())?;
        if domain.dim() != p {
            return Err(Error::dims(format!(
                "domain has dimension {}, nL = {p}",
                domain.dim()
            )));
        }
        if !domain.contains(&spec.theta) {
            return Err(Error::invalid("theta lies outside the domain"));
        }
        let log_pi0 = match &spec.pi0 {
            Baseline::Named(BaselineName::Uniform) => vec![-(states as f64).ln(); states],
            Baseline::Table(t) => {
                if t.len() != states {
                    return Err(Error::dims(format!(
                        "pi0 has {} entries, (L+1)^n = {states}",
                        t.len()
                    )));
                }
                if t.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(Error::invalid("pi0 entries must be positive"));
                }
                let total: f64 = t.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::invalid(format!("pi0 sums to {total}, not 1")));
                }
                t.iter().map(|v| v.ln()).collect()
            }
        };
        let mut letters = Vec::with_capacity(states);
        let mut active = Vec::with_capacity(states);
        for idx in 0..states {
            let mut z = vec![0; n];
            let mut rest = idx;
            for t in (0..n).rev() {
                z[t] = rest % (l + 1) + 1;
                rest /= l + 1;
            }
            active.push(
                z.iter()
                    .enumerate()
                    .filter(|(_, &a)| a <= l)
                    .map(|(t, &a)| t * l + a - 1)
                    .collect(),
            );
            letters.push(z);
        }
        Ok(HiddenModel {
            spec,
            domain,
            letters,
            active,
            log_pi0,
        })
    }

    pub fn spec(&self) -> &HiddenModelSpec {
        &self.spec
    }

    pub fn theta(&self) -> &[f64] {
        &self.spec.theta
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.spec.n * self.spec.l
    }

    pub fn states(&self) -> usize {
        self.letters.len()
    }

    /// Index of a letter sequence in the state enumeration.
    pub fn state_index(&self, z: &[usize]) -> Result<usize> {
        if z.len() != self.spec.n {
            return Err(Error::dims("sequence length differs from n"));
        }
        let base = self.spec.l + 1;
        z.iter().try_fold(0usize, |acc, &a| {
            if a == 0 || a > base {
                Err(Error::invalid(format!("letter {a} outside 1..={base}")))
            } else {
                Ok(acc * base + a - 1)
            }
        })
    }

    fn dot(&self, state: usize, u: &[f64]) -> f64 {
        self.active[state].iter().map(|&h| u[h]).sum()
    }

    /// `ln π₀(z) + x(z)ᵀu` for every state.
    pub fn log_weights(&self, u: &[f64]) -> Vec<f64> {
        self.log_pi0
            .iter()
            .enumerate()
            .map(|(z, lp)| lp + self.dot(z, u))
            .collect()
    }

    /// `π(· | u)` over the states.
    pub fn tilted_law(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_point(u)?;
        let w = self.log_weights(u);
        let lse = log_sum_exp(&w);
        Ok(w.iter().map(|v| (v - lse).exp()).collect())
    }

    fn check_point(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.dim() {
            return Err(Error::dims(format!(
                "point has {} entries, nL = {}",
                u.len(),
                self.dim()
            )));
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter".into()));
        }
        Ok(())
    }

    /// `N` draws `(ω_i, Y_i)` at θ from the stream `(seed, hidden sample, 0)`.
    pub fn sample(&self, n_obs: usize, seed: u64) -> Result<HiddenDataset> {
        let mut r = rng::stream(seed, rng::purpose::HIDDEN_SAMPLE, 0);
        self.sample_with(n_obs, &mut r)
    }

    pub fn sample_with<R: Rng>(&self, n_obs: usize, r: &mut R) -> Result<HiddenDataset> {
        let law = self.tilted_law(&self.spec.theta)?;
        let mut omega = Vec::with_capacity(n_obs);
        let mut y = Vec::with_capacity(n_obs);
        for _ in 0..n_obs {
            let z = &self.letters[draw_categorical(&law, r.random::<f64>())];
            let obs = z
                .iter()
                .map(|&a| {
                    let e: f64 = r.sample(StandardNormal);
                    a as f64 + self.spec.sigma * e
                })
                .collect();
            omega.push(z.clone());
            y.push(obs);
        }
        Ok(HiddenDataset { omega, y })
    }

    /// `ln k(z, Y_i)` up to the additive constant `−n ln(σ√(2π))`, at `[i][z]`.
    pub fn emission_table(&self, data: &HiddenDataset) -> Result<Vec<Vec<f64>>> {
        let sigma = self.spec.sigma;
        if sigma <= 0.0 {
            return Err(Error::invalid("the likelihood needs sigma > 0"));
        }
        let scale = 1.0 / (2.0 * sigma * sigma);
        data.y
            .iter()
            .map(|obs| {
                if obs.len() != self.spec.n {
                    return Err(Error::dims("observation length differs from n"));
                }
                if obs.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("observation".into()));
                }
                Ok(self
                    .letters
                    .iter()
                    .map(|z| {
                        -scale
                            * z.iter()
                                .zip(obs)
                                .map(|(&a, y)| (y - a as f64).powi(2))
                                .sum::<f64>()
                    })
                    .collect())
            })
            .collect()
    }

    /// Negative marginal log-likelihood `ℓ(u)` up to a `u`-independent constant.
    pub fn loglik(&self, u: &[f64], data: &HiddenDataset) -> Result<f64> {
        let table = self.emission_table(data)?;
        self.check_point(u)?;
        Ok(HiddenObjective {
            model: self,
            emissions: table,
        }
        .value(u))
    }

    /// `ℓ(u)` and `∇ℓ(u) = −Σ_i E[x(ω) | Y_i; u] + N E_u[x(ω)]`.
    pub fn loglik_gradient(&self, u: &[f64], data: &HiddenDataset) -> Result<(f64, Vec<f64>)> {
        let table = self.emission_table(data)?;
        self.check_point(u)?;
        let mut g = vec![0.0; self.dim()];
        let v = HiddenObjective {
            model: self,
            emissions: table,
        }
        .value_and_gradient(u, &mut g);
        Ok((v, g))
    }

    /// Objective for the solver with the emission table cached.
    pub fn objective(&self, data: &HiddenDataset) -> Result<HiddenObjective<'_>> {
        Ok(HiddenObjective {
            model: self,
            emissions: self.emission_table(data)?,
        })
    }

    /// `E[x(ω) | Y; u]` for one observation row of an emission table.
    fn posterior_mean(&self, base: &[f64], emission: &[f64], out: &mut [f64]) {
        let b: Vec<f64> = base.iter().zip(emission).map(|(a, e)| a + e).collect();
        let lse = log_sum_exp(&b);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (z, bz) in b.iter().enumerate() {
            let w = (bz - lse).exp();
            for &h in &self.active[z] {
                out[h] += w;
            }
        }
    }

    /// `x(z)` of every latent sequence, `S_X = max_j √(Σ_i x_ij(ω_i)²)`.
    pub fn s_x(&self, data: &HiddenDataset) -> Result<f64> {
        let mut counts = vec![0usize; self.dim()];
        for z in &data.omega {
            for (h, v) in feature(z, self.spec.l)?.iter().enumerate() {
                if *v != 0.0 {
                    counts[h] += 1;
                }
            }
        }
        Ok(counts
            .iter()
            .map(|c| (*c as f64).sqrt())
            .fold(0.0, f64::max))
    }

    /// `M_X = 1`; `A_g`, `B_g` bound `exp` over the reachable values of
    /// `x(z)ᵀu`, `u ∈ D`; `F1 = F2 = B_g`.
    pub fn constants_input(&self) -> HiddenConstantsInput {
        let (n, l) = (self.spec.n, self.spec.l);
        let (lo, hi) = (self.domain.lo(), self.domain.hi());
        let mut min = 0.0;
        let mut max = 0.0;
        for t in 0..n {
            let block = t * l..(t + 1) * l;
            min += lo[block.clone()].iter().copied().fold(0.0f64, f64::min);
            max += hi[block].iter().copied().fold(0.0f64, f64::max);
        }
        let (a_g, b_g) = (min.exp(), max.exp());
        HiddenConstantsInput {
            m_x: 1.0,
            a_g,
            b_g,
            f1: b_g,
            f2: b_g,
            r_d: self.domain.l1_radius_about(&self.spec.theta),
        }
    }

    pub fn constants(&self) -> Result<HiddenConstants> {
        let c = self.constants_input();
        hidden_constants(c.f1, c.f2, c.a_g, c.b_g, c.m_x, c.r_d)
    }
}

/// `ℓ(u)` over a fixed dataset, for the proximal solver.
pub struct HiddenObjective<'a> {
    model: &'a HiddenModel,
    emissions: Vec<Vec<f64>>,
}

impl HiddenObjective<'_> {
    pub fn n_obs(&self) -> usize {
        self.emissions.len()
    }
}

impl Objective for HiddenObjective<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn value(&self, u: &[f64]) -> f64 {
        let a = self.model.log_weights(u);
        let mut b = vec![0.0; a.len()];
        let mut total = self.n_obs() as f64 * log_sum_exp(&a);
        for e in &self.emissions {
            for ((bz, az), ez) in b.iter_mut().zip(&a).zip(e) {
                *bz = az + ez;
            }
            total -= log_sum_exp(&b);
        }
        total
    }

    fn value_and_gradient(&self, u: &[f64], grad: &mut [f64]) -> f64 {
        let a = self.model.log_weights(u);
        let lse = log_sum_exp(&a);
        let n = self.n_obs() as f64;
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (z, az) in a.iter().enumerate() {
            let w = n * (az - lse).exp();
            for &h in &self.model.active[z] {
                grad[h] += w;
            }
        }
        let mut total = n * lse;
        let mut b = vec![0.0; a.len()];
        for e in &self.emissions {
            for ((bz, az), ez) in b.iter_mut().zip(&a).zip(e) {
                *bz = az + ez;
            }
            let li = log_sum_exp(&b);
            total -= li;
            for (z, bz) in b.iter().enumerate() {
                let w = (bz - li).exp();
                for &h in &self.model.active[z] {
                    grad[h] -= w;
                }
            }
        }
        total
    }
}
