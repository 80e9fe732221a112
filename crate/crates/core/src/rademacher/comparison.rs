use serde::{Deserialize, Serialize};

use super::{
    enumerate_mean, sample_values, ConvexMap, MCVerdict, SignMode, TestFamily, UnivariateMap,
    EXACT_SIGN_LIMIT,
};
use crate::error::{Error, Result};
use crate::rng::purpose;
use crate::stats::Estimate;
use crate::theory::{beta, massart_bound};

const MAX_POINTS: usize = 64;
const MAX_N: usize = 12;
const MAX_K: usize = 3;

/// A finite set `T ⊂ (ℝᵏ)ᴺ`; each point is stored flat with `t_ij` at `i·k + j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexSet {
    pub n: usize,
    pub k: usize,
    pub points: Vec<Vec<f64>>,
}

impl IndexSet {
    pub fn new(n: usize, k: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        let s = IndexSet { n, k, points };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() || self.points.len() > MAX_POINTS {
            return Err(Error::invalid(format!(
                "index set needs 1..={MAX_POINTS} points"
            )));
        }
        if self.n == 0 || self.n > MAX_N || self.k == 0 || self.k > MAX_K {
            return Err(Error::invalid(format!(
                "need 1 <= N <= {MAX_N} and 1 <= k <= {MAX_K}"
            )));
        }
        if let Some(p) = self.points.iter().find(|p| p.len() != self.n * self.k) {
            return Err(Error::dims(format!(
                "point of length {}, expected N·k = {}",
                p.len(),
                self.n * self.k
            )));
        }
        Ok(())
    }
}

fn use_exact(mode: SignMode, bits: usize) -> Result<bool> {
    let feasible = bits as u32 <= EXACT_SIGN_LIMIT;
    match mode {
        SignMode::Auto => Ok(feasible),
        SignMode::Sampled => Ok(false),
        SignMode::Exact if feasible => Ok(true),
        SignMode::Exact => Err(Error::CapExceeded {
            what: "sign patterns".into(),
            needed: 1u128 << bits.min(127),
            cap: 1u128 << EXACT_SIGN_LIMIT,
        }),
    }
}

fn side<F>(
    bits: usize,
    exact: bool,
    replicates: usize,
    seed: u64,
    tag: u64,
    f: F,
) -> Result<Estimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if exact {
        Ok(Estimate::exact(enumerate_mean(bits as u32, f)))
    } else if replicates < 2 {
        Err(Error::invalid("sampled checks need at least 2 replicates"))
    } else {
        Ok(sample_values(bits, replicates, seed, tag, f))
    }
}

fn check_family(family: &TestFamily, t: &IndexSet) -> Result<()> {
    family.validate()?;
    t.validate()?;
    if family.n() != t.n || family.k != t.k {
        return Err(Error::dims(format!(
            "family is N={}, k={}; index set is N={}, k={}",
            family.n(),
            family.k,
            t.n,
            t.k
        )));
    }
    Ok(())
}

fn h_table(family: &TestFamily, t: &IndexSet) -> Vec<Vec<f64>> {
    t.points
        .iter()
        .map(|p| {
            (0..t.n)
                .map(|i| family.functions[i].eval(&p[i * t.k..(i + 1) * t.k]))
                .collect()
        })
        .collect()
}

fn sup_of<F: Fn(&[f64]) -> f64>(rows: &[Vec<f64>], f: F) -> f64 {
    rows.iter().map(|r| f(r)).fold(f64::NEG_INFINITY, f64::max)
}

fn signed_sum(signs: &[f64], row: &[f64]) -> f64 {
    signs.iter().zip(row).map(|(e, x)| e * x).sum()
}

/// `E G(sup_T Σ ε_i h_i(t_i)) ≤ E G(sup_T Σ_{i,j} M_i ε_ij t_ij)` for vanishing `h_i`.
pub fn verify_multivariate_contraction(
    family: &TestFamily,
    t: &IndexSet,
    g: ConvexMap,
    replicates: usize,
    mode: SignMode,
    seed: u64,
) -> Result<MCVerdict> {
    check_family(family, t)?;
    if !family.all_vanishing() {
        return Err(Error::invalid(
            "every function must vanish when one coordinate is zero",
        ));
    }
    let (n, k) = (t.n, t.k);
    let m = family.constants();
    let hv = h_table(family, t);
    let lin: Vec<Vec<f64>> = t
        .points
        .iter()
        .map(|p| (0..n * k).map(|ij| m[ij / k] * p[ij]).collect())
        .collect();
    let exact = use_exact(mode, n * k)?;
    let lhs = side(n, exact, replicates, seed, purpose::SIGNS_LHS, |e| {
        g.eval(sup_of(&hv, |r| signed_sum(e, r)))
    })?;
    let rhs = side(n * k, exact, replicates, seed, purpose::SIGNS_RHS, |e| {
        g.eval(sup_of(&lin, |r| signed_sum(e, r)))
    })?;
    Ok(MCVerdict::comparison(lhs, rhs, exact, replicates, seed))
}

/// `E sup_T |Σ ε_i h_i(t_i)| ≤ β_k Σ_j E sup_{T_j} |Σ ε_i M_i s_i|` for `h_i(0) = 0`.
pub fn verify_l1_comparison(
    family: &TestFamily,
    t: &IndexSet,
    replicates: usize,
    mode: SignMode,
    seed: u64,
) -> Result<MCVerdict> {
    check_family(family, t)?;
    if let Some(f) = family
        .functions
        .iter()
        .find(|f| f.eval(&vec![0.0; t.k]) != 0.0)
    {
        return Err(Error::invalid(format!("{f:?} does not map 0 to 0")));
    }
    let (n, k) = (t.n, t.k);
    let m = family.constants();
    let b = beta(k)? as f64;
    let hv = h_table(family, t);
    let per_j: Vec<Vec<Vec<f64>>> = (0..k)
        .map(|j| {
            t.points
                .iter()
                .map(|p| (0..n).map(|i| m[i] * p[i * k + j]).collect())
                .collect()
        })
        .collect();
    let exact = use_exact(mode, n)?;
    let lhs = side(n, exact, replicates, seed, purpose::SIGNS_LHS, |e| {
        sup_of(&hv, |r| signed_sum(e, r).abs())
    })?;
    let rhs = side(n, exact, replicates, seed, purpose::SIGNS_RHS, |e| {
        b * per_j
            .iter()
            .map(|rows| sup_of(rows, |r| signed_sum(e, r).abs()))
            .sum::<f64>()
    })?;
    Ok(MCVerdict::comparison(lhs, rhs, exact, replicates, seed))
}

/// `E sup_u |Σ ε_i f_i(γ_i(u))| ≤ 2M E sup_u |Σ ε_i γ_i(u)|` over a finite grid.
///
/// `gammas[u][i]` is `γ_i(u)`; `M` is the largest constant among the maps.
pub fn verify_univariate_contraction(
    gammas: &[Vec<f64>],
    maps: &[UnivariateMap],
    replicates: usize,
    mode: SignMode,
    seed: u64,
) -> Result<MCVerdict> {
    let n = maps.len();
    if n == 0 || gammas.is_empty() {
        return Err(Error::invalid("need at least one map and one grid point"));
    }
    if gammas.iter().any(|g| g.len() != n) {
        return Err(Error::dims("every grid row needs one value per map"));
    }
    let m = maps
        .iter()
        .map(UnivariateMap::lipschitz)
        .fold(0.0, f64::max);
    let mapped: Vec<Vec<f64>> = gammas
        .iter()
        .map(|g| g.iter().zip(maps).map(|(x, f)| f.eval(*x)).collect())
        .collect();
    let exact = use_exact(mode, n)?;
    let lhs = side(n, exact, replicates, seed, purpose::SIGNS_LHS, |e| {
        sup_of(&mapped, |r| signed_sum(e, r).abs())
    })?;
    let rhs = side(n, exact, replicates, seed, purpose::SIGNS_RHS, |e| {
        2.0 * m * sup_of(gammas, |r| signed_sum(e, r).abs())
    })?;
    Ok(MCVerdict::comparison(lhs, rhs, exact, replicates, seed))
}

/// `E max_a |Σ ε_i a_i|` against the finite-class bound.
pub fn verify_massart(
    vectors: &[Vec<f64>],
    replicates: usize,
    mode: SignMode,
    seed: u64,
) -> Result<MCVerdict> {
    let bound = massart_bound(vectors)?;
    let n = vectors[0].len();
    if n == 0 || vectors.iter().any(|v| v.len() != n) {
        return Err(Error::dims("vectors must share one nonzero length"));
    }
    let exact = use_exact(mode, n)?;
    let lhs = side(n, exact, replicates, seed, purpose::SIGNS_LHS, |e| {
        sup_of(vectors, |r| signed_sum(e, r).abs())
    })?;
    Ok(MCVerdict::comparison(
        lhs,
        Estimate::exact(bound.value),
        exact,
        replicates,
        seed,
    ))
}
