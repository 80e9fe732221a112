use ndarray::Array2;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

const CHUNK: usize = 4096;
const REFINE_FROM: usize = 10;
const DESCENT_ITERS: usize = 2000;
const DESCENT_ROUNDS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMethod {
    RandomSearch,
    DescentRefined,
}

/// Search estimate of `κ_X(s, K)`.
///
/// The value is attained by the stored witness, so it is an upper bound on the
/// true constant; the true minimum may be smaller.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct REEstimate {
    pub kappa_hat: f64,
    pub witness: Vec<f64>,
    pub support: Vec<usize>,
    pub samples_used: usize,
    pub method: SearchMethod,
}

/// Euclidean projection onto `{w : ‖w‖₁ ≤ radius}` (sort-based).
pub fn project_l1_ball(v: &[f64], radius: f64) -> Vec<f64> {
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= radius {
        return v.to_vec();
    }
    if radius <= 0.0 {
        return vec![0.0; v.len()];
    }
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut shift = 0.0;
    for (i, &u) in mags.iter().enumerate() {
        cum += u;
        let t = (cum - radius) / (i + 1) as f64;
        if u > t {
            shift = t;
        } else {
            break;
        }
    }
    v.iter()
        .map(|x| x.signum() * (x.abs() - shift).max(0.0))
        .collect()
}

/// Search problem on the scaled Gram matrix `G = XᵀX / (N c)`.
struct Cone<'a> {
    gram: &'a [f64],
    m: usize,
    s: usize,
    k_cone: f64,
}

impl Cone<'_> {
    fn quad(&self, v: &[f64]) -> f64 {
        let m = self.m;
        let mut acc = 0.0;
        for a in 0..m {
            if v[a] == 0.0 {
                continue;
            }
            let row = &self.gram[a * m..(a + 1) * m];
            acc += v[a] * row.iter().zip(v).map(|(g, x)| g * x).sum::<f64>();
        }
        acc.max(0.0)
    }

    /// Indices of the s largest |v|, ties to the lower index, sorted.
    fn top_support(&self, v: &[f64]) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.m).collect();
        order.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b)));
        let mut j = order[..self.s].to_vec();
        j.sort_unstable();
        j
    }

    /// Squared ratio with the best support for v; infinite off the cone.
    fn score(&self, v: &[f64]) -> (f64, Vec<usize>) {
        let j = self.top_support(v);
        let on2: f64 = j.iter().map(|&h| v[h] * v[h]).sum();
        let on1: f64 = j.iter().map(|&h| v[h].abs()).sum();
        let total1: f64 = v.iter().map(|x| x.abs()).sum();
        if on2 == 0.0 || total1 - on1 > self.k_cone * on1 * (1.0 + 1e-12) {
            return (f64::INFINITY, j);
        }
        (self.quad(v) / on2, j)
    }

    /// Unit sphere on `J`, ℓ1 ball of radius `K‖v_J‖₁` off `J`.
    fn project(&self, v: &mut [f64], in_j: &[bool]) {
        let norm = (0..self.m)
            .filter(|&h| in_j[h])
            .map(|h| v[h] * v[h])
            .sum::<f64>()
            .sqrt();
        if norm == 0.0 {
            return;
        }
        let mut on1 = 0.0;
        for h in 0..self.m {
            if in_j[h] {
                v[h] /= norm;
                on1 += v[h].abs();
            }
        }
        let off: Vec<usize> = (0..self.m).filter(|&h| !in_j[h]).collect();
        let w: Vec<f64> = off.iter().map(|&h| v[h]).collect();
        let w = project_l1_ball(&w, self.k_cone * on1);
        for (&h, x) in off.iter().zip(w) {
            v[h] = x;
        }
    }

    fn sample<R: Rng>(&self, r: &mut R) -> Vec<f64> {
        let m = self.m;
        let mut v = vec![0.0; m];
        let j = sample(r, m, self.s);
        let mut in_j = vec![false; m];
        let mut norm = 0.0;
        for h in j.iter() {
            in_j[h] = true;
            let z: f64 = StandardNormal.sample(r);
            v[h] = z;
            norm += z * z;
        }
        let norm = norm.sqrt().max(f64::MIN_POSITIVE);
        let mut on1 = 0.0;
        for h in j.iter() {
            v[h] /= norm;
            on1 += v[h].abs();
        }
        let off: Vec<usize> = (0..m).filter(|&h| !in_j[h]).collect();
        if off.is_empty() {
            return v;
        }
        let mass = r.random_range(0.0..=1.0) * self.k_cone * on1;
        let count = r.random_range(1..=off.len());
        let picked = sample(r, off.len(), count);
        let weights: Vec<f64> = (0..count)
            .map(|_| -r.random::<f64>().max(f64::MIN_POSITIVE).ln())
            .collect();
        let wsum: f64 = weights.iter().sum();
        for (slot, w) in picked.iter().zip(weights) {
            let sign = if r.random::<bool>() { 1.0 } else { -1.0 };
            v[off[slot]] = sign * mass * w / wsum;
        }
        v
    }

    /// Projected gradient on `vᵀGv` with the support frozen, re-picking the
    /// support between rounds.
    fn descend(&self, start: &[f64]) -> (f64, Vec<f64>) {
        let mut v = start.to_vec();
        let (mut best, _) = self.score(&v);
        let mut grad = vec![0.0; self.m];
        for _ in 0..DESCENT_ROUNDS {
            let j = self.top_support(&v);
            let mut in_j = vec![false; self.m];
            j.iter().for_each(|&h| in_j[h] = true);
            self.project(&mut v, &in_j);
            let mut cur = self.quad(&v);
            let mut step = 0.5;
            for _ in 0..DESCENT_ITERS {
                for (a, ga) in grad.iter_mut().enumerate() {
                    *ga = 2.0
                        * self.gram[a * self.m..(a + 1) * self.m]
                            .iter()
                            .zip(&v)
                            .map(|(g, x)| g * x)
                            .sum::<f64>();
                }
                let mut trial: Vec<f64> = v.iter().zip(&grad).map(|(x, g)| x - step * g).collect();
                self.project(&mut trial, &in_j);
                let val = self.quad(&trial);
                if val < cur {
                    v = trial;
                    cur = val;
                    step *= 1.5;
                } else {
                    step *= 0.5;
                    if step < 1e-14 {
                        break;
                    }
                }
            }
            let (score, _) = self.score(&v);
            if score < best {
                best = score;
            } else {
                break;
            }
        }
        (best, v)
    }
}

#[derive(Clone)]
struct Candidate {
    score: f64,
    order: (usize, usize),
    v: Vec<f64>,
}

fn keep_best(mut c: Vec<Candidate>, n: usize) -> Vec<Candidate> {
    c.sort_by(|a, b| a.score.total_cmp(&b.score).then(a.order.cmp(&b.order)));
    c.truncate(n);
    c
}

/// Upper search estimate of the restricted eigenvalue constant
/// `κ_X(s, K) = min ‖Xv‖₂ / (√N ‖π_J v‖₂)` over `|J| ≤ s`,
/// `‖π_{Jᶜ} v‖₁ ≤ K ‖π_J v‖₁`.
///
/// Samples `budget` cone directions, then runs projected descent from the best
/// few. Deterministic in `(X, s, K, budget, seed)` for any thread count.
pub fn kappa_re(
    x: &Array2<f64>,
    s: usize,
    k_cone: f64,
    budget: usize,
    seed: u64,
) -> Result<REEstimate> {
    let (n, m) = x.dim();
    if !(k_cone.is_finite() && k_cone > 1.0) {
        return Err(Error::invalid(format!(
            "cone constant K must be > 1 (got {k_cone})"
        )));
    }
    if s == 0 || 2 * s > m {
        return Err(Error::invalid(format!(
            "need 1 <= s <= m/2 (s = {s}, m = {m})"
        )));
    }
    if budget == 0 || n == 0 {
        return Err(Error::invalid("budget and N must be >= 1"));
    }
    let g = x.t().dot(x);
    let scale = (0..m).map(|c| g[[c, c]]).fold(0.0, f64::max);
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let gram: Vec<f64> = g.iter().map(|v| v / scale).collect();
    let cone = Cone {
        gram: &gram,
        m,
        s,
        k_cone,
    };

    let chunks = budget.div_ceil(CHUNK);
    let sampled: Vec<Candidate> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut r = rng::stream(seed, rng::purpose::RE_SEARCH, c as u64);
            let count = CHUNK.min(budget - c * CHUNK);
            let local: Vec<Candidate> = (0..count)
                .map(|i| {
                    let v = cone.sample(&mut r);
                    Candidate {
                        score: cone.score(&v).0,
                        order: (c, i),
                        v,
                    }
                })
                .collect();
            keep_best(local, REFINE_FROM)
        })
        .collect();
    let starts = keep_best(sampled, REFINE_FROM);
    let sampled_best = starts[0].clone();
    let refined: Vec<Candidate> = starts
        .par_iter()
        .map(|c| {
            let (score, v) = cone.descend(&c.v);
            Candidate {
                score,
                order: c.order,
                v,
            }
        })
        .collect();
    let refined_best = keep_best(refined, 1).remove(0);
    let (best, method) = if refined_best.score < sampled_best.score {
        (refined_best, SearchMethod::DescentRefined)
    } else {
        (sampled_best, SearchMethod::RandomSearch)
    };
    let support = cone.top_support(&best.v);
    let kappa_hat = witness_ratio(x, &best.v, &support);
    Ok(REEstimate {
        kappa_hat,
        witness: best.v,
        support,
        samples_used: budget,
        method,
    })
}

/// `‖Xv‖₂ / (√N ‖π_J v‖₂)` evaluated directly from the design.
pub(crate) fn witness_ratio(x: &Array2<f64>, v: &[f64], support: &[usize]) -> f64 {
    let xv = x.dot(&ndarray::ArrayView1::from(v));
    let on: f64 = support.iter().map(|&h| v[h] * v[h]).sum::<f64>().sqrt();
    xv.dot(&xv).sqrt() / ((x.nrows() as f64).sqrt() * on)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DesignSet;
    use proptest::prelude::*;

    fn cone_feasible(e: &REEstimate, k_cone: f64) -> bool {
        let on1: f64 = e.support.iter().map(|&h| e.witness[h].abs()).sum();
        let total: f64 = e.witness.iter().map(|x| x.abs()).sum();
        total - on1 <= k_cone * on1 * (1.0 + 1e-9)
    }

    #[test]
    fn orthogonal_design_gives_one() {
        let d = DesignSet::orthogonalized(40, 8, 1, 3).unwrap();
        for (s, k) in [(1, 2.0), (2, 3.0), (4, 10.0)] {
            let e = kappa_re(d.x(), s, k, 5000, 1).unwrap();
            assert!(
                e.kappa_hat >= 1.0 - 1e-6 && e.kappa_hat <= 1.0 + 1e-9,
                "s={s}: {}",
                e.kappa_hat
            );
        }
    }

    #[test]
    fn duplicated_column_drives_estimate_to_zero() {
        let mut x = DesignSet::gaussian(30, 6, 1, 4).unwrap().x().clone();
        let col = x.column(1).to_owned();
        x.column_mut(4).assign(&col);
        let e = kappa_re(&x, 1, 5.0, 20_000, 2).unwrap();
        assert!(e.kappa_hat < 1e-4, "{}", e.kappa_hat);
        let w = &e.witness;
        assert!((w[1] + w[4]).abs() < 1e-3 * w[1].abs().max(w[4].abs()));
    }

    #[test]
    fn doubling_design_doubles_estimate() {
        let x = DesignSet::gaussian(30, 6, 1, 5).unwrap().x().clone();
        let a = kappa_re(&x, 2, 3.0, 3000, 7).unwrap();
        let b = kappa_re(&(&x * 2.0), 2, 3.0, 3000, 7).unwrap();
        assert!((b.kappa_hat - 2.0 * a.kappa_hat).abs() <= 1e-12 * a.kappa_hat);
    }

    #[test]
    fn witness_is_feasible_and_reproduces_value() {
        let x = DesignSet::gaussian(25, 10, 1, 6).unwrap().x().clone();
        let e = kappa_re(&x, 3, 2.0, 8000, 3).unwrap();
        assert!(e.support.len() <= 3);
        assert!(cone_feasible(&e, 2.0));
        let again = witness_ratio(&x, &e.witness, &e.support);
        assert!((again - e.kappa_hat).abs() <= 1e-10);
        assert_eq!(kappa_re(&x, 3, 2.0, 8000, 3).unwrap(), e);
    }

    #[test]
    fn preconditions() {
        let x = Array2::<f64>::eye(4);
        assert!(kappa_re(&x, 1, 1.0, 10, 0).is_err());
        assert!(kappa_re(&x, 3, 2.0, 10, 0).is_err());
        assert!(kappa_re(&x, 1, 2.0, 0, 0).is_err());
    }

    #[test]
    fn monotone_in_s_and_k() {
        let x = DesignSet::gaussian(20, 8, 1, 9).unwrap().x().clone();
        for seed in 0..3 {
            let base = kappa_re(&x, 1, 2.0, 20_000, seed).unwrap().kappa_hat;
            let wider_k = kappa_re(&x, 1, 4.0, 20_000, seed).unwrap().kappa_hat;
            let wider_s = kappa_re(&x, 2, 2.0, 20_000, seed).unwrap().kappa_hat;
            assert!(wider_k <= base * (1.0 + 1e-3), "K: {wider_k} vs {base}");
            assert!(wider_s <= base * (1.0 + 1e-3), "s: {wider_s} vs {base}");
        }
    }

    /// Minimizes `‖a + B w‖²` over `‖w‖₁ ≤ radius` by coordinate descent on the
    /// penalized form and bisection on the multiplier.
    fn constrained_ls(a: &[f64], cols: &[Vec<f64>], radius: f64) -> f64 {
        let value = |w: &[f64]| {
            let mut r = a.to_vec();
            for (c, col) in cols.iter().enumerate() {
                for (i, x) in col.iter().enumerate() {
                    r[i] += x * w[c];
                }
            }
            r.iter().map(|x| x * x).sum::<f64>()
        };
        let lasso = |mu: f64| {
            let mut w = vec![0.0; cols.len()];
            let mut r = a.to_vec();
            for _ in 0..400 {
                for (c, col) in cols.iter().enumerate() {
                    let nn: f64 = col.iter().map(|x| x * x).sum();
                    if nn == 0.0 {
                        continue;
                    }
                    let rho: f64 = -col.iter().zip(&r).map(|(x, y)| x * y).sum::<f64>() + nn * w[c];
                    let new = rho.signum() * (rho.abs() - mu / 2.0).max(0.0) / nn;
                    let delta = new - w[c];
                    if delta != 0.0 {
                        for (i, x) in col.iter().enumerate() {
                            r[i] += x * delta;
                        }
                        w[c] = new;
                    }
                }
            }
            w
        };
        let free = lasso(0.0);
        if free.iter().map(|x| x.abs()).sum::<f64>() <= radius {
            return value(&free);
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        while lasso(hi).iter().map(|x| x.abs()).sum::<f64>() > radius {
            hi *= 2.0;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if lasso(mid).iter().map(|x| x.abs()).sum::<f64>() > radius {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        value(&lasso(hi))
    }

    fn grid_oracle(x: &Array2<f64>, s: usize, k_cone: f64, angles: usize) -> f64 {
        let (n, m) = x.dim();
        let mut best = f64::INFINITY;
        let mut j: Vec<usize> = (0..s).collect();
        loop {
            let off: Vec<usize> = (0..m).filter(|h| !j.contains(h)).collect();
            let cols: Vec<Vec<f64>> = off.iter().map(|&h| x.column(h).to_vec()).collect();
            let dirs: Vec<Vec<f64>> = if s == 1 {
                vec![vec![1.0]]
            } else {
                (0..angles)
                    .map(|g| {
                        let t = std::f64::consts::PI * g as f64 / angles as f64;
                        vec![t.cos(), t.sin()]
                    })
                    .collect()
            };
            for d in dirs {
                let a: Vec<f64> = (0..n)
                    .map(|i| j.iter().zip(&d).map(|(&h, c)| x[[i, h]] * c).sum())
                    .collect();
                let radius = k_cone * d.iter().map(|c| c.abs()).sum::<f64>();
                best = best.min(constrained_ls(&a, &cols, radius));
            }
            if !super::super::next_combination(&mut j, m) {
                break;
            }
        }
        (best / n as f64).sqrt()
    }

    #[test]
    fn matches_deterministic_oracle_on_small_designs() {
        for (seed, s, m) in [(1u64, 1usize, 6usize), (2, 2, 6), (3, 2, 8)] {
            let x = DesignSet::gaussian(12, m, 1, seed).unwrap().x().clone();
            let k_cone = 2.0;
            let oracle = grid_oracle(&x, s, k_cone, 720);
            let e = kappa_re(&x, s, k_cone, 100_000, seed).unwrap();
            assert!(
                (e.kappa_hat - oracle).abs() <= 0.02 * oracle,
                "seed {seed}: search {} oracle {oracle}",
                e.kappa_hat
            );
        }
    }

    proptest! {
        #[test]
        fn l1_projection_properties(v in proptest::collection::vec(-5.0f64..5.0, 1..12), r in 0.0f64..6.0) {
            let w = project_l1_ball(&v, r);
            let l1: f64 = w.iter().map(|x| x.abs()).sum();
            prop_assert!(l1 <= r + 1e-9);
            for (a, b) in v.iter().zip(&w) {
                prop_assert!(a * b >= 0.0 && b.abs() <= a.abs() + 1e-15);
            }
            if v.iter().map(|x| x.abs()).sum::<f64>() <= r {
                prop_assert_eq!(w, v);
            }
        }
    }
}
