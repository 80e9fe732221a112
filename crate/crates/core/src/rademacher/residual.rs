use crate::error::{Error, Result};
use crate::model::{DesignSet, LossFamily};

/// Below this magnitude a coordinate of `s` counts as zero and the remainder
/// switches to its derivative form.
const ZERO_STEP: f64 = 1e-12;

/// Remainders `φ_ij` of the first-order expansion of the loss about `c_i = Z_iθ`:
///
/// `γ(c_i + s, y) − γ(c_i, y) = Σ_j (∂_jγ(c_i, y) + φ_ij(s, y)) s_j`,
///
/// built coordinate by coordinate along `c_i, c_i + π̄_1 s, …, c_i + s` where
/// `π̄_j` keeps the first `j` coordinates.
///
/// For the multinomial logit the remainder does not depend on `y`, so its
/// centered version vanishes up to rounding.
pub struct ResidualProcess<'a> {
    loss: &'a dyn LossFamily,
    design: &'a DesignSet,
    centers: Vec<Vec<f64>>,
    probs: Vec<Vec<f64>>,
    /// `∂_jγ(c_i, y)` at `[i][y·k + j]`.
    base_grad: Vec<Vec<f64>>,
}

impl<'a> ResidualProcess<'a> {
    pub fn new(loss: &'a dyn LossFamily, design: &'a DesignSet, theta: &[f64]) -> Result<Self> {
        if loss.k() != design.k() || theta.len() != design.p() {
            return Err(Error::dims(
                "loss, design and parameter dimensions disagree",
            ));
        }
        let classes = loss.response_support().ok_or_else(|| {
            Error::Unsupported(format!(
                "loss `{}` has no discrete response; centered remainders need exact means",
                loss.name()
            ))
        })?;
        let k = design.k();
        let mut centers = Vec::with_capacity(design.n());
        let mut probs = Vec::with_capacity(design.n());
        let mut base_grad = Vec::with_capacity(design.n());
        let mut g = vec![0.0; k];
        for i in 0..design.n() {
            let mut c = vec![0.0; k];
            design.predictor(i, theta, &mut c);
            let mut p = vec![0.0; classes];
            loss.probabilities(&c, &mut p)?;
            let mut bg = vec![0.0; classes * k];
            for y in 0..classes {
                loss.gradient(&c, y, &mut g);
                bg[y * k..(y + 1) * k].copy_from_slice(&g);
            }
            centers.push(c);
            probs.push(p);
            base_grad.push(bg);
        }
        Ok(ResidualProcess {
            loss,
            design,
            centers,
            probs,
            base_grad,
        })
    }

    pub fn classes(&self) -> usize {
        self.probs.first().map_or(0, Vec::len)
    }

    pub fn center(&self, i: usize) -> &[f64] {
        &self.centers[i]
    }

    /// Response law `P(· | c_i)`.
    pub fn probabilities(&self, i: usize) -> &[f64] {
        &self.probs[i]
    }

    /// Writes `φ_ij(s, y)` for every `j` into `out`. Zero when `F2 = 0`.
    pub fn phi(&self, i: usize, s: &[f64], y: usize, out: &mut [f64]) {
        let k = self.design.k();
        if self.loss.f2() == 0.0 {
            out[..k].iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        let c = &self.centers[i];
        let base = &self.base_grad[i][y * k..(y + 1) * k];
        let mut point = c.clone();
        let mut prev = self.loss.value(&point, y);
        let mut g = vec![0.0; k];
        for j in 0..k {
            if s[j].abs() < ZERO_STEP {
                self.loss.gradient(&point, y, &mut g);
                out[j] = g[j] - base[j];
            } else {
                point[j] = c[j] + s[j];
                let next = self.loss.value(&point, y);
                out[j] = (next - prev) / s[j] - base[j];
                prev = next;
            }
        }
    }

    /// `φ_ij(s, Y_i) − E φ_ij(s, Y)` for every `j`, with `y` the observed response.
    pub fn centered_phi(&self, i: usize, s: &[f64], y: usize, out: &mut [f64]) {
        let k = self.design.k();
        let mut each = vec![0.0; k];
        let mut mean = vec![0.0; k];
        for (cls, p) in self.probs[i].iter().enumerate() {
            self.phi(i, s, cls, &mut each);
            for j in 0..k {
                mean[j] += p * each[j];
            }
        }
        self.phi(i, s, y, out);
        for j in 0..k {
            out[j] -= mean[j];
        }
    }

    /// `t_i = Z_i(u − θ)`.
    pub fn offset(&self, i: usize, u: &[f64], out: &mut [f64]) {
        self.design.predictor(i, u, out);
        for (o, c) in out.iter_mut().zip(&self.centers[i]) {
            *o -= c;
        }
    }

    /// `ξ_h(u) = Σ_{i,j} (φ_ij(t_i, Y_i) − E φ_ij(t_i, Y)) Z_ijh` for all `h`.
    pub fn xi(&self, u: &[f64], responses: &[usize]) -> Result<Vec<f64>> {
        let (k, m) = (self.design.k(), self.design.m());
        if u.len() != self.design.p() || responses.len() != self.design.n() {
            return Err(Error::dims(
                "parameter or responses do not match the design",
            ));
        }
        let mut out = vec![0.0; self.design.p()];
        let mut t = vec![0.0; k];
        let mut d = vec![0.0; k];
        for (i, &y) in responses.iter().enumerate() {
            self.offset(i, u, &mut t);
            self.centered_phi(i, &t, y, &mut d);
            let row = self.design.row(i);
            for j in 0..k {
                for c in 0..m {
                    out[j * m + c] += d[j] * row[c];
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BoxDomain, MultinomialLogistic};
    use crate::rng;
    use rand::Rng;

    fn setup() -> (MultinomialLogistic, DesignSet, Vec<f64>) {
        let design = DesignSet::gaussian(8, 3, 2, 4).unwrap();
        let theta = vec![0.5, 0.0, -0.3, 0.0, 0.2, 0.0];
        (MultinomialLogistic::new(2).unwrap(), design, theta)
    }

    #[test]
    fn decomposition_identity_holds() {
        let (loss, design, theta) = setup();
        let rp = ResidualProcess::new(&loss, &design, &theta).unwrap();
        let mut r = rng::stream(1, rng::purpose::SCAN, 0);
        let mut phi = vec![0.0; 2];
        let mut g = vec![0.0; 2];
        for _ in 0..1000 {
            let i = r.random_range(0..design.n());
            let y = r.random_range(0..3);
            let mut s: Vec<f64> = (0..2).map(|_| r.random_range(-3.0..3.0)).collect();
            if r.random_range(0..4) == 0 {
                s[r.random_range(0..2)] = 0.0;
            }
            let c = rp.center(i).to_vec();
            let shifted: Vec<f64> = c.iter().zip(&s).map(|(a, b)| a + b).collect();
            rp.phi(i, &s, y, &mut phi);
            loss.gradient(&c, y, &mut g);
            let lhs = loss.value(&shifted, y) - loss.value(&c, y);
            let rhs: f64 = (0..2).map(|j| (g[j] + phi[j]) * s[j]).sum();
            assert!((lhs - rhs).abs() <= 1e-10, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn remainder_bounds_on_grid() {
        let (loss, design, theta) = setup();
        let rp = ResidualProcess::new(&loss, &design, &theta).unwrap();
        let domain = BoxDomain::symmetric(6, 1.0).unwrap();
        let cap = (2.0 * loss.f1()).min(loss.f2() * design.m_z() * domain.l1_diameter());
        let mut phi = vec![0.0; 2];
        let mut t = vec![0.0; 2];
        rp.phi(0, &[0.0, 0.0], 1, &mut phi);
        assert_eq!(phi, vec![0.0, 0.0]);
        for u in domain.sample_grid(128, 3) {
            for i in 0..design.n() {
                rp.offset(i, &u, &mut t);
                for y in 0..3 {
                    rp.phi(i, &t, y, &mut phi);
                    assert!(phi.iter().all(|v| v.abs() <= cap + 1e-12));
                }
            }
        }
    }

    #[test]
    fn xi_vanishes_at_truth_and_centers() {
        let (loss, design, theta) = setup();
        let rp = ResidualProcess::new(&loss, &design, &theta).unwrap();
        let y = vec![0, 1, 2, 0, 1, 2, 0, 1];
        assert!(rp.xi(&theta, &y).unwrap().iter().all(|v| *v == 0.0));
        let u = [0.1, -0.4, 0.3, 0.9, 0.0, -0.2];
        let mut mean = [0.0; 6];
        let mut d = vec![0.0; 2];
        let mut t = vec![0.0; 2];
        // Exact mean of ξ(u) over the response law is zero.
        for i in 0..design.n() {
            rp.offset(i, &u, &mut t);
            for (cls, p) in rp.probabilities(i).to_vec().iter().enumerate() {
                rp.centered_phi(i, &t, cls, &mut d);
                for j in 0..2 {
                    for c in 0..3 {
                        mean[j * 3 + c] += p * d[j] * design.row(i)[c];
                    }
                }
            }
        }
        assert!(mean.iter().all(|v| v.abs() < 1e-12));
    }
}
