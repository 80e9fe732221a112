use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

/// Axis-aligned box `{u : lo ≤ u ≤ hi}`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxDomain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::dims(format!(
                "box bounds have lengths {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        for (h, (a, b)) in lo.iter().zip(&hi).enumerate() {
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::NonFinite(format!("box bound at coordinate {h}")));
            }
            if a > b {
                return Err(Error::invalid(format!("lo > hi at coordinate {h}")));
            }
        }
        Ok(BoxDomain { lo, hi })
    }

    /// `[-r, r]^dim`.
    pub fn symmetric(dim: usize, r: f64) -> Result<Self> {
        Self::new(vec![-r; dim], vec![r; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    /// ℓ1-diameter `R_D = Σ_h (hi_h − lo_h)`.
    pub fn l1_diameter(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).sum()
    }

    /// `sup_{u ∈ D} ‖u − center‖₁`.
    pub fn l1_radius_about(&self, center: &[f64]) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(center)
            .map(|((a, b), c)| (b - c).abs().max((c - a).abs()))
            .sum()
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        u.len() == self.dim()
            && u.iter()
                .zip(&self.lo)
                .zip(&self.hi)
                .all(|((v, a), b)| a <= v && v <= b)
    }

    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(&self.lo)
            .zip(&self.hi)
            .map(|((x, a), b)| x.clamp(*a, *b))
            .collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    pub fn sample_uniform<R: Rng>(&self, r: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&a, &b)| if a < b { r.random_range(a..=b) } else { a })
            .collect()
    }

    /// Corner selected by the bits of `mask` (bit h set ⇒ `hi_h`).
    pub fn corner(&self, mask: u64) -> Vec<f64> {
        (0..self.dim())
            .map(|h| {
                if (mask >> h) & 1 == 1 {
                    self.hi[h]
                } else {
                    self.lo[h]
                }
            })
            .collect()
    }

    /// Finite grid in the box: box corners first (all of them when `2^dim`
    /// fits in half the budget, otherwise a random distinct half-budget subset),
    /// then uniform interior points. Deterministic given `seed`.
    pub fn sample_grid(&self, points: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut r = rng::stream(seed, rng::purpose::GRID, 0);
        let dim = self.dim();
        let mut grid = Vec::with_capacity(points);
        let half = points / 2;
        if dim < 63 && (1u64 << dim) as usize <= half {
            for mask in 0..(1u64 << dim) {
                grid.push(self.corner(mask));
            }
        } else if dim < 63 {
            let total = 1u64 << dim;
            if total <= usize::MAX as u64 && total <= (1u64 << 32) {
                for idx in sample(&mut r, total as usize, half) {
                    grid.push(self.corner(idx as u64));
                }
            } else {
                for _ in 0..half {
                    grid.push(self.corner(r.random::<u64>()));
                }
            }
        } else {
            for _ in 0..half {
                grid.push(
                    (0..dim)
                        .map(|h| {
                            if r.random::<bool>() {
                                self.hi[h]
                            } else {
                                self.lo[h]
                            }
                        })
                        .collect(),
                );
            }
        }
        while grid.len() < points {
            grid.push(self.sample_uniform(&mut r));
        }
        grid
    }

    /// The box with every side shrunk by `factor ∈ [0, 1]` towards `anchor`.
    pub fn shrink_towards(&self, anchor: &[f64], factor: f64) -> Result<Self> {
        if !self.contains(anchor) {
            return Err(Error::invalid("shrink anchor outside the box"));
        }
        let lo = self
            .lo
            .iter()
            .zip(anchor)
            .map(|(a, c)| c + factor * (a - c))
            .collect();
        let hi = self
            .hi
            .iter()
            .zip(anchor)
            .map(|(b, c)| c + factor * (b - c))
            .collect();
        Self::new(lo, hi)
    }
}
