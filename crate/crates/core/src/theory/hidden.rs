use serde::{Deserialize, Serialize};

use super::{require_nonneg, require_probability, BoundReport};
use crate::error::{Error, Result};

const RHO_GRID: usize = 10_000;
const RHO_MARGIN: f64 = 1.01;
const SERIES_CUTOFF: f64 = 1e-3;

/// `ϱ(z) = ln(1+z)/z − 1`, with `ϱ(0) = 0`. Defined for `z > −1`.
pub fn rho(z: f64) -> f64 {
    if z.abs() < SERIES_CUTOFF {
        // −z/2 + z²/3 − z³/4 + z⁴/5 − z⁵/6
        z * (-0.5 + z * (1.0 / 3.0 + z * (-0.25 + z * (0.2 - z / 6.0))))
    } else {
        z.ln_1p() / z - 1.0
    }
}

/// `ϱ′(z) = [z/(1+z) − ln(1+z)] / z²`.
pub fn rho_prime(z: f64) -> f64 {
    if z.abs() < SERIES_CUTOFF {
        // −1/2 + 2z/3 − 3z²/4 + 4z³/5 − 5z⁴/6
        -0.5 + z * (2.0 / 3.0 + z * (-0.75 + z * (0.8 - z * 5.0 / 6.0)))
    } else {
        (z / (1.0 + z) - z.ln_1p()) / (z * z)
    }
}

/// Constants of the hidden-covariate Lipschitz theorem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HiddenConstants {
    pub f1: f64,
    pub f2: f64,
    pub a_g: f64,
    pub b_g: f64,
    pub m_x: f64,
    pub r_d: f64,
    pub i_g: [f64; 2],
    pub rho0: f64,
    pub rho1: f64,
    /// ψ₁ … ψ₆ in order.
    pub psi: [f64; 6],
}

pub fn hidden_constants(
    f1: f64,
    f2: f64,
    a_g: f64,
    b_g: f64,
    m_x: f64,
    r_d: f64,
) -> Result<HiddenConstants> {
    if !(a_g.is_finite() && b_g.is_finite() && a_g > 0.0 && a_g < b_g) {
        return Err(Error::invalid(format!(
            "need 0 < A_g < B_g (got A_g = {a_g}, B_g = {b_g})"
        )));
    }
    require_nonneg("F1", f1)?;
    require_nonneg("F2", f2)?;
    require_nonneg("M_X", m_x)?;
    require_nonneg("R_D", r_d)?;
    let i_g = [a_g / b_g, b_g / a_g];
    // ϱ is strictly decreasing with ϱ(0) = 0, so |ϱ| peaks at an endpoint.
    let rho0 = rho(i_g[0] - 1.0).abs().max(rho(i_g[1] - 1.0).abs());
    let width = i_g[1] - i_g[0];
    let rho1 = (0..RHO_GRID)
        .map(|g| rho_prime(i_g[0] + width * g as f64 / (RHO_GRID - 1) as f64 - 1.0).abs())
        .fold(0.0, f64::max)
        * RHO_MARGIN;
    let psi1 = f1 / a_g;
    let psi2 = f2 * m_x / (2.0 * a_g);
    let psi3 = (2.0 * f1).min(f2 * m_x * r_d / 2.0) / a_g;
    let psi4 = (psi1 * rho0 + psi3 * (1.0 + rho0)) * m_x;
    let psi5 = 2.0 * psi1 * m_x * rho1;
    let psi6 = 2.0 * (rho0 + psi3 * m_x * rho1);
    Ok(HiddenConstants {
        f1,
        f2,
        a_g,
        b_g,
        m_x,
        r_d,
        i_g,
        rho0,
        rho1,
        psi: [psi1, psi2, psi3, psi4, psi5, psi6],
    })
}

impl HiddenConstants {
    /// `A = 2ψ₂(1+ψ₆) + (ψ₁ + 2ψ₂R_D + 2ψ₃)(ψ₅+ψ₆)`.
    pub fn a_coefficient(&self) -> f64 {
        let [p1, p2, p3, _, p5, p6] = self.psi;
        2.0 * p2 * (1.0 + p6) + (p1 + 2.0 * p2 * self.r_d + 2.0 * p3) * (p5 + p6)
    }

    pub fn reports(&self) -> Result<Vec<BoundReport>> {
        let [p1, p2, p3, p4, p5, p6] = self.psi;
        let g = [("A_g", self.a_g), ("B_g", self.b_g)];
        Ok(vec![
            BoundReport::new("rho0", "sup_{t in I_g} |rho(t-1)|", &g, self.rho0)?,
            BoundReport::new(
                "rho1",
                "sup_{t in I_g} |rho'(t-1)| (grid, 1% margin)",
                &g,
                self.rho1,
            )?,
            BoundReport::new(
                "psi1",
                "F1 / A_g",
                &[("F1", self.f1), ("A_g", self.a_g)],
                p1,
            )?,
            BoundReport::new(
                "psi2",
                "F2 M_X / (2 A_g)",
                &[("F2", self.f2), ("M_X", self.m_x), ("A_g", self.a_g)],
                p2,
            )?,
            BoundReport::new(
                "psi3",
                "min(2 F1, F2 M_X R_D / 2) / A_g",
                &[
                    ("F1", self.f1),
                    ("F2", self.f2),
                    ("M_X", self.m_x),
                    ("R_D", self.r_d),
                    ("A_g", self.a_g),
                ],
                p3,
            )?,
            BoundReport::new(
                "psi4",
                "[psi1 rho0 + psi3 (1 + rho0)] M_X",
                &[
                    ("psi1", p1),
                    ("psi3", p3),
                    ("rho0", self.rho0),
                    ("M_X", self.m_x),
                ],
                p4,
            )?,
            BoundReport::new(
                "psi5",
                "2 psi1 M_X rho1",
                &[("psi1", p1), ("M_X", self.m_x), ("rho1", self.rho1)],
                p5,
            )?,
            BoundReport::new(
                "psi6",
                "2 (rho0 + psi3 M_X rho1)",
                &[
                    ("rho0", self.rho0),
                    ("psi3", p3),
                    ("M_X", self.m_x),
                    ("rho1", self.rho1),
                ],
                p6,
            )?,
        ])
    }
}

/// Level `1 − q₀ − q₁` bound on the Lipschitz coefficient of the centered
/// hidden-covariate log-likelihood about θ.
///
/// `e_sx` is `E S_X` or any upper bound for it, e.g. `M_X √N`.
pub fn hidden_lip_threshold(
    c: &HiddenConstants,
    e_sx: f64,
    n: usize,
    p: usize,
    q0: f64,
    q1: f64,
) -> Result<BoundReport> {
    require_probability("q0", q0)?;
    require_probability("q1", q1)?;
    if q0 + q1 >= 1.0 {
        return Err(Error::invalid(format!(
            "q0 + q1 must be < 1 (got {})",
            q0 + q1
        )));
    }
    require_nonneg("E_SX", e_sx)?;
    if p == 0 || n == 0 {
        return Err(Error::invalid("N and p must be >= 1"));
    }
    let [p1, _, p3, p4, p5, p6] = c.psi;
    let (pf, nf) = (p as f64, n as f64);
    let a_h = c.a_coefficient();
    let value =
        2.0 * 2f64.sqrt() * c.r_d * e_sx * (a_h * (2.0 * pf).ln().sqrt() + 2.0 * p3 * (p5 + p6))
            + (2.0 * nf).sqrt()
                * (p1 * c.m_x * (2.0 * pf / q0).ln().sqrt() + 2.0 * p4 * (pf / q1).ln().sqrt());
    let mut inputs = vec![
        ("R_D", c.r_d),
        ("E_SX", e_sx),
        ("A", a_h),
        ("M_X", c.m_x),
        ("N", nf),
        ("p", pf),
        ("q0", q0),
        ("q1", q1),
    ];
    let names = ["psi1", "psi2", "psi3", "psi4", "psi5", "psi6"];
    inputs.extend(names.iter().copied().zip(c.psi));
    BoundReport::new(
        "hidden_lip",
        "2 sqrt(2) R_D E_SX (A sqrt(ln 2p) + 2 psi3 (psi5 + psi6)) \
         + sqrt(2N) (psi1 M_X sqrt(ln(2p/q0)) + 2 psi4 sqrt(ln(p/q1))), \
         A = 2 psi2 (1 + psi6) + (psi1 + 2 psi2 R_D + 2 psi3)(psi5 + psi6)",
        &inputs,
        value,
    )
}
