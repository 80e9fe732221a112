use serde::{Deserialize, Serialize};

use super::{beta, require_nonneg, require_probability, BoundReport};
use crate::error::{Error, Result};
use crate::model::DesignSet;

/// Column aggregates of the design: `sums[j·p + h] = Σ_i Z_{ijh}²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    k: usize,
    p: usize,
    sums: Vec<f64>,
}

impl ColumnStats {
    /// Wraps a row-major `k × p` table of per-(j, h) column sums.
    pub fn new(k: usize, p: usize, sums: Vec<f64>) -> Result<Self> {
        if k == 0 || p == 0 {
            return Err(Error::invalid("column stats need k >= 1 and p >= 1"));
        }
        if sums.len() != k * p {
            return Err(Error::dims(format!(
                "expected {} column sums, got {}",
                k * p,
                sums.len()
            )));
        }
        if sums.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::invalid("column sums must be finite and >= 0"));
        }
        Ok(ColumnStats { k, p, sums })
    }

    /// Block design: row j of `Z_i` carries `X_i` in block j and zeros elsewhere.
    pub fn from_design(design: &DesignSet) -> Self {
        let (k, m) = (design.k(), design.m());
        let p = k * m;
        let x = design.x();
        let mut sums = vec![0.0; k * p];
        for c in 0..m {
            let col: f64 = x.column(c).iter().map(|v| v * v).sum();
            for j in 0..k {
                sums[j * p + j * m + c] = col;
            }
        }
        ColumnStats { k, p, sums }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn column_sum(&self, j: usize, h: usize) -> f64 {
        self.sums[j * self.p + h]
    }

    /// `max_h Σ_{i,j} Z_{ijh}²`.
    pub fn max_col_total(&self) -> f64 {
        (0..self.p)
            .map(|h| (0..self.k).map(|j| self.column_sum(j, h)).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `Σ_j max_h Σ_i Z_{ijh}²`.
    pub fn sum_j_max_h(&self) -> f64 {
        (0..self.k)
            .map(|j| {
                self.sums[j * self.p..(j + 1) * self.p]
                    .iter()
                    .copied()
                    .fold(0.0, f64::max)
            })
            .sum()
    }
}

/// The constants of a stochastic Lipschitz theorem, local or global form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipConstants {
    pub global: bool,
    pub k: usize,
    pub f1: f64,
    pub f2: f64,
    pub m_z: f64,
    pub r_d: f64,
    pub beta: f64,
    pub phi: f64,
    pub psi: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

fn check_inputs(f1: f64, f2: f64, m_z: f64, r_d: f64, k: usize) -> Result<()> {
    require_nonneg("F1", f1)?;
    require_nonneg("F2", f2)?;
    require_nonneg("M_Z", m_z)?;
    require_nonneg("R_D", r_d)?;
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn finish(
    global: bool,
    f1: f64,
    f2: f64,
    m_z: f64,
    r_d: f64,
    k: usize,
    beta: f64,
    phi: f64,
    psi: f64,
) -> LipConstants {
    let s = (2.0 * k as f64).sqrt();
    LipConstants {
        global,
        k,
        f1,
        f2,
        m_z,
        r_d,
        beta,
        phi,
        psi,
        a: 4.0 * s * r_d * psi,
        b: s * phi,
        c: 8.0 * k as f64 * phi,
    }
}

/// φ, ψ, A, B, C for the local (fixed θ) theorem.
pub fn local_lip_constants(f1: f64, f2: f64, m_z: f64, r_d: f64, k: usize) -> Result<LipConstants> {
    check_inputs(f1, f2, m_z, r_d, k)?;
    let b = beta(k)? as f64;
    let phi = m_z * (2.0 * f1).min(f2 * m_z * r_d);
    let psi = k as f64 * b * m_z * f2;
    Ok(finish(false, f1, f2, m_z, r_d, k, b, phi, psi))
}

/// φ̄, ψ̄, Ā, B̄, C̄ for the global (pairs u, v) theorem.
pub fn global_lip_constants(
    f1: f64,
    f2: f64,
    m_z: f64,
    r_d: f64,
    k: usize,
) -> Result<LipConstants> {
    check_inputs(f1, f2, m_z, r_d, k)?;
    let b = beta(2 * k)? as f64;
    let phi = 2.0 * m_z * f1.min(f2 * m_z * r_d);
    let psi = 2.0 * k as f64 * b * m_z * f2;
    Ok(finish(true, f1, f2, m_z, r_d, k, b, phi, psi))
}

impl LipConstants {
    fn suffix(&self) -> &'static str {
        if self.global {
            "_bar"
        } else {
            ""
        }
    }

    /// One report per constant.
    pub fn reports(&self) -> Result<Vec<BoundReport>> {
        let sfx = self.suffix();
        let base = [
            ("F1", self.f1),
            ("F2", self.f2),
            ("M_Z", self.m_z),
            ("R_D", self.r_d),
            ("k", self.k as f64),
        ];
        let (phi_f, psi_f, beta_name) = if self.global {
            (
                "phi_bar = 2 M_Z min(F1, F2 M_Z R_D)",
                "psi_bar = 2 k beta_2k M_Z F2",
                "beta_2k",
            )
        } else {
            (
                "phi = M_Z min(2 F1, F2 M_Z R_D)",
                "psi = k beta_k M_Z F2",
                "beta_k",
            )
        };
        let mut psi_inputs = base.to_vec();
        psi_inputs.push((beta_name, self.beta));
        let phi_name = format!("phi{sfx}");
        let psi_name = format!("psi{sfx}");
        Ok(vec![
            BoundReport::new(
                beta_name,
                "3^k + 3^(k-1) - 2^k",
                &[("k", self.k as f64)],
                self.beta,
            )?,
            BoundReport::new(&phi_name, phi_f, &base, self.phi)?,
            BoundReport::new(&psi_name, psi_f, &psi_inputs, self.psi)?,
            BoundReport::new(
                &format!("A{sfx}"),
                "4 sqrt(2k) R_D psi",
                &[
                    ("k", self.k as f64),
                    ("R_D", self.r_d),
                    (psi_name.as_str(), self.psi),
                ],
                self.a,
            )?,
            BoundReport::new(
                &format!("B{sfx}"),
                "sqrt(2k) phi",
                &[("k", self.k as f64), (phi_name.as_str(), self.phi)],
                self.b,
            )?,
            BoundReport::new(
                &format!("C{sfx}"),
                "8 k phi",
                &[("k", self.k as f64), (phi_name.as_str(), self.phi)],
                self.c,
            )?,
        ])
    }
}

fn tail_value(stats: &ColumnStats, c: &LipConstants, q: f64) -> f64 {
    let p = stats.p() as f64;
    let lpq = (p / q).ln();
    c.a * ((2.0 * p).ln() * stats.sum_j_max_h()).sqrt()
        + c.b * (lpq * stats.max_col_total()).sqrt()
        + c.c * lpq
}

fn check_k(stats: &ColumnStats, c: &LipConstants) -> Result<()> {
    if stats.k() != c.k {
        return Err(Error::dims(format!(
            "column stats have k = {}, constants have k = {}",
            stats.k(),
            c.k
        )));
    }
    Ok(())
}

fn tail_inputs(stats: &ColumnStats, c: &LipConstants, q: f64) -> Vec<(&'static str, f64)> {
    vec![
        ("A", c.a),
        ("B", c.b),
        ("C", c.c),
        ("p", stats.p() as f64),
        ("q", q),
        ("sum_j_max_h_col", stats.sum_j_max_h()),
        ("max_h_col_total", stats.max_col_total()),
    ]
}

/// Level-q threshold for `sup_u ‖ξ(u)‖∞` (local) or `sup_{u,v} ‖ξ(u, v)‖∞` (global).
pub fn local_tail_threshold(
    stats: &ColumnStats,
    consts: &LipConstants,
    q: f64,
) -> Result<BoundReport> {
    require_probability("q", q)?;
    check_k(stats, consts)?;
    let (name, formula) = if consts.global {
        ("global_tail", "A_bar sqrt(ln(2p) sum_j max_h sum_i Z^2) + B_bar sqrt(ln(p/q) max_h sum_ij Z^2) + C_bar ln(p/q)")
    } else {
        (
            "local_tail",
            "A sqrt(ln(2p) sum_j max_h sum_i Z^2) + B sqrt(ln(p/q) max_h sum_ij Z^2) + C ln(p/q)",
        )
    };
    BoundReport::new(
        name,
        formula,
        &tail_inputs(stats, consts, q),
        tail_value(stats, consts, q),
    )
}

fn lip_threshold(
    name: &str,
    formula: &str,
    stats: &ColumnStats,
    consts: &LipConstants,
    q: f64,
    q_prime: f64,
) -> Result<BoundReport> {
    require_probability("q", q)?;
    require_probability("q'", q_prime)?;
    if q + q_prime >= 1.0 {
        return Err(Error::invalid(format!(
            "q + q' must be < 1 (got {})",
            q + q_prime
        )));
    }
    check_k(stats, consts)?;
    let p = stats.p() as f64;
    let lead = (2.0 * consts.k as f64).sqrt()
        * consts.f1
        * ((2.0 * p / q_prime).ln() * stats.max_col_total()).sqrt();
    let mut inputs = tail_inputs(stats, consts, q);
    inputs.extend([("F1", consts.f1), ("k", consts.k as f64), ("q'", q_prime)]);
    BoundReport::new(name, formula, &inputs, lead + tail_value(stats, consts, q))
}

/// Confidence `1 − q − q′` bound on the local stochastic Lipschitz coefficient at θ.
pub fn local_lip_threshold(
    stats: &ColumnStats,
    consts: &LipConstants,
    q: f64,
    q_prime: f64,
) -> Result<BoundReport> {
    if consts.global {
        return Err(Error::invalid("local threshold needs local constants"));
    }
    lip_threshold(
        "local_lip",
        "sqrt(2k) F1 sqrt(ln(2p/q') max_h sum_ij Z^2) + A sqrt(ln(2p) sum_j max_h sum_i Z^2) \
         + B sqrt(ln(p/q) max_h sum_ij Z^2) + C ln(p/q)",
        stats,
        consts,
        q,
        q_prime,
    )
}

/// Confidence `1 − q − q′` bound on the global stochastic Lipschitz coefficient.
pub fn global_lip_threshold(
    stats: &ColumnStats,
    consts: &LipConstants,
    q: f64,
    q_prime: f64,
) -> Result<BoundReport> {
    if !consts.global {
        return Err(Error::invalid("global threshold needs global constants"));
    }
    lip_threshold(
        "global_lip",
        "sqrt(2k) F1 sqrt(ln(2p/q') max_h sum_ij Z^2) + A_bar sqrt(ln(2p) sum_j max_h sum_i Z^2) \
         + B_bar sqrt(ln(p/q) max_h sum_ij Z^2) + C_bar ln(p/q)",
        stats,
        consts,
        q,
        q_prime,
    )
}
