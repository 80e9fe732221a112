//! Design diagnostics: sparse spectral norms and the restricted eigenvalue
//! constant.

mod restricted;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ParamVector;

pub use restricted::{kappa_re, project_l1_ball, REEstimate, SearchMethod};

/// Default cap on the number of supports enumerated by [`sigma_xl`].
pub const SUPPORT_CAP: u128 = 1_000_000;

pub(crate) fn binomial(n: usize, r: usize) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut c: u128 = 1;
    for i in 0..r {
        c = c.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    c
}

/// Advances `idx` to the next r-combination of `0..n` in lexicographic order.
pub(crate) fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let r = idx.len();
    let mut i = r;
    while i > 0 {
        i -= 1;
        if idx[i] < n - r + i {
            idx[i] += 1;
            for j in i + 1..r {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// `σ_{X,l}`: the largest `‖Xv‖₂/‖v‖₂` over `v` with `1 ≤ |supp v| ≤ l`.
///
/// Enumerates every support of size exactly `l`; adding columns never lowers
/// the top singular value, so smaller supports are covered.
pub fn sigma_xl(x: &Array2<f64>, l: usize) -> Result<f64> {
    sigma_xl_capped(x, l, SUPPORT_CAP)
}

pub fn sigma_xl_capped(x: &Array2<f64>, l: usize, cap: u128) -> Result<f64> {
    let m = x.ncols();
    if l == 0 || l > m {
        return Err(Error::invalid(format!(
            "support size l must lie in 1..={m} (got {l})"
        )));
    }
    let needed = binomial(m, l);
    if needed > cap {
        return Err(Error::CapExceeded {
            what: "supports for sigma_Xl".into(),
            needed,
            cap,
        });
    }
    let gram = x.t().dot(x);
    if l == 1 {
        return Ok((0..m).map(|c| gram[[c, c]]).fold(0.0, f64::max).sqrt());
    }
    let mut idx: Vec<usize> = (0..l).collect();
    let mut best = 0.0f64;
    let mut sub = nalgebra::DMatrix::<f64>::zeros(l, l);
    loop {
        for (a, &ca) in idx.iter().enumerate() {
            for (b, &cb) in idx.iter().enumerate() {
                sub[(a, b)] = gram[[ca, cb]];
            }
        }
        let top = nalgebra::SymmetricEigen::new(sub.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(0.0, f64::max);
        best = best.max(top);
        if !next_combination(&mut idx, m) {
            break;
        }
    }
    Ok(best.sqrt())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportStats {
    /// `S = max_j |supp(θ_j)|`.
    pub s: usize,
    pub block_supports: Vec<Vec<usize>>,
}

pub fn support_stats(theta: &ParamVector) -> SupportStats {
    let block_supports = theta.block_supports();
    let s = block_supports.iter().map(Vec::len).max().unwrap_or(0);
    SupportStats { s, block_supports }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn sigma_examples() {
        assert_eq!(sigma_xl(&Array2::eye(2), 1).unwrap(), 1.0);
        let x = array![[3.0, 0.0], [4.0, 0.0], [0.0, 1.0]];
        assert_eq!(sigma_xl(&x, 1).unwrap(), 5.0);
    }

    #[test]
    fn full_support_is_spectral_norm() {
        let d = crate::model::DesignSet::gaussian(9, 4, 1, 2).unwrap();
        let x = d.x();
        let full = sigma_xl(x, 4).unwrap();
        let g = x.t().dot(x);
        let gm = nalgebra::DMatrix::from_fn(4, 4, |a, b| g[[a, b]]);
        let top = crate::stats::symmetric_eigenvalues(&gm)[3].sqrt();
        assert!((full - top).abs() <= 1e-12 * top);
    }

    #[test]
    fn sigma_monotone_and_above_column_norms() {
        let d = crate::model::DesignSet::gaussian(12, 6, 1, 8).unwrap();
        let x = d.x();
        let vals: Vec<f64> = (1..=6).map(|l| sigma_xl(x, l).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[0] <= w[1] * (1.0 + 1e-14)));
        let max_col = (0..6)
            .map(|c| x.column(c).dot(&x.column(c)).sqrt())
            .fold(0.0, f64::max);
        assert!((vals[0] - max_col).abs() <= 1e-12 * max_col);
    }

    #[test]
    fn cap_enforced() {
        let x = Array2::<f64>::zeros((2, 30));
        assert!(matches!(
            sigma_xl_capped(&x, 15, 1000),
            Err(Error::CapExceeded { .. })
        ));
        assert!(sigma_xl(&x, 0).is_err());
    }

    #[test]
    fn combinations_enumerated_once() {
        let mut idx = vec![0, 1, 2];
        let mut count = 1;
        while next_combination(&mut idx, 6) {
            count += 1;
        }
        assert_eq!(count as u128, binomial(6, 3));
        assert_eq!(binomial(40, 20), 137_846_528_820);
    }

    #[test]
    fn support_examples() {
        assert_eq!(support_stats(&ParamVector::zeros(2, 3)).s, 0);
        let t = ParamVector::from_blocks(&[vec![1.0, 0.0, 2.0], vec![0.0, -1.0, 0.0]]).unwrap();
        let st = support_stats(&t);
        assert_eq!(st.s, 2);
        assert_eq!(st.block_supports, vec![vec![0, 2], vec![1]]);
        let p = ParamVector::from_blocks(&[vec![2.0, 1.0, 0.0], vec![-1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(support_stats(&p).s, 2);
    }
}
