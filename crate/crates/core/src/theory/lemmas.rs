use super::{require_nonneg, BoundReport};
use crate::error::{Error, Result};

/// `a + b(√ln d + 1) + c(ln d + 1)`: mean of a maximum whose tail is sub-Gaussian
/// plus sub-exponential.
pub fn mean_max_bound(a: f64, b: f64, c: f64, d: f64) -> Result<BoundReport> {
    require_nonneg("a", a)?;
    require_nonneg("b", b)?;
    require_nonneg("c", c)?;
    if !(d.is_finite() && d >= 1.0) {
        return Err(Error::invalid(format!("d must be >= 1 (got {d})")));
    }
    let ld = d.ln();
    BoundReport::new(
        "mean_max",
        "a + b (sqrt(ln d) + 1) + c (ln d + 1)",
        &[("a", a), ("b", b), ("c", c), ("d", d)],
        a + b * (ld.sqrt() + 1.0) + c * (ld + 1.0),
    )
}

/// `max_a ‖a‖₂ √(2 ln(2|A|))` for a finite set of vectors.
pub fn massart_bound(vectors: &[Vec<f64>]) -> Result<BoundReport> {
    if vectors.is_empty() {
        return Err(Error::invalid("massart bound needs a nonempty set"));
    }
    let mut r = 0.0f64;
    for v in vectors {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(
                "massart vector has a non-finite entry".into(),
            ));
        }
        r = r.max(v.iter().map(|x| x * x).sum::<f64>().sqrt());
    }
    let size = vectors.len() as f64;
    BoundReport::new(
        "massart",
        "max_a ||a||_2 sqrt(2 ln(2|A|))",
        &[("max_norm", r), ("set_size", size)],
        r * (2.0 * (2.0 * size).ln()).sqrt(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn mean_max_cases() {
        assert_eq!(mean_max_bound(1.0, 2.0, 3.0, 1.0).unwrap().value, 6.0);
        assert_eq!(mean_max_bound(1.5, 0.0, 0.0, 40.0).unwrap().value, 1.5);
        assert_relative_eq!(
            mean_max_bound(0.0, 1.0, 1.0, 1f64.exp()).unwrap().value,
            4.0,
            epsilon = 1e-15
        );
        assert!(mean_max_bound(0.0, 1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn massart_cases() {
        let b = massart_bound(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_relative_eq!(b.value, 1.6651092223153954, max_relative = 1e-15);
        assert_eq!(massart_bound(&[vec![0.0; 3]]).unwrap().value, 0.0);
        assert!(massart_bound(&[]).is_err());
    }

    proptest! {
        #[test]
        fn massart_homogeneous(
            set in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 4), 1..6),
            c in -4.0f64..4.0,
        ) {
            let base = massart_bound(&set).unwrap().value;
            let scaled: Vec<Vec<f64>> = set.iter().map(|v| v.iter().map(|x| c * x).collect()).collect();
            let got = massart_bound(&scaled).unwrap().value;
            prop_assert!((got - c.abs() * base).abs() <= 1e-12 * (1.0 + base));
        }
    }
}
