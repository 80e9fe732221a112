use ndarray::{Array2, ArrayView1};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng;

/// Covariates `X₁ … X_N ∈ ℝᵐ` together with the number `k` of linear
/// combinations. The observation matrices are block diagonal,
///
/// ```text
/// Z_i = diag(X_iᵀ, …, X_iᵀ) ∈ ℝ^{k×p},   p = k·m,
/// ```
///
/// so `Z_i u = (X_iᵀu_1, …, X_iᵀu_k)` for `u` the concatenation of `k` blocks.
/// `Z_i` is never stored.
#[derive(Clone, Debug)]
pub struct DesignSet {
    x: Array2<f64>,
    k: usize,
}

impl DesignSet {
    pub fn new(x: Array2<f64>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k must be >= 1"));
        }
        if x.ncols() == 0 {
            return Err(Error::invalid("design must have at least one column"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design matrix".into()));
        }
        Ok(DesignSet { x, k })
    }

    pub fn from_rows(rows: &[Vec<f64>], k: usize) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::dims("design rows have unequal lengths"));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let x = Array2::from_shape_vec((n, m), flat).map_err(|e| Error::dims(e.to_string()))?;
        Self::new(x, k)
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Covariate dimension.
    pub fn m(&self) -> usize {
        self.x.ncols()
    }

    /// Parameter dimension `k·m`.
    pub fn p(&self) -> usize {
        self.k * self.m()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.x.row(i)
    }

    /// `M_Z`: for block designs the row sup-norms of every `Z_i` are the
    /// entry sup-norm of `X`.
    pub fn m_z(&self) -> f64 {
        self.x.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// `Z_i u`, written into `out` (length `k`).
    pub fn predictor(&self, i: usize, u: &[f64], out: &mut [f64]) {
        let m = self.m();
        let row = self.x.row(i);
        for (j, o) in out.iter_mut().enumerate().take(self.k) {
            *o = row
                .iter()
                .zip(&u[j * m..(j + 1) * m])
                .map(|(a, b)| a * b)
                .sum();
        }
    }

    /// `grad += Z_iᵀ g` for `g ∈ ℝᵏ`.
    pub fn add_transpose(&self, i: usize, g: &[f64], grad: &mut [f64]) {
        let m = self.m();
        let row = self.x.row(i);
        for (j, &gj) in g.iter().enumerate().take(self.k) {
            if gj == 0.0 {
                continue;
            }
            for (acc, &xv) in grad[j * m..(j + 1) * m].iter_mut().zip(row.iter()) {
                *acc += gj * xv;
            }
        }
    }

    /// Entry `Z_{ijh}`.
    pub fn z_entry(&self, i: usize, j: usize, h: usize) -> f64 {
        let m = self.m();
        if h / m == j {
            self.x[(i, h % m)]
        } else {
            0.0
        }
    }

    /// Materialize `Z_i` as a `k × p` matrix.
    pub fn z_matrix(&self, i: usize) -> Array2<f64> {
        let m = self.m();
        let mut z = Array2::zeros((self.k, self.p()));
        for j in 0..self.k {
            for h in 0..m {
                z[(j, j * m + h)] = self.x[(i, h)];
            }
        }
        z
    }

    /// I.i.d. standard normal design.
    pub fn gaussian(n: usize, m: usize, k: usize, seed: u64) -> Result<Self> {
        let mut r = rng::stream(seed, rng::purpose::DESIGN, 0);
        let x = Array2::from_shape_fn((n, m), |_| StandardNormal.sample(&mut r));
        Self::new(x, k)
    }

    /// Gaussian design with columns orthogonalized (modified Gram–Schmidt) and
    /// rescaled so that `XᵀX = N·I`. Needs `n >= m`.
    pub fn orthogonalized(n: usize, m: usize, k: usize, seed: u64) -> Result<Self> {
        if n < m {
            return Err(Error::invalid(format!(
                "orthogonal design needs n >= m (got n={n}, m={m})"
            )));
        }
        let mut x = Self::gaussian(n, m, k, seed)?.x;
        let scale = (n as f64).sqrt();
        for c in 0..m {
            for prev in 0..c {
                let dot = x.column(c).dot(&x.column(prev)) / (n as f64);
                let p = x.column(prev).to_owned();
                x.column_mut(c).scaled_add(-dot, &p);
            }
            let norm = x.column(c).dot(&x.column(c)).sqrt();
            if norm < 1e-10 {
                return Err(Error::IllPosed(
                    "degenerate column during orthogonalization".into(),
                ));
            }
            x.column_mut(c).mapv_inplace(|v| v * scale / norm);
        }
        Self::new(x, k)
    }
}
