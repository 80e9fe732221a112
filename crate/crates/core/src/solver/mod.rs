//! Proximal gradient for `f(u) + λ‖u‖₁` over a box, with backtracking.
//!
//! For non-convex `f` the returned point is stationary, not necessarily a
//! global minimizer; [`solve_with_restarts`] runs several starts and keeps the
//! best objective.

mod fit;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BoxDomain;
use crate::rng;

pub use fit::{fit_multi_lasso, MultiLassoFit, Sparsity};

/// A differentiable objective on `ℝ^dim`.
pub trait Objective: Sync {
    fn dim(&self) -> usize;

    fn value(&self, u: &[f64]) -> f64;

    /// Writes `∇f(u)` into `grad` and returns `f(u)`.
    fn value_and_gradient(&self, u: &[f64], grad: &mut [f64]) -> f64;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub max_iters: usize,
    pub tol_kkt: f64,
    pub initial_step: f64,
    pub backtrack_factor: f64,
    /// Starting point; the box center when absent.
    pub init_point: Option<Vec<f64>>,
    pub record_trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 10_000,
            tol_kkt: 1e-7,
            initial_step: 1.0,
            backtrack_factor: 0.5,
            init_point: None,
            record_trace: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_kkt.is_finite() && self.tol_kkt > 0.0) {
            return Err(Error::invalid(format!(
                "tol_kkt must be > 0 (got {})",
                self.tol_kkt
            )));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::invalid(format!(
                "backtrack_factor must lie in (0, 1) (got {})",
                self.backtrack_factor
            )));
        }
        if !(self.initial_step.is_finite() && self.initial_step > 0.0) {
            return Err(Error::invalid(format!(
                "initial_step must be > 0 (got {})",
                self.initial_step
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub theta_hat: Vec<f64>,
    /// `f(θ̂) + λ‖θ̂‖₁`.
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Penalized objective after every accepted step, starting at the initial point.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<f64>>,
}

fn soft(x: f64, s: f64) -> f64 {
    x.signum() * (x.abs() - s).max(0.0)
}

fn prox_into(v: &[f64], threshold: f64, lo: &[f64], hi: &[f64], out: &mut [f64]) {
    for h in 0..v.len() {
        out[h] = soft(v[h], threshold).clamp(lo[h], hi[h]);
    }
}

/// Minimizer of `½(x − v)² + t|x|` over `[lo, hi]`, coordinatewise.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn prox_l1_box(v: &[f64], threshold: f64, lo: &[f64], hi: &[f64]) -> Result<Vec<f64>> {
    if v.len() != lo.len() || v.len() != hi.len() {
        return Err(Error::dims(format!(
            "prox inputs of lengths {}, {}, {}",
            v.len(),
            lo.len(),
            hi.len()
        )));
    }
    if !(threshold >= 0.0) {
        return Err(Error::invalid(format!(
            "prox threshold must be >= 0 (got {threshold})"
        )));
    }
    if let Some(h) = (0..lo.len()).find(|&h| !(lo[h] <= hi[h])) {
        return Err(Error::invalid(format!(
            "box bound lo > hi at coordinate {h}"
        )));
    }
    let mut out = vec![0.0; v.len()];
    prox_into(v, threshold, lo, hi, &mut out);
    Ok(out)
}

fn l1(u: &[f64]) -> f64 {
    u.iter().map(|x| x.abs()).sum()
}

fn kkt_residual(
    u: &[f64],
    grad: &[f64],
    lambda: f64,
    lo: &[f64],
    hi: &[f64],
    scratch: &mut [f64],
) -> f64 {
    for h in 0..u.len() {
        scratch[h] = soft(u[h] - grad[h], lambda).clamp(lo[h], hi[h]);
    }
    u.iter()
        .zip(scratch.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

const MIN_STEP: f64 = 1e-30;
const MAX_STEP: f64 = 1e30;

pub fn solve(
    f: &dyn Objective,
    lambda: f64,
    domain: &BoxDomain,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    opts.validate()?;
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::invalid(format!(
            "lambda must be finite and >= 0 (got {lambda})"
        )));
    }
    let p = f.dim();
    if domain.dim() != p {
        return Err(Error::dims(format!(
            "domain has dimension {}, objective {}",
            domain.dim(),
            p
        )));
    }
    let (lo, hi) = (domain.lo(), domain.hi());
    let mut u = match &opts.init_point {
        Some(x) if x.len() != p => {
            return Err(Error::dims(format!(
                "init point has length {}, expected {p}",
                x.len()
            )));
        }
        Some(x) => domain.project(x),
        None => domain.center(),
    };
    let mut grad = vec![0.0; p];
    let mut smooth = f.value_and_gradient(&u, &mut grad);
    if !smooth.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite(
            "objective or gradient at the initial point".into(),
        ));
    }
    let mut total = smooth + lambda * l1(&u);
    let mut trace = opts.record_trace.then(|| vec![total]);
    let mut scratch = vec![0.0; p];
    let mut trial = vec![0.0; p];
    let mut grad_trial = vec![0.0; p];
    let mut step = opts.initial_step;
    let mut iterations = 0;
    let mut kkt = kkt_residual(&u, &grad, lambda, lo, hi, &mut scratch);

    while kkt > opts.tol_kkt && iterations < opts.max_iters {
        let mut first_try = true;
        let accepted = loop {
            for h in 0..p {
                scratch[h] = u[h] - step * grad[h];
            }
            prox_into(&scratch, step * lambda, lo, hi, &mut trial);
            let mut lin = 0.0;
            let mut sq = 0.0;
            for h in 0..p {
                let d = trial[h] - u[h];
                lin += grad[h] * d;
                sq += d * d;
            }
            let candidate = f.value_and_gradient(&trial, &mut grad_trial);
            if candidate.is_finite() && candidate <= smooth + lin + sq / (2.0 * step) {
                break Some(candidate);
            }
            first_try = false;
            step *= opts.backtrack_factor;
            if step < MIN_STEP {
                break None;
            }
        };
        let Some(new_smooth) = accepted else { break };
        if grad_trial.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!(
                "objective or gradient at iteration {iterations}"
            )));
        }
        let new_total = new_smooth + lambda * l1(&trial);
        // A rounding-level increase means the iteration has hit machine precision.
        if new_total > total {
            break;
        }
        std::mem::swap(&mut u, &mut trial);
        std::mem::swap(&mut grad, &mut grad_trial);
        smooth = new_smooth;
        debug_assert!(
            new_total <= total,
            "objective increased: {total} -> {new_total}"
        );
        total = new_total;
        if let Some(t) = trace.as_mut() {
            t.push(total);
        }
        iterations += 1;
        if first_try {
            step = (step / opts.backtrack_factor).min(MAX_STEP);
        }
        kkt = kkt_residual(&u, &grad, lambda, lo, hi, &mut scratch);
    }

    Ok(SolveResult {
        theta_hat: u,
        objective: total,
        kkt_residual: kkt,
        iterations,
        converged: kkt <= opts.tol_kkt,
        trace,
    })
}

/// Solves from the configured start plus `restarts` uniform random starts in
/// the box, in parallel, and keeps the lowest objective (earliest start on ties).
pub fn solve_with_restarts(
    f: &dyn Objective,
    lambda: f64,
    domain: &BoxDomain,
    opts: &SolverOptions,
    restarts: usize,
    seed: u64,
) -> Result<SolveResult> {
    let runs: Vec<Result<SolveResult>> = (0..=restarts)
        .into_par_iter()
        .map(|r| {
            let mut o = opts.clone();
            if r > 0 {
                let mut g = rng::stream(seed, rng::purpose::RESTART, r as u64);
                o.init_point = Some(domain.sample_uniform(&mut g));
            }
            solve(f, lambda, domain, &o)
        })
        .collect();
    let mut best: Option<SolveResult> = None;
    for run in runs {
        let run = run?;
        if best.as_ref().is_none_or(|b| run.objective < b.objective) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one start"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Quadratic {
        center: Vec<f64>,
        scale: Vec<f64>,
    }

    impl Objective for Quadratic {
        fn dim(&self) -> usize {
            self.center.len()
        }
        fn value(&self, u: &[f64]) -> f64 {
            u.iter()
                .zip(&self.center)
                .zip(&self.scale)
                .map(|((x, a), s)| 0.5 * s * (x - a).powi(2))
                .sum()
        }
        fn value_and_gradient(&self, u: &[f64], grad: &mut [f64]) -> f64 {
            for h in 0..u.len() {
                grad[h] = self.scale[h] * (u[h] - self.center[h]);
            }
            self.value(u)
        }
    }

    /// `½‖y − Xu‖²` with `X` given column-major.
    struct LeastSquares {
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
    }

    impl LeastSquares {
        fn residual(&self, u: &[f64]) -> Vec<f64> {
            let mut r = self.y.clone();
            for (c, col) in self.x.iter().enumerate() {
                for (i, v) in col.iter().enumerate() {
                    r[i] -= v * u[c];
                }
            }
            r
        }
    }

    impl Objective for LeastSquares {
        fn dim(&self) -> usize {
            self.x.len()
        }
        fn value(&self, u: &[f64]) -> f64 {
            0.5 * self.residual(u).iter().map(|r| r * r).sum::<f64>()
        }
        fn value_and_gradient(&self, u: &[f64], grad: &mut [f64]) -> f64 {
            let r = self.residual(u);
            for (c, col) in self.x.iter().enumerate() {
                grad[c] = -col.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>();
            }
            0.5 * r.iter().map(|r| r * r).sum::<f64>()
        }
    }

    #[test]
    fn prox_examples() {
        assert_eq!(
            prox_l1_box(&[3.0], 1.0, &[-2.0], &[2.0]).unwrap(),
            vec![2.0]
        );
        assert_eq!(
            prox_l1_box(&[-0.5], 1.0, &[-2.0], &[2.0]).unwrap(),
            vec![0.0]
        );
        assert_eq!(prox_l1_box(&[5.0], 1.0, &[0.0], &[3.0]).unwrap(), vec![3.0]);
        assert!(prox_l1_box(&[0.0], 1.0, &[1.0], &[0.0]).is_err());
        assert!(prox_l1_box(&[0.0], -1.0, &[0.0], &[1.0]).is_err());
    }

    #[test]
    fn prox_matches_grid_argmin() {
        let mut r = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let v: f64 = r.random_range(-4.0..4.0);
            let t: f64 = r.random_range(0.0..2.0);
            let a: f64 = r.random_range(-3.0..3.0);
            let b: f64 = a + r.random_range(0.0..3.0);
            let got = prox_l1_box(&[v], t, &[a], &[b]).unwrap()[0];
            let steps = ((b - a) / 1e-4).ceil() as usize;
            let (mut best, mut arg) = (f64::INFINITY, a);
            for g in 0..=steps {
                let x = (a + g as f64 * 1e-4).min(b);
                let obj = 0.5 * (x - v).powi(2) + t * x.abs();
                if obj < best {
                    best = obj;
                    arg = x;
                }
            }
            assert!(
                (got - arg).abs() <= 1e-4,
                "v={v} t={t} [{a},{b}] got {got} grid {arg}"
            );
        }
    }

    #[test]
    fn unpenalized_quadratic_reaches_center() {
        let f = Quadratic {
            center: vec![0.3, -1.2, 2.0],
            scale: vec![1.0; 3],
        };
        let d = BoxDomain::symmetric(3, 5.0).unwrap();
        let r = solve(&f, 0.0, &d, &SolverOptions::default()).unwrap();
        assert!(r.converged);
        for (a, b) in r.theta_hat.iter().zip(&f.center) {
            assert!((a - b).abs() <= 1e-6);
        }
    }

    #[test]
    fn orthogonal_design_matches_soft_threshold() {
        let design = crate::model::DesignSet::orthogonalized(64, 5, 1, 3).unwrap();
        let x = design.x();
        let n = x.nrows();
        let mut r = ChaCha8Rng::seed_from_u64(5);
        let truth = [1.5, 0.0, -0.7, 0.05, 0.0];
        let y: Vec<f64> = (0..n)
            .map(|i| (0..5).map(|c| x[[i, c]] * truth[c]).sum::<f64>() + r.random_range(-1.0..1.0))
            .collect();
        let f = LeastSquares {
            x: (0..5).map(|c| x.column(c).to_vec()).collect(),
            y: y.clone(),
        };
        let lambda = 6.0;
        let d = BoxDomain::symmetric(5, 10.0).unwrap();
        let opts = SolverOptions {
            tol_kkt: 1e-10,
            ..Default::default()
        };
        let sol = solve(&f, lambda, &d, &opts).unwrap();
        assert!(sol.converged);
        for c in 0..5 {
            let xty: f64 = (0..n).map(|i| x[[i, c]] * y[i]).sum();
            let closed = soft(xty, lambda) / n as f64;
            assert!(
                (sol.theta_hat[c] - closed).abs() <= 1e-6,
                "coord {c}: {} vs {closed}",
                sol.theta_hat[c]
            );
        }
    }

    #[test]
    fn large_lambda_gives_zero() {
        let f = Quadratic {
            center: vec![0.5, -0.4],
            scale: vec![2.0, 1.0],
        };
        let d = BoxDomain::new(vec![-1.0, -2.0], vec![3.0, 2.0]).unwrap();
        let r = solve(
            &f,
            5.0,
            &d,
            &SolverOptions {
                init_point: Some(vec![2.0, 1.0]),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(r.theta_hat, vec![0.0, 0.0]);
    }

    #[test]
    fn box_is_respected_and_trace_monotone() {
        let f = Quadratic {
            center: vec![4.0, -3.0, 0.2],
            scale: vec![1.0, 3.0, 0.5],
        };
        let d = BoxDomain::new(vec![-1.0, -1.0, 0.5], vec![1.0, 1.0, 2.0]).unwrap();
        let r = solve(
            &f,
            0.1,
            &d,
            &SolverOptions {
                record_trace: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(d.contains(&r.theta_hat));
        assert_eq!(r.theta_hat, vec![1.0, -1.0, 0.5]);
        let t = r.trace.unwrap();
        assert!(t.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn two_inits_agree_on_convex_problem() {
        let f = Quadratic {
            center: vec![0.9, -0.2, 0.05, 3.0],
            scale: vec![1.0, 4.0, 0.3, 2.0],
        };
        let d = BoxDomain::symmetric(4, 2.0).unwrap();
        let opts = SolverOptions::default();
        let a = solve(
            &f,
            0.3,
            &d,
            &SolverOptions {
                init_point: Some(vec![2.0, 2.0, -2.0, -2.0]),
                ..opts.clone()
            },
        )
        .unwrap();
        let b = solve(&f, 0.3, &d, &opts).unwrap();
        assert!((a.objective - b.objective).abs() <= 10.0 * opts.tol_kkt);
    }

    #[test]
    fn max_iters_returns_partial() {
        let f = Quadratic {
            center: vec![1.0; 3],
            scale: vec![1.0, 1e-4, 1e4],
        };
        let d = BoxDomain::symmetric(3, 5.0).unwrap();
        let r = solve(
            &f,
            0.0,
            &d,
            &SolverOptions {
                max_iters: 2,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 2);
    }

    #[test]
    fn bad_options_rejected() {
        let f = Quadratic {
            center: vec![1.0],
            scale: vec![1.0],
        };
        let d = BoxDomain::symmetric(1, 1.0).unwrap();
        assert!(solve(
            &f,
            0.0,
            &d,
            &SolverOptions {
                tol_kkt: 0.0,
                ..Default::default()
            }
        )
        .is_err());
        assert!(solve(
            &f,
            0.0,
            &d,
            &SolverOptions {
                backtrack_factor: 1.0,
                ..Default::default()
            }
        )
        .is_err());
        assert!(solve(&f, -1.0, &d, &SolverOptions::default()).is_err());
        assert!(solve(
            &f,
            0.0,
            &BoxDomain::symmetric(2, 1.0).unwrap(),
            &SolverOptions::default()
        )
        .is_err());
    }

    #[test]
    fn restarts_are_deterministic() {
        let f = Quadratic {
            center: vec![0.4, -0.1],
            scale: vec![1.0, 2.0],
        };
        let d = BoxDomain::symmetric(2, 1.0).unwrap();
        let a = solve_with_restarts(&f, 0.05, &d, &SolverOptions::default(), 4, 9).unwrap();
        let b = solve_with_restarts(&f, 0.05, &d, &SolverOptions::default(), 4, 9).unwrap();
        assert_eq!(a, b);
        assert_relative_eq!(a.theta_hat[0], 0.35, epsilon = 1e-6);
    }
}
