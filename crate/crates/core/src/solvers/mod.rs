//! Iterative shrinkage solvers for basis pursuit denoising,
//!
//! ```text
//! minimize  1/2 ||D x - p||_2^2 + mu ||x||_1
//! ```
//!
//! All solvers share one calling convention ([`solve`]) and one stopping
//! rule: a solve ends once `||x_{k+1} - x_k||_2 <= eps_rel ||x_k||_2`, or
//! after `max_iters` iterations. When `x_k = 0` the rule reduces to
//! `x_{k+1} = 0`.

mod fista;
mod fpc_bb;
mod ista;
mod twist;

use ndarray::{Array1, ArrayView1, ArrayView2, Zip};

pub use fista::solve_fista;
pub use fpc_bb::solve_fpc_bb;
pub use ista::solve_ista;
pub use twist::solve_twist;

use crate::error::{ensure_dim, Error, Result};
use crate::types::{Dictionary, SolverId, SolverSettings, SparseCode};

const POWER_ITERATIONS: usize = 50;
const POWER_TOLERANCE: f64 = 1e-10;

/// One sparse-coding instance: dictionary, target vector and penalty.
#[derive(Debug, Clone, Copy)]
pub struct BpdnProblem<'a> {
    dict: &'a Dictionary,
    target: ArrayView1<'a, f64>,
    mu: f64,
}

impl<'a> BpdnProblem<'a> {
    pub fn new(dict: &'a Dictionary, target: ArrayView1<'a, f64>, mu: f64) -> Result<Self> {
        ensure_dim("problem target", dict.atom_dim(), target.len())?;
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::invalid(format!("mu must be positive, got {mu}")));
        }
        if target.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("target contains non-finite values"));
        }
        Ok(Self { dict, target, mu })
    }

    pub fn dictionary(&self) -> &'a Dictionary {
        self.dict
    }

    pub fn target(&self) -> ArrayView1<'a, f64> {
        self.target
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn n_atoms(&self) -> usize {
        self.dict.n_atoms()
    }

    /// `D x - p`
    pub(crate) fn residual(&self, x: &Array1<f64>) -> Array1<f64> {
        self.dict.atoms().dot(x) - self.target
    }

    /// `D^T r`
    pub(crate) fn correlate(&self, r: &Array1<f64>) -> Array1<f64> {
        self.dict.atoms().t().dot(r)
    }

    pub(crate) fn objective_with_residual(&self, r: &Array1<f64>, x: &Array1<f64>, mu: f64) -> f64 {
        0.5 * r.dot(r) + mu * l1(x)
    }

    /// `||D^T p||_inf`, the smallest penalty for which `x = 0` is optimal.
    pub fn mu_max(&self) -> f64 {
        self.dict
            .atoms()
            .t()
            .dot(&self.target)
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    fn check_start(&self, x0: &SparseCode) -> Result<()> {
        ensure_dim("initial code", self.n_atoms(), x0.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    RelativeChange,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveTrace {
    pub solver: SolverId,
    pub iterations: usize,
    /// Objective after each iteration, when requested in the settings.
    pub objective_history: Option<Vec<f64>>,
    pub terminated_by: Termination,
    /// Whether the method guarantees a nonincreasing objective. FISTA does
    /// not.
    pub monotone: bool,
}

impl SolveTrace {
    fn new(solver: SolverId, record: bool, monotone: bool) -> Self {
        Self {
            solver,
            iterations: 0,
            objective_history: record.then(Vec::new),
            terminated_by: Termination::MaxIterations,
            monotone,
        }
    }

    fn record(&mut self, f: impl FnOnce() -> f64) {
        if let Some(h) = self.objective_history.as_mut() {
            h.push(f());
        }
    }
}

/// Componentwise `sign(v) * max(|v| - t, 0)`.
pub fn soft_threshold(v: ArrayView1<'_, f64>, t: f64) -> Array1<f64> {
    v.mapv(|a| shrink(a, t))
}

#[inline]
pub(crate) fn shrink(a: f64, t: f64) -> f64 {
    if a > t {
        a - t
    } else if a < -t {
        a + t
    } else {
        0.0
    }
}

/// `shrink(x - step * g, step * mu)`
pub(crate) fn shrinkage_step(x: &Array1<f64>, g: &Array1<f64>, step: f64, mu: f64) -> Array1<f64> {
    let t = step * mu;
    Zip::from(x).and(g).map_collect(|&xi, &gi| shrink(xi - step * gi, t))
}

pub fn bpdn_objective(prob: &BpdnProblem<'_>, x: &SparseCode) -> Result<f64> {
    prob.check_start(x)?;
    let x = x.coeffs().to_owned();
    let r = prob.residual(&x);
    Ok(prob.objective_with_residual(&r, &x, prob.mu))
}

/// Violation of the optimality conditions of the convex problem; zero
/// exactly at a minimizer.
pub fn kkt_residual(prob: &BpdnProblem<'_>, x: &SparseCode) -> Result<f64> {
    prob.check_start(x)?;
    let x = x.coeffs().to_owned();
    let g = prob.correlate(&prob.residual(&x));
    let mu = prob.mu;
    Ok(Zip::from(&x).and(&g).fold(0.0_f64, |acc, &xi, &gi| {
        let v = if xi != 0.0 {
            (gi + mu * xi.signum()).abs()
        } else {
            (gi.abs() - mu).max(0.0)
        };
        acc.max(v)
    }))
}

/// Largest eigenvalue of `D^T D` by power iteration.
pub fn spectral_norm_sq(d: ArrayView2<'_, f64>) -> f64 {
    let n = d.ncols();
    let mut v = Array1::from_shape_fn(n, |i| 1.0 + 0.5 * ((i + 1) as f64).sin());
    let norm = v.dot(&v).sqrt();
    v /= norm;
    let mut lambda = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let w = d.t().dot(&d.dot(&v));
        let next = v.dot(&w);
        let wn = w.dot(&w).sqrt();
        if wn == 0.0 {
            return 0.0;
        }
        v = w / wn;
        let done = (next - lambda).abs() <= POWER_TOLERANCE * next.abs();
        lambda = next;
        if done {
            break;
        }
    }
    // Rayleigh quotient of the final vector
    let dv = d.dot(&v);
    dv.dot(&dv).max(lambda)
}

/// `1 / L`, or 1 for the all-zero dictionary where any step is exact.
pub(crate) fn gradient_step(prob: &BpdnProblem<'_>) -> f64 {
    let l = prob.dict.lipschitz();
    if l > 0.0 {
        1.0 / l
    } else {
        1.0
    }
}

pub(crate) fn l1(x: &Array1<f64>) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

pub(crate) fn norm2(x: &Array1<f64>) -> f64 {
    x.dot(x).sqrt()
}

/// Relative-change stopping rule.
pub(crate) fn has_converged(prev: &Array1<f64>, next: &Array1<f64>, eps: f64) -> bool {
    let base = norm2(prev);
    if base == 0.0 {
        return next.iter().all(|&v| v == 0.0);
    }
    let diff = Zip::from(prev)
        .and(next)
        .fold(0.0, |acc, &a, &b| acc + (b - a) * (b - a))
        .sqrt();
    diff <= eps * base
}

pub(crate) fn ensure_finite(x: &Array1<f64>, solver: SolverId, iteration: usize) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { solver, iteration })
    }
}

/// Dispatches to the solver named in `settings`.
pub fn solve(prob: &BpdnProblem<'_>, x0: &SparseCode, settings: &SolverSettings) -> Result<(SparseCode, SolveTrace)> {
    match settings.solver {
        SolverId::Ista => solve_ista(prob, x0, settings),
        SolverId::Fista => solve_fista(prob, x0, settings),
        SolverId::FpcBb => solve_fpc_bb(prob, x0, settings),
        SolverId::Twist => solve_twist(prob, x0, settings),
    }
}

/// Parses a solver name and dispatches, for callers holding a string id.
pub fn solve_named(
    prob: &BpdnProblem<'_>,
    x0: &SparseCode,
    solver: &str,
    settings: &SolverSettings,
) -> Result<(SparseCode, SolveTrace)> {
    let id: SolverId = solver.parse()?;
    solve(prob, x0, &SolverSettings { solver: id, ..*settings })
}


#[cfg(test)]
mod tests {
    use super::test_support::random_instance;
    use super::*;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    #[test]
    fn soft_threshold_examples() {
        let out = soft_threshold(array![0.5, -0.1, -0.7].view(), 0.2);
        assert!((out[0] - 0.3).abs() < 1e-15);
        assert_eq!(out[1], 0.0);
        assert!((out[2] + 0.5).abs() < 1e-15);
        let x = array![1.5, -2.0, 0.0, 3e-9];
        assert_eq!(soft_threshold(x.view(), 0.0), x);
    }

    proptest! {
        #[test]
        fn soft_threshold_is_nonexpansive(
            a in proptest::collection::vec(-10.0f64..10.0, 8),
            b in proptest::collection::vec(-10.0f64..10.0, 8),
            t in 0.0f64..5.0,
        ) {
            let (a, b) = (Array1::from(a), Array1::from(b));
            let (sa, sb) = (soft_threshold(a.view(), t), soft_threshold(b.view(), t));
            prop_assert!(norm2(&(&sa - &sb)) <= norm2(&(&a - &b)) + 1e-12);
            for (o, v) in sa.iter().zip(a.iter()) {
                prop_assert!((o.abs() - (v.abs() - t).max(0.0)).abs() < 1e-12);
                prop_assert!(*o == 0.0 || o.signum() == v.signum());
            }
        }
    }

    #[test]
    fn objective_of_zero_code() {
        let (d, p) = random_instance(5, 9, 3);
        let prob = BpdnProblem::new(&d, p.view(), 0.3).unwrap();
        let f = bpdn_objective(&prob, &SparseCode::zeros(9)).unwrap();
        assert!((f - 0.5 * p.dot(&p)).abs() < 1e-14);
    }

    #[test]
    fn objective_vanishes_at_exact_orthonormal_fit() {
        let d = Dictionary::new(array![[0.6, -0.8], [0.8, 0.6]]).unwrap();
        let p = array![0.3, -1.2];
        let x = d.atoms().t().dot(&p);
        // mu is positive by contract; a tiny value keeps the l1 term below
        // rounding
        let prob = BpdnProblem::new(&d, p.view(), 1e-300).unwrap();
        let f = bpdn_objective(&prob, &SparseCode::new(x).unwrap()).unwrap();
        assert!(f < 1e-30, "{f}");
    }

    #[test]
    fn objective_matches_naive_loops() {
        let (d, p) = random_instance(10, 30, 11);
        let x = Array1::from_shape_fn(30, |i| ((i * 7) % 5) as f64 * 0.1 - 0.2);
        let mu = 0.17;
        let prob = BpdnProblem::new(&d, p.view(), mu).unwrap();
        let a = d.atoms();
        let mut fit = 0.0;
        for i in 0..10 {
            let mut s = 0.0;
            for j in 0..30 {
                s += a[[i, j]] * x[j];
            }
            fit += (s - p[i]) * (s - p[i]);
        }
        let naive = 0.5 * fit + mu * x.iter().map(|v: &f64| v.abs()).sum::<f64>();
        let f = bpdn_objective(&prob, &SparseCode::new(x).unwrap()).unwrap();
        assert!((f - naive).abs() < 1e-12);
    }

    #[test]
    fn objective_rejects_wrong_length() {
        let (d, p) = random_instance(4, 6, 1);
        let prob = BpdnProblem::new(&d, p.view(), 0.1).unwrap();
        assert!(matches!(
            bpdn_objective(&prob, &SparseCode::zeros(5)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(BpdnProblem::new(&d, array![1.0, 2.0].view(), 0.1).is_err());
    }

    #[test]
    fn kkt_zero_when_penalty_dominates() {
        let (d, p) = random_instance(6, 12, 5);
        let probe = BpdnProblem::new(&d, p.view(), 1.0).unwrap();
        let mu = probe.mu_max() * 1.01;
        let prob = BpdnProblem::new(&d, p.view(), mu).unwrap();
        assert_eq!(kkt_residual(&prob, &SparseCode::zeros(12)).unwrap(), 0.0);
    }

    #[test]
    fn kkt_zero_at_orthonormal_closed_form() {
        let c = 0.28_f64.cos();
        let s = 0.28_f64.sin();
        let d = Dictionary::new(array![[c, -s], [s, c]]).unwrap();
        let p = array![0.9, -0.05];
        let prob = BpdnProblem::new(&d, p.view(), 0.2).unwrap();
        let x = soft_threshold(d.atoms().t().dot(&p).view(), 0.2);
        assert!(kkt_residual(&prob, &SparseCode::new(x).unwrap()).unwrap() <= 1e-12);
    }

    #[test]
    fn power_iteration_matches_known_spectrum() {
        let d = Array2::from_diag(&array![3.0, 1.0, 0.5]);
        assert!((spectral_norm_sq(d.view()) - 9.0).abs() < 1e-9);
        assert_eq!(spectral_norm_sq(Array2::zeros((3, 4)).view()), 0.0);
    }

    #[test]
    fn dispatch_by_name() {
        let (d, p) = random_instance(5, 10, 2);
        let prob = BpdnProblem::new(&d, p.view(), 0.1).unwrap();
        let settings = SolverSettings::new(SolverId::Ista, 0.1);
        let x0 = SparseCode::zeros(10);
        assert!(matches!(
            solve_named(&prob, &x0, "omp", &settings),
            Err(Error::UnknownSolver(_))
        ));
        let (a, _) = solve_named(&prob, &x0, "ista", &settings).unwrap();
        let (b, _) = solve_ista(&prob, &x0, &settings).unwrap();
        assert_eq!(a, b);
    }
}
