//! Two-step iterative shrinkage/thresholding (TwIST).
//!
//! Iterates `x+ = (1 - a) x_prev + (a - b) x + b G(x)` where `G` is one
//! shrinkage step. The shrinkage operator is applied to the system scaled by
//! `1/sqrt(L)`, so `G(x) = shrink(x - D^T(Dx - p) / L, mu / L)`. Any two-step
//! update that raises the objective is replaced by the plain step `G(x)`.

use crate::error::Result;
use crate::types::{SolverId, SolverSettings, SparseCode};

use super::{ensure_finite, gradient_step, has_converged, shrinkage_step, BpdnProblem, SolveTrace, Termination};

/// Lower spectral bound assumed for the scaled operator.
pub const XI: f64 = 1e-3;

/// `(alpha, beta)` derived from [`XI`].
pub fn twist_weights() -> (f64, f64) {
    let rho = (1.0 - XI.sqrt()) / (1.0 + XI.sqrt());
    let alpha = rho * rho + 1.0;
    let beta = 2.0 * alpha / (1.0 + XI);
    (alpha, beta)
}

pub fn solve_twist(prob: &BpdnProblem<'_>, x0: &SparseCode, settings: &SolverSettings) -> Result<(SparseCode, SolveTrace)> {
    settings.validate()?;
    prob.check_start(x0)?;
    let step = gradient_step(prob);
    let mu = prob.mu();
    let (alpha, beta) = twist_weights();
    let mut trace = SolveTrace::new(SolverId::Twist, settings.record_objective, true);

    let shrink_at = |x: &ndarray::Array1<f64>| {
        let g = prob.correlate(&prob.residual(x));
        shrinkage_step(x, &g, step, mu)
    };
    let objective = |x: &ndarray::Array1<f64>| prob.objective_with_residual(&prob.residual(x), x, mu);

    let mut prev = x0.coeffs().to_owned();
    let mut x = shrink_at(&prev);
    ensure_finite(&x, SolverId::Twist, 1)?;
    let mut f = objective(&x);
    trace.iterations = 1;
    trace.record(|| f);
    let mut done = has_converged(&prev, &x, settings.eps_rel);

    while !done && trace.iterations < settings.max_iters {
        let k = trace.iterations + 1;
        let gx = shrink_at(&x);
        let mut next = &prev * (1.0 - alpha) + &x * (alpha - beta) + &gx * beta;
        let mut f_next = objective(&next);
        if !(f_next <= f) {
            next = gx;
            f_next = objective(&next);
            if !(f_next <= f) {
                // no descent left at working precision
                next = x.clone();
                f_next = f;
            }
        }
        ensure_finite(&next, SolverId::Twist, k)?;
        trace.iterations = k;
        trace.record(|| f_next);
        done = has_converged(&x, &next, settings.eps_rel);
        prev = std::mem::replace(&mut x, next);
        f = f_next;
    }
    if done {
        trace.terminated_by = Termination::RelativeChange;
    }
    // Two-step combinations only decay toward zero off the support; a final
    // shrinkage step returns genuine zeros there.
    let out = shrink_at(&x);
    ensure_finite(&out, SolverId::Twist, trace.iterations)?;
    Ok((SparseCode::from_raw(out), trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::test_support::random_instance;
    use crate::solvers::{bpdn_objective, kkt_residual, solve_ista};
    use crate::types::Dictionary;
    use ndarray::{array, Array2};

    #[test]
    fn weights_follow_xi() {
        let (a, b) = twist_weights();
        assert!(a > 1.0 && a < 2.0);
        assert!((b - 2.0 * a / 1.001).abs() < 1e-15);
    }

    #[test]
    fn identity_dictionary_closed_form() {
        let d = Dictionary::new(Array2::eye(2)).unwrap();
        let p = array![1.0, 0.1];
        let prob = BpdnProblem::new(&d, p.view(), 0.25).unwrap();
        let (x, _) = solve_twist(&prob, &SparseCode::zeros(2), &SolverSettings::new(SolverId::Twist, 0.25)).unwrap();
        assert!((x.coeffs()[0] - 0.75).abs() < 1e-12);
        assert_eq!(x.coeffs()[1], 0.0);
    }

    #[test]
    fn dominant_penalty_gives_zero() {
        let (d, p) = random_instance(8, 20, 13);
        let mu = BpdnProblem::new(&d, p.view(), 1.0).unwrap().mu_max() * 1.2;
        let prob = BpdnProblem::new(&d, p.view(), mu).unwrap();
        let (x, trace) = solve_twist(&prob, &SparseCode::zeros(20), &SolverSettings::new(SolverId::Twist, mu)).unwrap();
        assert_eq!(x.zero_count(), 20);
        assert_eq!(trace.terminated_by, Termination::RelativeChange);
    }

    #[test]
    fn objective_never_increases() {
        let (d, p) = random_instance(10, 30, 44);
        let prob = BpdnProblem::new(&d, p.view(), 0.0625).unwrap();
        let settings = SolverSettings::new(SolverId::Twist, 0.0625).with_eps(1e-10).recording();
        let (x, trace) = solve_twist(&prob, &SparseCode::zeros(30), &settings).unwrap();
        let h = trace.objective_history.unwrap();
        for w in h.windows(2) {
            assert!(w[1] <= w[0], "{:e} -> {:e}", w[0], w[1] - w[0]);
        }
        assert!(kkt_residual(&prob, &x).unwrap() <= 1e-6);
        let (xi, _) = solve_ista(&prob, &SparseCode::zeros(30), &SolverSettings::new(SolverId::Ista, 0.0625).with_eps(1e-12)).unwrap();
        let diff = bpdn_objective(&prob, &x).unwrap() - bpdn_objective(&prob, &xi).unwrap();
        assert!(diff.abs() < 1e-8, "{diff}");
    }
}
