use crate::error::Result;
use crate::types::{SolverId, SolverSettings, SparseCode};

use super::{ensure_finite, gradient_step, has_converged, shrinkage_step, BpdnProblem, SolveTrace, Termination};

/// Proximal gradient descent with the constant step `1/L`.
pub fn solve_ista(prob: &BpdnProblem<'_>, x0: &SparseCode, settings: &SolverSettings) -> Result<(SparseCode, SolveTrace)> {
    settings.validate()?;
    prob.check_start(x0)?;
    let step = gradient_step(prob);
    let mu = prob.mu();
    let mut trace = SolveTrace::new(SolverId::Ista, settings.record_objective, true);
    let mut x = x0.coeffs().to_owned();
    let mut r = prob.residual(&x);

    for k in 1..=settings.max_iters {
        let g = prob.correlate(&r);
        let next = shrinkage_step(&x, &g, step, mu);
        ensure_finite(&next, SolverId::Ista, k)?;
        r = prob.residual(&next);
        trace.iterations = k;
        trace.record(|| prob.objective_with_residual(&r, &next, mu));
        let done = has_converged(&x, &next, settings.eps_rel);
        x = next;
        if done {
            trace.terminated_by = Termination::RelativeChange;
            break;
        }
    }
    Ok((SparseCode::from_raw(x), trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::test_support::random_instance;
    use crate::types::Dictionary;
    use ndarray::{array, Array2};

    #[test]
    fn identity_dictionary_closed_form() {
        let d = Dictionary::new(Array2::eye(2)).unwrap();
        let p = array![1.0, 0.1];
        let prob = BpdnProblem::new(&d, p.view(), 0.25).unwrap();
        let settings = SolverSettings::new(SolverId::Ista, 0.25);
        let (x, _) = solve_ista(&prob, &SparseCode::zeros(2), &settings).unwrap();
        assert!((x.coeffs()[0] - 0.75).abs() < 1e-12);
        assert_eq!(x.coeffs()[1], 0.0);
    }

    #[test]
    fn dominant_penalty_gives_zero_after_one_step() {
        let (d, p) = random_instance(8, 20, 4);
        let probe = BpdnProblem::new(&d, p.view(), 1.0).unwrap();
        let mu = probe.mu_max();
        let prob = BpdnProblem::new(&d, p.view(), mu).unwrap();
        let (x, trace) = solve_ista(&prob, &SparseCode::zeros(20), &SolverSettings::new(SolverId::Ista, mu)).unwrap();
        assert_eq!(x.zero_count(), 20);
        assert_eq!(trace.iterations, 1);
    }

    #[test]
    fn objective_never_increases() {
        for seed in 0..10 {
            let (d, p) = random_instance(10, 30, 100 + seed);
            let prob = BpdnProblem::new(&d, p.view(), 0.0625).unwrap();
            let settings = SolverSettings::new(SolverId::Ista, 0.0625).with_max_iters(2000).recording();
            let (_, trace) = solve_ista(&prob, &SparseCode::zeros(30), &settings).unwrap();
            let h = trace.objective_history.unwrap();
            for w in h.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * w[0].abs(), "{} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn stops_at_iteration_cap() {
        let (d, p) = random_instance(10, 30, 8);
        let prob = BpdnProblem::new(&d, p.view(), 1e-3).unwrap();
        let settings = SolverSettings::new(SolverId::Ista, 1e-3).with_eps(1e-15).with_max_iters(7);
        let (_, trace) = solve_ista(&prob, &SparseCode::zeros(30), &settings).unwrap();
        assert_eq!(trace.iterations, 7);
        assert_eq!(trace.terminated_by, Termination::MaxIterations);
    }
}
