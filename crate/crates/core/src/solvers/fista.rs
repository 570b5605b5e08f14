use crate::error::Result;
use crate::types::{SolverId, SolverSettings, SparseCode};

use super::{ensure_finite, gradient_step, has_converged, shrinkage_step, BpdnProblem, SolveTrace, Termination};

/// Accelerated proximal gradient (FISTA). The shrinkage step is taken at
/// an extrapolated point, so the objective may rise between iterations.
pub fn solve_fista(prob: &BpdnProblem<'_>, x0: &SparseCode, settings: &SolverSettings) -> Result<(SparseCode, SolveTrace)> {
    settings.validate()?;
    prob.check_start(x0)?;
    let step = gradient_step(prob);
    let mu = prob.mu();
    let mut trace = SolveTrace::new(SolverId::Fista, settings.record_objective, false);
    let mut x = x0.coeffs().to_owned();
    let mut y = x.clone();
    let mut t = 1.0_f64;

    for k in 1..=settings.max_iters {
        let g = prob.correlate(&prob.residual(&y));
        let next = shrinkage_step(&y, &g, step, mu);
        ensure_finite(&next, SolverId::Fista, k)?;
        trace.iterations = k;
        trace.record(|| prob.objective_with_residual(&prob.residual(&next), &next, mu));
        if has_converged(&x, &next, settings.eps_rel) {
            x = next;
            trace.terminated_by = Termination::RelativeChange;
            break;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let momentum = (t - 1.0) / t_next;
        y = &next + &((&next - &x) * momentum);
        x = next;
        t = t_next;
    }
    Ok((SparseCode::from_raw(x), trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::test_support::random_instance;
    use crate::solvers::{bpdn_objective, solve_ista};
    use crate::types::Dictionary;
    use ndarray::{array, Array2};

    #[test]
    fn identity_dictionary_closed_form() {
        let d = Dictionary::new(Array2::eye(2)).unwrap();
        let p = array![1.0, 0.1];
        let prob = BpdnProblem::new(&d, p.view(), 0.25).unwrap();
        let (x, trace) = solve_fista(&prob, &SparseCode::zeros(2), &SolverSettings::new(SolverId::Fista, 0.25)).unwrap();
        assert!((x.coeffs()[0] - 0.75).abs() < 1e-12);
        assert_eq!(x.coeffs()[1], 0.0);
        assert!(!trace.monotone);
    }

    #[test]
    fn dominant_penalty_gives_zero() {
        let (d, p) = random_instance(8, 20, 9);
        let mu = BpdnProblem::new(&d, p.view(), 1.0).unwrap().mu_max() * 1.5;
        let prob = BpdnProblem::new(&d, p.view(), mu).unwrap();
        let (x, _) = solve_fista(&prob, &SparseCode::zeros(20), &SolverSettings::new(SolverId::Fista, mu)).unwrap();
        assert_eq!(x.zero_count(), 20);
    }

    #[test]
    fn fewer_iterations_than_ista() {
        let (d, p) = random_instance(10, 30, 21);
        let mu = 0.0625;
        let prob = BpdnProblem::new(&d, p.view(), mu).unwrap();
        let x0 = SparseCode::zeros(30);
        let (xi, ti) = solve_ista(&prob, &x0, &SolverSettings::new(SolverId::Ista, mu).with_eps(1e-10)).unwrap();
        let (xf, tf) = solve_fista(&prob, &x0, &SolverSettings::new(SolverId::Fista, mu).with_eps(1e-10)).unwrap();
        let (fi, ff) = (bpdn_objective(&prob, &xi).unwrap(), bpdn_objective(&prob, &xf).unwrap());
        assert!((fi - ff).abs() < 1e-8, "{fi} vs {ff}");
        assert!(tf.iterations < ti.iterations, "{} vs {}", tf.iterations, ti.iterations);
    }
}
