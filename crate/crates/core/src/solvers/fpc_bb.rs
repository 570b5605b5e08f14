//! Fixed-point continuation with Barzilai-Borwein steps.
//!
//! The target penalty is approached through the decreasing sequence
//! `mu_j = max(mu, ETA^j ||D^T p||_inf)`, warm-starting each stage from the
//! previous one. Intermediate stages stop at a loose relative change; only
//! the final stage uses the caller's tolerance. Steps follow the BB rule
//! `tau = s^T s / s^T y`, clamped, with two fallbacks to `1/L`: when
//! `s^T y <= 0`, and when the step would raise the stage objective above
//! the maximum of the last few accepted values.

use std::collections::VecDeque;

use crate::error::Result;
use crate::types::{SolverId, SolverSettings, SparseCode};

use super::{ensure_finite, gradient_step, has_converged, l1, shrinkage_step, BpdnProblem, SolveTrace, Termination};

pub const CONTINUATION_RATE: f64 = 0.25;
pub const STAGE_TOLERANCE: f64 = 1e-3;
pub const TAU_MIN: f64 = 1e-10;
pub const TAU_MAX: f64 = 1e10;
/// Length of the nonmonotone acceptance window.
const MEMORY: usize = 5;

fn continuation_schedule(mu: f64, mu_max: f64) -> Vec<f64> {
    let mut stages = Vec::new();
    let mut level = mu_max;
    loop {
        level *= CONTINUATION_RATE;
        if level <= mu {
            stages.push(mu);
            return stages;
        }
        stages.push(level);
    }
}

pub fn solve_fpc_bb(prob: &BpdnProblem<'_>, x0: &SparseCode, settings: &SolverSettings) -> Result<(SparseCode, SolveTrace)> {
    settings.validate()?;
    prob.check_start(x0)?;
    let fallback = gradient_step(prob);
    let mut trace = SolveTrace::new(SolverId::FpcBb, settings.record_objective, false);
    let stages = continuation_schedule(prob.mu(), prob.mu_max());
    let last_stage = stages.len() - 1;

    let mut x = x0.coeffs().to_owned();
    let mut r = prob.residual(&x);
    let mut g = prob.correlate(&r);
    let mut k = 0;

    'stages: for (stage, &mu) in stages.iter().enumerate() {
        let tol = if stage == last_stage { settings.eps_rel } else { STAGE_TOLERANCE };
        let mut tau = fallback;
        let mut recent: VecDeque<f64> = VecDeque::with_capacity(MEMORY);
        recent.push_back(prob.objective_with_residual(&r, &x, mu));

        loop {
            if k == settings.max_iters {
                break 'stages;
            }
            k += 1;
            let mut next = shrinkage_step(&x, &g, tau, mu);
            let mut r_next = prob.residual(&next);
            let mut f_next = prob.objective_with_residual(&r_next, &next, mu);
            let reference = recent.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            if f_next > reference && tau != fallback {
                next = shrinkage_step(&x, &g, fallback, mu);
                r_next = prob.residual(&next);
                f_next = prob.objective_with_residual(&r_next, &next, mu);
            }
            ensure_finite(&next, SolverId::FpcBb, k)?;
            let g_next = prob.correlate(&r_next);
            trace.iterations = k;
            if stage == last_stage {
                trace.record(|| f_next);
            } else {
                trace.record(|| 0.5 * r_next.dot(&r_next) + prob.mu() * l1(&next));
            }

            let done = has_converged(&x, &next, tol);
            let s = &next - &x;
            let y = &g_next - &g;
            let sty = s.dot(&y);
            tau = if sty > 0.0 {
                (s.dot(&s) / sty).clamp(TAU_MIN, TAU_MAX)
            } else {
                fallback
            };
            x = next;
            r = r_next;
            g = g_next;
            if recent.len() == MEMORY {
                recent.pop_front();
            }
            recent.push_back(f_next);

            if done {
                if stage == last_stage {
                    trace.terminated_by = Termination::RelativeChange;
                }
                break;
            }
        }
    }
    Ok((SparseCode::from_raw(x), trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::test_support::random_instance;
    use crate::solvers::{bpdn_objective, kkt_residual, solve_ista};
    use crate::types::Dictionary;
    use ndarray::{array, Array2};

    #[test]
    fn schedule_ends_at_target() {
        let s = continuation_schedule(0.01, 1.0);
        assert_eq!(s, vec![0.25, 0.0625, 0.015625, 0.01]);
        assert_eq!(continuation_schedule(2.0, 1.0), vec![2.0]);
    }

    #[test]
    fn identity_dictionary_closed_form() {
        let d = Dictionary::new(Array2::eye(2)).unwrap();
        let p = array![1.0, 0.1];
        let prob = BpdnProblem::new(&d, p.view(), 0.25).unwrap();
        let (x, _) = solve_fpc_bb(&prob, &SparseCode::zeros(2), &SolverSettings::new(SolverId::FpcBb, 0.25)).unwrap();
        assert!((x.coeffs()[0] - 0.75).abs() < 1e-12);
        assert_eq!(x.coeffs()[1], 0.0);
    }

    #[test]
    fn dominant_penalty_gives_zero() {
        let (d, p) = random_instance(8, 20, 12);
        let mu = BpdnProblem::new(&d, p.view(), 1.0).unwrap().mu_max();
        let prob = BpdnProblem::new(&d, p.view(), mu).unwrap();
        let (x, _) = solve_fpc_bb(&prob, &SparseCode::zeros(20), &SolverSettings::new(SolverId::FpcBb, mu)).unwrap();
        assert_eq!(x.zero_count(), 20);
    }

    #[test]
    fn reaches_kkt_tolerance() {
        for seed in 0..20 {
            let (d, p) = random_instance(10, 30, 300 + seed);
            let prob = BpdnProblem::new(&d, p.view(), 0.0625).unwrap();
            let settings = SolverSettings::new(SolverId::FpcBb, 0.0625).with_eps(1e-10);
            let (x, _) = solve_fpc_bb(&prob, &SparseCode::zeros(30), &settings).unwrap();
            let kkt = kkt_residual(&prob, &x).unwrap();
            assert!(kkt <= 1e-6, "seed {seed}: {kkt}");
        }
    }

    #[test]
    fn agrees_with_ista() {
        let (d, p) = random_instance(10, 30, 77);
        let prob = BpdnProblem::new(&d, p.view(), 0.0625).unwrap();
        let x0 = SparseCode::zeros(30);
        let (a, _) = solve_fpc_bb(&prob, &x0, &SolverSettings::new(SolverId::FpcBb, 0.0625).with_eps(1e-10)).unwrap();
        let (b, _) = solve_ista(&prob, &x0, &SolverSettings::new(SolverId::Ista, 0.0625).with_eps(1e-12)).unwrap();
        let (fa, fb) = (bpdn_objective(&prob, &a).unwrap(), bpdn_objective(&prob, &b).unwrap());
        assert!((fa - fb).abs() < 1e-8, "{fa} vs {fb}");
    }
}
