//! Solves one small l1-regularized least-squares problem with each of the
//! four shrinkage solvers and compares iterations, objective and the
//! optimality residual.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsedict::solvers::{bpdn_objective, kkt_residual, solve, BpdnProblem};
use sparsedict::{Dictionary, SolverId, SolverSettings, SparseCode};

fn main() -> sparsedict::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (m, n) = (20, 60);
    let mut atoms: Array2<f64> = Array2::from_shape_fn((m, n), |_| rng.random_range(-1.0..1.0));
    for mut c in atoms.columns_mut() {
        let norm = c.dot(&c).sqrt();
        c /= norm;
    }
    let dict = Dictionary::new(atoms)?;

    // a 4-sparse signal plus a little noise
    let mut truth = Array1::zeros(n);
    for j in [3, 17, 29, 44] {
        truth[j] = rng.random_range(1.0..3.0);
    }
    let p = dict.atoms().dot(&truth) + Array1::from_shape_fn(m, |_| rng.random_range(-0.01..0.01));

    let mu = 0.05;
    let prob = BpdnProblem::new(&dict, p.view(), mu)?;
    println!("L = {:.4}, mu_max = {:.4}", dict.lipschitz(), prob.mu_max());
    println!("{:<6} {:>6} {:>12} {:>10} {:>8}", "solver", "iters", "objective", "kkt", "nonzero");
    for solver in [SolverId::Ista, SolverId::Fista, SolverId::FpcBb, SolverId::Twist] {
        let settings = SolverSettings::new(solver, mu).with_eps(1e-10).with_max_iters(200_000);
        let (x, trace) = solve(&prob, &SparseCode::zeros(n), &settings)?;
        println!(
            "{:<6} {:>6} {:>12.8} {:>10.2e} {:>8}",
            solver.name(),
            trace.iterations,
            bpdn_objective(&prob, &x)?,
            kkt_residual(&prob, &x)?,
            n - x.zero_count()
        );
    }
    Ok(())
}
