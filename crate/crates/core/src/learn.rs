//! Online dictionary learning with block-coordinate-descent atom updates.
//!
//! Each iteration draws one training patch, sparse-codes it against the
//! current dictionary, folds the code into the accumulators
//! `A += x x^T`, `B += p x^T`, and then re-minimizes the surrogate
//!
//! ```text
//! (1/k) (1/2 Tr(D^T D A) - Tr(D^T B))
//! ```
//!
//! over dictionaries whose atoms lie in the unit ball, warm-started at the
//! previous dictionary.

use std::io::Write;

use ndarray::{Array1, ArrayView1, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{ensure_dim, Error, Result};
use crate::solvers::{solve, BpdnProblem, SolveTrace};
use crate::types::{Dictionary, LearnAccumulators, Patch, SolverSettings, SparseCode};

/// Diagonal entries of `A` below this magnitude are treated as zero and the
/// corresponding atom is left untouched.
pub const DIAGONAL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcdOptions {
    pub max_sweeps: usize,
    /// Sweeps stop once no column moves by more than this (l2).
    pub tol: f64,
}

impl Default for BcdOptions {
    fn default() -> Self {
        Self {
            max_sweeps: 100,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BcdOutcome {
    pub dictionary: Dictionary,
    pub sweeps: usize,
    /// Largest column change of the final sweep.
    pub last_change: f64,
    /// Surrogate value before the first sweep followed by the value after
    /// each sweep, when requested.
    pub objective_history: Option<Vec<f64>>,
}

/// New value of atom `j` from the closed-form block minimizer, projected
/// onto the unit ball.
pub fn update_column(
    d: &Dictionary,
    j: usize,
    a_j: ArrayView1<'_, f64>,
    b_j: ArrayView1<'_, f64>,
    a_jj: f64,
) -> Result<Array1<f64>> {
    ensure_dim("column update a_j", d.n_atoms(), a_j.len())?;
    ensure_dim("column update b_j", d.atom_dim(), b_j.len())?;
    if j >= d.n_atoms() {
        return Err(Error::invalid(format!("atom index {j} out of range")));
    }
    if !(a_jj.abs() >= DIAGONAL_FLOOR) {
        return Err(Error::invalid(format!("A_jj = {a_jj} is zero; atom {j} must be skipped")));
    }
    Ok(column_step(d.atoms(), j, a_j, b_j, a_jj))
}

fn column_step(
    atoms: ndarray::ArrayView2<'_, f64>,
    j: usize,
    a_j: ArrayView1<'_, f64>,
    b_j: ArrayView1<'_, f64>,
    a_jj: f64,
) -> Array1<f64> {
    let da = atoms.dot(&a_j);
    let mut u = Zip::from(&b_j).and(&da).map_collect(|&b, &v| (b - v) / a_jj);
    u += &atoms.column(j);
    let norm = u.dot(&u).sqrt();
    if norm > 1.0 {
        u /= norm;
    }
    u
}

/// Surrogate objective `(1/k)(1/2 Tr(D^T D A) - Tr(D^T B))`.
pub fn surrogate_objective(d: &Dictionary, acc: &LearnAccumulators) -> Result<f64> {
    check_shapes(d, acc)?;
    if acc.k() == 0 {
        return Err(Error::invalid("surrogate objective needs at least one observation"));
    }
    let atoms = d.atoms();
    let da = atoms.dot(&acc.a());
    let quad = Zip::from(&atoms).and(&da).fold(0.0, |s, &x, &y| s + x * y);
    let lin = Zip::from(&atoms).and(&acc.b()).fold(0.0, |s, &x, &y| s + x * y);
    Ok((0.5 * quad - lin) / acc.k() as f64)
}

fn check_shapes(d: &Dictionary, acc: &LearnAccumulators) -> Result<()> {
    ensure_dim("accumulator atom dimension", d.atom_dim(), acc.atom_dim())?;
    ensure_dim("accumulator atom count", d.n_atoms(), acc.n_atoms())
}

pub fn update_dictionary(d_warm: &Dictionary, acc: &LearnAccumulators, max_sweeps: usize, tol: f64) -> Result<Dictionary> {
    Ok(update_dictionary_traced(d_warm, acc, BcdOptions { max_sweeps, tol }, false)?.dictionary)
}

/// Gauss-Seidel sweeps over the atoms until no column moves by more than
/// `opts.tol` or `opts.max_sweeps` is reached.
pub fn update_dictionary_traced(
    d_warm: &Dictionary,
    acc: &LearnAccumulators,
    opts: BcdOptions,
    track_objective: bool,
) -> Result<BcdOutcome> {
    check_shapes(d_warm, acc)?;
    if acc.k() == 0 {
        return Err(Error::invalid("dictionary update needs at least one observation"));
    }
    if opts.max_sweeps == 0 {
        return Err(Error::invalid("bcd_max_sweeps must be positive"));
    }
    let (a, b) = (acc.a(), acc.b());
    let active: Vec<usize> = (0..acc.n_atoms()).filter(|&j| a[[j, j]].abs() >= DIAGONAL_FLOOR).collect();
    let mut atoms = d_warm.atoms().to_owned();
    let objective = |atoms: &ndarray::Array2<f64>| -> f64 {
        let da = atoms.dot(&a);
        let quad = Zip::from(atoms).and(&da).fold(0.0, |s, &x, &y| s + x * y);
        let lin = Zip::from(atoms).and(&b).fold(0.0, |s, &x, &y| s + x * y);
        (0.5 * quad - lin) / acc.k() as f64
    };
    let mut history = track_objective.then(|| vec![objective(&atoms)]);

    let mut sweeps = 0;
    let mut last_change = 0.0;
    while sweeps < opts.max_sweeps && !active.is_empty() {
        sweeps += 1;
        last_change = 0.0_f64;
        for &j in &active {
            let next = column_step(atoms.view(), j, a.column(j), b.column(j), a[[j, j]]);
            let mut col = atoms.column_mut(j);
            let change = Zip::from(&next).and(&col).fold(0.0, |s, &x, &y| s + (x - y) * (x - y)).sqrt();
            last_change = last_change.max(change);
            col.assign(&next);
        }
        if let Some(h) = history.as_mut() {
            h.push(objective(&atoms));
        }
        if last_change <= opts.tol {
            break;
        }
    }
    Ok(BcdOutcome {
        dictionary: Dictionary::undercomplete(atoms)?,
        sweeps,
        last_change,
        objective_history: history,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnConfig {
    pub n_patches: usize,
    pub solver: SolverSettings,
    pub seed: u64,
    pub bcd: BcdOptions,
    /// Keep every sparse code in the log.
    pub keep_codes: bool,
}

impl LearnConfig {
    pub fn new(n_patches: usize, solver: SolverSettings, seed: u64) -> Self {
        Self {
            n_patches,
            solver,
            seed,
            bcd: BcdOptions::default(),
            keep_codes: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnRecord {
    pub iteration: usize,
    pub patch_index: usize,
    pub zeros: usize,
    pub surrogate: f64,
    pub solver_iterations: usize,
    pub bcd_sweeps: usize,
}

#[derive(Debug, Clone, Default)]
pub struct LearnLog {
    pub records: Vec<LearnRecord>,
    pub codes: Vec<SparseCode>,
}

impl LearnLog {
    /// CSV with columns `iteration,patch_index,zeros,surrogate_objective,solver_iterations,bcd_sweeps`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "iteration",
            "patch_index",
            "zeros",
            "surrogate_objective",
            "solver_iterations",
            "bcd_sweeps",
        ])?;
        for r in &self.records {
            w.write_record([
                r.iteration.to_string(),
                r.patch_index.to_string(),
                r.zeros.to_string(),
                r.surrogate.to_string(),
                r.solver_iterations.to_string(),
                r.bcd_sweeps.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LearnOutcome {
    pub dictionary: Dictionary,
    pub accumulators: LearnAccumulators,
    pub log: LearnLog,
}

/// Runs `cfg.n_patches` online iterations starting from `d0`.
///
/// Patches are drawn uniformly with replacement from `patches` using a
/// ChaCha8 stream seeded with `cfg.seed`; every sparse code starts from zero.
pub fn learn_dictionary(d0: &Dictionary, patches: &[Patch], cfg: &LearnConfig) -> Result<LearnOutcome> {
    if cfg.n_patches == 0 {
        return Err(Error::invalid("number of learning iterations must be at least 1"));
    }
    if patches.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    cfg.solver.validate()?;
    for p in patches {
        ensure_dim("training patch", d0.atom_dim(), p.dim())?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut acc = LearnAccumulators::new(d0.atom_dim(), d0.n_atoms());
    let mut dict = d0.clone();
    let mut log = LearnLog::default();
    let x0 = SparseCode::zeros(d0.n_atoms());

    for k in 1..=cfg.n_patches {
        let idx = rng.random_range(0..patches.len());
        let patch = patches[idx].values();
        let (code, trace): (SparseCode, SolveTrace) = BpdnProblem::new(&dict, patch, cfg.solver.mu)
            .and_then(|prob| solve(&prob, &x0, &cfg.solver))
            .map_err(|e| Error::Coding {
                what: "learning iteration",
                index: k,
                source: Box::new(e),
            })?;
        acc.push(patch, code.coeffs())?;
        let bcd = update_dictionary_traced(&dict, &acc, cfg.bcd, false)?;
        dict = bcd.dictionary;
        log.records.push(LearnRecord {
            iteration: k,
            patch_index: idx,
            zeros: code.zero_count(),
            surrogate: surrogate_objective(&dict, &acc)?,
            solver_iterations: trace.iterations,
            bcd_sweeps: bcd.sweeps,
        });
        if cfg.keep_codes {
            log.codes.push(code);
        }
    }
    Ok(LearnOutcome {
        dictionary: dict,
        accumulators: acc,
        log,
    })
}
