//! Value types shared by the solvers, the learner and the image pipeline.
//!
//! Everything here is immutable once constructed; the modules that evolve a
//! dictionary or an image build a new value instead of mutating in place.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{ensure_dim, Error, Result};

/// Slack allowed above the unit norm when checking dictionary atoms.
pub const BALL_TOLERANCE: f64 = 1e-12;

/// Hard upper bound on solver iterations.
pub const MAX_ITERS_CAP: usize = 5_000_000;

/// Symmetry slack for the accumulated Gram matrix.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Grey-scale raster, `height x width`, stored row-major.
///
/// Values follow the `[0, 255]` tonal convention but are kept as unquantized
/// reals so that reconstructions can be measured before rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pixels: Array2<f64>,
}

impl GrayImage {
    pub fn new(pixels: Array2<f64>) -> Result<Self> {
        let (h, w) = pixels.dim();
        if h == 0 || w == 0 {
            return Err(Error::invalid(format!("image dimensions must be positive, got {h}x{w}")));
        }
        if pixels.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("image contains non-finite pixels"));
        }
        Ok(Self {
            pixels: pixels.as_standard_layout().into_owned(),
        })
    }

    /// Builds an image from a row-major buffer.
    pub fn from_row_major(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        ensure_dim("image buffer", height * width, values.len())?;
        let pixels = Array2::from_shape_vec((height, width), values)
            .map_err(|e| Error::invalid(e.to_string()))?;
        Self::new(pixels)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(Array2::from_elem((height, width), value))
    }

    pub fn height(&self) -> usize {
        self.pixels.nrows()
    }

    pub fn width(&self) -> usize {
        self.pixels.ncols()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.pixels.dim()
    }

    pub fn pixels(&self) -> ArrayView2<'_, f64> {
        self.pixels.view()
    }

    pub fn into_pixels(self) -> Array2<f64> {
        self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[[row, col]]
    }

    pub(crate) fn ensure_same_dim(&self, other: &GrayImage, context: &'static str) -> Result<()> {
        ensure_dim(context, self.height(), other.height())?;
        ensure_dim(context, self.width(), other.width())
    }
}

/// A square image patch, column-stacked into a vector of length `side^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    side: usize,
    values: Array1<f64>,
}

impl Patch {
    pub fn new(side: usize, values: Array1<f64>) -> Result<Self> {
        if side == 0 {
            return Err(Error::invalid("patch side must be positive"));
        }
        ensure_dim("patch values", side * side, values.len())?;
        Ok(Self { side, values })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn values(&self) -> ArrayView1<'_, f64> {
        self.values.view()
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// `atom_dim x n_atoms` matrix whose columns are the atoms.
///
/// The spectral norm estimate used for step sizes is computed lazily and
/// cached with the value.
pub struct Dictionary {
    atoms: Array2<f64>,
    lipschitz: OnceLock<f64>,
}

impl Dictionary {
    /// Redundant dictionary; requires `n_atoms >= atom_dim`.
    pub fn new(atoms: Array2<f64>) -> Result<Self> {
        let (m, n) = atoms.dim();
        if n < m {
            return Err(Error::invalid(format!(
                "dictionary with {n} atoms of dimension {m} is not redundant"
            )));
        }
        Self::undercomplete(atoms)
    }

    /// Same as [`Dictionary::new`] with the redundancy check waived.
    pub fn undercomplete(atoms: Array2<f64>) -> Result<Self> {
        let (m, n) = atoms.dim();
        if m == 0 || n == 0 {
            return Err(Error::invalid(format!("dictionary dimensions must be positive, got {m}x{n}")));
        }
        if atoms.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("dictionary contains non-finite entries"));
        }
        Ok(Self {
            atoms,
            lipschitz: OnceLock::new(),
        })
    }

    pub fn atom_dim(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn atoms(&self) -> ArrayView2<'_, f64> {
        self.atoms.view()
    }

    pub fn atom(&self, j: usize) -> ArrayView1<'_, f64> {
        self.atoms.column(j)
    }

    pub fn into_atoms(self) -> Array2<f64> {
        self.atoms
    }

    /// Largest eigenvalue of `D^T D`, i.e. the Lipschitz constant of the
    /// least-squares gradient.
    pub fn lipschitz(&self) -> f64 {
        *self
            .lipschitz
            .get_or_init(|| crate::solvers::spectral_norm_sq(self.atoms.view()))
    }

    pub fn validate(&self) -> Validation {
        unit_ball_violations(self.atoms.view())
    }
}

impl Clone for Dictionary {
    fn clone(&self) -> Self {
        Self {
            atoms: self.atoms.clone(),
            lipschitz: self.lipschitz.clone(),
        }
    }
}

impl PartialEq for Dictionary {
    fn eq(&self, other: &Self) -> bool {
        self.atoms == other.atoms
    }
}

impl fmt::Debug for Dictionary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dictionary")
            .field("atom_dim", &self.atom_dim())
            .field("n_atoms", &self.n_atoms())
            .finish_non_exhaustive()
    }
}

/// An atom lying outside the unit ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallViolation {
    pub column: usize,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Validation {
    Ok,
    Violations(Vec<BallViolation>),
}

impl Validation {
    pub fn is_ok(&self) -> bool {
        matches!(self, Validation::Ok)
    }

    pub fn violating_columns(&self) -> Vec<usize> {
        match self {
            Validation::Ok => Vec::new(),
            Validation::Violations(v) => v.iter().map(|b| b.column).collect(),
        }
    }
}

/// Checks the unit-ball constraint `d_j^T d_j <= 1` for every atom against
/// the declared shape.
pub fn validate_dictionary(atom_dim: usize, n_atoms: usize, atoms: ArrayView2<'_, f64>) -> Result<Validation> {
    ensure_dim("dictionary rows", atom_dim, atoms.nrows())?;
    ensure_dim("dictionary columns", n_atoms, atoms.ncols())?;
    Ok(unit_ball_violations(atoms))
}

fn unit_ball_violations(atoms: ArrayView2<'_, f64>) -> Validation {
    let violations: Vec<_> = atoms
        .columns()
        .into_iter()
        .enumerate()
        .filter_map(|(column, d)| {
            let norm = d.dot(&d).sqrt();
            (!(norm <= 1.0 + BALL_TOLERANCE)).then_some(BallViolation { column, norm })
        })
        .collect();
    if violations.is_empty() {
        Validation::Ok
    } else {
        Validation::Violations(violations)
    }
}

/// Coefficient vector of one patch.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode(Array1<f64>);

impl SparseCode {
    pub fn new(coeffs: Array1<f64>) -> Result<Self> {
        if coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("sparse code contains non-finite coefficients"));
        }
        Ok(Self(coeffs))
    }

    pub fn zeros(n: usize) -> Self {
        Self(Array1::zeros(n))
    }

    pub fn coeffs(&self) -> ArrayView1<'_, f64> {
        self.0.view()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of coefficients that are exactly zero.
    pub fn zero_count(&self) -> usize {
        self.0.iter().filter(|&&v| v == 0.0).count()
    }

    pub fn into_inner(self) -> Array1<f64> {
        self.0
    }

    pub(crate) fn from_raw(coeffs: Array1<f64>) -> Self {
        Self(coeffs)
    }
}

/// Running sufficient statistics `A = sum x x^T`, `B = sum p x^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnAccumulators {
    a: Array2<f64>,
    b: Array2<f64>,
    k: usize,
}

impl LearnAccumulators {
    pub fn new(atom_dim: usize, n_atoms: usize) -> Self {
        Self {
            a: Array2::zeros((n_atoms, n_atoms)),
            b: Array2::zeros((atom_dim, n_atoms)),
            k: 0,
        }
    }

    /// Accumulators from explicit matrices, e.g. for testing a dictionary
    /// update in isolation.
    pub fn from_parts(a: Array2<f64>, b: Array2<f64>, k: usize) -> Result<Self> {
        let n = a.nrows();
        ensure_dim("accumulator A columns", n, a.ncols())?;
        ensure_dim("accumulator B columns", n, b.ncols())?;
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("accumulators contain non-finite entries"));
        }
        for i in 0..n {
            for j in 0..i {
                let (x, y) = (a[[i, j]], a[[j, i]]);
                if (x - y).abs() > SYMMETRY_TOLERANCE * (1.0 + x.abs().max(y.abs())) {
                    return Err(Error::invalid(format!("accumulator A is not symmetric at ({i}, {j})")));
                }
            }
        }
        if k == 0 && (a.iter().any(|&v| v != 0.0) || b.iter().any(|&v| v != 0.0)) {
            return Err(Error::invalid("accumulators with k = 0 must be zero"));
        }
        Ok(Self { a, b, k })
    }

    /// Adds one `(patch, code)` observation.
    pub fn push(&mut self, patch: ArrayView1<'_, f64>, code: ArrayView1<'_, f64>) -> Result<()> {
        ensure_dim("accumulator patch", self.b.nrows(), patch.len())?;
        ensure_dim("accumulator code", self.a.nrows(), code.len())?;
        let nz: Vec<usize> = (0..code.len()).filter(|&i| code[i] != 0.0).collect();
        for &i in &nz {
            let xi = code[i];
            for &j in &nz {
                self.a[[i, j]] += xi * code[j];
            }
            self.b.column_mut(i).scaled_add(xi, &patch);
        }
        self.k += 1;
        Ok(())
    }

    pub fn a(&self) -> ArrayView2<'_, f64> {
        self.a.view()
    }

    pub fn b(&self) -> ArrayView2<'_, f64> {
        self.b.view()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn atom_dim(&self) -> usize {
        self.b.nrows()
    }

    pub fn n_atoms(&self) -> usize {
        self.a.nrows()
    }
}

/// Sparse-coding solvers available behind [`crate::solvers::solve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SolverId {
    Ista,
    Fista,
    FpcBb,
    Twist,
}

impl SolverId {
    pub const ALL: [SolverId; 4] = [SolverId::Ista, SolverId::Fista, SolverId::FpcBb, SolverId::Twist];

    /// Default relative-change tolerance: the fast solvers stop at `1e-5`,
    /// the plain shrinkage references at `1e-7`.
    pub fn default_eps(self) -> f64 {
        match self {
            SolverId::FpcBb | SolverId::Twist => 1e-5,
            SolverId::Ista | SolverId::Fista => 1e-7,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SolverId::Ista => "ista",
            SolverId::Fista => "fista",
            SolverId::FpcBb => "fpcbb",
            SolverId::Twist => "twist",
        }
    }
}

impl fmt::Display for SolverId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ista" => Ok(SolverId::Ista),
            "fista" => Ok(SolverId::Fista),
            "fpcbb" | "fpc-bb" | "fpc_bb" => Ok(SolverId::FpcBb),
            "twist" => Ok(SolverId::Twist),
            _ => Err(Error::UnknownSolver(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub solver: SolverId,
    /// Weight of the l1 penalty.
    pub mu: f64,
    /// Relative change `||x+ - x|| <= eps_rel ||x||` that ends a solve.
    pub eps_rel: f64,
    pub max_iters: usize,
    /// Keep the objective after every iteration in the trace.
    pub record_objective: bool,
}

impl SolverSettings {
    pub fn new(solver: SolverId, mu: f64) -> Self {
        Self {
            solver,
            mu,
            eps_rel: solver.default_eps(),
            max_iters: MAX_ITERS_CAP,
            record_objective: false,
        }
    }

    pub fn with_eps(mut self, eps_rel: f64) -> Self {
        self.eps_rel = eps_rel;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn recording(mut self) -> Self {
        self.record_objective = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::invalid(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.eps_rel > 0.0 && self.eps_rel.is_finite()) {
            return Err(Error::invalid(format!("eps_rel must be positive, got {}", self.eps_rel)));
        }
        if self.max_iters == 0 || self.max_iters > MAX_ITERS_CAP {
            return Err(Error::invalid(format!(
                "max_iters must lie in 1..={MAX_ITERS_CAP}, got {}",
                self.max_iters
            )));
        }
        Ok(())
    }
}
