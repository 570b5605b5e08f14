use ndarray::{Array1, Array2, ArrayView2};
use rayon::prelude::*;

use crate::analysis::rel_err;
use crate::error::{ensure_dim, Error, Result};
use crate::solvers::{solve, BpdnProblem};
use crate::types::{Dictionary, GrayImage, SolverSettings, SparseCode};

use super::io::scale_image;
use super::patches::{patch_matrix, reassemble, PatchGrid};

/// Grey levels spanned by images on disk.
pub const GREY_RANGE: f64 = 255.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructConfig {
    /// Per-patch solver settings; `eps_rel` plays the role of the image
    /// tolerance.
    pub settings: SolverSettings,
    pub side: usize,
    pub stride: usize,
    /// Upper end of the working domain patches are coded in. Pixels are
    /// multiplied by `tonal_range / 255` before coding and mapped back after.
    pub tonal_range: f64,
}

impl ReconstructConfig {
    pub fn new(settings: SolverSettings, side: usize, stride: usize) -> Self {
        Self {
            settings,
            side,
            stride,
            tonal_range: GREY_RANGE,
        }
    }

    fn scale(&self) -> f64 {
        self.tonal_range / GREY_RANGE
    }
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub image: GrayImage,
    /// `n_atoms x n_patches`, one code per grid patch in raster order.
    pub codes: Array2<f64>,
    pub grid: PatchGrid,
    /// Border pixels outside every patch, copied from the input.
    pub uncovered_pixels: usize,
    /// `||org - rec||_F / ||org||_F`, `None` for an all-black input.
    pub image_rel_err: Option<f64>,
    /// Whether the image-level Frobenius criterion holds at `eps_rel`.
    pub meets_image_tolerance: bool,
    pub solver_iterations: Vec<usize>,
}

/// Sparse-codes every grid patch of `img` against `dict` (starting from the
/// zero code) and reassembles the estimate by overlap averaging.
pub fn reconstruct_image(img: &GrayImage, dict: &Dictionary, cfg: &ReconstructConfig) -> Result<Reconstruction> {
    ensure_dim("dictionary atom dimension vs patch side", cfg.side * cfg.side, dict.atom_dim())?;
    cfg.settings.validate()?;
    if !(cfg.tonal_range > 0.0 && cfg.tonal_range.is_finite()) {
        return Err(Error::invalid("tonal range must be positive"));
    }
    let grid = PatchGrid::for_image(img, cfg.side, cfg.stride)?;
    let working = scale_image(img, cfg.scale())?;
    let targets = patch_matrix(&working, &grid);
    let x0 = SparseCode::zeros(dict.n_atoms());
    // warm the cached step size before fanning out
    dict.lipschitz();

    let solved: Vec<(Array1<f64>, usize)> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let prob = BpdnProblem::new(dict, targets.column(idx), cfg.settings.mu)?;
            let (code, trace) = solve(&prob, &x0, &cfg.settings)?;
            Ok((code.into_inner(), trace.iterations))
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| locate_failure(e, dict, &targets, &x0, cfg))?;

    let mut codes = Array2::zeros((dict.n_atoms(), grid.len()));
    let mut iterations = Vec::with_capacity(grid.len());
    for (idx, (code, iters)) in solved.into_iter().enumerate() {
        codes.column_mut(idx).assign(&code);
        iterations.push(iters);
    }
    let (image, uncovered_pixels) = synthesize(dict, codes.view(), &grid, img, cfg.tonal_range)?;
    let image_rel_err = rel_err(img, &image).ok();
    let meets_image_tolerance = image_rel_err.is_some_and(|e| e <= cfg.settings.eps_rel);
    Ok(Reconstruction {
        image,
        codes,
        grid,
        uncovered_pixels,
        image_rel_err,
        meets_image_tolerance,
        solver_iterations: iterations,
    })
}

// The parallel collect reports some failing patch; rescan sequentially so the
// error names the first one.
fn locate_failure(err: Error, dict: &Dictionary, targets: &Array2<f64>, x0: &SparseCode, cfg: &ReconstructConfig) -> Error {
    for (index, t) in targets.columns().into_iter().enumerate() {
        let attempt = BpdnProblem::new(dict, t, cfg.settings.mu).and_then(|prob| solve(&prob, x0, &cfg.settings));
        if let Err(source) = attempt {
            return Error::Coding {
                what: "patch",
                index,
                source: Box::new(source),
            };
        }
    }
    err
}

/// Image from a code matrix: `D X` reassembled on `grid`, mapped from the
/// working domain back to grey levels. Uncovered pixels come from
/// `original`. Returns the image and the number of uncovered pixels.
pub fn synthesize(
    dict: &Dictionary,
    codes: ArrayView2<'_, f64>,
    grid: &PatchGrid,
    original: &GrayImage,
    tonal_range: f64,
) -> Result<(GrayImage, usize)> {
    ensure_dim("code length", dict.n_atoms(), codes.nrows())?;
    let estimates = dict.atoms().dot(&codes) * (GREY_RANGE / tonal_range);
    let out = reassemble(grid, estimates.view(), original)?;
    Ok((out.image, out.uncovered))
}
