//! Online sparse dictionary learning and patch-based image recovery.
//!
//! The crate is organized around the data flow of a recovery experiment:
//!
//! - [`types`]: images, patches, dictionaries, codes and solver settings;
//! - [`solvers`]: ISTA, FISTA, FPC-BB and TwIST for the l2-l1 sparse-coding
//!   problem behind one [`solvers::solve`] entry point;
//! - [`learn`]: online dictionary learning with block-coordinate atom updates;
//! - [`pipeline`]: image I/O, patch grids, DCT initialization and
//!   reconstruction by overlap averaging;
//! - [`analysis`]: RelErr / Dev / SSIM, coefficient histograms, Gaussian fits
//!   and zero-peak handling;
//! - [`experiment`]: the `learn`, `reconstruct`, `analyze` and `sweep`
//!   commands that tie everything together and write artifacts;
//! - [`artifact`]: the binary and CSV artifact formats.

pub mod analysis;
pub mod artifact;
pub mod error;
pub mod experiment;
pub mod learn;
pub mod pipeline;
pub mod solvers;
pub mod synthetic;
pub mod types;

pub use error::{Error, Result};
pub use types::{Dictionary, GrayImage, LearnAccumulators, Patch, SolverId, SolverSettings, SparseCode};
