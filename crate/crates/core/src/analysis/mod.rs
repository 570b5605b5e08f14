//! Quality metrics and coefficient-distribution analysis.

mod histogram;
mod metrics;

pub use histogram::{
    analyze_sparsity, coefficient_histogram, detect_peak, fit_gaussian, histogram, remove_peak, sparsity_fraction,
    GaussianFit, Histogram, PeakStats, SparsityReport, DEFAULT_BINS, DEFAULT_KAPPA,
};
pub use metrics::{
    difference_image, max_dev, rel_err, ssim, ssim_kernel, QualityReport, SSIM_K1, SSIM_K2, SSIM_RANGE, SSIM_SIGMA,
    SSIM_WINDOW,
};
