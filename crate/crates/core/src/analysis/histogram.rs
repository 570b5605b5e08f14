//! Coefficient histograms, Gaussian fitting and zero-peak detection.
//!
//! The sparsity regime of a code matrix shows in its coefficient histogram:
//! a roughly Gaussian body, plus (when the penalty bites) a spike of
//! coefficients at or around zero. The spike is located as the run of bins
//! around zero whose counts exceed `kappa` times the fitted Gaussian.

use std::io::Write;
use std::ops::Range;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 100;
pub const DEFAULT_KAPPA: f64 = 3.0;

const FIT_ITERATIONS: usize = 100;
const FIT_STEP_TOLERANCE: f64 = 1e-10;
const MIN_FIT_BINS: usize = 3;
const REFINE_ROUNDS: usize = 10;

/// Equal-width histogram. A degenerate histogram (all samples identical)
/// has a single unit-width bin centred on the common value.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    edges: Vec<f64>,
    counts: Vec<u64>,
    degenerate: bool,
}

impl Histogram {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }

    pub fn center(&self, i: usize) -> f64 {
        0.5 * (self.edges[i] + self.edges[i + 1])
    }

    pub fn bin_range(&self, i: usize) -> (f64, f64) {
        (self.edges[i], self.edges[i + 1])
    }

    /// Bin whose half-open interval holds `v`, if any.
    pub fn bin_of(&self, v: f64) -> Option<usize> {
        let (lo, hi) = (self.edges[0], *self.edges.last().unwrap());
        if !(v >= lo && v < hi) {
            return None;
        }
        let i = ((v - lo) / self.bin_width()).floor() as usize;
        Some(i.min(self.n_bins() - 1))
    }

    /// CSV with `bin_low,bin_high,center,count,fitted`; `fitted` is the
    /// Gaussian's prediction at the bin centre, or empty without a fit.
    pub fn write_csv<W: Write>(&self, fit: Option<&GaussianFit>, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_low", "bin_high", "center", "count", "fitted"])?;
        for i in 0..self.n_bins() {
            let (lo, hi) = self.bin_range(i);
            let fitted = fit.map(|f| f.predict(self.center(i)).to_string()).unwrap_or_default();
            w.write_record([
                lo.to_string(),
                hi.to_string(),
                self.center(i).to_string(),
                self.counts[i].to_string(),
                fitted,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Histogram of all values with `n_bins` equal-width bins spanning
/// `[min, max]`; the upper edge is nudged up so the maximum falls in the last
/// bin.
pub fn histogram<I: IntoIterator<Item = f64>>(values: I, n_bins: usize) -> Result<Histogram> {
    if n_bins == 0 {
        return Err(Error::invalid("histogram needs at least one bin"));
    }
    let values: Vec<f64> = values.into_iter().collect();
    if values.is_empty() {
        return Err(Error::invalid("histogram of an empty sample"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("histogram sample contains non-finite values"));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == max {
        return Ok(Histogram {
            edges: vec![lo - 0.5, lo + 0.5],
            counts: vec![values.len() as u64],
            degenerate: true,
        });
    }
    let hi = max + 1e-12 * (max - lo).max(max.abs());
    let width = (hi - lo) / n_bins as f64;
    let edges: Vec<f64> = (0..=n_bins)
        .map(|i| if i == n_bins { hi } else { lo + width * i as f64 })
        .collect();
    let mut counts = vec![0u64; n_bins];
    for v in values {
        let i = (((v - lo) / width).floor() as usize).min(n_bins - 1);
        counts[i] += 1;
    }
    Ok(Histogram {
        edges,
        counts,
        degenerate: false,
    })
}

/// Histogram of every entry of a code matrix.
pub fn coefficient_histogram(codes: ArrayView2<'_, f64>, n_bins: usize) -> Result<Histogram> {
    histogram(codes.iter().copied(), n_bins)
}

/// `amplitude * exp(-(c - mean)^2 / (2 sigma^2))` fitted to bin counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFit {
    pub amplitude: f64,
    pub mean: f64,
    pub sigma: f64,
    /// Root-mean-square count error over the fitted bins.
    pub fit_residual: f64,
    pub bins_used: usize,
}

impl GaussianFit {
    pub fn predict(&self, c: f64) -> f64 {
        let z = (c - self.mean) / self.sigma;
        self.amplitude * (-0.5 * z * z).exp()
    }
}

/// Contiguous run of histogram bins forming the zero peak.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakStats {
    pub bins: Range<usize>,
    pub count: u64,
    /// `(low, high)` outer edges of the run; `None` for an empty peak.
    pub edges: Option<(f64, f64)>,
}

impl PeakStats {
    pub fn empty() -> Self {
        Self {
            bins: 0..0,
            count: 0,
            edges: None,
        }
    }

    pub fn from_bins(h: &Histogram, bins: Range<usize>) -> Self {
        if bins.is_empty() {
            return Self::empty();
        }
        let count = h.counts()[bins.clone()].iter().sum();
        let edges = Some((h.edges()[bins.start], h.edges()[bins.end]));
        Self { bins, count, edges }
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Share of all histogram samples inside the peak.
    pub fn fraction_of(&self, h: &Histogram) -> f64 {
        self.count as f64 / h.total() as f64
    }

    pub fn contains(&self, v: f64) -> bool {
        self.edges.is_some_and(|(lo, hi)| v >= lo && v <= hi)
    }
}

/// Least-squares Gaussian through the `(centre, count)` pairs of all bins
/// outside `exclude`.
///
/// Damped Gauss-Newton started from the count-weighted mean and standard
/// deviation of the included bins, with the amplitude solved in closed form
/// for that start. Stops after 100 iterations or once the relative parameter
/// step drops below `1e-10`.
pub fn fit_gaussian(h: &Histogram, exclude: Option<&PeakStats>) -> Result<GaussianFit> {
    let skip = exclude.map(|p| p.bins.clone()).unwrap_or(0..0);
    let points: Vec<(f64, f64)> = (0..h.n_bins())
        .filter(|i| !skip.contains(i))
        .map(|i| (h.center(i), h.counts()[i] as f64))
        .collect();
    let nonzero = points.iter().filter(|p| p.1 > 0.0).count();
    if nonzero < MIN_FIT_BINS {
        return Err(Error::InsufficientBins {
            needed: MIN_FIT_BINS,
            found: nonzero,
        });
    }

    let weight: f64 = points.iter().map(|p| p.1).sum();
    let mean = points.iter().map(|p| p.0 * p.1).sum::<f64>() / weight;
    let var = points.iter().map(|p| (p.0 - mean).powi(2) * p.1).sum::<f64>() / weight;
    let sigma = var.sqrt().max(0.5 * h.bin_width());
    let shape = |c: f64, m: f64, s: f64| (-0.5 * ((c - m) / s).powi(2)).exp();
    let amplitude = {
        let (num, den) = points.iter().fold((0.0, 0.0), |(n, d), &(c, y)| {
            let e = shape(c, mean, sigma);
            (n + y * e, d + e * e)
        });
        if den > 0.0 {
            num / den
        } else {
            points.iter().map(|p| p.1).fold(0.0, f64::max)
        }
    };

    let sse = |t: &[f64; 3]| -> f64 {
        points
            .iter()
            .map(|&(c, y)| (y - t[0] * shape(c, t[1], t[2])).powi(2))
            .sum()
    };
    let mut theta = [amplitude, mean, sigma];
    let mut current = sse(&theta);
    let mut damping = 1e-3;

    for _ in 0..FIT_ITERATIONS {
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for &(c, y) in &points {
            let [a, m, s] = theta;
            let e = shape(c, m, s);
            let d = c - m;
            let grad = [e, a * e * d / (s * s), a * e * d * d / (s * s * s)];
            let r = y - a * e;
            for i in 0..3 {
                jtr[i] += grad[i] * r;
                for j in 0..3 {
                    jtj[i][j] += grad[i] * grad[j];
                }
            }
        }
        let mut converged = false;
        let mut accepted = false;
        for _ in 0..20 {
            let mut lhs = jtj;
            for (i, row) in lhs.iter_mut().enumerate() {
                row[i] += damping * jtj[i][i].max(f64::MIN_POSITIVE);
            }
            let Some(step) = solve3(lhs, jtr) else {
                damping *= 10.0;
                continue;
            };
            let trial = [theta[0] + step[0], theta[1] + step[1], theta[2] + step[2]];
            if !(trial[2] > 0.0) {
                damping *= 10.0;
                continue;
            }
            let value = sse(&trial);
            if value <= current {
                let rel = (0..3)
                    .map(|i| step[i].abs() / theta[i].abs().max(f64::MIN_POSITIVE))
                    .fold(0.0, f64::max);
                theta = trial;
                current = value;
                damping = (damping / 10.0).max(1e-12);
                converged = rel < FIT_STEP_TOLERANCE;
                accepted = true;
                break;
            }
            damping *= 10.0;
        }
        if converged || !accepted {
            break;
        }
    }

    Ok(GaussianFit {
        amplitude: theta[0],
        mean: theta[1],
        sigma: theta[2].abs(),
        fit_residual: (current / points.len() as f64).sqrt(),
        bins_used: points.len(),
    })
}

/// 3x3 linear solve by Gaussian elimination with partial pivoting.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if !(a[pivot][col].abs() > 0.0) {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Bins around zero whose counts exceed `kappa` times the fitted curve.
///
/// The run starts at the bin holding 0 and grows outward while the
/// criterion holds. A degenerate histogram is all peak.
pub fn detect_peak(h: &Histogram, fit: &GaussianFit, kappa: f64) -> PeakStats {
    if h.is_degenerate() {
        return PeakStats::from_bins(h, 0..1);
    }
    let exceeds = |i: usize| h.counts()[i] as f64 > kappa * fit.predict(h.center(i));
    let Some(zero) = h.bin_of(0.0) else {
        return PeakStats::empty();
    };
    if !exceeds(zero) {
        return PeakStats::empty();
    }
    let mut start = zero;
    while start > 0 && exceeds(start - 1) {
        start -= 1;
    }
    let mut end = zero + 1;
    while end < h.n_bins() && exceeds(end) {
        end += 1;
    }
    PeakStats::from_bins(h, start..end)
}

/// Sets every coefficient inside the peak's closed edge interval to zero.
/// Returns the new matrix and the number of coefficients that changed.
pub fn remove_peak(codes: ArrayView2<'_, f64>, peak: &PeakStats) -> (Array2<f64>, usize) {
    let mut removed = 0;
    let out = codes.mapv(|v| {
        if peak.contains(v) {
            if v != 0.0 {
                removed += 1;
            }
            0.0
        } else {
            v
        }
    });
    (out, removed)
}

/// Share of coefficients that are exactly zero.
pub fn sparsity_fraction(codes: ArrayView2<'_, f64>) -> f64 {
    if codes.is_empty() {
        return 0.0;
    }
    codes.iter().filter(|&&v| v == 0.0).count() as f64 / codes.len() as f64
}

/// Everything the sparsity assessment reports about one code matrix.
#[derive(Debug, Clone)]
pub struct SparsityReport {
    pub histogram: Histogram,
    /// Gaussian fitted to the bins outside the peak; `None` when too few
    /// bins are populated.
    pub fit: Option<GaussianFit>,
    pub peak: PeakStats,
    pub peak_fraction: f64,
    pub sparsity_fraction: f64,
}

impl SparsityReport {
    pub const CSV_HEADER: [&'static str; 11] = [
        "n_bins",
        "degenerate",
        "m",
        "sigma",
        "fit_residual",
        "peak_first_bin",
        "peak_bins",
        "peak_count",
        "peak_low",
        "peak_high",
        "sparsity_fraction",
    ];

    pub fn csv_fields(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        vec![
            self.histogram.n_bins().to_string(),
            self.histogram.is_degenerate().to_string(),
            opt(self.fit.map(|f| f.mean)),
            opt(self.fit.map(|f| f.sigma)),
            opt(self.fit.map(|f| f.fit_residual)),
            self.peak.bins.start.to_string(),
            self.peak.bins.len().to_string(),
            self.peak.count.to_string(),
            opt(self.peak.edges.map(|e| e.0)),
            opt(self.peak.edges.map(|e| e.1)),
            self.sparsity_fraction.to_string(),
        ]
    }
}

/// Histogram, fit and peak of a code matrix.
///
/// The first fit leaves out the bin holding zero, where a sparsity spike
/// would sit; the peak found against that fit is then excluded from the next
/// fit, and the two steps alternate until the peak stops changing.
pub fn analyze_sparsity(codes: ArrayView2<'_, f64>, n_bins: usize, kappa: f64) -> Result<SparsityReport> {
    let h = coefficient_histogram(codes, n_bins)?;
    let sparsity = sparsity_fraction(codes);
    if h.is_degenerate() {
        let peak = PeakStats::from_bins(&h, 0..1);
        return Ok(SparsityReport {
            peak_fraction: peak.fraction_of(&h),
            histogram: h,
            fit: None,
            peak,
            sparsity_fraction: sparsity,
        });
    }

    let zero_bin = h.bin_of(0.0).map(|z| PeakStats::from_bins(&h, z..z + 1));
    let mut fit = zero_bin
        .as_ref()
        .and_then(|z| fit_gaussian(&h, Some(z)).ok())
        .or_else(|| fit_gaussian(&h, None).ok());
    let mut peak = PeakStats::empty();
    if let Some(mut current) = fit {
        for _ in 0..REFINE_ROUNDS {
            let next_peak = detect_peak(&h, &current, kappa);
            let exclude = (!next_peak.is_empty()).then_some(&next_peak);
            let refit = match fit_gaussian(&h, exclude) {
                Ok(f) => f,
                Err(_) => {
                    peak = next_peak;
                    break;
                }
            };
            let stable = next_peak == peak;
            peak = next_peak;
            current = refit;
            if stable {
                break;
            }
        }
        fit = Some(current);
    }
    Ok(SparsityReport {
        peak_fraction: peak.fraction_of(&h),
        histogram: h,
        fit,
        peak,
        sparsity_fraction: sparsity,
    })
}
