//! Reconstruction quality measures in grey units.

use std::io::Write;

use ndarray::{Array1, Array2, ArrayView2, Zip};

use crate::error::{Error, Result};
use crate::types::GrayImage;

/// Side of the SSIM Gaussian window.
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
/// Dynamic range used for the SSIM stabilizers.
pub const SSIM_RANGE: f64 = 255.0;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// `||org - rec||_F / ||org||_F`
pub fn rel_err(org: &GrayImage, rec: &GrayImage) -> Result<f64> {
    org.ensure_same_dim(rec, "rel_err")?;
    let (a, b) = (org.pixels(), rec.pixels());
    let num = Zip::from(&a).and(&b).fold(0.0, |s, &x, &y| s + (x - y) * (x - y));
    let den = a.iter().map(|v| v * v).sum::<f64>();
    if den == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok((num / den).sqrt())
}

/// Largest absolute pixel deviation.
pub fn max_dev(org: &GrayImage, rec: &GrayImage) -> Result<f64> {
    org.ensure_same_dim(rec, "max_dev")?;
    Ok(Zip::from(&org.pixels())
        .and(&rec.pixels())
        .fold(0.0_f64, |m, &x, &y| m.max((x - y).abs())))
}

/// Normalized 1-D Gaussian weights of the SSIM window.
pub fn ssim_kernel() -> Array1<f64> {
    let half = (SSIM_WINDOW / 2) as f64;
    let w = Array1::from_shape_fn(SSIM_WINDOW, |i| {
        let d = i as f64 - half;
        (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
    });
    let total = w.sum();
    w / total
}

/// Separable weighted filtering, keeping only positions where the window
/// fits entirely inside the image.
fn filter_valid(img: ArrayView2<'_, f64>, k: &Array1<f64>) -> Array2<f64> {
    let n = k.len();
    let (h, w) = img.dim();
    let (oh, ow) = (h + 1 - n, w + 1 - n);
    let mut rows = Array2::zeros((h, ow));
    for r in 0..h {
        for c in 0..ow {
            let mut s = 0.0;
            for i in 0..n {
                s += k[i] * img[[r, c + i]];
            }
            rows[[r, c]] = s;
        }
    }
    let mut out = Array2::zeros((oh, ow));
    for r in 0..oh {
        for c in 0..ow {
            let mut s = 0.0;
            for i in 0..n {
                s += k[i] * rows[[r + i, c]];
            }
            out[[r, c]] = s;
        }
    }
    out
}

/// Mean structural similarity over all `11 x 11` Gaussian windows
/// (sigma 1.5) lying inside the image, with `C1 = (0.01 * 255)^2` and
/// `C2 = (0.03 * 255)^2`.
pub fn ssim(org: &GrayImage, rec: &GrayImage) -> Result<f64> {
    org.ensure_same_dim(rec, "ssim")?;
    let (h, w) = org.dim();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::ImageTooSmall {
            height: h,
            width: w,
            window: SSIM_WINDOW,
        });
    }
    let k = ssim_kernel();
    let (a, b) = (org.pixels(), rec.pixels());
    let mu_a = filter_valid(a, &k);
    let mu_b = filter_valid(b, &k);
    let aa = filter_valid((&a * &a).view(), &k);
    let bb = filter_valid((&b * &b).view(), &k);
    let ab = filter_valid((&a * &b).view(), &k);
    let c1 = (SSIM_K1 * SSIM_RANGE).powi(2);
    let c2 = (SSIM_K2 * SSIM_RANGE).powi(2);

    let mut total = 0.0;
    Zip::from(&mu_a)
        .and(&mu_b)
        .and(&aa)
        .and(&bb)
        .and(&ab)
        .for_each(|&ma, &mb, &saa, &sbb, &sab| {
            let var_a = saa - ma * ma;
            let var_b = sbb - mb * mb;
            let cov = sab - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
        });
    Ok(total / mu_a.len() as f64)
}

/// Absolute difference scaled by `scale` and clamped to `[0, 255]`;
/// inverted (`255 - v`) when `invert` so that agreement shows white.
pub fn difference_image(org: &GrayImage, rec: &GrayImage, scale: f64, invert: bool) -> Result<GrayImage> {
    org.ensure_same_dim(rec, "difference_image")?;
    let out = Zip::from(&org.pixels()).and(&rec.pixels()).map_collect(|&x, &y| {
        let v = (scale * (x - y).abs()).clamp(0.0, 255.0);
        if invert {
            255.0 - v
        } else {
            v
        }
    });
    GrayImage::new(out)
}

/// The three reconstruction measures reported per image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    pub rel_err: f64,
    pub dev: f64,
    pub ssim: f64,
}

impl QualityReport {
    pub fn measure(org: &GrayImage, rec: &GrayImage) -> Result<Self> {
        Ok(Self {
            rel_err: rel_err(org, rec)?,
            dev: max_dev(org, rec)?,
            ssim: ssim(org, rec)?,
        })
    }

    pub const CSV_HEADER: [&'static str; 3] = ["rel_err", "dev", "ssim"];

    pub fn csv_fields(&self) -> [String; 3] {
        [self.rel_err.to_string(), self.dev.to_string(), self.ssim.to_string()]
    }

    /// Header plus one row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::CSV_HEADER)?;
        w.write_record(self.csv_fields())?;
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(h: usize, w: usize, seed: u64) -> GrayImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GrayImage::new(Array2::from_shape_fn((h, w), |_| rng.random::<f64>() * 255.0)).unwrap()
    }

    #[test]
    fn rel_err_examples() {
        let a = random_image(9, 7, 1);
        assert_eq!(rel_err(&a, &a).unwrap(), 0.0);
        let zero = GrayImage::filled(9, 7, 0.0).unwrap();
        assert!((rel_err(&a, &zero).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(rel_err(&zero, &a), Err(Error::ZeroReference)));
        let other = random_image(7, 9, 2);
        assert!(matches!(rel_err(&a, &other), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn max_dev_examples() {
        let a = random_image(5, 5, 3);
        assert_eq!(max_dev(&a, &a).unwrap(), 0.0);
        let mut px = a.pixels().to_owned();
        px[[2, 3]] += 2.01;
        let b = GrayImage::new(px).unwrap();
        assert!((max_dev(&a, &b).unwrap() - 2.01).abs() < 1e-12);
    }

    #[test]
    fn ssim_identity_and_shift() {
        let a = random_image(32, 40, 4);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let shifted = GrayImage::new(a.pixels().mapv(|v| v + 100.0)).unwrap();
        assert!(ssim(&a, &shifted).unwrap() < 1.0);
        let small = random_image(10, 30, 5);
        assert!(matches!(ssim(&small, &small), Err(Error::ImageTooSmall { .. })));
    }

    #[test]
    fn kernel_is_normalized() {
        let k = ssim_kernel();
        assert!((k.sum() - 1.0).abs() < 1e-15);
        assert_eq!(k[0], k[10]);
    }

    #[test]
    fn difference_examples() {
        let a = random_image(6, 6, 6);
        let white = difference_image(&a, &a, 50.0, true).unwrap();
        assert!(white.pixels().iter().all(|&v| v == 255.0));
        let b = GrayImage::new(a.pixels().mapv(|v| v + 6.0)).unwrap();
        let dark = difference_image(&a, &b, 50.0, true).unwrap();
        assert!(dark.pixels().iter().all(|&v| v == 0.0));
        let plain = difference_image(&a, &b, 50.0, false).unwrap();
        assert!(plain.pixels().iter().all(|&v| v == 255.0));
    }

    #[test]
    fn difference_matches_pixelwise_formula() {
        let a = random_image(8, 9, 7);
        let b = random_image(8, 9, 8);
        let d = difference_image(&a, &b, 3.0, true).unwrap();
        for r in 0..8 {
            for c in 0..9 {
                let expect = 255.0 - (3.0 * (a.get(r, c) - b.get(r, c)).abs()).min(255.0);
                assert_eq!(d.get(r, c), expect);
            }
        }
    }
}
