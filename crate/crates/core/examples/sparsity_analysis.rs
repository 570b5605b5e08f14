//! Coefficient histogram, robust Gaussian fit, peak detection and peak
//! removal for the codes of one reconstruction, across three penalties.

use sparsedict::experiment::{analyze_codes, Resynthesis};
use sparsedict::pipeline::{overcomplete_dct_dictionary, reconstruct_image, ReconstructConfig};
use sparsedict::synthetic::{scene_with, SceneParams};
use sparsedict::{SolverId, SolverSettings};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let img = scene_with(64, 64, 100, SceneParams::textured())?;
    let dict = overcomplete_dct_dictionary(8, 256)?;

    for e in [-8, -4, -1] {
        let mu = 2f64.powi(e);
        let cfg = ReconstructConfig::new(SolverSettings::new(SolverId::FpcBb, mu), 8, 2);
        let rec = reconstruct_image(&img, &dict, &cfg)?;
        let resynth = Resynthesis {
            dict: &dict,
            grid: rec.grid,
            original: &img,
            tonal_range: cfg.tonal_range,
        };
        let a = analyze_codes(rec.codes.view(), 100, 3.0, Some(&resynth))?;
        let r = &a.report;
        println!("mu 2^{e}: sparsity fraction {:.3}", r.sparsity_fraction);
        match r.fit {
            Some(f) => println!("  fit m {:.3}, sigma {:.3}, residual {:.1} over {} bins", f.mean, f.sigma, f.fit_residual, f.bins_used),
            None => println!("  too few populated bins to fit"),
        }
        match r.peak.edges {
            Some((lo, hi)) => println!(
                "  peak [{lo:.2}, {hi:.2}) holds {} coefficients ({:.1}%)",
                r.peak.count,
                100.0 * r.peak_fraction
            ),
            None => println!("  no peak above the fit"),
        }
        if let (Some(q), Some(pr)) = (a.quality, a.peak_removed_quality) {
            println!("  SSIM {:.5}; after zeroing {} peak coefficients {:.5}", q.ssim, a.removed, pr.ssim);
        }
    }
    Ok(())
}
