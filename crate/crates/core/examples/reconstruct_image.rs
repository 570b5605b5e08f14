//! Patch-wise reconstruction of a held-out scene at three penalties, with
//! quality metrics and the reconstructed and difference images written as
//! PGM.

use std::path::PathBuf;

use sparsedict::analysis::{difference_image, QualityReport};
use sparsedict::pipeline::{overcomplete_dct_dictionary, reconstruct_image, save_pgm, ReconstructConfig};
use sparsedict::synthetic::{scene_with, SceneParams};
use sparsedict::{SolverId, SolverSettings};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("sparsedict-rec"));
    std::fs::create_dir_all(&out)?;

    let img = scene_with(64, 64, 100, SceneParams::textured())?;
    save_pgm(out.join("original.pgm"), &img)?;
    let dict = overcomplete_dct_dictionary(8, 256)?;

    for e in [-8, -4, -1] {
        let mu = 2f64.powi(e);
        let cfg = ReconstructConfig::new(SolverSettings::new(SolverId::FpcBb, mu), 8, 2);
        let rec = reconstruct_image(&img, &dict, &cfg)?;
        let q = QualityReport::measure(&img, &rec.image)?;
        let zeros = rec.codes.iter().filter(|v| **v == 0.0).count() as f64 / rec.codes.len() as f64;
        println!(
            "mu 2^{e:<3} RelErr {:.3e}  Dev {:>6.3}  SSIM {:.5}  zero coefficients {:.1}%  patches {}",
            q.rel_err,
            q.dev,
            q.ssim,
            100.0 * zeros,
            rec.grid.len()
        );
        save_pgm(out.join(format!("rec_mu2^{e}.pgm")), &rec.image)?;
        save_pgm(out.join(format!("diff_mu2^{e}.pgm")), &difference_image(&img, &rec.image, 50.0, true)?)?;
    }
    println!("images in {}", out.display());
    Ok(())
}
