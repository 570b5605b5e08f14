//! A small sweep over patch sides and solvers with the DCT dictionary,
//! printing RelErr, SSIM and the fitted histogram width for every cell.

use std::path::PathBuf;

use sparsedict::experiment::{cmd_sweep, read_sweep_csv, Command, ExperimentSpec};
use sparsedict::pipeline::save_pgm;
use sparsedict::synthetic::{scene_with, SceneParams};
use sparsedict::SolverId;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir: PathBuf = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("sparsedict-sweep"));
    std::fs::create_dir_all(&dir)?;
    let test = dir.join("test.pgm");
    save_pgm(&test, &scene_with(40, 40, 100, SceneParams::textured())?)?;

    let mut spec = ExperimentSpec::new(Command::Sweep);
    spec.test_images = vec![test];
    spec.solvers = vec![SolverId::FpcBb, SolverId::Twist];
    spec.mus = vec![0.0625];
    spec.patches = Some(vec![4, 8, 12]);
    spec.atoms = 256;
    // zero learning iterations: every cell uses the DCT start directly
    spec.n_patches = 0;
    spec.max_iters = 2000;
    spec.out = dir.join("out");
    cmd_sweep(&spec)?;

    println!("{:<6} {:>5} {:>10} {:>8} {:>8} {:>9}", "solver", "patch", "rel_err", "ssim", "sigma", "sparsity");
    for r in read_sweep_csv(spec.out.join("sweep.csv"))? {
        let num = |i: usize| r[i].parse::<f64>().unwrap_or(f64::NAN);
        println!("{:<6} {:>5} {:>10.3e} {:>8.5} {:>8.3} {:>9.3}", &r[0], &r[2], num(4), num(6), num(8), num(10));
    }
    Ok(())
}
