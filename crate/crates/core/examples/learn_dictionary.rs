//! Online dictionary learning on two synthetic scenes, starting from the
//! overcomplete DCT. Prints how the surrogate objective and code sparsity
//! evolve and how far the atoms moved.

use std::path::PathBuf;

use sparsedict::experiment::learn_on_images;
use sparsedict::learn::LearnConfig;
use sparsedict::pipeline::overcomplete_dct_dictionary;
use sparsedict::synthetic::{scene_with, SceneParams};
use sparsedict::{SolverId, SolverSettings};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("sparsedict-learn"));
    std::fs::create_dir_all(&out)?;

    let train = vec![
        scene_with(64, 64, 1, SceneParams::textured())?,
        scene_with(64, 64, 2, SceneParams::textured())?,
    ];
    let d0 = overcomplete_dct_dictionary(8, 256)?;
    let mut cfg = LearnConfig::new(400, SolverSettings::new(SolverId::FpcBb, 0.0625), 7);
    // a few sweeps per step keep the example quick; the update is warm-started
    cfg.bcd.max_sweeps = 3;
    let outcome = learn_on_images(&train, &d0, 2, 255.0, &cfg)?;

    for r in outcome.log.records.iter().step_by(50) {
        println!(
            "iteration {:>4}: surrogate {:>12.3}, zeros {:>3}/256, solver iterations {:>4}",
            r.iteration, r.surrogate, r.zeros, r.solver_iterations
        );
    }
    let moved = (&outcome.dictionary.atoms() - &d0.atoms())
        .columns()
        .into_iter()
        .map(|c| c.dot(&c).sqrt())
        .fold(0.0, f64::max);
    println!("largest atom change {moved:.4}; unit ball holds: {}", outcome.dictionary.validate().is_ok());

    let path = out.join("learned.sdd");
    sparsedict::artifact::save_dictionary(&path, &outcome.dictionary)?;
    println!("wrote {}", path.display());
    Ok(())
}
