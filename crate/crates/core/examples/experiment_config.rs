//! Resolves a command from a flat `key = value` config plus overrides, runs
//! it, and shows that the written manifest replays to the same result.

use std::path::PathBuf;

use sparsedict::experiment::{run, Command, ExperimentSpec, MANIFEST_NAME};
use sparsedict::pipeline::save_pgm;
use sparsedict::synthetic::scene;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir: PathBuf = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("sparsedict-config"));
    std::fs::create_dir_all(&dir)?;
    let img = dir.join("train.pgm");
    save_pgm(&img, &scene(32, 32, 5)?)?;

    let config = dir.join("learn.cfg");
    std::fs::write(
        &config,
        format!(
            "# online learning on one image\nimages = {}\nsolver = fpcbb\nmu = 2^-4\npatch = 4\natoms = 32\nn-patches = 50\nseed = 11\n",
            img.display()
        ),
    )?;
    let overrides = vec![
        ("out".to_string(), vec![dir.join("run1").display().to_string()]),
        ("seed".to_string(), vec!["12".to_string()]),
    ];
    let spec = ExperimentSpec::resolve(Command::Learn, Some(&config), &overrides)?;
    println!("seed from override: {}", spec.seed);
    let summary = run(&spec)?;
    println!("outputs: {:?}", summary.outputs);

    let manifest = dir.join("run1").join(MANIFEST_NAME);
    print!("{}", std::fs::read_to_string(&manifest)?);
    let replay = ExperimentSpec::resolve(
        Command::Learn,
        Some(&manifest),
        &[("out".to_string(), vec![dir.join("run2").display().to_string()])],
    )?;
    run(&replay)?;
    let same = std::fs::read(dir.join("run1/dictionary.sdd"))? == std::fs::read(dir.join("run2/dictionary.sdd"))?;
    println!("replayed dictionary identical: {same}");
    Ok(())
}
