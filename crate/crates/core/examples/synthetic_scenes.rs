//! Writes a few deterministic synthetic scenes as PGM and PNG, and reads
//! one back through the image loader.

use std::path::PathBuf;

use sparsedict::pipeline::{load_image_file, save_pgm};
use sparsedict::synthetic::{scene_with, SceneParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir: PathBuf = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("sparsedict-scenes"));
    std::fs::create_dir_all(&dir)?;

    let presets = [("plain", SceneParams::default()), ("textured", SceneParams::textured()), (
        "grainy",
        SceneParams {
            grain: 6.0,
            ..SceneParams::default()
        },
    )];
    for (name, params) in presets {
        for seed in 0..2 {
            let img = scene_with(128, 128, seed, params)?;
            let path = dir.join(format!("{name}_{seed}.pgm"));
            save_pgm(&path, &img)?;
            let px = img.pixels();
            let mean = px.sum() / px.len() as f64;
            let sd = (px.mapv(|v| (v - mean).powi(2)).sum() / px.len() as f64).sqrt();
            println!("{}: mean {mean:.1}, std {sd:.1}", path.display());
        }
    }

    let png = dir.join("textured_0.png");
    let img = scene_with(128, 128, 0, SceneParams::textured())?;
    image::GrayImage::from_fn(128, 128, |c, r| image::Luma([img.get(r as usize, c as usize).round() as u8])).save(&png)?;
    let back = load_image_file(&png)?;
    println!("{} loads as {}x{}", png.display(), back.height(), back.width());
    Ok(())
}
