//! Builds the overcomplete DCT starting dictionary, reports its shape,
//! atom norms, mutual coherence and Lipschitz constant, and writes it as a
//! binary artifact and as CSV.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use sparsedict::artifact::{load_dictionary, save_dictionary, write_dictionary_csv};
use sparsedict::pipeline::overcomplete_dct_dictionary;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("sparsedict-dct"));
    std::fs::create_dir_all(&out)?;

    for (side, atoms) in [(4, 16), (8, 256), (16, 512)] {
        let d = overcomplete_dct_dictionary(side, atoms)?;
        let gram = d.atoms().t().dot(&d.atoms());
        let mut coherence: f64 = 0.0;
        for i in 0..atoms {
            for j in 0..i {
                coherence = coherence.max(gram[[i, j]].abs());
            }
        }
        let max_norm = (0..atoms).map(|j| gram[[j, j]].sqrt()).fold(0.0, f64::max);
        println!(
            "{side:>2}x{side:<2} patches, {atoms:>3} atoms: max norm {max_norm:.6}, coherence {coherence:.4}, L {:.3}",
            d.lipschitz()
        );
    }

    let d = overcomplete_dct_dictionary(8, 256)?;
    let bin = out.join("dct_64x256.sdd");
    save_dictionary(&bin, &d)?;
    let csv = out.join("dct_64x256.csv");
    write_dictionary_csv(&d, BufWriter::new(File::create(&csv)?))?;
    assert_eq!(load_dictionary(&bin)?, d);
    println!("wrote {} and {}", bin.display(), csv.display());
    Ok(())
}
