//! Round trip of the binary dictionary, code and image artifacts, and the
//! errors raised for damaged files.

use ndarray::Array2;
use sparsedict::artifact::{decode_codes, decode_dictionary, decode_image, encode_codes, encode_dictionary, encode_image, HEADER_LEN};
use sparsedict::pipeline::overcomplete_dct_dictionary;
use sparsedict::synthetic::scene;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let d = overcomplete_dct_dictionary(4, 32)?;
    let bytes = encode_dictionary(&d);
    println!("dictionary 16x32: {} bytes ({} header + 8 per entry)", bytes.len(), HEADER_LEN);
    assert_eq!(decode_dictionary(&bytes)?, d);

    let codes = Array2::from_shape_fn((32, 5), |(i, j)| if (i + j) % 7 == 0 { 0.5 - i as f64 } else { 0.0 });
    let cbytes = encode_codes(codes.view());
    assert_eq!(decode_codes(&cbytes)?, codes);

    let img = scene(24, 40, 3)?;
    let ibytes = encode_image(&img);
    assert_eq!(decode_image(&ibytes)?, img);
    println!("codes and image round-trip bit for bit");

    println!("truncated: {}", decode_dictionary(&bytes[..bytes.len() - 3]).unwrap_err());
    println!("wrong kind: {}", decode_dictionary(&cbytes).unwrap_err());
    let mut bad = bytes.clone();
    bad[HEADER_LEN..HEADER_LEN + 8].copy_from_slice(&f64::NAN.to_le_bytes());
    println!("non-finite: {}", decode_dictionary(&bad).unwrap_err());
    Ok(())
}
