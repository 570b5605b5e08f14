//! Grey-scale image decoding and PGM output.

use std::fs;
use std::path::Path;

use image::DynamicImage;
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::types::GrayImage;

/// Luminance weights applied to colour inputs.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Decodes PGM/PPM (binary or ASCII) or PNG bytes into a `[0, 255]` grey image.
///
/// Grey inputs keep their values; colour inputs are reduced with
/// [`LUMA_WEIGHTS`]. Samples deeper than 8 bits are rescaled to `[0, 255]`.
pub fn load_image_grayscale(bytes: &[u8]) -> Result<GrayImage> {
    let img = image::load_from_memory(bytes)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let values: Vec<f64> = match img {
        DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(f64::from).collect(),
        DynamicImage::ImageLumaA8(buf) => buf.pixels().map(|p| f64::from(p.0[0])).collect(),
        DynamicImage::ImageLuma16(buf) => buf.into_raw().into_iter().map(|v| f64::from(v) / 257.0).collect(),
        DynamicImage::ImageLumaA16(buf) => buf.pixels().map(|p| f64::from(p.0[0]) / 257.0).collect(),
        DynamicImage::ImageRgb8(_) | DynamicImage::ImageRgba8(_) => {
            img.to_rgb8().pixels().map(|p| luminance(p.0.map(f64::from))).collect()
        }
        other => other
            .to_rgb16()
            .pixels()
            .map(|p| luminance(p.0.map(|v| f64::from(v) / 257.0)))
            .collect(),
    };
    GrayImage::from_row_major(h, w, values)
}

fn luminance(rgb: [f64; 3]) -> f64 {
    LUMA_WEIGHTS[0] * rgb[0] + LUMA_WEIGHTS[1] * rgb[1] + LUMA_WEIGHTS[2] * rgb[2]
}

pub fn load_image_file(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(Error::at_path(path))?;
    load_image_grayscale(&bytes)
}

/// Binary 8-bit PGM (`P5`). Values are clamped to `[0, 255]` and rounded.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", img.width(), img.height());
    let mut out = header.into_bytes();
    out.extend(img.pixels().iter().map(|v| v.clamp(0.0, 255.0).round() as u8));
    out
}

pub fn save_pgm(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(img)).map_err(Error::at_path(path))
}

/// Copy of `img` with every pixel multiplied by `factor`.
pub fn scale_image(img: &GrayImage, factor: f64) -> Result<GrayImage> {
    GrayImage::new(img.pixels().mapv(|v| v * factor))
}

/// 8-bit buffer to image, row-major.
pub fn from_u8(height: usize, width: usize, data: &[u8]) -> Result<GrayImage> {
    let pixels = Array2::from_shape_fn((height, width), |(r, c)| f64::from(data[r * width + c]));
    GrayImage::new(pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pgm(width: usize, height: usize, fill: u8) -> Vec<u8> {
        let mut v = format!("P5\n{width} {height}\n255\n").into_bytes();
        v.extend(std::iter::repeat_n(fill, width * height));
        v
    }

    #[test]
    fn constant_pgm() {
        let img = load_image_grayscale(&pgm(5, 3, 128)).unwrap();
        assert_eq!(img.dim(), (3, 5));
        assert!(img.pixels().iter().all(|&v| v == 128.0));
    }

    #[test]
    fn red_pixel_luminance() {
        let mut ppm = b"P6\n1 1\n255\n".to_vec();
        ppm.extend([255, 0, 0]);
        let img = load_image_grayscale(&ppm).unwrap();
        assert!((img.get(0, 0) - 76.245).abs() < 1e-12);
    }

    #[test]
    fn ascii_pgm_and_dimensions() {
        let img = load_image_grayscale(b"P2\n3 2\n255\n0 10 20\n30 40 50\n").unwrap();
        assert_eq!(img.dim(), (2, 3));
        assert_eq!(img.get(1, 2), 50.0);
        let big = load_image_grayscale(&pgm(224, 224, 7)).unwrap();
        assert_eq!(big.dim(), (224, 224));
    }

    #[test]
    fn garbage_is_rejected() {
        assert!(matches!(load_image_grayscale(b"not an image"), Err(Error::Image(_))));
        assert!(load_image_grayscale(b"P5\n4 4\n255\n\x01\x02").is_err());
    }

    #[test]
    fn pgm_roundtrip_rounds_and_clamps() {
        let img = GrayImage::from_row_major(1, 4, vec![-3.0, 10.4, 10.6, 300.0]).unwrap();
        let back = load_image_grayscale(&encode_pgm(&img)).unwrap();
        assert_eq!(back.pixels().iter().copied().collect::<Vec<_>>(), vec![0.0, 10.0, 11.0, 255.0]);
    }
}
