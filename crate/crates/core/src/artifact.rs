//! Binary and CSV serialization of dictionaries, code matrices and images.
//!
//! Binary layout (all integers and floats little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic: b"SDDC" dictionary, b"SDCM" code matrix, b"SDGI" image
//! 4       4     format version (u32), currently 1
//! 8       8     rows (u64)
//! 16      8     cols (u64)
//! 24      8*r*c payload, f64
//! ```
//!
//! Dictionaries and code matrices store their payload column by column (one
//! atom or one patch code after the other); images store rows.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView2, ShapeBuilder};

use crate::error::{ArtifactError, Error, Result};
use crate::types::{Dictionary, GrayImage};

pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArtifactKind {
    Dictionary,
    CodeMatrix,
    Image,
}

impl ArtifactKind {
    pub fn magic(self) -> [u8; 4] {
        match self {
            ArtifactKind::Dictionary => *b"SDDC",
            ArtifactKind::CodeMatrix => *b"SDCM",
            ArtifactKind::Image => *b"SDGI",
        }
    }

    fn column_major(self) -> bool {
        !matches!(self, ArtifactKind::Image)
    }
}

/// Total byte size of an artifact holding a `rows x cols` matrix.
pub fn encoded_len(rows: usize, cols: usize) -> usize {
    HEADER_LEN + rows * cols * 8
}

fn encode(kind: ArtifactKind, m: ArrayView2<'_, f64>) -> Vec<u8> {
    let (rows, cols) = m.dim();
    let mut out = Vec::with_capacity(encoded_len(rows, cols));
    out.extend_from_slice(&kind.magic());
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(rows as u64).to_le_bytes());
    out.extend_from_slice(&(cols as u64).to_le_bytes());
    let ordered = if kind.column_major() { m.reversed_axes() } else { m };
    for v in ordered.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn take<'a>(bytes: &'a [u8], at: usize, len: usize) -> Result<&'a [u8], ArtifactError> {
    bytes.get(at..at + len).ok_or(ArtifactError::Truncated {
        needed: at + len,
        available: bytes.len(),
    })
}

fn decode(kind: ArtifactKind, bytes: &[u8]) -> Result<Array2<f64>, ArtifactError> {
    let magic: [u8; 4] = take(bytes, 0, 4)?.try_into().unwrap();
    if magic != kind.magic() {
        return Err(ArtifactError::BadMagic {
            expected: kind.magic(),
            found: magic,
        });
    }
    let version = u32::from_le_bytes(take(bytes, 4, 4)?.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(ArtifactError::UnsupportedVersion(version));
    }
    let rows = u64::from_le_bytes(take(bytes, 8, 8)?.try_into().unwrap());
    let cols = u64::from_le_bytes(take(bytes, 16, 8)?.try_into().unwrap());
    let overflow = ArtifactError::DimensionOverflow { rows, cols };
    let count = rows.checked_mul(cols).ok_or(overflow.clone())?;
    let payload_len = count
        .checked_mul(8)
        .and_then(|n| usize::try_from(n).ok())
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or(overflow)?;
    if bytes.len() < payload_len {
        return Err(ArtifactError::Truncated {
            needed: payload_len,
            available: bytes.len(),
        });
    }
    if bytes.len() > payload_len {
        return Err(ArtifactError::TrailingBytes(bytes.len() - payload_len));
    }
    let values: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(ArtifactError::NonFinite);
    }
    let shape = (rows as usize, cols as usize);
    let m = if kind.column_major() {
        Array2::from_shape_vec(shape.f(), values)
    } else {
        Array2::from_shape_vec(shape, values)
    };
    m.map_err(|e| ArtifactError::Invalid(e.to_string()))
}

pub fn encode_dictionary(d: &Dictionary) -> Vec<u8> {
    encode(ArtifactKind::Dictionary, d.atoms())
}

pub fn decode_dictionary(bytes: &[u8]) -> Result<Dictionary> {
    let atoms = decode(ArtifactKind::Dictionary, bytes)?;
    Dictionary::undercomplete(atoms.as_standard_layout().into_owned())
        .map_err(|e| ArtifactError::Invalid(e.to_string()).into())
}

/// Encodes an `n_atoms x n_patches` coefficient matrix.
pub fn encode_codes(codes: ArrayView2<'_, f64>) -> Vec<u8> {
    encode(ArtifactKind::CodeMatrix, codes)
}

pub fn decode_codes(bytes: &[u8]) -> Result<Array2<f64>> {
    Ok(decode(ArtifactKind::CodeMatrix, bytes)?.as_standard_layout().into_owned())
}

pub fn encode_image(img: &GrayImage) -> Vec<u8> {
    encode(ArtifactKind::Image, img.pixels())
}

pub fn decode_image(bytes: &[u8]) -> Result<GrayImage> {
    let pixels = decode(ArtifactKind::Image, bytes)?;
    GrayImage::new(pixels).map_err(|e| ArtifactError::Invalid(e.to_string()).into())
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(Error::at_path(path))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(Error::at_path(path))
}

pub fn save_dictionary(path: impl AsRef<Path>, d: &Dictionary) -> Result<()> {
    write_bytes(path.as_ref(), &encode_dictionary(d))
}

pub fn load_dictionary(path: impl AsRef<Path>) -> Result<Dictionary> {
    decode_dictionary(&read_bytes(path.as_ref())?)
}

pub fn save_codes(path: impl AsRef<Path>, codes: ArrayView2<'_, f64>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_codes(codes))
}

pub fn load_codes(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    decode_codes(&read_bytes(path.as_ref())?)
}

pub fn save_image(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    write_bytes(path.as_ref(), &encode_image(img))
}

pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    decode_image(&read_bytes(path.as_ref())?)
}

/// Writes a matrix as CSV with one column per matrix column, named
/// `{prefix}_{j}`, and one row per matrix row.
fn write_columns_csv<W: Write>(m: ArrayView2<'_, f64>, prefix: &str, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record((0..m.ncols()).map(|j| format!("{prefix}_{j}")))?;
    for row in m.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// CSV export of a dictionary: a header of atom names and one row per
/// atom component.
pub fn write_dictionary_csv<W: Write>(d: &Dictionary, out: W) -> Result<()> {
    write_columns_csv(d.atoms(), "atom", out)
}

/// CSV export of an `n_atoms x n_patches` code matrix: one column per atom,
/// one row per patch.
pub fn write_codes_csv<W: Write>(codes: ArrayView2<'_, f64>, out: W) -> Result<()> {
    write_columns_csv(codes.t(), "atom", out)
}
