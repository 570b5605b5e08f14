use std::f64::consts::PI;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::types::Dictionary;

/// `side x q` one-dimensional overcomplete cosine block; every column except
/// the constant one has its mean removed.
fn cosine_block(side: usize, q: usize) -> Array2<f64> {
    let mut block = Array2::from_shape_fn((side, q), |(r, c)| (PI * c as f64 * (2 * r + 1) as f64 / (2 * q) as f64).cos());
    for mut col in block.columns_mut().into_iter().skip(1) {
        let mean = col.mean().unwrap_or(0.0);
        col -= mean;
    }
    block
}

/// Separable overcomplete DCT dictionary for `side x side` patches.
///
/// The 2-D atoms are Kronecker products of a `side x ceil(sqrt(n_atoms))`
/// cosine block with itself, truncated to `n_atoms` columns and normalized
/// to unit length. Atom components follow the column-stacked patch order.
pub fn overcomplete_dct_dictionary(side: usize, n_atoms: usize) -> Result<Dictionary> {
    if side == 0 {
        return Err(Error::invalid("patch side must be positive"));
    }
    let m = side * side;
    if n_atoms < m {
        return Err(Error::invalid(format!(
            "{n_atoms} atoms cannot span {side}x{side} patches (need at least {m})"
        )));
    }
    let mut q = (n_atoms as f64).sqrt().ceil() as usize;
    while q * q < n_atoms {
        q += 1;
    }
    let block = cosine_block(side, q);
    let mut atoms = Array2::zeros((m, n_atoms));
    for (j, mut atom) in atoms.columns_mut().into_iter().enumerate() {
        let (c_outer, c_inner) = (j / q, j % q);
        for col in 0..side {
            for row in 0..side {
                atom[col * side + row] = block[[col, c_outer]] * block[[row, c_inner]];
            }
        }
        let norm = atom.dot(&atom).sqrt();
        atom /= norm;
    }
    Dictionary::new(atoms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_shape_and_unit_norms() {
        let d = overcomplete_dct_dictionary(8, 256).unwrap();
        assert_eq!((d.atom_dim(), d.n_atoms()), (64, 256));
        for c in d.atoms().columns() {
            assert!((c.dot(&c).sqrt() - 1.0).abs() <= 1e-12);
        }
        assert!(d.validate().is_ok());
    }

    #[test]
    fn truncated_block() {
        let d = overcomplete_dct_dictionary(4, 512).unwrap();
        assert_eq!((d.atom_dim(), d.n_atoms()), (16, 512));
        assert!(d.validate().is_ok());
        for c in d.atoms().columns() {
            assert!((c.dot(&c).sqrt() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn first_atom_is_constant() {
        let d = overcomplete_dct_dictionary(3, 16).unwrap();
        let first = d.atom(0);
        assert!(first.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
        // all others are zero-mean
        for j in 1..16 {
            assert!(d.atom(j).sum().abs() < 1e-12);
        }
    }

    #[test]
    fn too_few_atoms() {
        assert!(overcomplete_dct_dictionary(8, 63).is_err());
        assert!(overcomplete_dct_dictionary(8, 64).is_ok());
    }
}
