//! Invariants of the artifact formats and the coefficient analysis.

use ndarray::Array2;
use proptest::prelude::*;
use sparsedict::analysis::{coefficient_histogram, detect_peak, fit_gaussian, remove_peak, sparsity_fraction};
use sparsedict::artifact::{decode_codes, decode_dictionary, decode_image, encode_codes, encode_dictionary, encode_image};
use sparsedict::{Dictionary, GrayImage};

fn matrix(max_rows: usize, max_cols: usize) -> impl Strategy<Value = Array2<f64>> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(prop_oneof![Just(0.0), -1e6..1e6f64], r * c)
            .prop_map(move |v| Array2::from_shape_vec((r, c), v).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn codes_round_trip_bit_for_bit(codes in matrix(12, 20)) {
        let back = decode_codes(&encode_codes(codes.view())).unwrap();
        prop_assert_eq!(back.dim(), codes.dim());
        prop_assert!(back.iter().zip(codes.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn dictionaries_round_trip_bit_for_bit(raw in matrix(6, 12)) {
        let (m, n) = raw.dim();
        let mut atoms = Array2::zeros((m, n.max(m)));
        atoms.slice_mut(ndarray::s![.., ..n]).assign(&raw);
        for mut col in atoms.columns_mut() {
            let norm = col.dot(&col).sqrt();
            if norm > 1.0 {
                col /= norm;
            }
        }
        let d = Dictionary::new(atoms).unwrap();
        let back = decode_dictionary(&encode_dictionary(&d)).unwrap();
        prop_assert!(back.atoms().iter().zip(d.atoms().iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn images_round_trip_bit_for_bit(px in matrix(9, 9)) {
        let img = GrayImage::new(px.mapv(|v| v.abs() % 256.0)).unwrap();
        let back = decode_image(&encode_image(&img)).unwrap();
        prop_assert_eq!(back.pixels(), img.pixels());
    }

    #[test]
    fn histogram_spans_the_sample_and_counts_every_value(codes in matrix(8, 30)) {
        let h = coefficient_histogram(codes.view(), 100).unwrap();
        prop_assert_eq!(h.total(), codes.len() as u64);
        if !h.is_degenerate() {
            let edges = h.edges();
            let lo = codes.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = codes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(edges[0], lo);
            // the top edge sits just above the maximum so it lands in the last bin
            prop_assert!(edges[100] > hi && edges[100] - hi <= 1e-11 * (hi - lo).max(hi.abs()));
            prop_assert!(edges.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn peak_removal_only_adds_zeros(codes in matrix(8, 40)) {
        let h = coefficient_histogram(codes.view(), 100).unwrap();
        if let Ok(fit) = fit_gaussian(&h, None) {
            let peak = detect_peak(&h, &fit, 3.0);
            let (cut, removed) = remove_peak(codes.view(), &peak);
            let before = sparsity_fraction(codes.view());
            let after = sparsity_fraction(cut.view());
            prop_assert!(after >= before);
            let zeros = |a: &Array2<f64>| a.iter().filter(|&&v| v == 0.0).count();
            prop_assert_eq!(zeros(&cut) - zeros(&codes), removed);
            for (a, b) in cut.iter().zip(codes.iter()) {
                prop_assert!(*a == *b || *a == 0.0);
            }
        }
    }
}
