//! Patch grids, extraction, training-set sampling and overlap-average
//! reassembly.

use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{ensure_dim, Error, Result};
use crate::types::{GrayImage, Patch};

/// Regular grid of `side x side` patches placed every `stride` pixels,
/// starting at the top-left corner. Only fully contained patches are part of
/// the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchGrid {
    pub side: usize,
    pub stride: usize,
    pub height: usize,
    pub width: usize,
    pub rows: usize,
    pub cols: usize,
}

impl PatchGrid {
    pub fn new(height: usize, width: usize, side: usize, stride: usize) -> Result<Self> {
        if side == 0 || stride == 0 {
            return Err(Error::invalid("patch side and stride must be positive"));
        }
        if side > height || side > width {
            return Err(Error::invalid(format!(
                "patch side {side} exceeds image dimensions {height}x{width}"
            )));
        }
        Ok(Self {
            side,
            stride,
            height,
            width,
            rows: (height - side) / stride + 1,
            cols: (width - side) / stride + 1,
        })
    }

    pub fn for_image(img: &GrayImage, side: usize, stride: usize) -> Result<Self> {
        Self::new(img.height(), img.width(), side, stride)
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn patch_dim(&self) -> usize {
        self.side * self.side
    }

    /// Top-left pixel of patch `index` in raster order.
    pub fn origin(&self, index: usize) -> (usize, usize) {
        ((index / self.cols) * self.stride, (index % self.cols) * self.stride)
    }

    pub fn origins(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.len()).map(|i| self.origin(i))
    }

    /// Number of grid patches covering each pixel.
    pub fn coverage(&self) -> Array2<u32> {
        let mut cover = Array2::zeros((self.height, self.width));
        for (r0, c0) in self.origins() {
            cover
                .slice_mut(ndarray::s![r0..r0 + self.side, c0..c0 + self.side])
                .mapv_inplace(|c| c + 1);
        }
        cover
    }
}

/// Column-stacked patch with top-left corner `(r0, c0)`.
pub fn patch_at(img: &GrayImage, r0: usize, c0: usize, side: usize) -> Result<Patch> {
    if r0 + side > img.height() || c0 + side > img.width() {
        return Err(Error::invalid(format!("patch at ({r0}, {c0}) leaves the image")));
    }
    let px = img.pixels();
    let values = Array1::from_shape_fn(side * side, |i| px[[r0 + i % side, c0 + i / side]]);
    Patch::new(side, values)
}

/// All grid patches in raster order.
pub fn extract_patches(img: &GrayImage, side: usize, stride: usize) -> Result<(Vec<Patch>, PatchGrid)> {
    let grid = PatchGrid::for_image(img, side, stride)?;
    let patches = grid
        .origins()
        .map(|(r, c)| patch_at(img, r, c, side))
        .collect::<Result<Vec<_>>>()?;
    Ok((patches, grid))
}

/// Grid patches as the columns of a `side^2 x n_patches` matrix.
pub fn patch_matrix(img: &GrayImage, grid: &PatchGrid) -> Array2<f64> {
    let s = grid.side;
    let px = img.pixels();
    let mut out = Array2::zeros((s * s, grid.len()));
    for (idx, mut col) in out.columns_mut().into_iter().enumerate() {
        let (r0, c0) = grid.origin(idx);
        for i in 0..s * s {
            col[i] = px[[r0 + i % s, c0 + i / s]];
        }
    }
    out
}

/// Draws `n` patches uniformly, with replacement, from the pooled grids of
/// all images. Images too small for a single patch contribute nothing.
pub fn sample_training_set(images: &[GrayImage], side: usize, stride: usize, n: usize, seed: u64) -> Result<Vec<Patch>> {
    let grids: Vec<Option<PatchGrid>> = images.iter().map(|img| PatchGrid::for_image(img, side, stride).ok()).collect();
    let sizes: Vec<usize> = grids.iter().map(|g| g.map_or(0, |g| g.len())).collect();
    let pool: usize = sizes.iter().sum();
    if pool == 0 {
        return Err(Error::invalid(format!("no image admits a {side}x{side} patch")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut idx = rng.random_range(0..pool);
            let mut which = 0;
            while idx >= sizes[which] {
                idx -= sizes[which];
                which += 1;
            }
            let grid = grids[which].expect("non-empty grid");
            let (r0, c0) = grid.origin(idx);
            patch_at(&images[which], r0, c0, side)
        })
        .collect()
}

/// Size of the sampling pool used by [`sample_training_set`].
pub fn pool_size(images: &[GrayImage], side: usize, stride: usize) -> usize {
    images
        .iter()
        .filter_map(|img| PatchGrid::for_image(img, side, stride).ok())
        .map(|g| g.len())
        .sum()
}

/// Result of overlap-average reassembly.
#[derive(Debug, Clone, PartialEq)]
pub struct Reassembly {
    pub image: GrayImage,
    /// Pixels outside every patch, copied from the fallback image.
    pub uncovered: usize,
}

/// Averages overlapping patch estimates (columns of `patches`) back into an
/// image. Pixels not covered by any patch are taken from `fallback`.
pub fn reassemble(grid: &PatchGrid, patches: ArrayView2<'_, f64>, fallback: &GrayImage) -> Result<Reassembly> {
    ensure_dim("reassembly patch dimension", grid.patch_dim(), patches.nrows())?;
    ensure_dim("reassembly patch count", grid.len(), patches.ncols())?;
    ensure_dim("reassembly height", grid.height, fallback.height())?;
    ensure_dim("reassembly width", grid.width, fallback.width())?;
    let s = grid.side;
    let mut sum = Array2::<f64>::zeros((grid.height, grid.width));
    let mut count = Array2::<u32>::zeros((grid.height, grid.width));
    for (idx, col) in patches.columns().into_iter().enumerate() {
        let (r0, c0) = grid.origin(idx);
        for i in 0..s * s {
            let (r, c) = (r0 + i % s, c0 + i / s);
            sum[[r, c]] += col[i];
            count[[r, c]] += 1;
        }
    }
    let mut uncovered = 0;
    let fb = fallback.pixels();
    let out = Array2::from_shape_fn((grid.height, grid.width), |(r, c)| match count[[r, c]] {
        0 => {
            uncovered += 1;
            fb[[r, c]]
        }
        n => sum[[r, c]] / f64::from(n),
    });
    Ok(Reassembly {
        image: GrayImage::new(out)?,
        uncovered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn ramp(h: usize, w: usize) -> GrayImage {
        GrayImage::new(Array2::from_shape_fn((h, w), |(r, c)| (r * 31 + c * 7) as f64 % 256.0)).unwrap()
    }

    #[test]
    fn standard_grid_count() {
        let g = PatchGrid::new(224, 224, 8, 2).unwrap();
        assert_eq!(g.len(), 11881);
        assert_eq!(PatchGrid::new(16, 16, 8, 4).unwrap().len(), 9);
    }

    #[test]
    fn single_patch_is_the_image() {
        let img = ramp(8, 8);
        for stride in [1, 3, 8, 20] {
            let (patches, grid) = extract_patches(&img, 8, stride).unwrap();
            assert_eq!(grid.len(), 1);
            let p = &patches[0];
            for c in 0..8 {
                for r in 0..8 {
                    assert_eq!(p.values()[c * 8 + r], img.get(r, c));
                }
            }
        }
    }

    #[test]
    fn oversized_patch_is_rejected() {
        assert!(extract_patches(&ramp(6, 10), 8, 1).is_err());
    }

    #[test]
    fn tiling_covers_once() {
        let g = PatchGrid::new(32, 24, 8, 8).unwrap();
        assert!(g.coverage().iter().all(|&c| c == 1));
    }

    #[test]
    fn sampling_single_patch_image() {
        let img = ramp(8, 8);
        let set = sample_training_set(&[img.clone()], 8, 2, 3, 1).unwrap();
        assert_eq!(set.len(), 3);
        let (only, _) = extract_patches(&img, 8, 2).unwrap();
        assert!(set.iter().all(|p| *p == only[0]));
    }

    #[test]
    fn sampling_is_seeded() {
        let imgs = vec![ramp(20, 20), ramp(12, 30)];
        let a = sample_training_set(&imgs, 4, 2, 50, 9).unwrap();
        let b = sample_training_set(&imgs, 4, 2, 50, 9).unwrap();
        let c = sample_training_set(&imgs, 4, 2, 50, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(sample_training_set(&[ramp(3, 3)], 4, 1, 5, 0).is_err());
    }

    #[test]
    fn paper_scale_pool() {
        let imgs: Vec<GrayImage> = (0..100).map(|_| GrayImage::filled(224, 224, 0.0).unwrap()).collect();
        assert_eq!(pool_size(&imgs, 8, 2), 1_188_100);
        assert_eq!(sample_training_set(&imgs, 8, 2, 15000, 3).unwrap().len(), 15000);
    }

    proptest! {
        #[test]
        fn count_formula_matches_enumeration(h in 1usize..=64, w in 1usize..=64, s in 1usize..=16, stride in 1usize..=9) {
            prop_assume!(s <= h && s <= w);
            let g = PatchGrid::new(h, w, s, stride).unwrap();
            let mut brute = 0;
            for r in 0..h {
                for c in 0..w {
                    if r % stride == 0 && c % stride == 0 && r + s <= h && c + s <= w {
                        brute += 1;
                    }
                }
            }
            prop_assert_eq!(g.len(), brute);
        }

        #[test]
        fn reassembling_untouched_patches_is_identity(h in 8usize..=40, w in 8usize..=40, s in 2usize..=8, stride in 1usize..=5, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let img = GrayImage::new(Array2::from_shape_fn((h, w), |_| rng.random::<f64>() * 255.0)).unwrap();
            let grid = PatchGrid::for_image(&img, s, stride).unwrap();
            let blank = GrayImage::filled(h, w, -1.0).unwrap();
            let out = reassemble(&grid, patch_matrix(&img, &grid).view(), &blank).unwrap();
            let cover = grid.coverage();
            let mut uncovered = 0;
            for r in 0..h {
                for c in 0..w {
                    if cover[[r, c]] == 0 {
                        uncovered += 1;
                        prop_assert_eq!(out.image.get(r, c), -1.0);
                    } else {
                        prop_assert!((out.image.get(r, c) - img.get(r, c)).abs() <= 1e-12);
                    }
                }
            }
            prop_assert_eq!(out.uncovered, uncovered);
        }
    }
}
