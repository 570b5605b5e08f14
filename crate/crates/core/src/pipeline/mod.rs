//! Image ingestion, patch handling, DCT initialization and patch-based
//! reconstruction.

mod dct;
pub mod io;
mod patches;
mod reconstruct;

pub use dct::overcomplete_dct_dictionary;
pub use io::{encode_pgm, load_image_file, load_image_grayscale, save_pgm, scale_image};
pub use patches::{
    extract_patches, patch_at, patch_matrix, pool_size, reassemble, sample_training_set, PatchGrid, Reassembly,
};
pub use reconstruct::{reconstruct_image, synthesize, ReconstructConfig, Reconstruction, GREY_RANGE};
