//! Boundary-weighted mask loss for newspaper article segmentation, with a
//! synthetic newspaper corpus, an oracle OCR, a digitization pipeline and
//! the WER/CER and AP evaluation around it.

pub mod digitize;
pub mod error;
pub mod experiment;
pub mod loss;
pub mod metrics;
pub mod raster;
pub mod refine;
pub mod synthcorpus;
pub mod toyseg;

pub use error::{Error, Result};

/// Mix `index` into `seed` (SplitMix64 finalizer) to get independent
/// per-item seeds from one base seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a hash of a string; stable across platforms and releases.
pub fn stable_hash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}
