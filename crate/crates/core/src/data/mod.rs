//! Dataset machinery: manifests and sampling protocols, the binary tensor
//! cache, a procedural desk-scale dataset, and a minimal PPM/PGM codec.

pub mod cache;
pub mod manifest;
pub mod ppm;
pub mod synth;

pub use cache::{build_spectral_cache, TensorCache};
pub use manifest::{split_val_test, stratified_subsample, DatasetManifest, ManifestEntry, Split};
pub use ppm::{decode_ppm, encode_ppm, read_ppm, write_ppm};
pub use synth::synth_dataset;
