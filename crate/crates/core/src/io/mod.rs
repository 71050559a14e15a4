//! Datasets, the checkpoint container and image export.

pub mod checkpoint;
pub mod export;
pub mod manifest;
pub mod pnm;
pub mod synth;

pub use checkpoint::{load_checkpoint, save_checkpoint, AnyTensor, Checkpoint};
pub use export::{export_feature_pgm, feature_slice, normalize_to_gray, FeatureMode};
pub use manifest::{Dataset, DatasetItem, DatasetManifest, ManifestItem, Source};
pub use pnm::{read_pgm, read_ppm, write_pgm, write_ppm};
pub use synth::{derive_seed, generate_image, generate_synthetic, ShapeInfo, ShapeKind};
