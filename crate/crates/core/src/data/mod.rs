//! Dataset ingestion, preprocessing, augmentation and synthetic data.
//!
//! On-disk layout: `<root>/{train|validation}/<class_name>/*.pgm`.

mod augment;
mod dataset;
mod pgm;
mod preprocess;
mod synthetic;

pub use augment::{augment, hflip, sample_stream, AugmentConfig};
pub use dataset::{load_dataset, Dataset, Sample, Split};
pub use pgm::{decode_pgm, encode_pgm, read_pgm, write_pgm, GrayImage};
pub use preprocess::{normalize, resize_bilinear, to_model_input};
pub use synthetic::{
    gen_synthetic, gen_synthetic_tree, synthetic_pattern, validation_count, NOISE_SIGMA,
    SYNTHETIC_CLASSES, SYNTHETIC_SIZE,
};
