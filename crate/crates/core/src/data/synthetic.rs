//! Synthetic stand-in dataset with three visually distinct classes.
//!
//! | label | directory   | pattern                         |
//! |-------|-------------|---------------------------------|
//! | 0     | `benign`    | horizontal stripes, period 8 px |
//! | 1     | `malignant` | vertical stripes, period 8 px   |
//! | 2     | `normal`    | checkerboard, 4 px cells        |
//!
//! Images are 8x8, so one stripe period spans the whole image and the
//! loader's resize turns each stripe into a 16 px band. Finer patterns at
//! 32x32 average away in the two pooling stages and leave a sigmoid network
//! on its initial plateau for hundreds of epochs.
//!
//! The directory names reuse the clinical class names so the default
//! nodule-vs-normal metric binarization applies unchanged.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::dataset::Split;
use super::pgm::{write_pgm, GrayImage};
use crate::error::{Error, Result};

pub const SYNTHETIC_CLASSES: [&str; 3] = ["benign", "malignant", "normal"];
pub const SYNTHETIC_SIZE: usize = 8;
pub const NOISE_SIGMA: f64 = 16.0;
const BRIGHT: u8 = 240;
const DARK: u8 = 16;

/// The noise-free pattern for `class`.
pub fn synthetic_pattern(class: usize, size: usize) -> GrayImage {
    let mut pixels = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let on = match class {
                0 => (y / 4) % 2 == 0,
                1 => (x / 4) % 2 == 0,
                _ => (y / 4 + x / 4) % 2 == 0,
            };
            pixels.push(if on { BRIGHT } else { DARK });
        }
    }
    GrayImage::new(size, size, pixels).expect("square pattern")
}

fn noisy(clean: &GrayImage, noise: &Normal<f64>, rng: &mut ChaCha8Rng) -> GrayImage {
    let pixels = clean
        .pixels
        .iter()
        .map(|&p| (f64::from(p) + noise.sample(rng)).round().clamp(0.0, 255.0) as u8)
        .collect();
    GrayImage::new(clean.width, clean.height, pixels).expect("same dimensions")
}

/// Writes `n_per_class` noisy images per class under `<root>/<split>/<class>/`.
pub fn gen_synthetic(root: &Path, split: Split, n_per_class: usize, seed: u64) -> Result<()> {
    if n_per_class == 0 {
        return Err(Error::InvalidConfig(
            "n_per_class must be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(match split {
        Split::Train => 0,
        Split::Validation => 1,
    });
    let noise = Normal::new(0.0, NOISE_SIGMA).expect("positive sigma");
    for (class, name) in SYNTHETIC_CLASSES.iter().enumerate() {
        let dir = root.join(split.dir_name()).join(name);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let clean = synthetic_pattern(class, SYNTHETIC_SIZE);
        for i in 0..n_per_class {
            write_pgm(
                &dir.join(format!("{i:04}.pgm")),
                &noisy(&clean, &noise, &mut rng),
            )?;
        }
    }
    Ok(())
}

/// Number of validation images per class written next to `n_per_class`
/// training images: one fifth, rounded up.
pub fn validation_count(n_per_class: usize) -> usize {
    n_per_class.div_ceil(5)
}

/// Writes both splits: `n_per_class` training and `ceil(n_per_class / 5)`
/// validation images per class.
pub fn gen_synthetic_tree(root: &Path, n_per_class: usize, seed: u64) -> Result<()> {
    gen_synthetic(root, Split::Train, n_per_class, seed)?;
    gen_synthetic(root, Split::Validation, validation_count(n_per_class), seed)
}
