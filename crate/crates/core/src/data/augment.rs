//! Seeded, label-preserving image augmentation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::Sample;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub hflip_prob: f64,
    pub max_rotation_deg: f64,
    pub max_shift_px: usize,
    pub seed: u64,
    /// Value written to pixels rotated or shifted in from outside the frame.
    #[serde(default)]
    pub fill: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            hflip_prob: 0.5,
            max_rotation_deg: 15.0,
            max_shift_px: 2,
            seed: 0,
            fill: 0.0,
        }
    }
}

impl AugmentConfig {
    /// A configuration that leaves every sample untouched.
    pub fn identity() -> Self {
        AugmentConfig {
            hflip_prob: 0.0,
            max_rotation_deg: 0.0,
            max_shift_px: 0,
            seed: 0,
            fill: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.hflip_prob) {
            return Err(Error::InvalidConfig(format!(
                "hflip_prob must be in [0, 1], got {}",
                self.hflip_prob
            )));
        }
        if !(0.0..=180.0).contains(&self.max_rotation_deg) {
            return Err(Error::InvalidConfig(format!(
                "max_rotation_deg must be in [0, 180], got {}",
                self.max_rotation_deg
            )));
        }
        if !(0.0..=1.0).contains(&self.fill) {
            return Err(Error::InvalidConfig(format!(
                "fill must be in [0, 1], got {}",
                self.fill
            )));
        }
        Ok(())
    }
}

/// Random stream for one sample in one epoch, independent of visiting order.
pub fn sample_stream(seed: u64, epoch: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((epoch as u64) << 32) ^ index as u64);
    rng
}

/// Horizontal flip, rotation about the centre, then an integer shift.
/// The label is unchanged and the output is clamped to `[0, 1]`.
pub fn augment<R: Rng + ?Sized>(sample: &Sample, cfg: &AugmentConfig, rng: &mut R) -> Sample {
    let shape = sample.pixels.shape().to_vec();
    let (h, w) = (shape[shape.len() - 2], shape[shape.len() - 1]);
    let mut img = sample.pixels.data().to_vec();

    if cfg.hflip_prob > 0.0 && rng.random::<f64>() < cfg.hflip_prob {
        for row in img.chunks_exact_mut(w) {
            row.reverse();
        }
    }
    if cfg.max_rotation_deg > 0.0 {
        let deg = rng.random_range(-cfg.max_rotation_deg..=cfg.max_rotation_deg);
        img = rotate(&img, h, w, deg.to_radians(), cfg.fill);
    }
    if cfg.max_shift_px > 0 {
        let s = cfg.max_shift_px as i64;
        let dy = rng.random_range(-s..=s);
        let dx = rng.random_range(-s..=s);
        img = shift(&img, h, w, dy, dx, cfg.fill);
    }
    for v in &mut img {
        *v = v.clamp(0.0, 1.0);
    }
    Sample {
        pixels: Tensor::new(&shape, img).expect("shape preserved"),
        label: sample.label,
        source_path: sample.source_path.clone(),
    }
}

pub fn hflip(sample: &Sample) -> Sample {
    let mut s = sample.clone();
    let w = *s.pixels.shape().last().expect("rank >= 1");
    for row in s.pixels.data_mut().chunks_exact_mut(w) {
        row.reverse();
    }
    s
}

fn rotate(src: &[f64], h: usize, w: usize, theta: f64, fill: f64) -> Vec<f64> {
    let (sin, cos) = theta.sin_cos();
    let cy = (h as f64 - 1.0) / 2.0;
    let cx = (w as f64 - 1.0) / 2.0;
    let (max_y, max_x) = ((h - 1) as f64, (w - 1) as f64);
    const EDGE: f64 = 1e-9;
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let (dy, dx) = (y as f64 - cy, x as f64 - cx);
            // Inverse mapping: rotate the output coordinate back by -theta.
            let sx = cos * dx + sin * dy + cx;
            let sy = -sin * dx + cos * dy + cy;
            if sx < -EDGE || sy < -EDGE || sx > max_x + EDGE || sy > max_y + EDGE {
                out.push(fill);
                continue;
            }
            let (sx, sy) = (sx.clamp(0.0, max_x), sy.clamp(0.0, max_y));
            let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
            let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
            let top = src[y0 * w + x0] * (1.0 - fx) + src[y0 * w + x1] * fx;
            let bottom = src[y1 * w + x0] * (1.0 - fx) + src[y1 * w + x1] * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}

fn shift(src: &[f64], h: usize, w: usize, dy: i64, dx: i64, fill: f64) -> Vec<f64> {
    let mut out = vec![fill; h * w];
    for y in 0..h as i64 {
        let sy = y - dy;
        if sy < 0 || sy >= h as i64 {
            continue;
        }
        for x in 0..w as i64 {
            let sx = x - dx;
            if sx >= 0 && sx < w as i64 {
                out[(y * w as i64 + x) as usize] = src[(sy * w as i64 + sx) as usize];
            }
        }
    }
    out
}
