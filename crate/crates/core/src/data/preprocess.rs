use super::pgm::GrayImage;
use crate::error::{Error, Result};
use crate::nn::INPUT_SIZE;
use crate::tensor::Tensor;

/// Maps 8-bit intensities to `[0, 1]` as `v / 255`.
pub fn normalize(img: &GrayImage) -> Tensor {
    let data = img.pixels.iter().map(|&v| f64::from(v) / 255.0).collect();
    Tensor::new(&[img.height, img.width], data).expect("validated image dimensions")
}

#[inline]
fn source_coord(i: usize, in_len: usize, out_len: usize) -> f64 {
    let s = (i as f64 + 0.5) * in_len as f64 / out_len as f64 - 0.5;
    s.clamp(0.0, (in_len - 1) as f64)
}

/// Bilinear resize of an `[H, W]` image with half-pixel centres.
///
/// Output pixel `i` samples source coordinate `(i + 0.5) * H / out_h - 0.5`,
/// clamped to the image, so equal sizes reproduce the input exactly.
pub fn resize_bilinear(img: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let (h, w) = img.dims2()?;
    if h < 2 || w < 2 || out_h == 0 || out_w == 0 {
        return Err(Error::shape(format!(
            "cannot resize {h}x{w} to {out_h}x{out_w}: source must be at least 2x2"
        )));
    }
    let src = img.data();
    let cols: Vec<(usize, usize, f64)> = (0..out_w)
        .map(|j| {
            let x = source_coord(j, w, out_w);
            let x0 = x.floor() as usize;
            (x0, (x0 + 1).min(w - 1), x - x0 as f64)
        })
        .collect();
    let mut out = Vec::with_capacity(out_h * out_w);
    for i in 0..out_h {
        let y = source_coord(i, h, out_h);
        let y0 = y.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let fy = y - y0 as f64;
        for &(x0, x1, fx) in &cols {
            let top = src[y0 * w + x0] * (1.0 - fx) + src[y0 * w + x1] * fx;
            let bottom = src[y1 * w + x0] * (1.0 - fx) + src[y1 * w + x1] * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    Tensor::new(&[out_h, out_w], out)
}

/// Normalizes and resizes a raster into the `[1, 32, 32]` model input.
pub fn to_model_input(img: &GrayImage) -> Result<Tensor> {
    resize_bilinear(&normalize(img), INPUT_SIZE, INPUT_SIZE)?
        .into_reshape(&[1, INPUT_SIZE, INPUT_SIZE])
}
