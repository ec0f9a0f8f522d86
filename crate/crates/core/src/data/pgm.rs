//! Binary PGM (`P5`) reading and writing.
//!
//! Header: `P5`, then whitespace-separated width, height and maxval (at most
//! 255), then exactly one whitespace byte, then `width * height` raster bytes
//! in row-major order. `#` comments may appear between header tokens.

use std::path::Path;

use crate::error::{Error, Result};

/// An 8-bit grayscale raster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::shape(format!(
                "{width}x{height} image with {} pixels",
                pixels.len()
            )));
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> std::result::Result<usize, String> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(format!("missing {what} in header"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("ascii digits")
            .parse()
            .map_err(|e| format!("bad {what}: {e}"))
    }
}

fn parse(bytes: &[u8]) -> std::result::Result<GrayImage, String> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err("not a binary PGM (magic P5 expected)".into());
    }
    let mut h = Header { bytes, pos: 2 };
    if !h
        .bytes
        .get(2)
        .is_some_and(|b| b.is_ascii_whitespace() || *b == b'#')
    {
        return Err("malformed header after magic".into());
    }
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(format!("degenerate size {width}x{height}"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(format!("maxval {maxval} outside 1..=255"));
    }
    match bytes.get(h.pos) {
        Some(b) if b.is_ascii_whitespace() => h.pos += 1,
        _ => return Err("missing whitespace before raster".into()),
    }
    let need = width
        .checked_mul(height)
        .ok_or_else(|| "image size overflows".to_string())?;
    let raster = &bytes[h.pos..];
    if raster.len() < need {
        return Err(format!(
            "truncated raster: {} of {need} bytes",
            raster.len()
        ));
    }
    let mut pixels = raster[..need].to_vec();
    if maxval != 255 {
        for p in &mut pixels {
            if usize::from(*p) > maxval {
                return Err(format!("sample {p} exceeds maxval {maxval}"));
            }
            *p = ((usize::from(*p) * 255 + maxval / 2) / maxval) as u8;
        }
    }
    Ok(GrayImage {
        width,
        height,
        pixels,
    })
}

/// Decodes a `P5` image. Samples are rescaled to 0..=255 when maxval < 255.
pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    decode_pgm_from(bytes, Path::new("<memory>"))
}

pub(crate) fn decode_pgm_from(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    parse(bytes).map_err(|reason| Error::ImageDecode {
        path: path.to_path_buf(),
        reason,
    })
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", img.width, img.height);
    let mut out = Vec::with_capacity(header.len() + img.pixels.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&img.pixels);
    out
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::ImageDecode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    decode_pgm_from(&bytes, path)
}

pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    std::fs::write(path, encode_pgm(img)).map_err(|e| Error::io(path, e))
}
