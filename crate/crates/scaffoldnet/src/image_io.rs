//! Grayscale image ingestion (binary PGM and PNG), bilinear resizing, and
//! per-sample standardization.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl RawImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Input(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::Input(format!(
                "pixel count {} does not match {width}x{height}",
                pixels.len()
            )));
        }
        Ok(RawImage {
            width,
            height,
            pixels,
        })
    }

    pub fn constant(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }
}

/// Load a grayscale image, dispatching on content: binary PGM (P5) or PNG.
/// RGB(A) PNG input is collapsed by averaging the color channels.
pub fn load_grayscale_image(path: &Path) -> Result<RawImage> {
    let bytes = fs::read(path).map_err(|e| Error::Ingest {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let ingest = |reason: String| Error::Ingest {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.starts_with(b"P5") {
        decode_pgm(&bytes).map_err(|e| ingest(e.to_string()))
    } else if bytes.starts_with(&[0x89, b'P', b'N', b'G']) {
        decode_png(&bytes).map_err(|e| ingest(e.to_string()))
    } else {
        Err(ingest("not a binary PGM (P5) or PNG file".into()))
    }
}

/// Decode a binary PGM (P5, maxval 255).
pub fn decode_pgm(bytes: &[u8]) -> Result<RawImage> {
    let mut pos = 0usize;

    fn skip_ws_and_comments(bytes: &[u8], pos: &mut usize) {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
            } else {
                return;
            }
        }
    }

    fn read_number(bytes: &[u8], pos: &mut usize) -> Result<usize> {
        skip_ws_and_comments(bytes, pos);
        let start = *pos;
        while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
            *pos += 1;
        }
        if start == *pos {
            return Err(Error::Input("malformed PGM header".into()));
        }
        std::str::from_utf8(&bytes[start..*pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Input("malformed PGM header number".into()))
    }

    if !bytes.starts_with(b"P5") {
        return Err(Error::Input("missing P5 magic".into()));
    }
    pos += 2;
    let width = read_number(bytes, &mut pos)?;
    let height = read_number(bytes, &mut pos)?;
    let maxval = read_number(bytes, &mut pos)?;
    if maxval != 255 {
        return Err(Error::Input(format!("unsupported PGM maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::Input("missing raster separator".into()));
    }
    pos += 1;
    let need = width
        .checked_mul(height)
        .ok_or_else(|| Error::Input("PGM dimensions overflow".into()))?;
    if bytes.len() < pos + need {
        return Err(Error::Input(format!(
            "PGM raster truncated: need {need} bytes, have {}",
            bytes.len() - pos
        )));
    }
    RawImage::new(width, height, bytes[pos..pos + need].to_vec())
}

/// Encode as binary PGM (P5, maxval 255).
pub fn encode_pgm(img: &RawImage) -> Vec<u8> {
    let mut out = Vec::with_capacity(img.pixels.len() + 32);
    out.extend_from_slice(format!("P5\n{} {}\n255\n", img.width, img.height).as_bytes());
    out.extend_from_slice(&img.pixels);
    out
}

pub fn write_pgm(img: &RawImage, path: &Path) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(&encode_pgm(img))?;
    Ok(())
}

fn decode_png(bytes: &[u8]) -> Result<RawImage> {
    let decoded = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| Error::Input(e.to_string()))?;
    let rgb = decoded.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let pixels = rgb
        .pixels()
        .map(|p| {
            let sum = p.0[0] as u32 + p.0[1] as u32 + p.0[2] as u32;
            ((sum + 1) / 3) as u8 // exact round-to-nearest for /3
        })
        .collect();
    RawImage::new(w, h, pixels)
}

/// Bilinear resize with pixel-center alignment: the source coordinate of
/// destination pixel `d` is `(d + 0.5) * scale - 0.5`, clamped to the image.
pub fn resize_bilinear(img: &RawImage, dst_w: usize, dst_h: usize) -> RawImage {
    if img.width == dst_w && img.height == dst_h {
        return img.clone();
    }
    let scale_x = img.width as f64 / dst_w as f64;
    let scale_y = img.height as f64 / dst_h as f64;
    let mut pixels = Vec::with_capacity(dst_w * dst_h);
    for dy in 0..dst_h {
        let sy = ((dy as f64 + 0.5) * scale_y - 0.5).clamp(0.0, (img.height - 1) as f64);
        let y0 = sy.floor() as usize;
        let y1 = (y0 + 1).min(img.height - 1);
        let fy = sy - y0 as f64;
        for dx in 0..dst_w {
            let sx = ((dx as f64 + 0.5) * scale_x - 0.5).clamp(0.0, (img.width - 1) as f64);
            let x0 = sx.floor() as usize;
            let x1 = (x0 + 1).min(img.width - 1);
            let fx = sx - x0 as f64;
            let top = img.get(x0, y0) as f64 * (1.0 - fx) + img.get(x1, y0) as f64 * fx;
            let bot = img.get(x0, y1) as f64 * (1.0 - fx) + img.get(x1, y1) as f64 * fx;
            let v = top * (1.0 - fy) + bot * fy;
            pixels.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    RawImage {
        width: dst_w,
        height: dst_h,
        pixels,
    }
}

/// Standardize to zero mean and unit variance (population std, clamped at
/// 1e-7 so constant images map to all zeros). Output is `(H, W, 1)`.
pub fn standardize(img: &RawImage) -> Tensor<f32> {
    let n = img.pixels.len() as f64;
    let mut sum = 0.0f64;
    for &p in &img.pixels {
        sum += p as f64;
    }
    let mean = sum / n;
    let mut var = 0.0f64;
    for &p in &img.pixels {
        let d = p as f64 - mean;
        var += d * d;
    }
    let std = (var / n).sqrt().max(1e-7);
    let data = img
        .pixels
        .iter()
        .map(|&p| ((p as f64 - mean) / std) as f32)
        .collect();
    Tensor::from_vec(&[img.height, img.width, 1], data).expect("pixel count matches dims")
}
