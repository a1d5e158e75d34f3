//! Online training augmentation: random horizontal flip, small rotation,
//! width/height shifts and zoom, composed into one affine resample.

use crate::image_io::RawImage;
use crate::rng::Pcg32;

/// Augmentation policy. Draw order is fixed (flip, rotation, width shift,
/// height shift, zoom); disabled components draw nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentPolicy {
    /// Flip left-right with probability 0.5.
    pub horizontal_flip: bool,
    /// Rotation drawn uniformly from `[-max, +max]` degrees.
    pub max_rotation_deg: f64,
    /// Horizontal shift drawn from `±frac * width` pixels.
    pub width_shift_frac: f64,
    /// Vertical shift drawn from `±frac * height` pixels.
    pub height_shift_frac: f64,
    /// Zoom factor drawn from `[1 - frac, 1 + frac]`.
    pub zoom_frac: f64,
}

impl AugmentPolicy {
    /// Flips, 5 degree rotations, 5% shifts and zooms.
    pub fn standard() -> Self {
        AugmentPolicy {
            horizontal_flip: true,
            max_rotation_deg: 5.0,
            width_shift_frac: 0.05,
            height_shift_frac: 0.05,
            zoom_frac: 0.05,
        }
    }

    /// Everything off; `augment` becomes the identity.
    pub fn identity() -> Self {
        AugmentPolicy {
            horizontal_flip: false,
            max_rotation_deg: 0.0,
            width_shift_frac: 0.0,
            height_shift_frac: 0.0,
            zoom_frac: 0.0,
        }
    }

    pub fn is_identity(&self) -> bool {
        !self.horizontal_flip
            && self.max_rotation_deg == 0.0
            && self.width_shift_frac == 0.0
            && self.height_shift_frac == 0.0
            && self.zoom_frac == 0.0
    }
}

/// Mirror left-right.
pub fn flip_horizontal(img: &RawImage) -> RawImage {
    let mut pixels = Vec::with_capacity(img.pixels.len());
    for row in img.pixels.chunks_exact(img.width) {
        pixels.extend(row.iter().rev());
    }
    RawImage {
        width: img.width,
        height: img.height,
        pixels,
    }
}

/// Randomly transform one image. Operations apply in order: horizontal flip,
/// rotation about the center, translation, zoom about the center. Resampling
/// is bilinear; coordinates outside the source clamp to the nearest edge
/// pixel. The identity policy reproduces the input bit-exactly.
pub fn augment(img: &RawImage, policy: &AugmentPolicy, rng: &mut Pcg32) -> RawImage {
    let flip = policy.horizontal_flip && rng.next_f64() < 0.5;
    let theta = if policy.max_rotation_deg > 0.0 {
        rng.range_f64(-policy.max_rotation_deg, policy.max_rotation_deg)
            .to_radians()
    } else {
        0.0
    };
    let dx = if policy.width_shift_frac > 0.0 {
        let span = policy.width_shift_frac * img.width as f64;
        rng.range_f64(-span, span)
    } else {
        0.0
    };
    let dy = if policy.height_shift_frac > 0.0 {
        let span = policy.height_shift_frac * img.height as f64;
        rng.range_f64(-span, span)
    } else {
        0.0
    };
    let zoom = if policy.zoom_frac > 0.0 {
        rng.range_f64(1.0 - policy.zoom_frac, 1.0 + policy.zoom_frac)
    } else {
        1.0
    };

    if !flip && theta == 0.0 && dx == 0.0 && dy == 0.0 && zoom == 1.0 {
        return img.clone();
    }

    let (w, h) = (img.width, img.height);
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let (sin, cos) = theta.sin_cos();
    let max_x = (w - 1) as f64;
    let max_y = (h - 1) as f64;

    let mut pixels = Vec::with_capacity(w * h);
    for oy in 0..h {
        for ox in 0..w {
            // invert the forward chain: zoom, then translation, then
            // rotation, then flip, walking destination -> source
            let mut x = (ox as f64 - cx) / zoom + cx;
            let mut y = (oy as f64 - cy) / zoom + cy;
            x -= dx;
            y -= dy;
            let rx = (x - cx) * cos + (y - cy) * sin + cx;
            let ry = -(x - cx) * sin + (y - cy) * cos + cy;
            x = rx;
            y = ry;
            if flip {
                x = max_x - x;
            }

            let x = x.clamp(0.0, max_x);
            let y = y.clamp(0.0, max_y);
            let x0 = x.floor() as usize;
            let y0 = y.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let y1 = (y0 + 1).min(h - 1);
            let fx = x - x0 as f64;
            let fy = y - y0 as f64;
            let top = img.get(x0, y0) as f64 * (1.0 - fx) + img.get(x1, y0) as f64 * fx;
            let bot = img.get(x0, y1) as f64 * (1.0 - fx) + img.get(x1, y1) as f64 * fx;
            let v = top * (1.0 - fy) + bot * fy;
            pixels.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    RawImage {
        width: w,
        height: h,
        pixels,
    }
}
