//! Procedural generator of SEM-like fiber scaffold images in three texture
//! families: dense mats of thin straight fibers (electrospun), a few thick
//! straight wires (steel wire), and curved variable-diameter fibers with
//! blotches (airbrushed). The electrospun and steel-wire presets share the
//! same orientation statistics on purpose: diameter and porosity carry the
//! class signal, keeping that pair the hard one.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image_io::{write_pgm, RawImage};
use crate::rng::Pcg32;

const RENDER_STREAM: u64 = 0x46_49_42_52; // "FIBR"
const DATASET_STREAM: u64 = 0x44_41_54_41; // "DATA"

/// The three scaffold classes, in alphabetical (= class index) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaffoldClass {
    Airbrushed,
    Electrospun,
    SteelWire,
}

impl ScaffoldClass {
    pub const ALL: [ScaffoldClass; 3] = [
        ScaffoldClass::Airbrushed,
        ScaffoldClass::Electrospun,
        ScaffoldClass::SteelWire,
    ];

    /// Directory / display name; alphabetical order matches class indices.
    pub fn name(self) -> &'static str {
        match self {
            ScaffoldClass::Airbrushed => "airbrushed",
            ScaffoldClass::Electrospun => "electrospun",
            ScaffoldClass::SteelWire => "steel_wire",
        }
    }

    pub fn index(self) -> usize {
        match self {
            ScaffoldClass::Airbrushed => 0,
            ScaffoldClass::Electrospun => 1,
            ScaffoldClass::SteelWire => 2,
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "airbrushed" => Ok(ScaffoldClass::Airbrushed),
            "electrospun" => Ok(ScaffoldClass::Electrospun),
            "steel_wire" => Ok(ScaffoldClass::SteelWire),
            other => Err(Error::Input(format!("unknown scaffold class '{other}'"))),
        }
    }
}

/// Texture-family parameters for the renderer.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberClassParams {
    /// Inclusive range of fibers per image.
    pub fiber_count: (u32, u32),
    /// Fiber diameter range in pixels (at the 256px reference size).
    pub diameter_px: (f64, f64),
    /// Relative diameter variation along one fiber (0 = constant width).
    pub diameter_wobble: f64,
    /// Max control-point deviation as a fraction of image size (0 = straight).
    pub curvature: f64,
    /// Uniform orientation range in degrees.
    pub orientation_deg: (f64, f64),
    /// Background gray level.
    pub background_level: f64,
    /// Gaussian pixel noise sigma.
    pub noise_sigma: f64,
    /// Gaussian blur sigma applied before noise.
    pub blur_sigma: f64,
    /// Inclusive range of soft blotches per image.
    pub blotch_count: (u32, u32),
}

/// Preset parameters for one scaffold class.
pub fn class_default_params(class: ScaffoldClass) -> FiberClassParams {
    match class {
        // many thin, nearly straight fibers in a dense mat (high coverage)
        ScaffoldClass::Electrospun => FiberClassParams {
            fiber_count: (200, 300),
            diameter_px: (2.0, 4.5),
            diameter_wobble: 0.0,
            curvature: 0.0,
            orientation_deg: (0.0, 180.0),
            background_level: 30.0,
            noise_sigma: 6.0,
            blur_sigma: 0.5,
            blotch_count: (0, 0),
        },
        // few thick straight wires; same orientation statistics as above,
        // so diameter and porosity carry the class signal
        ScaffoldClass::SteelWire => FiberClassParams {
            fiber_count: (4, 9),
            diameter_px: (10.0, 18.0),
            diameter_wobble: 0.0,
            curvature: 0.0,
            orientation_deg: (0.0, 180.0),
            background_level: 30.0,
            noise_sigma: 4.0,
            blur_sigma: 1.2,
            blotch_count: (0, 0),
        },
        // moderate count of curved, variable-diameter fibers plus blotches
        ScaffoldClass::Airbrushed => FiberClassParams {
            fiber_count: (30, 70),
            diameter_px: (3.0, 7.0),
            diameter_wobble: 0.35,
            curvature: 0.25,
            orientation_deg: (0.0, 180.0),
            background_level: 45.0,
            noise_sigma: 8.0,
            blur_sigma: 1.0,
            blotch_count: (6, 18),
        },
    }
}

#[inline]
fn draw_range_u32(rng: &mut Pcg32, range: (u32, u32)) -> u32 {
    if range.1 <= range.0 {
        range.0
    } else {
        range.0 + rng.below(range.1 - range.0 + 1)
    }
}

/// Paint a soft-edged disc, compositing toward `brightness` by coverage.
fn stamp_disc(canvas: &mut [f64], size: usize, cx: f64, cy: f64, r: f64, brightness: f64) {
    let x0 = ((cx - r - 1.0).floor().max(0.0)) as usize;
    let y0 = ((cy - r - 1.0).floor().max(0.0)) as usize;
    let x1 = ((cx + r + 1.0).ceil().min((size - 1) as f64)) as usize;
    let y1 = ((cy + r + 1.0).ceil().min((size - 1) as f64)) as usize;
    for y in y0..=y1 {
        let row = &mut canvas[y * size..(y + 1) * size];
        let dy = y as f64 - cy;
        for (x, c) in row.iter_mut().enumerate().take(x1 + 1).skip(x0) {
            let dx = x as f64 - cx;
            let dist = (dx * dx + dy * dy).sqrt();
            let cov = (r + 0.5 - dist).clamp(0.0, 1.0);
            if cov > 0.0 {
                *c += cov * (brightness - *c);
            }
        }
    }
}

/// Quadratic Bezier point at parameter `t`.
#[inline]
fn bezier(p0: (f64, f64), p1: (f64, f64), p2: (f64, f64), t: f64) -> (f64, f64) {
    let u = 1.0 - t;
    (
        u * u * p0.0 + 2.0 * u * t * p1.0 + t * t * p2.0,
        u * u * p0.1 + 2.0 * u * t * p1.1 + t * t * p2.1,
    )
}

fn gaussian_blur(canvas: &mut [f64], size: usize, sigma: f64) {
    if sigma <= 0.0 {
        return;
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    let mut total = 0.0;
    for i in -radius..=radius {
        let w = (-(i as f64 * i as f64) / (2.0 * sigma * sigma)).exp();
        kernel.push(w);
        total += w;
    }
    for w in &mut kernel {
        *w /= total;
    }

    let n = size as i64;
    let mut tmp = vec![0.0f64; canvas.len()];
    // horizontal pass, edge pixels extended
    for y in 0..size {
        let row = &canvas[y * size..(y + 1) * size];
        for x in 0..size {
            let mut acc = 0.0;
            for (ki, w) in kernel.iter().enumerate() {
                let sx = (x as i64 + ki as i64 - radius).clamp(0, n - 1) as usize;
                acc += row[sx] * w;
            }
            tmp[y * size + x] = acc;
        }
    }
    // vertical pass
    for y in 0..size {
        for x in 0..size {
            let mut acc = 0.0;
            for (ki, w) in kernel.iter().enumerate() {
                let sy = (y as i64 + ki as i64 - radius).clamp(0, n - 1) as usize;
                acc += tmp[sy * size + x] * w;
            }
            canvas[y * size + x] = acc;
        }
    }
}

/// Render one fiber image. Fully determined by `(params, size, seed)`.
pub fn render_fiber_image(params: &FiberClassParams, size: usize, seed: u64) -> Result<RawImage> {
    if size < 32 {
        return Err(Error::Input(format!(
            "render size must be >= 32, got {size}"
        )));
    }
    let mut rng = Pcg32::seed(seed, RENDER_STREAM);
    let s = size as f64;
    let mut canvas = vec![params.background_level; size * size];

    // fibers back-to-front; brightness rises toward upper layers
    let n_fibers = draw_range_u32(&mut rng, params.fiber_count);
    for i in 0..n_fibers {
        let depth = if n_fibers > 1 {
            i as f64 / (n_fibers - 1) as f64
        } else {
            1.0
        };
        let brightness = (110.0 + 105.0 * depth + rng.range_f64(-18.0, 18.0)).clamp(70.0, 235.0);
        let theta = rng
            .range_f64(params.orientation_deg.0, params.orientation_deg.1)
            .to_radians();
        let (dir_y, dir_x) = theta.sin_cos();
        let cx = rng.range_f64(0.0, s);
        let cy = rng.range_f64(0.0, s);
        let half = 0.75 * s * (1.0 + rng.next_f64());
        let p0 = (cx - dir_x * half, cy - dir_y * half);
        let p2 = (cx + dir_x * half, cy + dir_y * half);
        let bow = params.curvature * s * rng.range_f64(-1.0, 1.0);
        let p1 = (cx - dir_y * bow, cy + dir_x * bow);

        let d0 = rng.range_f64(params.diameter_px.0, params.diameter_px.1);
        let d1 = d0 * (1.0 + params.diameter_wobble * rng.range_f64(-1.0, 1.0));
        // scale diameters with the render size so presets tuned at 256 hold
        let scale = s / 256.0;
        let (r0, r1) = (0.5 * d0 * scale.max(0.25), 0.5 * d1 * scale.max(0.25));

        let approx_len = {
            let a = ((p1.0 - p0.0).powi(2) + (p1.1 - p0.1).powi(2)).sqrt();
            let b = ((p2.0 - p1.0).powi(2) + (p2.1 - p1.1).powi(2)).sqrt();
            a + b
        };
        let step = (0.4 * r0.min(r1)).max(0.5);
        let samples = ((approx_len / step).ceil() as usize).max(2);
        for k in 0..=samples {
            let t = k as f64 / samples as f64;
            let (x, y) = bezier(p0, p1, p2, t);
            if x < -20.0 || y < -20.0 || x > s + 20.0 || y > s + 20.0 {
                continue;
            }
            let r = r0 + (r1 - r0) * t;
            stamp_disc(&mut canvas, size, x, y, r, brightness);
        }
    }

    // soft bright blotches
    let n_blotches = draw_range_u32(&mut rng, params.blotch_count);
    for _ in 0..n_blotches {
        let bx = rng.range_f64(0.0, s);
        let by = rng.range_f64(0.0, s);
        let radius = rng.range_f64(s / 40.0, s / 12.0);
        let brightness = rng.range_f64(params.background_level + 30.0, 200.0);
        let x0 = ((bx - radius).floor().max(0.0)) as usize;
        let y0 = ((by - radius).floor().max(0.0)) as usize;
        let x1 = ((bx + radius).ceil().min(s - 1.0)) as usize;
        let y1 = ((by + radius).ceil().min(s - 1.0)) as usize;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let dist = ((x as f64 - bx).powi(2) + (y as f64 - by).powi(2)).sqrt();
                let cov = ((radius - dist) / (0.3 * radius)).clamp(0.0, 1.0) * 0.7;
                if cov > 0.0 {
                    let c = &mut canvas[y * size + x];
                    *c += cov * (brightness - *c);
                }
            }
        }
    }

    gaussian_blur(&mut canvas, size, params.blur_sigma);

    let pixels = canvas
        .into_iter()
        .map(|v| {
            let noisy = v + rng.next_gaussian() * params.noise_sigma;
            noisy.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    RawImage::new(size, size, pixels)
}

/// Per-class counts written by [`generate_dataset`].
pub type Manifest = Vec<(String, usize)>;

/// Write `per_class` images per class as `<root>/<class>/img_<seed>_<i>.pgm`
/// (source size `size`, typically 256) plus a `manifest.tsv` of
/// `<class>\t<count>` lines. Image `i` of a class depends only on
/// `(seed, class, i)`, so corpora of different sizes share a prefix.
pub fn generate_dataset(root: &Path, per_class: usize, seed: u64, size: usize) -> Result<Manifest> {
    let gen_rng = Pcg32::seed(seed, DATASET_STREAM);
    let mut manifest = Vec::new();
    for class in ScaffoldClass::ALL {
        let dir = root.join(class.name());
        fs::create_dir_all(&dir)?;
        let params = class_default_params(class);
        (0..per_class)
            .into_par_iter()
            .try_for_each(|i| -> Result<()> {
                let mut child = gen_rng.derive(((class.index() as u64) << 32) | i as u64);
                let img_seed = ((child.next_u32() as u64) << 32) | child.next_u32() as u64;
                let img = render_fiber_image(&params, size, img_seed)?;
                write_pgm(&img, &dir.join(format!("img_{seed}_{i}.pgm")))
            })?;
        manifest.push((class.name().to_string(), per_class));
    }
    let mut file = fs::File::create(root.join("manifest.tsv"))?;
    for (name, count) in &manifest {
        writeln!(file, "{name}\t{count}")?;
    }
    Ok(manifest)
}

/// Mean absolute horizontal gradient; the edge-density statistic used to
/// verify the electrospun/steel-wire contrast.
pub fn mean_horizontal_gradient(img: &RawImage) -> f64 {
    let mut total = 0.0f64;
    let mut count = 0usize;
    for row in img.pixels.chunks_exact(img.width) {
        for pair in row.windows(2) {
            total += (pair[1] as f64 - pair[0] as f64).abs();
            count += 1;
        }
    }
    total / count as f64
}
