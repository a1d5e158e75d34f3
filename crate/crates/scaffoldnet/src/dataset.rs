//! Dataset loading, stratified splitting and batch assembly.
//!
//! Canonical layout: one subdirectory per class under a root, holding `.pgm`
//! or `.png` files. Class indices are assigned alphabetically over directory
//! names; files are sorted lexicographically before the seeded shuffle so a
//! split is reproducible across filesystems.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image_io::{load_grayscale_image, resize_bilinear, standardize, RawImage};
use crate::rng::Pcg32;
use crate::tensor::Tensor;

/// Train : validation : test ratio used throughout.
pub const SPLIT_RATIO: [f64; 3] = [8.8, 1.2, 1.0];

const SPLIT_STREAM: u64 = 0x53_50_4c_49; // "SPLI"

/// One labelled image, already resized to the pipeline's working size.
#[derive(Debug, Clone)]
pub struct Sample {
    pub image: RawImage,
    pub label: usize,
    pub path: String,
}

/// Disjoint, exhaustive train/validation/test partitions.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<Sample>,
    pub validation: Vec<Sample>,
    pub test: Vec<Sample>,
    pub class_names: Vec<String>,
}

impl DatasetSplit {
    pub fn total(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }
}

/// Integer allocation of `n` into three parts proportional to `ratios`:
/// each part gets the floor of its exact share, then leftovers go to the
/// largest fractional remainders (ties favor earlier parts, so train first).
pub fn largest_remainder_alloc(n: usize, ratios: &[f64; 3]) -> [usize; 3] {
    let total: f64 = ratios.iter().sum();
    let ideals: [f64; 3] = std::array::from_fn(|i| n as f64 * ratios[i] / total);
    let mut counts: [usize; 3] = std::array::from_fn(|i| ideals[i].floor() as usize);
    let mut leftover = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let ra = ideals[a] - ideals[a].floor();
        let rb = ideals[b] - ideals[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in &order {
        if leftover == 0 {
            break;
        }
        counts[i] += 1;
        leftover -= 1;
    }
    counts
}

/// Stratified split: per class, shuffle with a class-derived stream of the
/// seed, then allocate counts by largest remainder.
pub fn stratified_split(
    samples: Vec<Sample>,
    class_names: Vec<String>,
    ratios: &[f64; 3],
    seed: u64,
) -> Result<DatasetSplit> {
    let n_classes = class_names.len();
    let mut per_class: Vec<Vec<Sample>> = (0..n_classes).map(|_| Vec::new()).collect();
    for s in samples {
        if s.label >= n_classes {
            return Err(Error::Input(format!(
                "sample {} has label {} but only {n_classes} classes exist",
                s.path, s.label
            )));
        }
        per_class[s.label].push(s);
    }

    let root = Pcg32::seed(seed, SPLIT_STREAM);
    let mut split = DatasetSplit {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        class_names,
    };
    for (class_idx, mut members) in per_class.into_iter().enumerate() {
        if members.len() < 3 {
            return Err(Error::Input(format!(
                "class {} has {} samples; at least 3 are required to split",
                split.class_names[class_idx],
                members.len()
            )));
        }
        let mut rng = root.derive(class_idx as u64);
        rng.shuffle(&mut members);
        let [n_train, n_val, _] = largest_remainder_alloc(members.len(), ratios);
        for (i, s) in members.into_iter().enumerate() {
            if i < n_train {
                split.train.push(s);
            } else if i < n_train + n_val {
                split.validation.push(s);
            } else {
                split.test.push(s);
            }
        }
    }
    Ok(split)
}

/// Scan the canonical directory layout and load every image, resized to
/// `image_size` x `image_size`. Returns the samples plus alphabetical class
/// names.
pub fn load_class_directories(
    root: &Path,
    image_size: usize,
) -> Result<(Vec<Sample>, Vec<String>)> {
    let mut class_dirs: Vec<(String, std::path::PathBuf)> = Vec::new();
    for entry in fs::read_dir(root).map_err(|e| Error::Ingest {
        path: root.to_path_buf(),
        reason: e.to_string(),
    })? {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            class_dirs.push((
                entry.file_name().to_string_lossy().into_owned(),
                entry.path(),
            ));
        }
    }
    if class_dirs.is_empty() {
        return Err(Error::Input(format!(
            "no class subdirectories under {}",
            root.display()
        )));
    }
    class_dirs.sort_by(|a, b| a.0.cmp(&b.0));

    let mut jobs: Vec<(std::path::PathBuf, usize)> = Vec::new();
    for (label, (_, dir)) in class_dirs.iter().enumerate() {
        let mut files: Vec<std::path::PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| {
                matches!(
                    p.extension().and_then(|e| e.to_str()),
                    Some("pgm") | Some("png")
                )
            })
            .collect();
        files.sort();
        jobs.extend(files.into_iter().map(|p| (p, label)));
    }

    let samples: Result<Vec<Sample>> = jobs
        .par_iter()
        .map(|(path, label)| {
            let img = load_grayscale_image(path)?;
            Ok(Sample {
                image: resize_bilinear(&img, image_size, image_size),
                label: *label,
                path: path.to_string_lossy().into_owned(),
            })
        })
        .collect();

    Ok((samples?, class_dirs.into_iter().map(|(n, _)| n).collect()))
}

/// Load and split in one step.
pub fn load_dataset(
    root: &Path,
    image_size: usize,
    ratios: &[f64; 3],
    seed: u64,
) -> Result<DatasetSplit> {
    let (samples, class_names) = load_class_directories(root, image_size)?;
    stratified_split(samples, class_names, ratios, seed)
}

/// Shuffle `0..n` and cut it into consecutive chunks of `batch_size`
/// (the final chunk may be smaller).
pub fn make_batches(n: usize, batch_size: usize, rng: &mut Pcg32) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    order
        .chunks(batch_size.max(1))
        .map(|c| c.to_vec())
        .collect()
}

/// Stack the selected samples into a standardized `(B, H, W, 1)` batch
/// tensor with a parallel label vector.
pub fn assemble_batch(samples: &[Sample], indices: &[usize]) -> Result<(Tensor<f32>, Vec<usize>)> {
    if indices.is_empty() {
        return Err(Error::Input("cannot assemble an empty batch".into()));
    }
    let (w, h) = (
        samples[indices[0]].image.width,
        samples[indices[0]].image.height,
    );
    let mut data = Vec::with_capacity(indices.len() * h * w);
    let mut labels = Vec::with_capacity(indices.len());
    for &i in indices {
        let s = samples
            .get(i)
            .ok_or_else(|| Error::Input(format!("batch index {i} out of range")))?;
        if (s.image.width, s.image.height) != (w, h) {
            return Err(Error::Input(format!(
                "sample {} is {}x{}, batch expects {w}x{h}",
                s.path, s.image.width, s.image.height
            )));
        }
        data.extend_from_slice(standardize(&s.image).data());
        labels.push(s.label);
    }
    Ok((Tensor::from_vec(&[indices.len(), h, w, 1], data)?, labels))
}

/// Write the split membership as `<split>\t<class_index>\t<path>` lines.
pub fn write_manifest(split: &DatasetSplit, path: &Path) -> Result<()> {
    let mut out = fs::File::create(path)?;
    for (name, samples) in [
        ("train", &split.train),
        ("validation", &split.validation),
        ("test", &split.test),
    ] {
        for s in samples {
            writeln!(out, "{name}\t{}\t{}", s.label, s.path)?;
        }
    }
    Ok(())
}
