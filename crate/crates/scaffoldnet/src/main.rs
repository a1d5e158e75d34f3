//! Command-line entry point: synthesize a fiber-image corpus, train the
//! classifier, evaluate it, or predict single images.
//!
//! Machine-readable CSV lines go to standard output; human-readable summaries
//! and diagnostics go to standard error. Exit code 0 means no error occurred.
//! A plain `key = value` config file can set any hyperparameter; flags win.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use scaffoldnet::augment::AugmentPolicy;
use scaffoldnet::checkpoint;
use scaffoldnet::dataset::{load_dataset, write_manifest, DatasetSplit, Sample, SPLIT_RATIO};
use scaffoldnet::error::{Error, Result};
use scaffoldnet::image_io::{load_grayscale_image, resize_bilinear, standardize};
use scaffoldnet::layers::Mode;
use scaffoldnet::metrics::build_report;
use scaffoldnet::model::{model_forward, CLASS_COUNT};
use scaffoldnet::report::emit_report;
use scaffoldnet::rng::Pcg32;
use scaffoldnet::synth::{generate_dataset, ScaffoldClass};
use scaffoldnet::train::{fit_with_progress, predict_probs, TrainConfig};

#[derive(Parser)]
#[command(
    name = "scaffoldnet",
    about = "Train and evaluate a from-scratch CNN on fiber scaffold images"
)]
struct Cli {
    /// Plain `key = value` config file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// RNG seed for synthesis, splitting, and training. Ignored by eval,
    /// which reuses the seed recorded in the checkpoint.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for data-parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic three-class fiber-image dataset.
    Synth(SynthArgs),
    /// Train on a dataset directory and write the best checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the held-out test split.
    Eval(EvalArgs),
    /// Print class probabilities for individual images.
    Predict(PredictArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output dataset root (one subdirectory per class).
    #[arg(long)]
    out: PathBuf,
    /// Images per class.
    #[arg(long)]
    per_class: Option<usize>,
    /// Rendered source image size in pixels.
    #[arg(long)]
    size: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset root in canonical layout.
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint output path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long = "lr")]
    learning_rate: Option<f64>,
    /// Working resolution images are resized to.
    #[arg(long)]
    image_size: Option<usize>,
    /// Disable training-time augmentation.
    #[arg(long)]
    no_augment: bool,
    /// Also write the split membership to this file.
    #[arg(long)]
    out_manifest: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Dataset root; the split is reconstructed from the checkpoint's seed.
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint to evaluate.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out_csv: PathBuf,
    #[arg(long)]
    out_svg: PathBuf,
    #[arg(long)]
    image_size: Option<usize>,
    /// Which samples to evaluate: test (default), validation, train, or all.
    #[arg(long, default_value = "test")]
    split: String,
}

#[derive(Args)]
struct PredictArgs {
    /// Checkpoint to run.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    image_size: Option<usize>,
    /// Images to classify (PGM or PNG).
    #[arg(required = true)]
    images: Vec<PathBuf>,
}

/// `key = value` lines, `#` comments.
fn parse_config_file(path: &Path) -> Result<HashMap<String, String>> {
    let text = fs::read_to_string(path)?;
    let mut map = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "{}:{}: expected `key = value`",
                path.display(),
                lineno + 1
            ))
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn cfg_get<T: FromStr>(map: &HashMap<String, String>, key: &str) -> Result<Option<T>> {
    match map.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("config key `{key}` has invalid value `{raw}`"))),
    }
}

/// flag > config file > default
fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        // ignore failure if a pool was already installed
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let file_cfg = match &cli.config {
        Some(path) => match parse_config_file(path) {
            Ok(map) => map,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::FAILURE;
            }
        },
        None => HashMap::new(),
    };

    let outcome = match cli.command {
        Cmd::Synth(args) => cmd_synth(args, cli.seed, &file_cfg),
        Cmd::Train(args) => cmd_train(args, cli.seed, &file_cfg),
        Cmd::Eval(args) => cmd_eval(args, &file_cfg),
        Cmd::Predict(args) => cmd_predict(args, &file_cfg),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn cmd_synth(
    args: SynthArgs,
    seed_flag: Option<u64>,
    file_cfg: &HashMap<String, String>,
) -> Result<ExitCode> {
    let per_class = pick(args.per_class, cfg_get(file_cfg, "per_class")?, 100);
    let seed = pick(seed_flag, cfg_get(file_cfg, "seed")?, 0);
    let size = pick(args.size, cfg_get(file_cfg, "size")?, 256);
    let manifest = generate_dataset(&args.out, per_class, seed, size)?;
    for (class, count) in &manifest {
        println!("{class},{count}");
    }
    eprintln!(
        "wrote {} images ({per_class} per class, seed {seed}, {size}x{size}) to {}",
        per_class * manifest.len(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn build_train_config(
    args: &TrainArgs,
    seed_flag: Option<u64>,
    file_cfg: &HashMap<String, String>,
) -> Result<(TrainConfig, usize)> {
    let defaults = TrainConfig::default();
    let mut cfg = TrainConfig {
        epochs: pick(args.epochs, cfg_get(file_cfg, "epochs")?, defaults.epochs),
        batch_size: pick(
            args.batch_size,
            cfg_get(file_cfg, "batch_size")?,
            defaults.batch_size,
        ),
        seed: pick(seed_flag, cfg_get(file_cfg, "seed")?, defaults.seed),
        ..defaults
    };
    cfg.adam.learning_rate = pick(
        args.learning_rate,
        cfg_get(file_cfg, "learning_rate")?,
        cfg.adam.learning_rate,
    );
    cfg.adam.beta1 = cfg_get(file_cfg, "beta1")?.unwrap_or(cfg.adam.beta1);
    cfg.adam.beta2 = cfg_get(file_cfg, "beta2")?.unwrap_or(cfg.adam.beta2);
    cfg.adam.epsilon = cfg_get(file_cfg, "epsilon")?.unwrap_or(cfg.adam.epsilon);

    let augment_enabled = if args.no_augment {
        false
    } else {
        cfg_get(file_cfg, "augment")?.unwrap_or(true)
    };
    if !augment_enabled {
        cfg.augment = AugmentPolicy::identity();
    }
    let image_size = pick(args.image_size, cfg_get(file_cfg, "image_size")?, 128);
    Ok((cfg, image_size))
}

fn cmd_train(
    args: TrainArgs,
    seed_flag: Option<u64>,
    file_cfg: &HashMap<String, String>,
) -> Result<ExitCode> {
    let (cfg, image_size) = build_train_config(&args, seed_flag, file_cfg)?;
    eprintln!(
        "loading dataset from {} at {image_size}x{image_size}...",
        args.data.display()
    );
    let split = load_dataset(&args.data, image_size, &SPLIT_RATIO, cfg.seed)?;
    eprintln!(
        "split: {} train / {} validation / {} test across {} classes",
        split.train.len(),
        split.validation.len(),
        split.test.len(),
        split.class_names.len()
    );
    if let Some(manifest_path) = &args.out_manifest {
        write_manifest(&split, manifest_path)?;
    }

    let (best, _history) = fit_with_progress(&split, &cfg, |r| {
        println!(
            "epoch,{},{:.6},{:.6},{:.6},{:.6}",
            r.epoch, r.train.loss, r.validation.loss, r.validation.accuracy, r.validation.mae
        );
        eprintln!(
            "epoch {:>3}: train loss {:.4} acc {:.4} | val loss {:.4} acc {:.4} mae {:.4}",
            r.epoch,
            r.train.loss,
            r.train.accuracy,
            r.validation.loss,
            r.validation.accuracy,
            r.validation.mae
        );
    })?;
    checkpoint::save(&best, &args.out)?;
    eprintln!(
        "saved best checkpoint (epoch {}, val loss {:.4}) to {}",
        best.meta.epoch,
        best.meta.val_loss,
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn select_samples(split: DatasetSplit, which: &str) -> Result<Vec<Sample>> {
    match which {
        "test" => Ok(split.test),
        "validation" => Ok(split.validation),
        "train" => Ok(split.train),
        "all" => {
            let mut all = split.train;
            all.extend(split.validation);
            all.extend(split.test);
            Ok(all)
        }
        other => Err(Error::Config(format!(
            "unknown split `{other}` (expected test, validation, train, or all)"
        ))),
    }
}

fn cmd_eval(args: EvalArgs, file_cfg: &HashMap<String, String>) -> Result<ExitCode> {
    let ckpt = checkpoint::load(&args.model)?;
    let image_size = pick(args.image_size, cfg_get(file_cfg, "image_size")?, 128);
    let split = load_dataset(&args.data, image_size, &SPLIT_RATIO, ckpt.meta.seed)?;
    let samples = select_samples(split, &args.split)?;
    if samples.is_empty() {
        return Err(Error::Input(format!("split `{}` is empty", args.split)));
    }

    let probs = predict_probs(&ckpt.params, &samples)?;
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let (report, roc) = build_report(&probs, &labels)?;
    emit_report(&report, &roc, &args.out_csv, &args.out_svg)?;

    println!("accuracy,{:.6}", report.accuracy);
    println!("cross_entropy,{:.6}", report.cross_entropy);
    println!("mae,{:.6}", report.mae);
    for c in 0..CLASS_COUNT {
        match report.per_class_auc[c] {
            Some(auc) => println!("auc_class_{c},{auc:.6}"),
            None => println!("auc_class_{c},degenerate"),
        }
    }
    println!("auc_micro,{:.6}", report.micro_auc);
    match report.macro_auc {
        Some(auc) => println!("auc_macro,{auc:.6}"),
        None => println!("auc_macro,degenerate"),
    }
    eprintln!(
        "evaluated {} samples from split `{}` (checkpoint epoch {}, seed {}); \
         wrote {} and {}",
        samples.len(),
        args.split,
        ckpt.meta.epoch,
        ckpt.meta.seed,
        args.out_csv.display(),
        args.out_svg.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_predict(args: PredictArgs, file_cfg: &HashMap<String, String>) -> Result<ExitCode> {
    let ckpt = checkpoint::load(&args.model)?;
    let image_size = pick(args.image_size, cfg_get(file_cfg, "image_size")?, 128);
    let mut failures = 0usize;
    for path in &args.images {
        match predict_one(&ckpt.params, path, image_size) {
            Ok(probs) => {
                let argmax = (0..CLASS_COUNT)
                    .max_by(|&a, &b| probs[a].partial_cmp(&probs[b]).unwrap())
                    .unwrap();
                println!(
                    "{},{:.6},{:.6},{:.6},{}",
                    path.display(),
                    probs[0],
                    probs[1],
                    probs[2],
                    ScaffoldClass::ALL[argmax].name()
                );
            }
            Err(e) => {
                failures += 1;
                eprintln!("error: {}: {e}", path.display());
            }
        }
    }
    if failures == args.images.len() {
        Ok(ExitCode::FAILURE)
    } else {
        Ok(ExitCode::SUCCESS)
    }
}

fn predict_one(
    params: &scaffoldnet::model::ModelParams<f32>,
    path: &Path,
    image_size: usize,
) -> Result<[f32; CLASS_COUNT]> {
    let raw = load_grayscale_image(path)?;
    let img = standardize(&resize_bilinear(&raw, image_size, image_size));
    let (probs, _) = model_forward(&img, params, Mode::Infer, &mut Pcg32::seed(0, 0))?;
    let mut out = [0.0f32; CLASS_COUNT];
    out.copy_from_slice(probs.data());
    Ok(out)
}
