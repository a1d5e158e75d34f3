//! Acceptance suite: nine numbered criteria, run sequentially, one
//! PASS/FAIL line each. Run with `cargo test --test acceptance -- --nocapture`
//! to watch progress; the heavyweight end-to-end criterion takes minutes.

use std::process::Command;
use std::time::Instant;

use scaffoldnet::adam::{adam_update_slice, AdamConfig, AdamState};
use scaffoldnet::augment::AugmentPolicy;
use scaffoldnet::checkpoint::{decode, encode, Checkpoint, CheckpointMeta};
use scaffoldnet::dataset::{stratified_split, DatasetSplit, Sample, SPLIT_RATIO};
use scaffoldnet::error::Error;
use scaffoldnet::image_io::{resize_bilinear, RawImage};
use scaffoldnet::layers::{
    conv2d_forward, conv2d_forward_naive, dense_forward, dropout, global_avg_pool, relu, softmax,
    ConvParams, DenseParams, Mode,
};
use scaffoldnet::metrics::{build_report, multiclass_roc, roc_binary};
use scaffoldnet::model::{model_backward, model_forward, ModelParams, CLASS_COUNT};
use scaffoldnet::rng::Pcg32;
use scaffoldnet::synth::{class_default_params, render_fiber_image, ScaffoldClass};
use scaffoldnet::tensor::Tensor;
use scaffoldnet::train::{
    cross_entropy, cross_entropy_grad_logits, evaluate, fit, one_hot, train_epoch, TrainConfig,
};

type CriterionResult = Result<String, String>;

fn random_tensor64(shape: &[usize], lo: f64, hi: f64, rng: &mut Pcg32) -> Tensor<f64> {
    let len = shape.iter().product();
    let data = (0..len).map(|_| rng.range_f64(lo, hi)).collect();
    Tensor::from_vec(shape, data).unwrap()
}

/// Relative error with the standard absolute floor: for gradient entries
/// below 1e-4 the 1e-6 relative tolerance becomes a 1e-10 absolute one,
/// safely above the ~5e-12 roundoff floor of f64 central differences at
/// h = 1e-5 and far below any real gradient defect.
fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
}

// ---------------------------------------------------------------------------
// Criterion 1: analytic gradients match 64-bit central finite differences
// (1e-6 relative) for every layer and the composed 12x12 model.
// ---------------------------------------------------------------------------

const FD_H: f64 = 1e-5;
const FD_TOL: f64 = 1e-6;

fn fd_check_conv(rng: &mut Pcg32) -> Result<f64, String> {
    use scaffoldnet::layers::conv2d_backward;
    let input = random_tensor64(&[6, 5, 2], -1.0, 1.0, rng);
    let p = ConvParams::new(
        random_tensor64(&[3, 3, 2, 3], -1.0, 1.0, rng),
        random_tensor64(&[3], -0.5, 0.5, rng),
    )
    .unwrap();
    let upstream = random_tensor64(&[4, 3, 3], -1.0, 1.0, rng);
    let grads = conv2d_backward(&input, &p, &upstream, true).map_err(|e| e.to_string())?;
    let loss = |input: &Tensor<f64>, p: &ConvParams<f64>| -> f64 {
        conv2d_forward(input, p)
            .unwrap()
            .data()
            .iter()
            .zip(upstream.data())
            .map(|(y, g)| y * g)
            .sum()
    };
    let mut worst = 0.0f64;
    let gi = grads.grad_input.unwrap();
    for i in 0..input.len() {
        let mut plus = input.clone();
        plus.data_mut()[i] += FD_H;
        let mut minus = input.clone();
        minus.data_mut()[i] -= FD_H;
        let fd = (loss(&plus, &p) - loss(&minus, &p)) / (2.0 * FD_H);
        worst = worst.max(rel_err(fd, gi.data()[i]));
    }
    for i in 0..p.kernels.len() {
        let mut plus = p.clone();
        plus.kernels.data_mut()[i] += FD_H;
        let mut minus = p.clone();
        minus.kernels.data_mut()[i] -= FD_H;
        let fd = (loss(&input, &plus) - loss(&input, &minus)) / (2.0 * FD_H);
        worst = worst.max(rel_err(fd, grads.grad_kernels.data()[i]));
    }
    for i in 0..p.bias.len() {
        let mut plus = p.clone();
        plus.bias.data_mut()[i] += FD_H;
        let mut minus = p.clone();
        minus.bias.data_mut()[i] -= FD_H;
        let fd = (loss(&input, &plus) - loss(&input, &minus)) / (2.0 * FD_H);
        worst = worst.max(rel_err(fd, grads.grad_bias.data()[i]));
    }
    Ok(worst)
}

fn fd_check_dense(rng: &mut Pcg32) -> Result<f64, String> {
    use scaffoldnet::layers::dense_backward;
    let x = random_tensor64(&[7], -1.0, 1.0, rng);
    let p = DenseParams::new(
        random_tensor64(&[7, 4], -1.0, 1.0, rng),
        random_tensor64(&[4], -0.5, 0.5, rng),
    )
    .unwrap();
    let upstream = random_tensor64(&[4], -1.0, 1.0, rng);
    let grads = dense_backward(&x, &p, &upstream).map_err(|e| e.to_string())?;
    let loss = |x: &Tensor<f64>, p: &DenseParams<f64>| -> f64 {
        dense_forward(x, p)
            .unwrap()
            .data()
            .iter()
            .zip(upstream.data())
            .map(|(y, g)| y * g)
            .sum()
    };
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let mut plus = x.clone();
        plus.data_mut()[i] += FD_H;
        let mut minus = x.clone();
        minus.data_mut()[i] -= FD_H;
        let fd = (loss(&plus, &p) - loss(&minus, &p)) / (2.0 * FD_H);
        worst = worst.max(rel_err(fd, grads.grad_input.data()[i]));
    }
    for i in 0..p.weights.len() {
        let mut plus = p.clone();
        plus.weights.data_mut()[i] += FD_H;
        let mut minus = p.clone();
        minus.weights.data_mut()[i] -= FD_H;
        let fd = (loss(&x, &plus) - loss(&x, &minus)) / (2.0 * FD_H);
        worst = worst.max(rel_err(fd, grads.grad_weights.data()[i]));
    }
    for i in 0..p.bias.len() {
        let mut plus = p.clone();
        plus.bias.data_mut()[i] += FD_H;
        let mut minus = p.clone();
        minus.bias.data_mut()[i] -= FD_H;
        let fd = (loss(&x, &plus) - loss(&x, &minus)) / (2.0 * FD_H);
        worst = worst.max(rel_err(fd, grads.grad_bias.data()[i]));
    }
    Ok(worst)
}

fn fd_check_relu(rng: &mut Pcg32) -> Result<f64, String> {
    use scaffoldnet::layers::relu_backward;
    // keep inputs away from the kink by more than the probe step
    let x = Tensor::from_vec(
        &[40],
        (0..40)
            .map(|_| {
                let mag = rng.range_f64(0.05, 1.0);
                if rng.next_f64() < 0.5 {
                    -mag
                } else {
                    mag
                }
            })
            .collect::<Vec<f64>>(),
    )
    .unwrap();
    let upstream = random_tensor64(&[40], -1.0, 1.0, rng);
    let analytic = relu_backward(&x, &upstream).map_err(|e| e.to_string())?;
    let loss = |x: &Tensor<f64>| -> f64 {
        relu(x)
            .data()
            .iter()
            .zip(upstream.data())
            .map(|(y, g)| y * g)
            .sum()
    };
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let mut plus = x.clone();
        plus.data_mut()[i] += FD_H;
        let mut minus = x.clone();
        minus.data_mut()[i] -= FD_H;
        let fd = (loss(&plus) - loss(&minus)) / (2.0 * FD_H);
        worst = worst.max(rel_err(fd, analytic.data()[i]));
    }
    Ok(worst)
}

fn fd_check_gap(rng: &mut Pcg32) -> Result<f64, String> {
    use scaffoldnet::layers::global_avg_pool_backward;
    let x = random_tensor64(&[4, 5, 3], -1.0, 1.0, rng);
    let upstream = random_tensor64(&[3], -1.0, 1.0, rng);
    let analytic = global_avg_pool_backward(4, 5, &upstream).map_err(|e| e.to_string())?;
    let loss = |x: &Tensor<f64>| -> f64 {
        global_avg_pool(x)
            .unwrap()
            .data()
            .iter()
            .zip(upstream.data())
            .map(|(y, g)| y * g)
            .sum()
    };
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let mut plus = x.clone();
        plus.data_mut()[i] += FD_H;
        let mut minus = x.clone();
        minus.data_mut()[i] -= FD_H;
        let fd = (loss(&plus) - loss(&minus)) / (2.0 * FD_H);
        worst = worst.max(rel_err(fd, analytic.data()[i]));
    }
    Ok(worst)
}

fn fd_check_dropout(rng: &mut Pcg32) -> Result<f64, String> {
    use scaffoldnet::layers::dropout_backward;
    let x = random_tensor64(&[30], -1.0, 1.0, rng);
    let upstream = random_tensor64(&[30], -1.0, 1.0, rng);
    let mask_rng = Pcg32::seed(rng.next_u32() as u64, 5);
    // fixed mask: the same RNG state is replayed for every evaluation
    let forward = |x: &Tensor<f64>| -> (Tensor<f64>, Tensor<f64>) {
        let (out, mask) = dropout(x, 0.5, Mode::Train, &mut mask_rng.clone()).unwrap();
        (out, mask.unwrap())
    };
    let (_, mask) = forward(&x);
    let analytic = dropout_backward(&mask, &upstream).map_err(|e| e.to_string())?;
    let loss = |x: &Tensor<f64>| -> f64 {
        forward(x)
            .0
            .data()
            .iter()
            .zip(upstream.data())
            .map(|(y, g)| y * g)
            .sum()
    };
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let mut plus = x.clone();
        plus.data_mut()[i] += FD_H;
        let mut minus = x.clone();
        minus.data_mut()[i] -= FD_H;
        let fd = (loss(&plus) - loss(&minus)) / (2.0 * FD_H);
        worst = worst.max(rel_err(fd, analytic.data()[i]));
    }
    Ok(worst)
}

fn fd_check_softmax_ce(rng: &mut Pcg32) -> Result<f64, String> {
    let z = random_tensor64(&[3], -2.0, 2.0, rng);
    let y = one_hot::<f64>(rng.below(3) as usize, 3).unwrap();
    let probs = softmax(&z);
    let analytic = cross_entropy_grad_logits(&probs, &y);
    let loss = |z: &Tensor<f64>| -> f64 { cross_entropy(&softmax(z), &y).unwrap() };
    let mut worst = 0.0f64;
    for i in 0..3 {
        let mut plus = z.clone();
        plus.data_mut()[i] += FD_H;
        let mut minus = z.clone();
        minus.data_mut()[i] -= FD_H;
        let fd = (loss(&plus) - loss(&minus)) / (2.0 * FD_H);
        worst = worst.max(rel_err(fd, analytic.data()[i]));
    }
    Ok(worst)
}

/// Composed 12x12 model: loss through the fused softmax+cross-entropy,
/// dropout masks pinned by replaying the same RNG state each forward.
///
/// A central difference is only a derivative estimate where the function is
/// differentiable, so probes whose two evaluations land on different ReLU
/// gate patterns (the +h and -h points straddle a kink) are discarded and
/// redrawn; the analytic gradient at such points is still exercised by the
/// neighbouring probes and the exhaustive per-layer checks.
fn fd_check_model(instance: u64) -> Result<f64, String> {
    let mut rng = Pcg32::seed(0xAC5E, instance);
    let params: ModelParams<f64> = ModelParams::init(&mut rng);
    let img = random_tensor64(&[12, 12, 1], -1.0, 1.0, &mut rng);
    let label = rng.below(3) as usize;
    let y = one_hot::<f64>(label, CLASS_COUNT).unwrap();
    let fwd_rng = Pcg32::seed(0xD20F, instance);

    // loss plus a hash of the relu gate pattern to detect kink crossings
    let loss = |params: &ModelParams<f64>| -> (f64, u64) {
        let (probs, cache) =
            model_forward(&img, params, Mode::Train, &mut fwd_rng.clone()).unwrap();
        let cache = cache.unwrap();
        let mut sig = 0xcbf2_9ce4_8422_2325u64;
        for t in [&cache.act1, &cache.act2, &cache.act3, &cache.hidden] {
            for &v in t.data() {
                sig = (sig ^ (v > 0.0) as u64).wrapping_mul(0x1_0000_0001_b3);
            }
        }
        (cross_entropy(&probs, &y).unwrap(), sig)
    };

    let (probs, cache) = model_forward(&img, &params, Mode::Train, &mut fwd_rng.clone()).unwrap();
    let grad_logits = cross_entropy_grad_logits(&probs, &y);
    let analytic = model_backward(&grad_logits, &cache.unwrap(), &params).unwrap();

    // probe a deterministic sample of coordinates in every parameter tensor
    let mut worst = 0.0f64;
    let mut probe_rng = Pcg32::seed(0x9B0E, instance);
    let tensors = params.tensors();
    let grads = analytic.tensors();
    for (t_idx, (tensor, grad)) in tensors.iter().zip(grads.iter()).enumerate() {
        let len = tensor.len();
        let target = len.min(30);
        let mut checked = 0;
        let mut attempts = 0;
        while checked < target && attempts < 3 * target {
            attempts += 1;
            let i = probe_rng.below(len as u32) as usize;
            let mut plus = params.clone();
            plus.tensors_mut()[t_idx].data_mut()[i] += FD_H;
            let mut minus = params.clone();
            minus.tensors_mut()[t_idx].data_mut()[i] -= FD_H;
            let (lp, sig_p) = loss(&plus);
            let (lm, sig_m) = loss(&minus);
            if sig_p != sig_m {
                continue; // probe interval straddles a relu kink
            }
            checked += 1;
            let fd = (lp - lm) / (2.0 * FD_H);
            worst = worst.max(rel_err(fd, grad.data()[i]));
        }
        if checked * 3 < target * 2 {
            return Err(format!(
                "instance {instance}: only {checked}/{target} differentiable probes for tensor {t_idx}"
            ));
        }
    }
    Ok(worst)
}

fn criterion_1_gradients() -> CriterionResult {
    let start = Instant::now();
    let mut worst_layer = 0.0f64;
    let mut rng = Pcg32::seed(0x6AD5, 0);
    for _ in 0..5 {
        for check in [
            fd_check_conv,
            fd_check_dense,
            fd_check_relu,
            fd_check_gap,
            fd_check_dropout,
            fd_check_softmax_ce,
        ] {
            let worst = check(&mut rng)?;
            worst_layer = worst_layer.max(worst);
            if worst > FD_TOL {
                return Err(format!(
                    "per-layer gradient error {worst:.2e} exceeds {FD_TOL:.0e}"
                ));
            }
        }
    }
    let mut worst_model = 0.0f64;
    for instance in 0..5 {
        let worst = fd_check_model(instance)?;
        worst_model = worst_model.max(worst);
        if worst > FD_TOL {
            return Err(format!(
                "composed-model gradient error {worst:.2e} exceeds {FD_TOL:.0e} (instance {instance})"
            ));
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    if elapsed >= 30.0 {
        return Err(format!("gradient checks took {elapsed:.1}s (budget 30s)"));
    }
    Ok(format!(
        "worst rel err: layers {worst_layer:.2e}, composed model {worst_model:.2e}; {elapsed:.1}s"
    ))
}

// ---------------------------------------------------------------------------
// Criterion 2: im2col+GEMM equals the naive sliding-window oracle within
// 1e-5 on 100 randomized shapes (dims <= 16).
// ---------------------------------------------------------------------------

fn criterion_2_conv_oracle() -> CriterionResult {
    let start = Instant::now();
    let mut rng = Pcg32::seed(0xC04, 2);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let h = 3 + rng.below(14) as usize;
        let w = 3 + rng.below(14) as usize;
        let cin = 1 + rng.below(6) as usize;
        let cout = 1 + rng.below(6) as usize;
        let input = {
            let data = (0..h * w * cin)
                .map(|_| rng.range_f64(-1.0, 1.0) as f32)
                .collect();
            Tensor::from_vec(&[h, w, cin], data).unwrap()
        };
        let p = ConvParams::new(
            {
                let data = (0..9 * cin * cout)
                    .map(|_| rng.range_f64(-1.0, 1.0) as f32)
                    .collect();
                Tensor::from_vec(&[3, 3, cin, cout], data).unwrap()
            },
            {
                let data = (0..cout).map(|_| rng.range_f64(-0.5, 0.5) as f32).collect();
                Tensor::from_vec(&[cout], data).unwrap()
            },
        )
        .unwrap();
        let fast = conv2d_forward(&input, &p).map_err(|e| e.to_string())?;
        let slow = conv2d_forward_naive(&input, &p).map_err(|e| e.to_string())?;
        for (a, b) in fast.data().iter().zip(slow.data()) {
            let diff = (a - b).abs() as f64;
            worst = worst.max(diff);
            if diff >= 1e-5 {
                return Err(format!(
                    "case {case} ({h}x{w}x{cin}->{cout}): |im2col - naive| = {diff:.2e}"
                ));
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    if elapsed >= 10.0 {
        return Err(format!(
            "convolution oracle took {elapsed:.1}s (budget 10s)"
        ));
    }
    Ok(format!(
        "100 shapes, worst |diff| {worst:.2e}; {elapsed:.1}s"
    ))
}

// ---------------------------------------------------------------------------
// Criterion 3: Adam matches an independent scalar reference to 1e-12 over
// 100 random steps; the first-step hand value is -alpha.
// ---------------------------------------------------------------------------

fn criterion_3_adam_oracle() -> CriterionResult {
    let cfg = AdamConfig::default();

    // hand value: theta = 0, g = 1, t = 1 => theta_1 = -alpha / (1 + eps)
    let mut theta = [0.0f64];
    let (mut m, mut v) = ([0.0f64], [0.0f64]);
    adam_update_slice(&mut theta, &[1.0], &mut m, &mut v, 1, &cfg);
    if (theta[0] + 0.001).abs() > 1e-9 {
        return Err(format!("first step gave {} instead of -0.001", theta[0]));
    }

    // independent reference, written out plainly
    let cfg = AdamConfig {
        learning_rate: 0.0025,
        beta1: 0.9,
        beta2: 0.999,
        epsilon: 1e-8,
    };
    let mut rng = Pcg32::seed(0xADA, 3);
    let mut ref_theta = -0.3f64;
    let (mut ref_m, mut ref_v) = (0.0f64, 0.0f64);
    let mut impl_theta = [-0.3f64];
    let (mut impl_m, mut impl_v) = ([0.0f64], [0.0f64]);
    let mut worst = 0.0f64;
    for t in 1..=100u64 {
        let g = rng.range_f64(-3.0, 3.0);
        ref_m = cfg.beta1 * ref_m + (1.0 - cfg.beta1) * g;
        ref_v = cfg.beta2 * ref_v + (1.0 - cfg.beta2) * g * g;
        let m_hat = ref_m / (1.0 - cfg.beta1.powi(t as i32));
        let v_hat = ref_v / (1.0 - cfg.beta2.powi(t as i32));
        ref_theta -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);

        adam_update_slice(&mut impl_theta, &[g], &mut impl_m, &mut impl_v, t, &cfg);
        worst = worst.max((ref_theta - impl_theta[0]).abs());
        if worst > 1e-12 {
            return Err(format!("step {t}: drift {worst:.2e} exceeds 1e-12"));
        }
    }
    Ok(format!(
        "100 steps, worst drift {worst:.2e}; first step = -alpha"
    ))
}

// ---------------------------------------------------------------------------
// Criterion 4: trapezoidal AUC equals the pair-counting statistic (ties 1/2)
// within 1e-9 on 200 random instances; a perfect predictor scores exactly 1.
// ---------------------------------------------------------------------------

fn auc_pair_count(scores: &[f64], labels: &[bool]) -> f64 {
    let mut pairs = 0.0;
    let mut total = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            total += 1.0;
            if scores[i] > scores[j] {
                pairs += 1.0;
            } else if scores[i] == scores[j] {
                pairs += 0.5;
            }
        }
    }
    pairs / total
}

fn criterion_4_roc_oracle() -> CriterionResult {
    let mut rng = Pcg32::seed(0x40C, 4);
    let mut worst = 0.0f64;
    for case in 0..200 {
        let n = 2 + rng.below(29) as usize;
        // quantized scores force plenty of ties
        let scores: Vec<f64> = (0..n).map(|_| rng.below(8) as f64 / 7.0).collect();
        let mut labels: Vec<bool> = (0..n).map(|_| rng.next_f64() < 0.5).collect();
        labels[0] = true;
        let last = labels.len() - 1;
        labels[last] = false;
        let curve = roc_binary(&scores, &labels).map_err(|e| e.to_string())?;
        let oracle = auc_pair_count(&scores, &labels);
        let diff = (curve.auc - oracle).abs();
        worst = worst.max(diff);
        if diff >= 1e-9 {
            return Err(format!(
                "case {case} (n={n}): trapezoid {} vs pair count {oracle} (diff {diff:.2e})",
                curve.auc
            ));
        }
    }

    // perfect predictor: every AUC is exactly 1.0
    let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
    let probs: Vec<[f64; 3]> = labels
        .iter()
        .map(|&l| std::array::from_fn(|c| if c == l { 1.0 } else { 0.0 }))
        .collect();
    let roc = multiclass_roc(&probs, &labels).map_err(|e| e.to_string())?;
    for (c, curve) in roc.per_class.iter().enumerate() {
        let auc = curve.as_ref().map(|r| r.auc);
        if auc != Some(1.0) {
            return Err(format!("perfect predictor class {c} AUC {auc:?} != 1.0"));
        }
    }
    if roc.micro.auc != 1.0 || roc.macro_auc() != Some(1.0) {
        return Err(format!(
            "perfect predictor micro {} macro {:?}",
            roc.micro.auc,
            roc.macro_auc()
        ));
    }
    Ok(format!(
        "200 instances, worst |diff| {worst:.2e}; perfect predictor exact"
    ))
}

// ---------------------------------------------------------------------------
// Criterion 5: end-to-end desk-scale reproduction on the synthetic corpus.
// Full profile: 600/100/100 at 128x128, 11 epochs, batch 32, lr 0.001 ->
// test accuracy >= 0.95, macro AUC >= 0.98, MAE <= 0.05, and the selected
// epoch's validation accuracy must beat epoch 1. Smoke profile: 64x64,
// 150/30/30, 4 epochs -> accuracy >= 0.85 within 3 minutes.
// ---------------------------------------------------------------------------

/// Corpus with exact per-split sizes, classes round-robin, 256px renders
/// resized down by the normal pipeline path.
fn synth_split(
    n_train: usize,
    n_val: usize,
    n_test: usize,
    image_size: usize,
    seed: u64,
) -> DatasetSplit {
    let gen = Pcg32::seed(seed, 0x5EED);
    let mut counters = [0u64; 3];
    let mut make = |n: usize, split_tag: u64| -> Vec<Sample> {
        (0..n)
            .map(|i| {
                let class = ScaffoldClass::ALL[i % 3];
                let idx = counters[class.index()];
                counters[class.index()] += 1;
                let mut child = gen.derive((class.index() as u64) << 40 | idx << 8 | split_tag);
                let img_seed = ((child.next_u32() as u64) << 32) | child.next_u32() as u64;
                let img = render_fiber_image(&class_default_params(class), 256, img_seed).unwrap();
                Sample {
                    image: resize_bilinear(&img, image_size, image_size),
                    label: class.index(),
                    path: format!("synth://{}/{}", class.name(), idx),
                }
            })
            .collect()
    };
    DatasetSplit {
        train: make(n_train, 0),
        validation: make(n_val, 1),
        test: make(n_test, 2),
        class_names: ScaffoldClass::ALL
            .iter()
            .map(|c| c.name().to_string())
            .collect(),
    }
}

fn criterion_5_end_to_end() -> CriterionResult {
    // smoke profile first: it gates quickly if training is broken
    let smoke_start = Instant::now();
    let split = synth_split(150, 30, 30, 64, 7);
    let cfg = TrainConfig {
        epochs: 4,
        seed: 7,
        ..TrainConfig::default()
    };
    let (best, _) = fit(&split, &cfg).map_err(|e| e.to_string())?;
    let smoke_test = evaluate(&best.params, &split.test).map_err(|e| e.to_string())?;
    let smoke_elapsed = smoke_start.elapsed().as_secs_f64();
    if smoke_test.accuracy < 0.85 {
        return Err(format!(
            "smoke profile accuracy {:.4} below 0.85",
            smoke_test.accuracy
        ));
    }
    if smoke_elapsed > 180.0 {
        return Err(format!(
            "smoke profile took {smoke_elapsed:.0}s (budget 180s)"
        ));
    }

    // full profile
    let full_start = Instant::now();
    let split = synth_split(600, 100, 100, 128, 7);
    let cfg = TrainConfig {
        epochs: 11,
        seed: 7,
        ..TrainConfig::default()
    };
    let (best, history) = fit(&split, &cfg).map_err(|e| e.to_string())?;
    let elapsed = full_start.elapsed().as_secs_f64();
    if elapsed > 3600.0 {
        return Err(format!("full profile took {elapsed:.0}s (budget 3600s)"));
    }

    let probs =
        scaffoldnet::train::predict_probs(&best.params, &split.test).map_err(|e| e.to_string())?;
    let labels: Vec<usize> = split.test.iter().map(|s| s.label).collect();
    let (report, _) = build_report(&probs, &labels).map_err(|e| e.to_string())?;

    let selected = &history[(best.meta.epoch - 1) as usize];
    let epoch1 = &history[0];
    let mut failures = Vec::new();
    if report.accuracy < 0.95 {
        failures.push(format!("test accuracy {:.4} < 0.95", report.accuracy));
    }
    match report.macro_auc {
        Some(auc) if auc >= 0.98 => {}
        other => failures.push(format!("macro AUC {other:?} < 0.98")),
    }
    if report.mae > 0.05 {
        failures.push(format!("test MAE {:.4} > 0.05", report.mae));
    }
    if selected.validation.accuracy <= epoch1.validation.accuracy {
        failures.push(format!(
            "selected-epoch val accuracy {:.4} does not exceed epoch 1's {:.4}",
            selected.validation.accuracy, epoch1.validation.accuracy
        ));
    }
    // the Figure-1 pattern: a well-classified electrospun image is confident
    let best_electro = probs
        .iter()
        .zip(&labels)
        .filter(|(_, &l)| l == ScaffoldClass::Electrospun.index())
        .map(|(p, _)| p[ScaffoldClass::Electrospun.index()])
        .fold(0.0f32, f32::max);
    if best_electro <= 0.9 {
        failures.push(format!(
            "no electrospun test image reaches probability > 0.9 (best {best_electro:.4})"
        ));
    }
    if !failures.is_empty() {
        return Err(failures.join("; "));
    }
    Ok(format!(
        "full: acc {:.4}, macro AUC {:.4}, MAE {:.4}, val acc {:.4} @ epoch {} > {:.4} @ epoch 1, {:.0}s; \
         smoke: acc {:.4}, {:.0}s",
        report.accuracy,
        report.macro_auc.unwrap(),
        report.mae,
        selected.validation.accuracy,
        best.meta.epoch,
        epoch1.validation.accuracy,
        elapsed,
        smoke_test.accuracy,
        smoke_elapsed
    ))
}

// ---------------------------------------------------------------------------
// Criterion 6: identical seeds give byte-identical checkpoints from two
// separate `train` processes, and identical `eval` reports on them.
// ---------------------------------------------------------------------------

fn run_cli(args: &[&str]) -> Result<(String, String), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_scaffoldnet"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "`scaffoldnet {}` failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok((
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    ))
}

fn criterion_6_determinism() -> CriterionResult {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = dir.path().join("data");
    run_cli(&[
        "synth",
        "--out",
        data.to_str().unwrap(),
        "--per-class",
        "10",
        "--seed",
        "3",
        "--size",
        "96",
    ])?;

    let mut ckpt_bytes = Vec::new();
    for run in 0..2 {
        let model = dir.path().join(format!("model_{run}.scfn"));
        let (stdout, _) = run_cli(&[
            "train",
            "--data",
            data.to_str().unwrap(),
            "--out",
            model.to_str().unwrap(),
            "--epochs",
            "2",
            "--seed",
            "11",
            "--image-size",
            "48",
        ])?;
        let epoch_lines = stdout.lines().filter(|l| l.starts_with("epoch,")).count();
        if epoch_lines != 2 {
            return Err(format!("expected 2 epoch lines, saw {epoch_lines}"));
        }
        ckpt_bytes.push(std::fs::read(&model).map_err(|e| e.to_string())?);
    }
    if ckpt_bytes[0] != ckpt_bytes[1] {
        return Err("checkpoints from identical seeds differ".into());
    }

    let mut reports = Vec::new();
    for run in 0..2 {
        let csv = dir.path().join(format!("roc_{run}.csv"));
        let svg = dir.path().join(format!("roc_{run}.svg"));
        let (stdout, _) = run_cli(&[
            "eval",
            "--data",
            data.to_str().unwrap(),
            "--model",
            dir.path().join("model_0.scfn").to_str().unwrap(),
            "--out-csv",
            csv.to_str().unwrap(),
            "--out-svg",
            svg.to_str().unwrap(),
            "--image-size",
            "48",
        ])?;
        let csv_bytes = std::fs::read(&csv).map_err(|e| e.to_string())?;
        reports.push((stdout, csv_bytes));
    }
    if reports[0] != reports[1] {
        return Err("eval reports on the same checkpoint differ".into());
    }
    Ok(format!(
        "checkpoints byte-identical ({} bytes); eval stdout and CSV identical",
        ckpt_bytes[0].len()
    ))
}

// ---------------------------------------------------------------------------
// Criterion 7: overfit sanity. 150 optimizer steps on 6 images (2 per class)
// drive mean training cross-entropy below 0.05 and accuracy to 1.0.
// ---------------------------------------------------------------------------

fn criterion_7_overfit() -> CriterionResult {
    let gen = Pcg32::seed(0x0F17, 4);
    let samples: Vec<Sample> = (0..6)
        .map(|i| {
            let class = ScaffoldClass::ALL[i % 3];
            let mut child = gen.derive(i as u64);
            let img_seed = ((child.next_u32() as u64) << 32) | child.next_u32() as u64;
            let img = render_fiber_image(&class_default_params(class), 32, img_seed).unwrap();
            Sample {
                image: img,
                label: class.index(),
                path: format!("overfit://{i}"),
            }
        })
        .collect();

    // The criterion pins the set size and step count, not the optimizer
    // hyperparameters; 0.004 suits the six-image full-batch regime (0.001,
    // tuned for thousands of images, reaches only ~0.15 by step 150 under
    // dropout noise).
    let mut cfg = TrainConfig {
        augment: AugmentPolicy::identity(),
        seed: 1,
        ..TrainConfig::default()
    };
    cfg.adam.learning_rate = 0.004;
    let root = Pcg32::seed(cfg.seed, 0x0F17);
    let mut params: ModelParams<f32> = ModelParams::init(&mut root.derive(0).clone());
    let mut state: AdamState<f32> = AdamState::new();
    // 6 samples in one batch of 32: each epoch is exactly one Adam step
    for step in 0..150u64 {
        train_epoch(
            &mut params,
            &mut state,
            &samples,
            &cfg,
            &root.derive(1 + step),
        )
        .map_err(|e| e.to_string())?;
    }
    let metrics = evaluate(&params, &samples).map_err(|e| e.to_string())?;
    if metrics.loss >= 0.05 {
        return Err(format!(
            "training cross-entropy {:.4} not below 0.05",
            metrics.loss
        ));
    }
    if metrics.accuracy < 1.0 {
        return Err(format!("training accuracy {:.4} not 1.0", metrics.accuracy));
    }
    Ok(format!(
        "after 150 steps: cross-entropy {:.5}, accuracy {:.2}",
        metrics.loss, metrics.accuracy
    ))
}

// ---------------------------------------------------------------------------
// Criterion 8: split arithmetic on the published per-class counts
// {1013, 960, 1070} against an exact integer largest-remainder oracle.
// ---------------------------------------------------------------------------

/// Exact integer oracle: ratio 8.8 : 1.2 : 1.0 == 44 : 6 : 5 over 55.
fn largest_remainder_oracle(n: u64) -> [u64; 3] {
    let num = [44u64, 6, 5];
    let den = 55u64;
    let mut counts = [0u64; 3];
    let mut rems = [0u64; 3];
    for i in 0..3 {
        counts[i] = n * num[i] / den;
        rems[i] = (n * num[i]) % den;
    }
    let mut leftover = n - counts.iter().sum::<u64>();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| rems[b].cmp(&rems[a]).then(a.cmp(&b)));
    for &i in &order {
        if leftover == 0 {
            break;
        }
        counts[i] += 1;
        leftover -= 1;
    }
    counts
}

fn criterion_8_split_arithmetic() -> CriterionResult {
    let class_counts = [1013usize, 960, 1070];
    let class_names = vec![
        "airbrushed".to_string(),
        "electrospun".to_string(),
        "steel_wire".to_string(),
    ];
    let mut samples = Vec::new();
    for (label, &count) in class_counts.iter().enumerate() {
        for i in 0..count {
            samples.push(Sample {
                image: RawImage::constant(1, 1, 0).unwrap(),
                label,
                path: format!("{label}/{i}"),
            });
        }
    }
    let total: usize = class_counts.iter().sum();
    if total != 3043 {
        return Err(format!("class counts sum to {total}, not 3043"));
    }
    let split =
        stratified_split(samples, class_names, &SPLIT_RATIO, 42).map_err(|e| e.to_string())?;
    if split.total() != 3043 {
        return Err(format!("split total {} != 3043", split.total()));
    }
    let mut detail = Vec::new();
    for (label, &count) in class_counts.iter().enumerate() {
        let oracle = largest_remainder_oracle(count as u64);
        let got = [
            split.train.iter().filter(|s| s.label == label).count() as u64,
            split.validation.iter().filter(|s| s.label == label).count() as u64,
            split.test.iter().filter(|s| s.label == label).count() as u64,
        ];
        if got != oracle {
            return Err(format!(
                "class {label} (n={count}): split {got:?} != oracle {oracle:?}"
            ));
        }
        detail.push(format!("{count}->{}/{}/{}", got[0], got[1], got[2]));
    }
    Ok(format!("{}; total 3043", detail.join(", ")))
}

// ---------------------------------------------------------------------------
// Criterion 9: checkpoint round trip is bit-exact; magic, version and
// truncation corruption give distinct errors, never a crash.
// ---------------------------------------------------------------------------

fn criterion_9_checkpoint() -> CriterionResult {
    let ckpt = Checkpoint {
        params: ModelParams::init(&mut Pcg32::seed(0xC4, 9)),
        meta: CheckpointMeta {
            epoch: 3,
            val_loss: 0.25,
            val_accuracy: 0.9,
            val_mae: 0.04,
            seed: 1234,
        },
    };
    let bytes = encode(&ckpt);
    let loaded = decode(&bytes).map_err(|e| e.to_string())?;
    for (a, b) in loaded.params.tensors().iter().zip(ckpt.params.tensors()) {
        for (x, y) in a.data().iter().zip(b.data()) {
            if x.to_bits() != y.to_bits() {
                return Err("round trip is not bit-exact".into());
            }
        }
    }
    if loaded.meta != ckpt.meta {
        return Err("metadata did not round trip".into());
    }

    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'Q';
    if !matches!(decode(&bad_magic), Err(Error::CheckpointMagic)) {
        return Err("corrupted magic did not yield the magic error".into());
    }
    let mut bad_version = bytes.clone();
    bad_version[4..8].copy_from_slice(&7u32.to_le_bytes());
    if !matches!(decode(&bad_version), Err(Error::CheckpointVersion(7))) {
        return Err("corrupted version did not yield the version error".into());
    }
    let mut distinct_truncations = 0;
    for cut in [10usize, 100, bytes.len() / 2, bytes.len() - 4] {
        match decode(&bytes[..cut]) {
            Err(Error::CheckpointTruncated(_)) => distinct_truncations += 1,
            other => {
                return Err(format!(
                    "truncation at {cut} gave {other:?} instead of the truncation error"
                ))
            }
        }
    }
    Ok(format!(
        "round trip bit-exact ({} bytes); magic/version/truncation errors distinct \
         ({distinct_truncations} truncation points checked)",
        bytes.len()
    ))
}

// ---------------------------------------------------------------------------

type Criterion = (usize, &'static str, fn() -> CriterionResult);

#[test]
fn acceptance() {
    let criteria: Vec<Criterion> = vec![
        (1, "gradient correctness", criterion_1_gradients),
        (2, "convolution oracle", criterion_2_conv_oracle),
        (3, "adam oracle", criterion_3_adam_oracle),
        (4, "roc oracle", criterion_4_roc_oracle),
        (5, "end-to-end reproduction", criterion_5_end_to_end),
        (6, "determinism", criterion_6_determinism),
        (7, "overfit sanity", criterion_7_overfit),
        (8, "split arithmetic", criterion_8_split_arithmetic),
        (9, "checkpoint round trip", criterion_9_checkpoint),
    ];
    let mut failed = Vec::new();
    for (n, name, run) in criteria {
        match run() {
            Ok(detail) => println!("criterion {n} ({name}): PASS — {detail}"),
            Err(why) => {
                println!("criterion {n} ({name}): FAIL — {why}");
                failed.push(n);
            }
        }
    }
    assert!(failed.is_empty(), "failed acceptance criteria: {failed:?}");
}
