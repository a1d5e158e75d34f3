//! Layer math for the fixed six-layer architecture: valid stride-1
//! convolution (im2col + GEMM, with a naive sliding-window oracle), ReLU,
//! global average pooling, dense layers, inverted dropout, softmax, and
//! Glorot-uniform initialization. Forward and backward passes are written by
//! hand per layer; there is no autodiff graph.

use crate::error::{Error, Result};
use crate::rng::Pcg32;
use crate::tensor::{gemm, gemm_acc, Scalar, Tensor};

/// Whether dropout is active and forward passes record caches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Convolution parameters: kernels `(kh, kw, in_c, out_c)` plus per-channel bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams<F = f32> {
    pub kernels: Tensor<F>,
    pub bias: Tensor<F>,
}

impl<F: Scalar> ConvParams<F> {
    pub fn new(kernels: Tensor<F>, bias: Tensor<F>) -> Result<Self> {
        if kernels.rank() != 4 {
            return Err(Error::Shape(format!(
                "conv kernels must be rank 4, got {:?}",
                kernels.shape()
            )));
        }
        if bias.shape() != [kernels.shape()[3]] {
            return Err(Error::Shape(format!(
                "conv bias shape {:?} does not match {} output channels",
                bias.shape(),
                kernels.shape()[3]
            )));
        }
        Ok(ConvParams { kernels, bias })
    }

    pub fn in_channels(&self) -> usize {
        self.kernels.shape()[2]
    }

    pub fn out_channels(&self) -> usize {
        self.kernels.shape()[3]
    }

    pub fn kernel_hw(&self) -> (usize, usize) {
        (self.kernels.shape()[0], self.kernels.shape()[1])
    }
}

/// Dense layer parameters: weights `(in, out)` plus bias `(out)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams<F = f32> {
    pub weights: Tensor<F>,
    pub bias: Tensor<F>,
}

impl<F: Scalar> DenseParams<F> {
    pub fn new(weights: Tensor<F>, bias: Tensor<F>) -> Result<Self> {
        if weights.rank() != 2 {
            return Err(Error::Shape(format!(
                "dense weights must be rank 2, got {:?}",
                weights.shape()
            )));
        }
        if bias.shape() != [weights.shape()[1]] {
            return Err(Error::Shape(format!(
                "dense bias shape {:?} does not match {} outputs",
                bias.shape(),
                weights.shape()[1]
            )));
        }
        Ok(DenseParams { weights, bias })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn out_dim(&self) -> usize {
        self.weights.shape()[1]
    }
}

fn conv_out_dims<F: Scalar>(input: &Tensor<F>, p: &ConvParams<F>) -> Result<(usize, usize, usize)> {
    if input.rank() != 3 {
        return Err(Error::Shape(format!(
            "conv input must be rank 3 (H, W, C), got {:?}",
            input.shape()
        )));
    }
    let (h, w, c) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (kh, kw) = p.kernel_hw();
    if c != p.in_channels() {
        return Err(Error::Shape(format!(
            "conv input has {c} channels but kernels expect {}",
            p.in_channels()
        )));
    }
    if h < kh || w < kw {
        return Err(Error::Shape(format!(
            "conv input {h}x{w} smaller than kernel {kh}x{kw}"
        )));
    }
    Ok((h - kh + 1, w - kw + 1, p.out_channels()))
}

/// Gather the im2col row for output position `(oh, ow)` into `row`.
///
/// Column order is the row-major flattening of `(kh, kw, in_c)`, which lines
/// up with the kernel tensor layout so the kernel data doubles as the GEMM
/// right-hand matrix `(kh*kw*in_c, out_c)`.
#[allow(clippy::too_many_arguments)]
#[inline]
fn gather_patch<F: Scalar>(
    input: &[F],
    w: usize,
    cin: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
    row: &mut [F],
) {
    let run = kw * cin;
    for dkh in 0..kh {
        let src = ((oh + dkh) * w + ow) * cin;
        row[dkh * run..(dkh + 1) * run].copy_from_slice(&input[src..src + run]);
    }
}

/// Valid (no padding) stride-1 cross-correlation plus per-channel bias,
/// computed as im2col + GEMM.
pub fn conv2d_forward<F: Scalar>(input: &Tensor<F>, p: &ConvParams<F>) -> Result<Tensor<F>> {
    let (out_h, out_w, cout) = conv_out_dims(input, p)?;
    let (kh, kw) = p.kernel_hw();
    let (w, cin) = (input.shape()[1], input.shape()[2]);
    let patch = kh * kw * cin;
    let positions = out_h * out_w;

    let mut col = vec![F::zero(); positions * patch];
    for oh in 0..out_h {
        for ow in 0..out_w {
            let pidx = oh * out_w + ow;
            gather_patch(
                input.data(),
                w,
                cin,
                kh,
                kw,
                oh,
                ow,
                &mut col[pidx * patch..(pidx + 1) * patch],
            );
        }
    }

    let mut out = vec![F::zero(); positions * cout];
    gemm(&mut out, &col, p.kernels.data(), positions, patch, cout);

    let bias = p.bias.data();
    for row in out.chunks_exact_mut(cout) {
        for (o, &b) in row.iter_mut().zip(bias) {
            *o = *o + b;
        }
    }
    Tensor::from_vec(&[out_h, out_w, cout], out)
}

/// Sliding-window reference convolution. The always-available oracle for the
/// im2col + GEMM path; used by tests, never by the model.
pub fn conv2d_forward_naive<F: Scalar>(input: &Tensor<F>, p: &ConvParams<F>) -> Result<Tensor<F>> {
    let (out_h, out_w, cout) = conv_out_dims(input, p)?;
    let (kh, kw) = p.kernel_hw();
    let (w, cin) = (input.shape()[1], input.shape()[2]);
    let x = input.data();
    let k = p.kernels.data();
    let mut out = Tensor::zeros(&[out_h, out_w, cout])?;
    for oh in 0..out_h {
        for ow in 0..out_w {
            for oc in 0..cout {
                let mut acc = p.bias.data()[oc];
                for dkh in 0..kh {
                    for dkw in 0..kw {
                        for ic in 0..cin {
                            let xv = x[((oh + dkh) * w + ow + dkw) * cin + ic];
                            let kv = k[((dkh * kw + dkw) * cin + ic) * cout + oc];
                            acc = acc + xv * kv;
                        }
                    }
                }
                out.data_mut()[(oh * out_w + ow) * cout + oc] = acc;
            }
        }
    }
    Ok(out)
}

/// Gradients produced by [`conv2d_backward`].
pub struct ConvGrads<F = f32> {
    pub grad_input: Option<Tensor<F>>,
    pub grad_kernels: Tensor<F>,
    pub grad_bias: Tensor<F>,
}

/// Exact gradients of [`conv2d_forward`] with respect to input, kernels and
/// bias. `input` is the tensor the forward pass consumed. Set `need_input`
/// to false for the first layer, where the input gradient is unused.
pub fn conv2d_backward<F: Scalar>(
    input: &Tensor<F>,
    p: &ConvParams<F>,
    grad_out: &Tensor<F>,
    need_input: bool,
) -> Result<ConvGrads<F>> {
    let (out_h, out_w, cout) = conv_out_dims(input, p)?;
    if grad_out.shape() != [out_h, out_w, cout] {
        return Err(Error::Shape(format!(
            "conv grad_out shape {:?} does not match forward output {:?}",
            grad_out.shape(),
            [out_h, out_w, cout]
        )));
    }
    let (kh, kw) = p.kernel_hw();
    let (w, cin) = (input.shape()[1], input.shape()[2]);
    let patch = kh * kw * cin;
    let positions = out_h * out_w;
    let run = kw * cin;
    let go = grad_out.data();

    // grad_bias[c] = sum over spatial positions of grad_out[.., c]
    let mut grad_bias = vec![F::zero(); cout];
    for row in go.chunks_exact(cout) {
        for (g, &v) in grad_bias.iter_mut().zip(row) {
            *g = *g + v;
        }
    }

    // kernels transposed to (out_c, patch) for the input-gradient GEMM
    let kt = if need_input {
        let kdata = p.kernels.data();
        let mut kt = vec![F::zero(); cout * patch];
        for i in 0..patch {
            for c in 0..cout {
                kt[c * patch + i] = kdata[i * cout + c];
            }
        }
        kt
    } else {
        Vec::new()
    };

    // Blocks of output positions turn both gradient reductions into GEMMs:
    //   grad_kernels += col_block^T (patch x b) . grad_out_block (b x out_c)
    //   grad_col      = grad_out_block (b x out_c) . kernels^T (out_c x patch)
    const BLOCK: usize = 64;
    let mut grad_kernels = vec![F::zero(); patch * cout];
    let mut gi = vec![F::zero(); if need_input { input.len() } else { 0 }];
    let mut colt = vec![F::zero(); patch * BLOCK];
    let mut grad_col = vec![F::zero(); BLOCK * patch];

    let mut start = 0usize;
    while start < positions {
        let bsz = BLOCK.min(positions - start);

        // gather the block's im2col rows, transposed to (patch, bsz)
        for b in 0..bsz {
            let pidx = start + b;
            let (oh, ow) = (pidx / out_w, pidx % out_w);
            for dkh in 0..kh {
                let src = ((oh + dkh) * w + ow) * cin;
                let seg = &input.data()[src..src + run];
                let base = dkh * run;
                for (j, &v) in seg.iter().enumerate() {
                    colt[(base + j) * bsz + b] = v;
                }
            }
        }
        let go_block = &go[start * cout..(start + bsz) * cout];
        gemm_acc(
            &mut grad_kernels,
            &colt[..patch * bsz],
            go_block,
            patch,
            bsz,
            cout,
        );

        if need_input {
            gemm(
                &mut grad_col[..bsz * patch],
                go_block,
                &kt,
                bsz,
                cout,
                patch,
            );
            for b in 0..bsz {
                let pidx = start + b;
                let (oh, ow) = (pidx / out_w, pidx % out_w);
                let row = &grad_col[b * patch..(b + 1) * patch];
                for dkh in 0..kh {
                    let dst = ((oh + dkh) * w + ow) * cin;
                    let seg = &row[dkh * run..(dkh + 1) * run];
                    for (g, &v) in gi[dst..dst + run].iter_mut().zip(seg) {
                        *g = *g + v;
                    }
                }
            }
        }
        start += bsz;
    }

    let grad_input = if need_input {
        Some(Tensor::from_vec(input.shape(), gi)?)
    } else {
        None
    };

    Ok(ConvGrads {
        grad_input,
        grad_kernels: Tensor::from_vec(p.kernels.shape(), grad_kernels)?,
        grad_bias: Tensor::from_vec(&[cout], grad_bias)?,
    })
}

/// Elementwise `max(0, x)`.
pub fn relu<F: Scalar>(x: &Tensor<F>) -> Tensor<F> {
    x.map(|v| if v > F::zero() { v } else { F::zero() })
}

/// Gate the upstream gradient by strict positivity of the cached activation.
/// `cached` may be the layer input or its output: `max(0, x) > 0` iff `x > 0`.
pub fn relu_backward<F: Scalar>(cached: &Tensor<F>, upstream: &Tensor<F>) -> Result<Tensor<F>> {
    if cached.shape() != upstream.shape() {
        return Err(Error::Shape(format!(
            "relu backward shapes differ: {:?} vs {:?}",
            cached.shape(),
            upstream.shape()
        )));
    }
    let data = cached
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&x, &g)| if x > F::zero() { g } else { F::zero() })
        .collect();
    Tensor::from_vec(cached.shape(), data)
}

/// Reduce `(H, W, C)` to `(C)` by averaging each channel's spatial map.
pub fn global_avg_pool<F: Scalar>(x: &Tensor<F>) -> Result<Tensor<F>> {
    if x.rank() != 3 {
        return Err(Error::Shape(format!(
            "global average pool expects rank 3, got {:?}",
            x.shape()
        )));
    }
    let (h, w, c) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let mut sums = vec![F::zero(); c];
    for row in x.data().chunks_exact(c) {
        for (s, &v) in sums.iter_mut().zip(row) {
            *s = *s + v;
        }
    }
    let inv = F::one() / F::from_f64((h * w) as f64);
    for s in &mut sums {
        *s = *s * inv;
    }
    Tensor::from_vec(&[c], sums)
}

/// Distribute the channel gradient uniformly over `h * w` spatial positions.
pub fn global_avg_pool_backward<F: Scalar>(
    h: usize,
    w: usize,
    upstream: &Tensor<F>,
) -> Result<Tensor<F>> {
    if upstream.rank() != 1 {
        return Err(Error::Shape(format!(
            "global average pool backward expects rank 1, got {:?}",
            upstream.shape()
        )));
    }
    let c = upstream.shape()[0];
    let inv = F::one() / F::from_f64((h * w) as f64);
    let mut out = Tensor::zeros(&[h, w, c])?;
    for row in out.data_mut().chunks_exact_mut(c) {
        for (o, &g) in row.iter_mut().zip(upstream.data()) {
            *o = g * inv;
        }
    }
    Ok(out)
}

/// Affine map `out = x W + b` for a rank-1 input.
pub fn dense_forward<F: Scalar>(x: &Tensor<F>, p: &DenseParams<F>) -> Result<Tensor<F>> {
    if x.rank() != 1 || x.shape()[0] != p.in_dim() {
        return Err(Error::Shape(format!(
            "dense input shape {:?} does not match weights {:?}",
            x.shape(),
            p.weights.shape()
        )));
    }
    let (n_in, n_out) = (p.in_dim(), p.out_dim());
    let wdata = p.weights.data();
    let mut out = p.bias.data().to_vec();
    for i in 0..n_in {
        let xv = x.data()[i];
        let wrow = &wdata[i * n_out..(i + 1) * n_out];
        for (o, &wv) in out.iter_mut().zip(wrow) {
            *o = xv.mul_add(wv, *o);
        }
    }
    Tensor::from_vec(&[n_out], out)
}

/// Gradients produced by [`dense_backward`].
pub struct DenseGrads<F = f32> {
    pub grad_input: Tensor<F>,
    pub grad_weights: Tensor<F>,
    pub grad_bias: Tensor<F>,
}

/// Standard affine gradients: `dW = x ⊗ g`, `db = g`, `dx = W g`.
pub fn dense_backward<F: Scalar>(
    x: &Tensor<F>,
    p: &DenseParams<F>,
    upstream: &Tensor<F>,
) -> Result<DenseGrads<F>> {
    if x.rank() != 1 || x.shape()[0] != p.in_dim() {
        return Err(Error::Shape(format!(
            "dense backward input shape {:?} does not match weights {:?}",
            x.shape(),
            p.weights.shape()
        )));
    }
    if upstream.shape() != [p.out_dim()] {
        return Err(Error::Shape(format!(
            "dense backward upstream shape {:?} does not match {} outputs",
            upstream.shape(),
            p.out_dim()
        )));
    }
    let (n_in, n_out) = (p.in_dim(), p.out_dim());
    let g = upstream.data();
    let wdata = p.weights.data();

    let mut grad_w = vec![F::zero(); n_in * n_out];
    let mut grad_x = vec![F::zero(); n_in];
    for i in 0..n_in {
        let xv = x.data()[i];
        let wrow = &wdata[i * n_out..(i + 1) * n_out];
        let grow = &mut grad_w[i * n_out..(i + 1) * n_out];
        let mut acc = F::zero();
        for j in 0..n_out {
            grow[j] = xv * g[j];
            acc = wrow[j].mul_add(g[j], acc);
        }
        grad_x[i] = acc;
    }

    Ok(DenseGrads {
        grad_input: Tensor::from_vec(&[n_in], grad_x)?,
        grad_weights: Tensor::from_vec(&[n_in, n_out], grad_w)?,
        grad_bias: upstream.clone(),
    })
}

/// Inverted dropout. In train mode each entry survives with probability
/// `1 - rate` and is scaled by `1 / (1 - rate)`; the returned mask holds those
/// scale factors (zero for dropped entries). Inference is the identity and
/// carries no mask.
pub fn dropout<F: Scalar>(
    x: &Tensor<F>,
    rate: f64,
    mode: Mode,
    rng: &mut Pcg32,
) -> Result<(Tensor<F>, Option<Tensor<F>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!(
            "dropout rate must be in [0, 1), got {rate}"
        )));
    }
    if mode == Mode::Infer {
        return Ok((x.clone(), None));
    }
    let scale = F::from_f64(1.0 / (1.0 - rate));
    let mask: Vec<F> = (0..x.len())
        .map(|_| {
            if rng.next_f64() >= rate {
                scale
            } else {
                F::zero()
            }
        })
        .collect();
    let out = x
        .data()
        .iter()
        .zip(&mask)
        .map(|(&v, &m)| v * m)
        .collect::<Vec<_>>();
    Ok((
        Tensor::from_vec(x.shape(), out)?,
        Some(Tensor::from_vec(x.shape(), mask)?),
    ))
}

/// Route the upstream gradient through the dropout mask.
pub fn dropout_backward<F: Scalar>(mask: &Tensor<F>, upstream: &Tensor<F>) -> Result<Tensor<F>> {
    if mask.shape() != upstream.shape() {
        return Err(Error::Shape(format!(
            "dropout backward shapes differ: {:?} vs {:?}",
            mask.shape(),
            upstream.shape()
        )));
    }
    let data = mask
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&m, &g)| m * g)
        .collect();
    Tensor::from_vec(mask.shape(), data)
}

/// Numerically stable softmax: exponentials of max-shifted logits, normalized.
pub fn softmax<F: Scalar>(z: &Tensor<F>) -> Tensor<F> {
    let max = z
        .data()
        .iter()
        .cloned()
        .fold(F::neg_infinity(), |a, b| if b > a { b } else { a });
    let exps: Vec<F> = z.data().iter().map(|&v| (v - max).exp()).collect();
    let total: F = exps.iter().cloned().sum();
    let data = exps.into_iter().map(|e| e / total).collect::<Vec<_>>();
    Tensor::from_vec(z.shape(), data).expect("softmax preserves shape")
}

/// Glorot-uniform initialization: i.i.d. uniform on `[-L, L]` with
/// `L = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<F: Scalar>(
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
    rng: &mut Pcg32,
) -> Result<Tensor<F>> {
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::Config("glorot fans must be >= 1".into()));
    }
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let len: usize = shape.iter().product();
    let data = (0..len)
        .map(|_| F::from_f64(rng.range_f64(-limit, limit)))
        .collect();
    Tensor::from_vec(shape, data)
}
