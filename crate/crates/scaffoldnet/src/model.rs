//! The assembled six-layer network: three 3x3 convolutions (1->32, 32->32,
//! 32->64) with ReLU, global average pooling, dropout 0.5, a 32-unit dense
//! layer with ReLU and dropout, and a 3-unit dense output with softmax.
//!
//! Layer shapes are fixed; the spatial extent of the input is not (global
//! average pooling absorbs it), which lets gradient checks run on miniature
//! inputs and the smoke profile train at 64x64.

use crate::error::{Error, Result};
use crate::layers::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, dropout, dropout_backward,
    global_avg_pool, global_avg_pool_backward, glorot_uniform, relu, relu_backward, softmax,
    ConvParams, DenseParams, Mode,
};
use crate::rng::Pcg32;
use crate::tensor::{Scalar, Tensor};

/// Number of output classes.
pub const CLASS_COUNT: usize = 3;

/// Dropout fraction after pooling and after the hidden dense layer.
pub const DROPOUT_RATE: f64 = 0.5;

/// Minimum spatial extent an input needs to survive three valid 3x3 convolutions.
pub const MIN_INPUT_DIM: usize = 7;

/// All trainable tensors of the fixed architecture. Also reused as the
/// container for gradients and Adam moments, which share these shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<F = f32> {
    pub conv1: ConvParams<F>,
    pub conv2: ConvParams<F>,
    pub conv3: ConvParams<F>,
    pub dense1: DenseParams<F>,
    pub dense2: DenseParams<F>,
}

/// `(name, shape)` of every parameter tensor, in checkpoint order.
pub const PARAM_SPECS: [(&str, &[usize]); 10] = [
    ("conv1.kernels", &[3, 3, 1, 32]),
    ("conv1.bias", &[32]),
    ("conv2.kernels", &[3, 3, 32, 32]),
    ("conv2.bias", &[32]),
    ("conv3.kernels", &[3, 3, 32, 64]),
    ("conv3.bias", &[64]),
    ("dense1.weights", &[64, 32]),
    ("dense1.bias", &[32]),
    ("dense2.weights", &[32, 3]),
    ("dense2.bias", &[3]),
];

impl<F: Scalar> ModelParams<F> {
    /// Glorot-uniform kernels/weights, zero biases.
    pub fn init(rng: &mut Pcg32) -> Self {
        let conv = |cin: usize, cout: usize, rng: &mut Pcg32| {
            ConvParams::new(
                glorot_uniform(&[3, 3, cin, cout], 9 * cin, 9 * cout, rng).expect("fixed shape"),
                Tensor::zeros(&[cout]).expect("fixed shape"),
            )
            .expect("fixed shape")
        };
        let dense = |n_in: usize, n_out: usize, rng: &mut Pcg32| {
            DenseParams::new(
                glorot_uniform(&[n_in, n_out], n_in, n_out, rng).expect("fixed shape"),
                Tensor::zeros(&[n_out]).expect("fixed shape"),
            )
            .expect("fixed shape")
        };
        ModelParams {
            conv1: conv(1, 32, rng),
            conv2: conv(32, 32, rng),
            conv3: conv(32, 64, rng),
            dense1: dense(64, 32, rng),
            dense2: dense(32, CLASS_COUNT, rng),
        }
    }

    /// All tensors zeroed; used for gradient accumulators and Adam moments.
    pub fn zeros() -> Self {
        let conv = |cin: usize, cout: usize| {
            ConvParams::new(
                Tensor::zeros(&[3, 3, cin, cout]).expect("fixed shape"),
                Tensor::zeros(&[cout]).expect("fixed shape"),
            )
            .expect("fixed shape")
        };
        let dense = |n_in: usize, n_out: usize| {
            DenseParams::new(
                Tensor::zeros(&[n_in, n_out]).expect("fixed shape"),
                Tensor::zeros(&[n_out]).expect("fixed shape"),
            )
            .expect("fixed shape")
        };
        ModelParams {
            conv1: conv(1, 32),
            conv2: conv(32, 32),
            conv3: conv(32, 64),
            dense1: dense(64, 32),
            dense2: dense(32, CLASS_COUNT),
        }
    }

    /// Tensors in checkpoint order, parallel to [`PARAM_SPECS`].
    pub fn tensors(&self) -> [&Tensor<F>; 10] {
        [
            &self.conv1.kernels,
            &self.conv1.bias,
            &self.conv2.kernels,
            &self.conv2.bias,
            &self.conv3.kernels,
            &self.conv3.bias,
            &self.dense1.weights,
            &self.dense1.bias,
            &self.dense2.weights,
            &self.dense2.bias,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor<F>; 10] {
        [
            &mut self.conv1.kernels,
            &mut self.conv1.bias,
            &mut self.conv2.kernels,
            &mut self.conv2.bias,
            &mut self.conv3.kernels,
            &mut self.conv3.bias,
            &mut self.dense1.weights,
            &mut self.dense1.bias,
            &mut self.dense2.weights,
            &mut self.dense2.bias,
        ]
    }

    /// Elementwise `self += other * scale` across all tensors.
    pub fn add_scaled(&mut self, other: &ModelParams<F>, scale: F) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, &s) in dst.data_mut().iter_mut().zip(src.data()) {
                *d = s.mul_add(scale, *d);
            }
        }
    }

    pub fn convert<G: Scalar>(&self) -> ModelParams<G> {
        ModelParams {
            conv1: ConvParams {
                kernels: self.conv1.kernels.convert(),
                bias: self.conv1.bias.convert(),
            },
            conv2: ConvParams {
                kernels: self.conv2.kernels.convert(),
                bias: self.conv2.bias.convert(),
            },
            conv3: ConvParams {
                kernels: self.conv3.kernels.convert(),
                bias: self.conv3.bias.convert(),
            },
            dense1: DenseParams {
                weights: self.dense1.weights.convert(),
                bias: self.dense1.bias.convert(),
            },
            dense2: DenseParams {
                weights: self.dense2.weights.convert(),
                bias: self.dense2.bias.convert(),
            },
        }
    }
}

/// Activations and dropout masks recorded by a train-mode forward pass;
/// everything backward needs. Inference-mode passes carry no cache.
pub struct ForwardCache<F = f32> {
    /// Network input (H, W, 1).
    pub input: Tensor<F>,
    /// Post-ReLU outputs of the three conv layers.
    pub act1: Tensor<F>,
    pub act2: Tensor<F>,
    pub act3: Tensor<F>,
    /// Pooled channel means (64).
    pub pooled: Tensor<F>,
    pub drop1_mask: Tensor<F>,
    /// Pooled vector after dropout (input to dense1).
    pub pooled_dropped: Tensor<F>,
    /// Post-ReLU hidden dense activation (32).
    pub hidden: Tensor<F>,
    pub drop2_mask: Tensor<F>,
    /// Hidden activation after dropout (input to dense2).
    pub hidden_dropped: Tensor<F>,
    /// Softmax output (3).
    pub probs: Tensor<F>,
}

/// Run the full pipeline on one standardized `(H, W, 1)` image. Returns the
/// class probabilities and, in train mode, the cache for [`model_backward`].
pub fn model_forward<F: Scalar>(
    img: &Tensor<F>,
    params: &ModelParams<F>,
    mode: Mode,
    rng: &mut Pcg32,
) -> Result<(Tensor<F>, Option<ForwardCache<F>>)> {
    if img.rank() != 3 || img.shape()[2] != 1 {
        return Err(Error::Shape(format!(
            "model input must be (H, W, 1), got {:?}",
            img.shape()
        )));
    }
    if img.shape()[0] < MIN_INPUT_DIM || img.shape()[1] < MIN_INPUT_DIM {
        return Err(Error::Shape(format!(
            "model input {}x{} too small for three 3x3 valid convolutions",
            img.shape()[0],
            img.shape()[1]
        )));
    }

    let act1 = relu(&conv2d_forward(img, &params.conv1)?);
    let act2 = relu(&conv2d_forward(&act1, &params.conv2)?);
    let act3 = relu(&conv2d_forward(&act2, &params.conv3)?);
    let pooled = global_avg_pool(&act3)?;
    let (pooled_dropped, drop1_mask) = dropout(&pooled, DROPOUT_RATE, mode, rng)?;
    let hidden = relu(&dense_forward(&pooled_dropped, &params.dense1)?);
    let (hidden_dropped, drop2_mask) = dropout(&hidden, DROPOUT_RATE, mode, rng)?;
    let logits = dense_forward(&hidden_dropped, &params.dense2)?;
    let probs = softmax(&logits);

    let cache = match mode {
        Mode::Infer => None,
        Mode::Train => Some(ForwardCache {
            input: img.clone(),
            act1,
            act2,
            act3,
            pooled,
            drop1_mask: drop1_mask.expect("train mode emits a mask"),
            pooled_dropped,
            hidden,
            drop2_mask: drop2_mask.expect("train mode emits a mask"),
            hidden_dropped,
            probs: probs.clone(),
        }),
    };
    Ok((probs, cache))
}

/// Backpropagate from a gradient on the logits (for cross-entropy after
/// softmax that is `probs - onehot`) to gradients on every parameter.
pub fn model_backward<F: Scalar>(
    grad_logits: &Tensor<F>,
    cache: &ForwardCache<F>,
    params: &ModelParams<F>,
) -> Result<ModelParams<F>> {
    if grad_logits.shape() != [CLASS_COUNT] {
        return Err(Error::Shape(format!(
            "grad_logits must have shape [{CLASS_COUNT}], got {:?}",
            grad_logits.shape()
        )));
    }

    let d2 = dense_backward(&cache.hidden_dropped, &params.dense2, grad_logits)?;
    let g_hidden = dropout_backward(&cache.drop2_mask, &d2.grad_input)?;
    let g_hidden_pre = relu_backward(&cache.hidden, &g_hidden)?;
    let d1 = dense_backward(&cache.pooled_dropped, &params.dense1, &g_hidden_pre)?;
    let g_pooled = dropout_backward(&cache.drop1_mask, &d1.grad_input)?;

    let (h3, w3) = (cache.act3.shape()[0], cache.act3.shape()[1]);
    let g_act3 = global_avg_pool_backward(h3, w3, &g_pooled)?;
    let g_pre3 = relu_backward(&cache.act3, &g_act3)?;
    let c3 = conv2d_backward(&cache.act2, &params.conv3, &g_pre3, true)?;

    let g_pre2 = relu_backward(&cache.act2, &c3.grad_input.expect("requested"))?;
    let c2 = conv2d_backward(&cache.act1, &params.conv2, &g_pre2, true)?;

    let g_pre1 = relu_backward(&cache.act1, &c2.grad_input.expect("requested"))?;
    let c1 = conv2d_backward(&cache.input, &params.conv1, &g_pre1, false)?;

    Ok(ModelParams {
        conv1: ConvParams {
            kernels: c1.grad_kernels,
            bias: c1.grad_bias,
        },
        conv2: ConvParams {
            kernels: c2.grad_kernels,
            bias: c2.grad_bias,
        },
        conv3: ConvParams {
            kernels: c3.grad_kernels,
            bias: c3.grad_bias,
        },
        dense1: DenseParams {
            weights: d1.grad_weights,
            bias: d1.grad_bias,
        },
        dense2: DenseParams {
            weights: d2.grad_weights,
            bias: d2.grad_bias,
        },
    })
}
