//! Dense row-major tensors and the GEMM kernel everything lowers onto.
//!
//! Layout conventions used across the crate: row-major storage, channels-last
//! images `(H, W, C)`. Parameters and activations are `f32` in production;
//! every operation is generic over [`Scalar`] so test harnesses can rerun the
//! identical code in `f64`.

use crate::error::{Error, Result};

/// Element type of a [`Tensor`]: `f32` or `f64`.
pub trait Scalar:
    num_traits::Float
    + std::fmt::Debug
    + std::fmt::Display
    + std::iter::Sum
    + Default
    + Send
    + Sync
    + 'static
{
    fn from_f64(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn as_f64(self) -> f64 {
        self
    }
}

/// Dense N-dimensional array with explicit shape; `data.len() == product(shape)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<F = f32> {
    shape: Vec<usize>,
    data: Vec<F>,
}

impl<F: Scalar> Tensor<F> {
    /// Tensor of the given shape with every entry set to `fill`.
    pub fn new(shape: &[usize], fill: F) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::Shape(format!("zero dimension in shape {shape:?}")));
        }
        let len = shape.iter().product();
        Ok(Tensor {
            shape: shape.to_vec(),
            data: vec![fill; len],
        })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::new(shape, F::zero())
    }

    /// Wrap an existing buffer; `data.len()` must equal the shape product.
    pub fn from_vec(shape: &[usize], data: Vec<F>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::Shape(format!("zero dimension in shape {shape:?}")));
        }
        let want: usize = shape.iter().product();
        if data.len() != want {
            return Err(Error::Shape(format!(
                "data length {} does not match shape {:?} (want {})",
                data.len(),
                shape,
                want
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<F> {
        self.data
    }

    /// Flat offset of a multi-index (row-major).
    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut off = 0;
        for (i, &d) in idx.iter().zip(&self.shape) {
            debug_assert!(*i < d);
            off = off * d + i;
        }
        off
    }

    pub fn at(&self, idx: &[usize]) -> F {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: F) {
        let off = self.offset(idx);
        self.data[off] = v;
    }

    /// Same data, new shape; the element count must not change.
    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let want: usize = shape.iter().product();
        if want != self.data.len() || shape.contains(&0) {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} (len {}) to {:?}",
                self.shape,
                self.data.len(),
                shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(F) -> F) -> Tensor<F> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Convert element type (f32 <-> f64); used by the 64-bit test harnesses.
    pub fn convert<G: Scalar>(&self) -> Tensor<G> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|x| G::from_f64(x.as_f64())).collect(),
        }
    }

    /// Matrix product of two rank-2 tensors via the blocked kernel.
    pub fn matmul(&self, other: &Tensor<F>) -> Result<Tensor<F>> {
        let (m, k) = self.mat_dims()?;
        let (k2, n) = other.mat_dims()?;
        if k != k2 {
            return Err(Error::Shape(format!(
                "matmul inner dims disagree: {:?} x {:?}",
                self.shape, other.shape
            )));
        }
        let mut out = Tensor::zeros(&[m, n])?;
        gemm(&mut out.data, &self.data, &other.data, m, k, n);
        Ok(out)
    }

    /// Triple-loop reference product. Kept unconditionally as the oracle for
    /// the blocked kernel; never routed through [`gemm`].
    pub fn matmul_naive(&self, other: &Tensor<F>) -> Result<Tensor<F>> {
        let (m, k) = self.mat_dims()?;
        let (k2, n) = other.mat_dims()?;
        if k != k2 {
            return Err(Error::Shape(format!(
                "matmul inner dims disagree: {:?} x {:?}",
                self.shape, other.shape
            )));
        }
        let mut out = Tensor::zeros(&[m, n])?;
        for i in 0..m {
            for j in 0..n {
                let mut acc = F::zero();
                for t in 0..k {
                    acc = acc + self.data[i * k + t] * other.data[t * n + j];
                }
                out.data[i * n + j] = acc;
            }
        }
        Ok(out)
    }

    /// Arithmetic mean over the named axes; remaining axes keep their order.
    /// Reducing every axis yields a rank-0 tensor holding one value.
    pub fn reduce_mean(&self, axes: &[usize]) -> Result<Tensor<F>> {
        let rank = self.rank();
        let mut reduce = vec![false; rank];
        for &a in axes {
            if a >= rank {
                return Err(Error::Shape(format!(
                    "axis {a} out of range for rank {rank}"
                )));
            }
            reduce[a] = true;
        }
        let out_shape: Vec<usize> = self
            .shape
            .iter()
            .zip(&reduce)
            .filter(|(_, r)| !**r)
            .map(|(d, _)| *d)
            .collect();
        let count: usize = self
            .shape
            .iter()
            .zip(&reduce)
            .filter(|(_, r)| **r)
            .map(|(d, _)| *d)
            .product();
        let out_len: usize = out_shape.iter().product();
        let mut sums = vec![F::zero(); out_len];

        let mut idx = vec![0usize; rank];
        for &v in &self.data {
            let mut out_off = 0;
            for d in 0..rank {
                if !reduce[d] {
                    out_off = out_off * self.shape[d] + idx[d];
                }
            }
            sums[out_off] = sums[out_off] + v;
            // increment the row-major multi-index
            for d in (0..rank).rev() {
                idx[d] += 1;
                if idx[d] < self.shape[d] {
                    break;
                }
                idx[d] = 0;
            }
        }

        let inv = F::one() / F::from_f64(count as f64);
        for s in &mut sums {
            *s = *s * inv;
        }
        Ok(Tensor {
            shape: out_shape,
            data: sums,
        })
    }

    fn mat_dims(&self) -> Result<(usize, usize)> {
        if self.rank() != 2 {
            return Err(Error::Shape(format!(
                "expected a rank-2 tensor, got shape {:?}",
                self.shape
            )));
        }
        Ok((self.shape[0], self.shape[1]))
    }
}

/// `c = a * b` for row-major `a[m x k]`, `b[k x n]`, overwriting `c[m x n]`.
pub(crate) fn gemm<F: Scalar>(c: &mut [F], a: &[F], b: &[F], m: usize, k: usize, n: usize) {
    for v in c.iter_mut() {
        *v = F::zero();
    }
    gemm_acc(c, a, b, m, k, n);
}

/// `c += a * b` for row-major operands.
///
/// Rows of `b` and `c` are streamed contiguously; the k-loop is unrolled by 4
/// so each `c` row is touched once per four rank-1 updates. Fixed evaluation
/// order keeps results identical run to run.
pub(crate) fn gemm_acc<F: Scalar>(c: &mut [F], a: &[F], b: &[F], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let crow = &mut c[i * n..(i + 1) * n];
        let mut p = 0;
        while p + 4 <= k {
            let (a0, a1, a2, a3) = (arow[p], arow[p + 1], arow[p + 2], arow[p + 3]);
            let b0 = &b[p * n..p * n + n];
            let b1 = &b[(p + 1) * n..(p + 1) * n + n];
            let b2 = &b[(p + 2) * n..(p + 2) * n + n];
            let b3 = &b[(p + 3) * n..(p + 3) * n + n];
            for j in 0..n {
                let mut t = crow[j];
                t = a0.mul_add(b0[j], t);
                t = a1.mul_add(b1[j], t);
                t = a2.mul_add(b2[j], t);
                t = a3.mul_add(b3[j], t);
                crow[j] = t;
            }
            p += 4;
        }
        while p < k {
            let ap = arow[p];
            let brow = &b[p * n..p * n + n];
            for j in 0..n {
                crow[j] = ap.mul_add(brow[j], crow[j]);
            }
            p += 1;
        }
    }
}
