//! Dense tensors, the convolution/activation/quantization kernels used by the
//! toy codec, and a small reverse-mode autodiff graph over those kernels.
//!
//! All kernels are generic over [`Real`] so the same code runs in `f32` for
//! coding and training and in `f64` for finite-difference gradient checks.

mod gradcheck;
mod graph;
mod kernels;
mod rng;

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

use crate::error::{shape_err, Error, Result};

pub use gradcheck::grad_check;
pub use graph::{Gradients, Graph, Var};
pub use kernels::{
    add_uniform_noise, conv2d, leaky_relu, masked_conv2d, quantize_round, transposed_conv2d,
    LATENT_MAX,
};
pub(crate) use kernels::conv_at;
pub use rng::RngState;

/// Floating-point element type of a [`Tensor`].
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Default + Sum + Send + Sync + 'static
{
    fn from_f64_lossy(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("float conversion")
    }

    fn to_f64_lossless(self) -> f64 {
        ToPrimitive::to_f64(&self).expect("float conversion")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Dense row-major tensor, width fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(shape_err("tensor", format!("dimensions must be >= 1, got {shape:?}")));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(shape_err(
                "tensor",
                format!("shape {shape:?} holds {n} values but data has {}", data.len()),
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        assert!(
            !shape.is_empty() && shape.iter().all(|&d| d > 0),
            "invalid shape {shape:?}"
        );
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn scalar(value: T) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> T) -> Self {
        let mut t = Self::zeros(shape);
        for (i, v) in t.data.iter_mut().enumerate() {
            *v = f(i);
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// `(channels, height, width)` of a rank-3 tensor.
    pub fn chw(&self) -> Result<(usize, usize, usize)> {
        match self.shape[..] {
            [c, h, w] => Ok((c, h, w)),
            _ => Err(shape_err("tensor", format!("expected [C,H,W], got {:?}", self.shape))),
        }
    }

    pub fn at3(&self, c: usize, y: usize, x: usize) -> T {
        let (h, w) = (self.shape[1], self.shape[2]);
        self.data[(c * h + y) * w + x]
    }

    pub fn set3(&mut self, c: usize, y: usize, x: usize, v: T) {
        let (h, w) = (self.shape[1], self.shape[2]);
        self.data[(c * h + y) * w + x] = v;
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() || shape.contains(&0) {
            return Err(shape_err(
                "reshape",
                format!("{:?} -> {shape:?}", self.shape),
            ));
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .map(|&v| U::from_f64_lossy(v.to_f64_lossless()))
                .collect(),
        }
    }

    /// Channels `[start, start + len)` of a `[C,H,W]` tensor.
    pub fn slice_channels(&self, start: usize, len: usize) -> Result<Self> {
        let (c, h, w) = self.chw()?;
        if len == 0 || start + len > c {
            return Err(shape_err(
                "slice_channels",
                format!("channels {start}..{} of {c}", start + len),
            ));
        }
        let plane = h * w;
        Tensor::new(
            vec![len, h, w],
            self.data[start * plane..(start + len) * plane].to_vec(),
        )
    }

    /// Concatenates `[C_i,H,W]` tensors along channels.
    pub fn concat_channels(parts: &[&Tensor<T>]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| shape_err("concat_channels", "no inputs"))?;
        let (_, h, w) = first.chw()?;
        let mut data = Vec::new();
        let mut channels = 0;
        for p in parts {
            let (c, ph, pw) = p.chw()?;
            if (ph, pw) != (h, w) {
                return Err(shape_err(
                    "concat_channels",
                    format!("spatial {ph}x{pw} vs {h}x{w}"),
                ));
            }
            channels += c;
            data.extend_from_slice(&p.data);
        }
        Tensor::new(vec![channels, h, w], data)
    }

    /// Top-left `h x w` window of a `[C,H,W]` tensor.
    pub fn crop(&self, h: usize, w: usize) -> Result<Self> {
        let (c, sh, sw) = self.chw()?;
        if h == 0 || w == 0 || h > sh || w > sw {
            return Err(shape_err("crop", format!("{h}x{w} from {sh}x{sw}")));
        }
        let mut out = Vec::with_capacity(c * h * w);
        for ch in 0..c {
            for y in 0..h {
                let row = (ch * sh + y) * sw;
                out.extend_from_slice(&self.data[row..row + w]);
            }
        }
        Tensor::new(vec![c, h, w], out)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.to_f64_lossless() - b.to_f64_lossless()).abs())
            .fold(0.0, f64::max)
    }
}

impl Tensor<f32> {
    /// Bitwise equality, distinguishing `-0.0` from `0.0` and comparing NaN payloads.
    pub fn bit_eq(&self, other: &Self) -> bool {
        self.shape == other.shape
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Weights of one convolution layer. Kernel layout is `[out_ch, in_ch, kh, kw]`
/// for both forward and transposed convolutions.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvWeights<T = f32> {
    pub kernel: Tensor<T>,
    pub bias: Tensor<T>,
    pub stride: usize,
    pub pad: usize,
}

impl<T: Real> ConvWeights<T> {
    pub fn new(kernel: Tensor<T>, bias: Tensor<T>, stride: usize, pad: usize) -> Result<Self> {
        let w = Self {
            kernel,
            bias,
            stride,
            pad,
        };
        w.validate()?;
        Ok(w)
    }

    /// Zero kernel and bias.
    pub fn zeros(out_ch: usize, in_ch: usize, k: usize, stride: usize, pad: usize) -> Self {
        Self {
            kernel: Tensor::zeros(&[out_ch, in_ch, k, k]),
            bias: Tensor::zeros(&[out_ch]),
            stride,
            pad,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [o, _, kh, kw] = self.kernel.shape()[..] else {
            return Err(shape_err(
                "conv weights",
                format!("kernel must be [out,in,kh,kw], got {:?}", self.kernel.shape()),
            ));
        };
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(shape_err("conv weights", format!("kernel {kh}x{kw} must be odd")));
        }
        if !(1..=2).contains(&self.stride) {
            return Err(Error::InvalidArgument(format!(
                "stride {} not in {{1, 2}}",
                self.stride
            )));
        }
        if self.bias.shape() != [o] {
            return Err(shape_err(
                "conv weights",
                format!("bias {:?} for {o} output channels", self.bias.shape()),
            ));
        }
        Ok(())
    }

    pub fn out_channels(&self) -> usize {
        self.kernel.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.kernel.shape()[1]
    }

    pub fn kernel_size(&self) -> (usize, usize) {
        (self.kernel.shape()[2], self.kernel.shape()[3])
    }
}
