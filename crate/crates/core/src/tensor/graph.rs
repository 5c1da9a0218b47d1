//! Tape-based reverse-mode differentiation over the kernels in this module.
//!
//! Every op records its output value eagerly, so a [`Graph`] doubles as the
//! forward evaluator for inference. Nodes are appended in evaluation order and
//! [`Graph::backward`] walks them in reverse.

use super::kernels::{
    check_mask, conv_backward, conv_forward, leaky_relu, transposed_backward, transposed_conv2d,
};
use super::{ConvWeights, Real, Tensor};
use crate::error::{shape_err, Error, Result};
use crate::gmm;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op<T> {
    Leaf,
    Conv {
        x: Var,
        k: Var,
        b: Var,
        stride: usize,
        pad: usize,
        mask: Option<Tensor<T>>,
    },
    ConvT {
        x: Var,
        k: Var,
        b: Var,
        pad: usize,
    },
    LeakyRelu {
        x: Var,
        slope: T,
    },
    Clamp {
        x: Var,
        lo: T,
        hi: T,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    AddConst(Var),
    MulConst(Var, T),
    DivConst(Var, T),
    PowConst(Var, T),
    AvgPool2(Var),
    Sum(Var),
    Mean(Var),
    Concat(Vec<Var>),
    Slice {
        x: Var,
        start: usize,
    },
    Crop {
        x: Var,
    },
    Round(Var),
    GmmRate {
        values: Var,
        head: Var,
        k: usize,
    },
    GaussRate {
        values: Var,
        mean: Var,
        scale_raw: Var,
    },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
}

pub struct Graph<T: Real = f32> {
    nodes: Vec<Node<T>>,
    non_differentiable: Option<&'static str>,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            non_differentiable: None,
        }
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Input or parameter tensor.
    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn scalar_value(&self, v: Var) -> T {
        self.value(v).data()[0]
    }

    /// Name of the first non-differentiable op recorded, if any.
    pub fn non_differentiable(&self) -> Option<&'static str> {
        self.non_differentiable
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn same_shape(&self, what: &'static str, a: Var, b: Var) -> Result<()> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(shape_err(
                what,
                format!("{:?} vs {:?}", self.value(a).shape(), self.value(b).shape()),
            ));
        }
        Ok(())
    }

    pub fn conv2d(&mut self, x: Var, k: Var, b: Var, stride: usize, pad: usize) -> Result<Var> {
        self.conv_impl(x, k, b, stride, pad, None)
    }

    pub fn masked_conv2d(
        &mut self,
        x: Var,
        k: Var,
        b: Var,
        pad: usize,
        mask: &Tensor<T>,
    ) -> Result<Var> {
        check_mask(mask, self.value(k))?;
        self.conv_impl(x, k, b, 1, pad, Some(mask.clone()))
    }

    fn conv_impl(
        &mut self,
        x: Var,
        k: Var,
        b: Var,
        stride: usize,
        pad: usize,
        mask: Option<Tensor<T>>,
    ) -> Result<Var> {
        if !(1..=2).contains(&stride) {
            return Err(Error::InvalidArgument(format!("stride {stride} not in {{1, 2}}")));
        }
        let out = conv_forward(
            self.value(x),
            self.value(k),
            self.value(b),
            mask.as_ref(),
            stride,
            pad,
        )?;
        Ok(self.push(
            out,
            Op::Conv {
                x,
                k,
                b,
                stride,
                pad,
                mask,
            },
        ))
    }

    pub fn transposed_conv2d(&mut self, x: Var, k: Var, b: Var, pad: usize) -> Result<Var> {
        let w = ConvWeights {
            kernel: self.value(k).clone(),
            bias: self.value(b).clone(),
            stride: 2,
            pad,
        };
        let out = transposed_conv2d(self.value(x), &w)?;
        Ok(self.push(out, Op::ConvT { x, k, b, pad }))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Result<Var> {
        let out = leaky_relu(self.value(x), slope)?;
        Ok(self.push(
            out,
            Op::LeakyRelu {
                x,
                slope: T::from_f64_lossy(slope),
            },
        ))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.leaky_relu(x, 0.0).expect("slope 0 is valid")
    }

    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        let (lo, hi) = (T::from_f64_lossy(lo), T::from_f64_lossy(hi));
        let out = self.value(x).map(|v| v.max(lo).min(hi));
        self.push(out, Op::Clamp { x, lo, hi })
    }

    fn binary(
        &mut self,
        what: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(T, T) -> T,
        op: Op<T>,
    ) -> Result<Var> {
        self.same_shape(what, a, b)?;
        let (va, vb) = (self.value(a), self.value(b));
        let data = va.data().iter().zip(vb.data()).map(|(&p, &q)| f(p, q)).collect();
        let out = Tensor::new(va.shape().to_vec(), data)?;
        Ok(self.push(out, op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |p, q| p + q, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |p, q| p - q, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |p, q| p * q, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("div", a, b, |p, q| p / q, Op::Div(a, b))
    }

    pub fn add_const(&mut self, x: Var, c: f64) -> Var {
        let c = T::from_f64_lossy(c);
        let out = self.value(x).map(|v| v + c);
        self.push(out, Op::AddConst(x))
    }

    pub fn mul_const(&mut self, x: Var, c: f64) -> Var {
        let c = T::from_f64_lossy(c);
        let out = self.value(x).map(|v| v * c);
        self.push(out, Op::MulConst(x, c))
    }

    pub fn div_const(&mut self, x: Var, c: f64) -> Var {
        let c = T::from_f64_lossy(c);
        let out = self.value(x).map(|v| v / c);
        self.push(out, Op::DivConst(x, c))
    }

    /// `x^p` elementwise. The derivative is taken as zero where `x <= 0`.
    pub fn pow_const(&mut self, x: Var, p: f64) -> Var {
        let p = T::from_f64_lossy(p);
        let out = self.value(x).map(|v| v.powf(p));
        self.push(out, Op::PowConst(x, p))
    }

    /// 2x2 average pooling of a `[C,H,W]` tensor; an odd trailing row/column is dropped.
    pub fn avg_pool2(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        let (c, h, w) = v.chw()?;
        let (oh, ow) = (h / 2, w / 2);
        if oh == 0 || ow == 0 {
            return Err(shape_err("avg_pool2", format!("{h}x{w} too small to pool")));
        }
        let quarter = T::from_f64_lossy(0.25);
        let mut out = Tensor::zeros(&[c, oh, ow]);
        for ch in 0..c {
            for y in 0..oh {
                for xo in 0..ow {
                    let s = v.at3(ch, 2 * y, 2 * xo)
                        + v.at3(ch, 2 * y, 2 * xo + 1)
                        + v.at3(ch, 2 * y + 1, 2 * xo)
                        + v.at3(ch, 2 * y + 1, 2 * xo + 1);
                    out.set3(ch, y, xo, s * quarter);
                }
            }
        }
        Ok(self.push(out, Op::AvgPool2(x)))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().fold(T::zero(), |a, &b| a + b);
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let s = v.data().iter().fold(T::zero(), |a, &b| a + b);
        let n = T::from_f64_lossy(v.len() as f64);
        self.push(Tensor::scalar(s / n), Op::Mean(x))
    }

    pub fn concat_channels(&mut self, parts: &[Var]) -> Result<Var> {
        let refs: Vec<&Tensor<T>> = parts.iter().map(|&p| self.value(p)).collect();
        let out = Tensor::concat_channels(&refs)?;
        Ok(self.push(out, Op::Concat(parts.to_vec())))
    }

    pub fn slice_channels(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let out = self.value(x).slice_channels(start, len)?;
        Ok(self.push(out, Op::Slice { x, start }))
    }

    pub fn crop(&mut self, x: Var, h: usize, w: usize) -> Result<Var> {
        let out = self.value(x).crop(h, w)?;
        Ok(self.push(out, Op::Crop { x }))
    }

    /// Hard rounding; marks the graph non-differentiable.
    pub fn round(&mut self, x: Var) -> Result<Var> {
        let out = super::quantize_round(self.value(x))?;
        self.non_differentiable.get_or_insert("round");
        Ok(self.push(out, Op::Round(x)))
    }

    /// Total bits `Σ -log2 P(v)` of `values [G,h,w]` under the Gaussian mixture whose
    /// raw parameters are in `head [3·K·G,h,w]` (per group channel: K logits, K means,
    /// K raw scales).
    pub fn gmm_rate_bits(&mut self, values: Var, head: Var, k: usize) -> Result<Var> {
        let (vs, hs) = (self.value(values), self.value(head));
        let (g, h, w) = vs.chw()?;
        if hs.shape() != [3 * k * g, h, w] {
            return Err(shape_err(
                "gmm_rate_bits",
                format!("head {:?} for values {:?} with K={k}", hs.shape(), vs.shape()),
            ));
        }
        let bits = gmm::head_rate_bits(vs, hs, k, None, None);
        Ok(self.push(
            Tensor::scalar(T::from_f64_lossy(bits)),
            Op::GmmRate { values, head, k },
        ))
    }

    /// Total bits of `values [M,h,w]` under per-channel Gaussians (`mean [M]`, `scale_raw [M]`).
    pub fn gauss_rate_bits(&mut self, values: Var, mean: Var, scale_raw: Var) -> Result<Var> {
        let (vs, ms, ss) = (self.value(values), self.value(mean), self.value(scale_raw));
        let (m, _, _) = vs.chw()?;
        if ms.shape() != [m] || ss.shape() != [m] {
            return Err(shape_err(
                "gauss_rate_bits",
                format!("params {:?}/{:?} for {m} channels", ms.shape(), ss.shape()),
            ));
        }
        let bits = gmm::channel_gauss_rate_bits(vs, ms, ss, None);
        Ok(self.push(
            Tensor::scalar(T::from_f64_lossy(bits)),
            Op::GaussRate {
                values,
                mean,
                scale_raw,
            },
        ))
    }

    /// Gradients of `root` (seeded with ones) with respect to every node.
    pub fn backward(&self, root: Var) -> Gradients<T> {
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Tensor::full(self.value(root).shape(), T::one()));

        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            let mut acc = |v: Var, t: Tensor<T>| match &mut grads[v.0] {
                Some(existing) => {
                    for (e, n) in existing.data_mut().iter_mut().zip(t.data()) {
                        *e = *e + *n;
                    }
                }
                slot @ None => *slot = Some(t),
            };
            match &node.op {
                Op::Leaf => {}
                Op::Conv {
                    x,
                    k,
                    b,
                    stride,
                    pad,
                    mask,
                } => {
                    let (gi, gk, gb) = conv_backward(
                        self.value(*x),
                        self.value(*k),
                        mask.as_ref(),
                        *stride,
                        *pad,
                        &g,
                    );
                    acc(*x, gi);
                    acc(*k, gk);
                    acc(*b, gb);
                }
                Op::ConvT { x, k, b, pad } => {
                    let w = ConvWeights {
                        kernel: self.value(*k).clone(),
                        bias: self.value(*b).clone(),
                        stride: 2,
                        pad: *pad,
                    };
                    let (gi, gk, gb) = transposed_backward(self.value(*x), &w, &g);
                    acc(*x, gi);
                    acc(*k, gk);
                    acc(*b, gb);
                }
                Op::LeakyRelu { x, slope } => {
                    let xv = self.value(*x);
                    let data = xv
                        .data()
                        .iter()
                        .zip(g.data())
                        .map(|(&v, &gv)| if v >= T::zero() { gv } else { *slope * gv })
                        .collect();
                    acc(*x, Tensor::new(xv.shape().to_vec(), data).unwrap());
                }
                Op::Clamp { x, lo, hi } => {
                    let xv = self.value(*x);
                    let data = xv
                        .data()
                        .iter()
                        .zip(g.data())
                        .map(|(&v, &gv)| if v > *lo && v < *hi { gv } else { T::zero() })
                        .collect();
                    acc(*x, Tensor::new(xv.shape().to_vec(), data).unwrap());
                }
                Op::Add(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, g);
                }
                Op::Sub(a, b) => {
                    acc(*b, g.map(|v| -v));
                    acc(*a, g);
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    acc(*a, zip_map(&g, vb, |gv, q| gv * q));
                    acc(*b, zip_map(&g, va, |gv, p| gv * p));
                }
                Op::Div(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    acc(*a, zip_map(&g, vb, |gv, q| gv / q));
                    let gb = Tensor::from_fn(vb.shape(), |i| {
                        let q = vb.data()[i];
                        -g.data()[i] * va.data()[i] / (q * q)
                    });
                    acc(*b, gb);
                }
                Op::AddConst(x) => acc(*x, g),
                Op::MulConst(x, c) => acc(*x, g.map(|v| v * *c)),
                Op::DivConst(x, c) => acc(*x, g.map(|v| v / *c)),
                Op::PowConst(x, p) => {
                    let xv = self.value(*x);
                    let one = T::one();
                    acc(
                        *x,
                        zip_map(&g, xv, |gv, v| {
                            if v > T::zero() {
                                gv * *p * v.powf(*p - one)
                            } else {
                                T::zero()
                            }
                        }),
                    );
                }
                Op::AvgPool2(x) => {
                    let xv = self.value(*x);
                    let (c, oh, ow) = g.chw().unwrap();
                    let quarter = T::from_f64_lossy(0.25);
                    let mut gi = Tensor::zeros(xv.shape());
                    for ch in 0..c {
                        for y in 0..oh {
                            for xo in 0..ow {
                                let gv = g.at3(ch, y, xo) * quarter;
                                for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                                    gi.set3(ch, 2 * y + dy, 2 * xo + dx, gv);
                                }
                            }
                        }
                    }
                    acc(*x, gi);
                }
                Op::Sum(x) => acc(*x, Tensor::full(self.value(*x).shape(), g.data()[0])),
                Op::Mean(x) => {
                    let xv = self.value(*x);
                    let n = T::from_f64_lossy(xv.len() as f64);
                    acc(*x, Tensor::full(xv.shape(), g.data()[0] / n));
                }
                Op::Concat(parts) => {
                    let (_, h, w) = g.chw().unwrap();
                    let mut start = 0;
                    for p in parts {
                        let c = self.value(*p).shape()[0];
                        let slice = g.data()[start * h * w..(start + c) * h * w].to_vec();
                        acc(*p, Tensor::new(vec![c, h, w], slice).unwrap());
                        start += c;
                    }
                }
                Op::Slice { x, start } => {
                    let xv = self.value(*x);
                    let plane = xv.shape()[1] * xv.shape()[2];
                    let mut gi = Tensor::zeros(xv.shape());
                    gi.data_mut()[start * plane..start * plane + g.len()]
                        .copy_from_slice(g.data());
                    acc(*x, gi);
                }
                Op::Crop { x } => {
                    let xv = self.value(*x);
                    let (c, h, w) = g.chw().unwrap();
                    let (sh, sw) = (xv.shape()[1], xv.shape()[2]);
                    let mut gi = Tensor::zeros(xv.shape());
                    for ch in 0..c {
                        for y in 0..h {
                            let dst = (ch * sh + y) * sw;
                            let src = (ch * h + y) * w;
                            gi.data_mut()[dst..dst + w].copy_from_slice(&g.data()[src..src + w]);
                        }
                    }
                    acc(*x, gi);
                }
                // Zero gradient; callers are warned through `non_differentiable`.
                Op::Round(x) => acc(*x, Tensor::zeros(self.value(*x).shape())),
                Op::GmmRate { values, head, k } => {
                    let (vs, hs) = (self.value(*values), self.value(*head));
                    let mut gv = Tensor::zeros(vs.shape());
                    let mut gh = Tensor::zeros(hs.shape());
                    gmm::head_rate_bits(vs, hs, *k, Some(&mut gv), Some(&mut gh));
                    let s = g.data()[0];
                    acc(*values, gv.map(|v| v * s));
                    acc(*head, gh.map(|v| v * s));
                }
                Op::GaussRate {
                    values,
                    mean,
                    scale_raw,
                } => {
                    let vs = self.value(*values);
                    let (ms, ss) = (self.value(*mean), self.value(*scale_raw));
                    let mut grads3 = (
                        Tensor::zeros(vs.shape()),
                        Tensor::zeros(ms.shape()),
                        Tensor::zeros(ss.shape()),
                    );
                    gmm::channel_gauss_rate_bits(vs, ms, ss, Some(&mut grads3));
                    let s = g.data()[0];
                    acc(*values, grads3.0.map(|v| v * s));
                    acc(*mean, grads3.1.map(|v| v * s));
                    acc(*scale_raw, grads3.2.map(|v| v * s));
                }
            }
        }
        Gradients { grads }
    }
}

fn zip_map<T: Real>(a: &Tensor<T>, b: &Tensor<T>, f: impl Fn(T, T) -> T) -> Tensor<T> {
    Tensor::from_fn(a.shape(), |i| f(a.data()[i], b.data()[i]))
}

/// Result of [`Graph::backward`].
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    /// Gradient for `v`, or `None` when `v` does not influence the root.
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_rule_on_small_expression() {
        // f(a, b) = sum((a * b + 1) / b) = sum(a + 1/b)
        let mut g = Graph::<f64>::new();
        let a = g.leaf(Tensor::new(vec![2], vec![1.0, 2.0]).unwrap());
        let b = g.leaf(Tensor::new(vec![2], vec![4.0, 0.5]).unwrap());
        let ab = g.mul(a, b).unwrap();
        let n = g.add_const(ab, 1.0);
        let q = g.div(n, b).unwrap();
        let s = g.sum(q);
        assert!((g.scalar_value(s) - (1.0 + 0.25 + 2.0 + 2.0)).abs() < 1e-12);
        let grads = g.backward(s);
        assert_eq!(grads.get(a).unwrap().data(), &[1.0, 1.0]);
        let gb = grads.get(b).unwrap().data();
        assert!((gb[0] + 1.0 / 16.0).abs() < 1e-12);
        assert!((gb[1] + 4.0).abs() < 1e-12);
    }

    #[test]
    fn unused_leaf_has_no_gradient() {
        let mut g = Graph::<f64>::new();
        let a = g.leaf(Tensor::scalar(1.0));
        let b = g.leaf(Tensor::scalar(2.0));
        let s = g.mul_const(a, 3.0);
        let grads = g.backward(s);
        assert_eq!(grads.get(a).unwrap().data(), &[3.0]);
        assert!(grads.get(b).is_none());
    }

    #[test]
    fn round_marks_graph() {
        let mut g = Graph::<f64>::new();
        let a = g.leaf(Tensor::scalar(1.2));
        assert!(g.non_differentiable().is_none());
        g.round(a).unwrap();
        assert_eq!(g.non_differentiable(), Some("round"));
    }
}
