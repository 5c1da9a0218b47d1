use super::{ConvWeights, Real, RngState, Tensor};
use crate::error::{shape_err, Error, Result};

/// Saturation bound for quantized latents; the coder alphabet is `[-LATENT_MAX, LATENT_MAX]`.
pub const LATENT_MAX: i32 = 127;

fn conv_out_size(n: usize, k: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = n + 2 * pad;
    (padded >= k).then(|| (padded - k) / stride + 1)
}

pub(crate) fn check_mask<T: Real>(mask: &Tensor<T>, kernel: &Tensor<T>) -> Result<()> {
    if mask.shape() != kernel.shape() {
        return Err(shape_err(
            "mask",
            format!("mask {:?} vs kernel {:?}", mask.shape(), kernel.shape()),
        ));
    }
    for (index, &m) in mask.data().iter().enumerate() {
        if m != T::zero() && m != T::one() {
            return Err(Error::NonBinaryMask {
                index,
                value: m.to_f64_lossless(),
            });
        }
    }
    Ok(())
}

/// Output spatial size of a convolution, validating channel counts.
pub(crate) fn conv_geometry<T: Real>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    stride: usize,
    pad: usize,
) -> Result<(usize, usize)> {
    let (c, h, w) = input.chw()?;
    let [_, ci, kh, kw] = kernel.shape()[..] else {
        return Err(shape_err("conv2d", format!("kernel rank {}", kernel.rank())));
    };
    if c != ci {
        return Err(shape_err(
            "conv2d",
            format!("input has {c} channels but kernel expects in_ch = {ci}"),
        ));
    }
    let oh = conv_out_size(h, kh, stride, pad).ok_or_else(|| {
        shape_err(
            "conv2d",
            format!("height {h} with pad {pad} is smaller than kernel height {kh}"),
        )
    })?;
    let ow = conv_out_size(w, kw, stride, pad).ok_or_else(|| {
        shape_err(
            "conv2d",
            format!("width {w} with pad {pad} is smaller than kernel width {kw}"),
        )
    })?;
    Ok((oh, ow))
}

/// One output element of a (masked) cross-correlation.
///
/// Accumulates over `(in_ch, ky, kx)` in ascending order starting from zero,
/// then adds the bias. Out-of-image taps and masked taps are skipped rather
/// than multiplied by zero, so values at those taps are never read.
#[allow(clippy::too_many_arguments)]
#[inline]
pub(crate) fn conv_at<T: Real>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: &Tensor<T>,
    mask: Option<&Tensor<T>>,
    stride: usize,
    pad: usize,
    o: usize,
    oy: usize,
    ox: usize,
) -> T {
    let [_, cin, kh, kw] = kernel.shape()[..] else {
        unreachable!()
    };
    let (h, w) = (input.shape()[1], input.shape()[2]);
    let x = input.data();
    let k = kernel.data();
    let m = mask.map(|m| m.data());
    let mut acc = T::zero();
    for i in 0..cin {
        for ky in 0..kh {
            let iy = (oy * stride + ky) as isize - pad as isize;
            if iy < 0 || iy >= h as isize {
                continue;
            }
            let row = (i * h + iy as usize) * w;
            let kbase = ((o * cin + i) * kh + ky) * kw;
            for kx in 0..kw {
                let ix = (ox * stride + kx) as isize - pad as isize;
                if ix < 0 || ix >= w as isize {
                    continue;
                }
                if let Some(m) = m {
                    if m[kbase + kx] == T::zero() {
                        continue;
                    }
                }
                acc = acc + x[row + ix as usize] * k[kbase + kx];
            }
        }
    }
    acc + bias.data()[o]
}

pub(crate) fn conv_forward<T: Real>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: &Tensor<T>,
    mask: Option<&Tensor<T>>,
    stride: usize,
    pad: usize,
) -> Result<Tensor<T>> {
    let (oh, ow) = conv_geometry(input, kernel, stride, pad)?;
    let o_ch = kernel.shape()[0];
    if bias.shape() != [o_ch] {
        return Err(shape_err("conv2d", format!("bias {:?}", bias.shape())));
    }
    let mut out = Tensor::zeros(&[o_ch, oh, ow]);
    let data = out.data_mut();
    for o in 0..o_ch {
        for oy in 0..oh {
            for ox in 0..ow {
                data[(o * oh + oy) * ow + ox] =
                    conv_at(input, kernel, bias, mask, stride, pad, o, oy, ox);
            }
        }
    }
    Ok(out)
}

/// Gradients of a (masked) convolution: `(d_input, d_kernel, d_bias)`.
pub(crate) fn conv_backward<T: Real>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    mask: Option<&Tensor<T>>,
    stride: usize,
    pad: usize,
    grad_out: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let [o_ch, cin, kh, kw] = kernel.shape()[..] else {
        unreachable!()
    };
    let (h, w) = (input.shape()[1], input.shape()[2]);
    let (oh, ow) = (grad_out.shape()[1], grad_out.shape()[2]);
    let mut gi = Tensor::zeros(input.shape());
    let mut gk = Tensor::zeros(kernel.shape());
    let mut gb = Tensor::zeros(&[o_ch]);
    let x = input.data();
    let k = kernel.data();
    let m = mask.map(|m| m.data());
    let g = grad_out.data();
    for o in 0..o_ch {
        for oy in 0..oh {
            for ox in 0..ow {
                let go = g[(o * oh + oy) * ow + ox];
                gb.data_mut()[o] = gb.data()[o] + go;
                if go == T::zero() {
                    continue;
                }
                for i in 0..cin {
                    for ky in 0..kh {
                        let iy = (oy * stride + ky) as isize - pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let row = (i * h + iy as usize) * w;
                        let kbase = ((o * cin + i) * kh + ky) * kw;
                        for kx in 0..kw {
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            if let Some(m) = m {
                                if m[kbase + kx] == T::zero() {
                                    continue;
                                }
                            }
                            let xi = row + ix as usize;
                            gi.data_mut()[xi] = gi.data()[xi] + go * k[kbase + kx];
                            gk.data_mut()[kbase + kx] = gk.data()[kbase + kx] + go * x[xi];
                        }
                    }
                }
            }
        }
    }
    (gi, gk, gb)
}

/// Standard cross-correlation plus bias.
pub fn conv2d<T: Real>(input: &Tensor<T>, w: &ConvWeights<T>) -> Result<Tensor<T>> {
    w.validate()?;
    conv_forward(input, &w.kernel, &w.bias, None, w.stride, w.pad)
}

/// Convolution with `kernel ⊙ mask`; the stored kernel is left untouched.
pub fn masked_conv2d<T: Real>(
    input: &Tensor<T>,
    w: &ConvWeights<T>,
    mask: &Tensor<T>,
) -> Result<Tensor<T>> {
    w.validate()?;
    check_mask(mask, &w.kernel)?;
    conv_forward(input, &w.kernel, &w.bias, Some(mask), w.stride, w.pad)
}

/// Output padding that makes a stride-2 transposed convolution exactly double its input.
pub(crate) fn transposed_output_padding(kh: usize, pad: usize) -> Result<()> {
    // out = 2(n-1) - 2 pad + k + op = 2n  =>  op = 2 + 2 pad - k, which must be 0 or 1.
    let op = 2 + 2 * pad as isize - kh as isize;
    if !(0..2).contains(&op) {
        return Err(Error::InvalidArgument(format!(
            "transposed conv with kernel {kh} and pad {pad} cannot double its input"
        )));
    }
    Ok(())
}

fn transposed_geometry<T: Real>(input: &Tensor<T>, w: &ConvWeights<T>) -> Result<()> {
    w.validate()?;
    if w.stride != 2 {
        return Err(Error::InvalidArgument(format!(
            "transposed_conv2d supports stride 2 only, got {}",
            w.stride
        )));
    }
    let (c, _, _) = input.chw()?;
    if c != w.in_channels() {
        return Err(shape_err(
            "transposed_conv2d",
            format!("input has {c} channels but kernel expects in_ch = {}", w.in_channels()),
        ));
    }
    let (kh, kw) = w.kernel_size();
    transposed_output_padding(kh, w.pad)?;
    transposed_output_padding(kw, w.pad)
}

/// Stride-2 transposed convolution, output exactly twice the input size.
///
/// Written in gather form: `out[o,y,x] = bias[o] + Σ in[i,iy,ix]·k[o,i,ky,kx]`
/// over taps with `y + pad - ky = 2·iy`, accumulated in `(i, ky, kx)` order.
pub fn transposed_conv2d<T: Real>(input: &Tensor<T>, w: &ConvWeights<T>) -> Result<Tensor<T>> {
    transposed_geometry(input, w)?;
    let (cin, h, wd) = input.chw()?;
    let o_ch = w.out_channels();
    let (kh, kw) = w.kernel_size();
    let (oh, ow) = (2 * h, 2 * wd);
    let pad = w.pad as isize;
    let x = input.data();
    let k = w.kernel.data();
    let mut out = Tensor::zeros(&[o_ch, oh, ow]);
    let data = out.data_mut();
    for o in 0..o_ch {
        for y in 0..oh {
            for xo in 0..ow {
                let mut acc = T::zero();
                for i in 0..cin {
                    for ky in 0..kh {
                        let ty = y as isize + pad - ky as isize;
                        if ty < 0 || ty % 2 != 0 || ty / 2 >= h as isize {
                            continue;
                        }
                        let row = (i * h + (ty / 2) as usize) * wd;
                        let kbase = ((o * cin + i) * kh + ky) * kw;
                        for kx in 0..kw {
                            let tx = xo as isize + pad - kx as isize;
                            if tx < 0 || tx % 2 != 0 || tx / 2 >= wd as isize {
                                continue;
                            }
                            acc = acc + x[row + (tx / 2) as usize] * k[kbase + kx];
                        }
                    }
                }
                data[(o * oh + y) * ow + xo] = acc + w.bias.data()[o];
            }
        }
    }
    Ok(out)
}

pub(crate) fn transposed_backward<T: Real>(
    input: &Tensor<T>,
    w: &ConvWeights<T>,
    grad_out: &Tensor<T>,
) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
    let (cin, h, wd) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let o_ch = w.out_channels();
    let (kh, kw) = w.kernel_size();
    let (oh, ow) = (2 * h, 2 * wd);
    let pad = w.pad as isize;
    let x = input.data();
    let k = w.kernel.data();
    let g = grad_out.data();
    let mut gi = Tensor::zeros(input.shape());
    let mut gk = Tensor::zeros(w.kernel.shape());
    let mut gb = Tensor::zeros(&[o_ch]);
    for o in 0..o_ch {
        for y in 0..oh {
            for xo in 0..ow {
                let go = g[(o * oh + y) * ow + xo];
                gb.data_mut()[o] = gb.data()[o] + go;
                if go == T::zero() {
                    continue;
                }
                for i in 0..cin {
                    for ky in 0..kh {
                        let ty = y as isize + pad - ky as isize;
                        if ty < 0 || ty % 2 != 0 || ty / 2 >= h as isize {
                            continue;
                        }
                        let row = (i * h + (ty / 2) as usize) * wd;
                        let kbase = ((o * cin + i) * kh + ky) * kw;
                        for kx in 0..kw {
                            let tx = xo as isize + pad - kx as isize;
                            if tx < 0 || tx % 2 != 0 || tx / 2 >= wd as isize {
                                continue;
                            }
                            let xi = row + (tx / 2) as usize;
                            gi.data_mut()[xi] = gi.data()[xi] + go * k[kbase + kx];
                            gk.data_mut()[kbase + kx] = gk.data()[kbase + kx] + go * x[xi];
                        }
                    }
                }
            }
        }
    }
    (gi, gk, gb)
}

/// Elementwise `max(v, slope·v)`.
pub fn leaky_relu<T: Real>(input: &Tensor<T>, slope: f64) -> Result<Tensor<T>> {
    if !(0.0..1.0).contains(&slope) {
        return Err(Error::InvalidArgument(format!("slope {slope} not in [0, 1)")));
    }
    let s = T::from_f64_lossy(slope);
    Ok(input.map(|v| if v >= T::zero() { v } else { s * v }))
}

/// Round half away from zero, then saturate to `[-LATENT_MAX, LATENT_MAX]`.
pub fn quantize_round<T: Real>(y: &Tensor<T>) -> Result<Tensor<T>> {
    if let Some(i) = y.data().iter().position(|v| v.is_nan()) {
        return Err(Error::NanInput(i));
    }
    let lim = T::from_f64_lossy(LATENT_MAX as f64);
    // `Float::round` rounds half away from zero; adding +0 turns -0 into +0 so
    // every integer has one bit pattern.
    Ok(y.map(|v| v.round().max(-lim).min(lim) + T::zero()))
}

/// `y + u` with `u ~ Uniform(-0.5, 0.5)` drawn in data order.
pub fn add_uniform_noise<T: Real>(y: &Tensor<T>, rng: &mut RngState) -> Tensor<T> {
    let mut out = y.clone();
    for v in out.data_mut() {
        *v = *v + T::from_f64_lossy(rng.next_f64() - 0.5);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones_conv(o: usize, i: usize, k: usize, stride: usize, pad: usize) -> ConvWeights<f32> {
        ConvWeights::new(
            Tensor::full(&[o, i, k, k], 1.0),
            Tensor::zeros(&[o]),
            stride,
            pad,
        )
        .unwrap()
    }

    fn random_tensor(shape: &[usize], seed: u64) -> Tensor<f32> {
        let mut r = RngState::new(seed);
        Tensor::from_fn(shape, |_| r.uniform(-1.0, 1.0) as f32)
    }

    #[test]
    fn identity_1x1() {
        let x = random_tensor(&[1, 5, 4], 1);
        let w = ones_conv(1, 1, 1, 1, 0);
        assert_eq!(conv2d(&x, &w).unwrap(), x);
    }

    #[test]
    fn strided_ones_corner() {
        let x = Tensor::<f32>::full(&[1, 4, 4], 1.0);
        let w = ones_conv(1, 1, 3, 2, 1);
        let y = conv2d(&x, &w).unwrap();
        assert_eq!(y.shape(), &[1, 2, 2]);
        // Top-left output sees rows/cols {-1,0,1}; two of them in range.
        assert_eq!(y.at3(0, 0, 0), 4.0);
        assert_eq!(y.at3(0, 1, 1), 9.0);
    }

    #[test]
    fn stride2_pad2_k5_shape() {
        let x = random_tensor(&[2, 8, 8], 2);
        let w = ones_conv(3, 2, 5, 2, 2);
        assert_eq!(conv2d(&x, &w).unwrap().shape(), &[3, 4, 4]);
    }

    #[test]
    fn channel_mismatch_names_dimension() {
        let x = random_tensor(&[2, 4, 4], 3);
        let w = ones_conv(1, 3, 3, 1, 1);
        let err = conv2d(&x, &w).unwrap_err().to_string();
        assert!(err.contains("in_ch"), "{err}");
    }

    #[test]
    fn too_small_input_rejected() {
        let x = random_tensor(&[1, 2, 2], 3);
        let w = ones_conv(1, 1, 5, 1, 0);
        let err = conv2d(&x, &w).unwrap_err().to_string();
        assert!(err.contains("height"), "{err}");
    }

    #[test]
    fn masked_all_ones_is_conv_bitwise() {
        let x = random_tensor(&[3, 6, 5], 4);
        let mut w = ones_conv(2, 3, 5, 1, 2);
        w.kernel = random_tensor(&[2, 3, 5, 5], 5);
        w.bias = random_tensor(&[2], 6);
        let mask = Tensor::full(&[2, 3, 5, 5], 1.0);
        assert!(masked_conv2d(&x, &w, &mask).unwrap().bit_eq(&conv2d(&x, &w).unwrap()));
    }

    #[test]
    fn masked_all_zeros_is_bias() {
        let x = random_tensor(&[3, 4, 4], 7);
        let mut w = ones_conv(2, 3, 5, 1, 2);
        w.bias = Tensor::new(vec![2], vec![0.25, -1.5]).unwrap();
        let y = masked_conv2d(&x, &w, &Tensor::zeros(&[2, 3, 5, 5])).unwrap();
        for c in 0..2 {
            for v in &y.data()[c * 16..(c + 1) * 16] {
                assert_eq!(*v, w.bias.data()[c]);
            }
        }
    }

    #[test]
    fn masked_center_only_equals_1x1() {
        let x = random_tensor(&[3, 5, 6], 8);
        let kernel = random_tensor(&[2, 3, 5, 5], 9);
        let bias = random_tensor(&[2], 10);
        let w = ConvWeights::new(kernel.clone(), bias.clone(), 1, 2).unwrap();
        let mut mask = Tensor::zeros(&[2, 3, 5, 5]);
        let mut center = Tensor::zeros(&[2, 3, 1, 1]);
        for o in 0..2 {
            for i in 0..3 {
                let idx = ((o * 3 + i) * 5 + 2) * 5 + 2;
                mask.data_mut()[idx] = 1.0;
                center.data_mut()[o * 3 + i] = kernel.data()[idx];
            }
        }
        let masked = masked_conv2d(&x, &w, &mask).unwrap();
        let one = conv2d(&x, &ConvWeights::new(center, bias, 1, 0).unwrap()).unwrap();
        assert!(masked.bit_eq(&one));
    }

    #[test]
    fn non_binary_mask_rejected() {
        let x = random_tensor(&[1, 4, 4], 1);
        let w = ones_conv(1, 1, 3, 1, 1);
        let mut mask = Tensor::full(&[1, 1, 3, 3], 1.0);
        mask.data_mut()[4] = 0.5;
        assert!(matches!(
            masked_conv2d(&x, &w, &mask),
            Err(Error::NonBinaryMask { index: 4, .. })
        ));
    }

    #[test]
    fn transposed_doubles_and_scatters_delta() {
        let x = Tensor::<f32>::new(vec![1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut w = ConvWeights::zeros(1, 1, 5, 2, 2);
        w.kernel.data_mut()[12] = 1.0;
        let y = transposed_conv2d(&x, &w).unwrap();
        assert_eq!(y.shape(), &[1, 4, 4]);
        let expect = [
            1.0, 0.0, 2.0, 0.0, //
            0.0, 0.0, 0.0, 0.0, //
            3.0, 0.0, 4.0, 0.0, //
            0.0, 0.0, 0.0, 0.0,
        ];
        assert_eq!(y.data(), &expect);
    }

    #[test]
    fn transposed_zero_kernel_is_bias() {
        let x = random_tensor(&[2, 3, 2], 11);
        let mut w = ConvWeights::zeros(2, 2, 3, 2, 1);
        w.bias = Tensor::new(vec![2], vec![0.5, -0.5]).unwrap();
        let y = transposed_conv2d(&x, &w).unwrap();
        assert_eq!(y.shape(), &[2, 6, 4]);
        assert!(y.data()[..24].iter().all(|&v| v == 0.5));
        assert!(y.data()[24..].iter().all(|&v| v == -0.5));
    }

    #[test]
    fn transposed_rejects_stride_1() {
        let x = random_tensor(&[1, 2, 2], 1);
        let w = ConvWeights::<f32>::zeros(1, 1, 3, 1, 1);
        assert!(matches!(transposed_conv2d(&x, &w), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn transposed_is_adjoint_of_strided_conv() {
        // <T(x), y> == <x, C(y)> when T and C share a kernel (with swapped in/out).
        let x = random_tensor(&[2, 3, 4], 12);
        let y = random_tensor(&[3, 6, 8], 13);
        let k = random_tensor(&[3, 2, 5, 5], 14);
        let t = ConvWeights::new(k.clone(), Tensor::zeros(&[3]), 2, 2).unwrap();
        // Forward conv from 3 channels to 2: kernel[i][o] = k[o][i].
        let mut kf = Tensor::zeros(&[2, 3, 5, 5]);
        for o in 0..3 {
            for i in 0..2 {
                for t in 0..25 {
                    kf.data_mut()[(i * 3 + o) * 25 + t] = k.data()[(o * 2 + i) * 25 + t];
                }
            }
        }
        let c = ConvWeights::new(kf, Tensor::zeros(&[2]), 2, 2).unwrap();
        let tx = transposed_conv2d(&x, &t).unwrap();
        let cy = conv2d(&y, &c).unwrap();
        let lhs: f64 = tx.data().iter().zip(y.data()).map(|(a, b)| (*a as f64) * (*b as f64)).sum();
        let rhs: f64 = x.data().iter().zip(cy.data()).map(|(a, b)| (*a as f64) * (*b as f64)).sum();
        assert!((lhs - rhs).abs() < 1e-4, "{lhs} vs {rhs}");
    }

    #[test]
    fn leaky_relu_cases() {
        let x = Tensor::<f32>::new(vec![3], vec![-1.0, -5.0, 2.5]).unwrap();
        assert_eq!(leaky_relu(&x, 0.0).unwrap().data(), &[0.0, 0.0, 2.5]);
        assert_eq!(leaky_relu(&x, 0.2).unwrap().data()[1], -1.0);
        assert!(leaky_relu(&x, 1.0).is_err());
    }

    #[test]
    fn rounding_rule() {
        let x = Tensor::<f32>::new(vec![6], vec![0.5, -0.5, 2.0, 300.2, -1000.0, 1.49]).unwrap();
        let q = quantize_round(&x).unwrap();
        assert_eq!(q.data(), &[1.0, -1.0, 2.0, 127.0, -127.0, 1.0]);
        assert_eq!(quantize_round(&q).unwrap(), q);
        let bad = Tensor::<f32>::new(vec![2], vec![0.0, f32::NAN]).unwrap();
        assert_eq!(quantize_round(&bad), Err(Error::NanInput(1)));
        // small negatives must not produce -0.0, decoded symbols are always +0
        let neg = Tensor::<f32>::new(vec![2], vec![-0.3, -0.0]).unwrap();
        for v in quantize_round(&neg).unwrap().data() {
            assert_eq!(v.to_bits(), 0);
        }
    }

    #[test]
    fn noise_bounded_and_deterministic() {
        let x = random_tensor(&[2, 8, 8], 15);
        let a = add_uniform_noise(&x, &mut RngState::new(5));
        let b = add_uniform_noise(&x, &mut RngState::new(5));
        assert!(a.bit_eq(&b));
        for (o, i) in a.data().iter().zip(x.data()) {
            assert!((o - i).abs() <= 0.5);
        }
    }

    #[test]
    fn noise_mean_near_zero() {
        let x = Tensor::<f64>::zeros(&[1_000_000]);
        let y = add_uniform_noise(&x, &mut RngState::new(2024));
        let mean = y.data().iter().sum::<f64>() / 1e6;
        assert!(mean.abs() < 0.002, "{mean}");
    }

    proptest::proptest! {
        #[test]
        fn conv_is_linear(seed in 0u64..1000, a in -2.0f32..2.0, b in -2.0f32..2.0) {
            let x1 = random_tensor(&[2, 6, 6], seed);
            let x2 = random_tensor(&[2, 6, 6], seed + 1);
            let k = random_tensor(&[3, 2, 3, 3], seed + 2);
            let w = ConvWeights::new(k, Tensor::zeros(&[3]), 2, 1).unwrap();
            let mix = Tensor::from_fn(&[2, 6, 6], |i| a * x1.data()[i] + b * x2.data()[i]);
            let lhs = conv2d(&mix, &w).unwrap();
            let r1 = conv2d(&x1, &w).unwrap();
            let r2 = conv2d(&x2, &w).unwrap();
            for i in 0..lhs.len() {
                let rhs = a * r1.data()[i] + b * r2.data()[i];
                let scale = lhs.data()[i].abs().max(rhs.abs()).max(1.0);
                proptest::prop_assert!((lhs.data()[i] - rhs).abs() / scale < 1e-5);
            }
        }

        #[test]
        fn rounding_is_idempotent(v in proptest::collection::vec(-400.0f32..400.0, 1..64)) {
            let t = Tensor::new(vec![v.len()], v).unwrap();
            let q = quantize_round(&t).unwrap();
            proptest::prop_assert_eq!(quantize_round(&q).unwrap(), q);
        }
    }
}
