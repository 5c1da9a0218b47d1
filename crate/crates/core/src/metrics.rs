//! MS-SSIM, PSNR and bits per pixel.
//!
//! MS-SSIM uses an 11x11 Gaussian window (sigma 1.5) evaluated over the valid
//! region, `K1 = 0.01`, `K2 = 0.03`, dynamic range 1, and 2x2 average pooling
//! between scales (odd edges dropped). Each RGB channel is scored separately and
//! the channel scores are averaged. Per-scale contrast-structure means and the
//! final SSIM mean are clamped at zero before exponentiation.

use crate::error::{Error, Result};
use crate::tensor::{Graph, Real, Tensor, Var};

/// Standard five-scale exponents.
pub const MSSSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
pub const WINDOW: usize = 11;
pub const WINDOW_SIGMA: f64 = 1.5;
pub const K1: f64 = 0.01;
pub const K2: f64 = 0.03;
/// Reported PSNR for identical images, and the upper bound of every report.
pub const PSNR_CAP: f64 = 99.0;
pub const MAX_SCALES: usize = 5;

/// Normalized 1-D Gaussian of odd length `size`.
pub fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size / 2) as f64;
    let raw: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// First `scales` standard exponents rescaled to sum to one.
pub fn scale_weights(scales: usize) -> Vec<f64> {
    let w = &MSSSIM_WEIGHTS[..scales];
    let total: f64 = w.iter().sum();
    w.iter().map(|v| v / total).collect()
}

/// Smallest side accepted by [`msssim`] for `scales`.
pub fn msssim_min_size(scales: usize) -> usize {
    WINDOW << (scales.max(1) - 1)
}

fn check_pair<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<(usize, usize, usize)> {
    if a.shape() != b.shape() {
        return Err(crate::error::shape_err(
            "metric",
            format!("{:?} vs {:?}", a.shape(), b.shape()),
        ));
    }
    a.chw()
}

fn check_scales(h: usize, w: usize, scales: usize) -> Result<()> {
    if !(1..=MAX_SCALES).contains(&scales) {
        return Err(Error::InvalidArgument(format!("scales {scales} not in [1, 5]")));
    }
    let min = msssim_min_size(scales);
    if h < min || w < min {
        return Err(Error::ImageTooSmall {
            height: h,
            width: w,
            detail: format!("{scales}-scale MS-SSIM needs both sides >= {min}"),
        });
    }
    Ok(())
}

/// Builds MS-SSIM of `a` and `b` (`[C,H,W]`) on `g` and returns the scalar node.
pub fn msssim_graph<T: Real>(g: &mut Graph<T>, a: Var, b: Var, scales: usize) -> Result<Var> {
    let (_, h, w) = check_pair(g.value(a), g.value(b))?;
    check_scales(h, w, scales)?;
    windowed_msssim(g, a, b, &scale_weights(scales), WINDOW)
}

/// Shared core: `weights.len()` scales with a `window`-tap Gaussian.
fn windowed_msssim<T: Real>(g: &mut Graph<T>, a: Var, b: Var, weights: &[f64], window: usize) -> Result<Var> {
    let c = g.value(a).shape()[0];
    let taps = gaussian_window(window, WINDOW_SIGMA);
    let kernel = Tensor::from_fn(&[1, 1, window, window], |i| {
        T::from_f64_lossy(taps[i / window] * taps[i % window])
    });
    let k = g.leaf(kernel);
    let bias = g.leaf(Tensor::zeros(&[1]));
    let (c1, c2) = (K1 * K1, K2 * K2);

    let mut total = None;
    for ch in 0..c {
        let mut x = g.slice_channels(a, ch, 1)?;
        let mut y = g.slice_channels(b, ch, 1)?;
        let mut score = None;
        for (s, &weight) in weights.iter().enumerate() {
            let last = s + 1 == weights.len();
            let mu_x = g.conv2d(x, k, bias, 1, 0)?;
            let mu_y = g.conv2d(y, k, bias, 1, 0)?;
            let xx = g.mul(x, x)?;
            let yy = g.mul(y, y)?;
            let xy = g.mul(x, y)?;
            let e_xx = g.conv2d(xx, k, bias, 1, 0)?;
            let e_yy = g.conv2d(yy, k, bias, 1, 0)?;
            let e_xy = g.conv2d(xy, k, bias, 1, 0)?;
            let mu_xx = g.mul(mu_x, mu_x)?;
            let mu_yy = g.mul(mu_y, mu_y)?;
            let mu_xy = g.mul(mu_x, mu_y)?;
            let var_x = g.sub(e_xx, mu_xx)?;
            let var_y = g.sub(e_yy, mu_yy)?;
            let cov = g.sub(e_xy, mu_xy)?;

            let cs_num = g.mul_const(cov, 2.0);
            let cs_num = g.add_const(cs_num, c2);
            let cs_den = g.add(var_x, var_y)?;
            let cs_den = g.add_const(cs_den, c2);
            let cs_map = g.div(cs_num, cs_den)?;

            let term = if last {
                let l_num = g.mul_const(mu_xy, 2.0);
                let l_num = g.add_const(l_num, c1);
                let l_den = g.add(mu_xx, mu_yy)?;
                let l_den = g.add_const(l_den, c1);
                let lum = g.div(l_num, l_den)?;
                g.mul(lum, cs_map)?
            } else {
                cs_map
            };
            let m = g.mean(term);
            let m = g.relu(m);
            let p = g.pow_const(m, weight);
            score = Some(match score {
                None => p,
                Some(acc) => g.mul(acc, p)?,
            });
            if !last {
                x = g.avg_pool2(x)?;
                y = g.avg_pool2(y)?;
            }
        }
        let score = score.expect("at least one scale");
        total = Some(match total {
            None => score,
            Some(t) => g.add(t, score)?,
        });
    }
    Ok(g.div_const(total.expect("at least one channel"), c as f64))
}

/// MS-SSIM of two `[C,H,W]` images with values in `[0,1]`.
pub fn msssim<T: Real>(a: &Tensor<T>, b: &Tensor<T>, scales: usize) -> Result<f64> {
    let mut g = Graph::new();
    let (va, vb) = (g.leaf(a.clone()), g.leaf(b.clone()));
    let out = msssim_graph(&mut g, va, vb, scales)?;
    Ok(g.scalar_value(out).to_f64_lossless())
}

/// Scales used for reports: the most that fit, up to five.
pub fn report_scales(h: usize, w: usize) -> usize {
    (1..=MAX_SCALES)
        .rev()
        .find(|&s| h.min(w) >= msssim_min_size(s))
        .unwrap_or(0)
}

/// Similarity for reports on images of any size. Images with a side below the
/// window size fall back to single-scale SSIM with the window shrunk to the
/// largest odd size that fits.
pub fn report_msssim<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<f64> {
    let (_, h, w) = check_pair(a, b)?;
    let scales = report_scales(h, w);
    if scales > 0 {
        return msssim(a, b, scales);
    }
    let side = h.min(w);
    let window = if side % 2 == 1 { side } else { side - 1 };
    let mut g = Graph::new();
    let (va, vb) = (g.leaf(a.clone()), g.leaf(b.clone()));
    let out = windowed_msssim(&mut g, va, vb, &[1.0], window)?;
    Ok(g.scalar_value(out).to_f64_lossless())
}

/// `10·log10(1/mse)`, capped at [`PSNR_CAP`].
pub fn psnr<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<f64> {
    check_pair(a, b)?;
    let se: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&p, &q)| (p.to_f64_lossless() - q.to_f64_lossless()).powi(2))
        .sum();
    let mse = se / a.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP))
}

/// `8·bytes / (width·height)` over the original image area.
pub fn bpp(total_bytes: usize, width: usize, height: usize) -> Result<f64> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidArgument(format!(
            "bpp over a zero-area image ({width}x{height})"
        )));
    }
    Ok(8.0 * total_bytes as f64 / (width * height) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricReport {
    pub msssim: f64,
    pub psnr: f64,
    pub bpp: f64,
}

impl MetricReport {
    pub fn compute(original: &Tensor<f32>, reconstruction: &Tensor<f32>, total_bytes: usize) -> Result<Self> {
        let (_, h, w) = check_pair(original, reconstruction)?;
        let a = original.cast::<f64>();
        let b = reconstruction.cast::<f64>();
        Ok(Self {
            msssim: report_msssim(&a, &b)?,
            psnr: psnr(&a, &b)?,
            bpp: bpp(total_bytes, w, h)?,
        })
    }
}
