//! Padding-aware rate-distortion training for the toy model.
//!
//! Each step draws `flag ∈ {0,1}`. With `flag = 1` it also draws
//! `h_pad ∈ [0,P1]`, `w_pad ∈ [0,P2]`, shifts the batch up/left so that the
//! valid content fills the top-left `(H−h_pad)×(W−w_pad)` block with zeros
//! below and to the right, and then charges the rate to the valid pixels only
//! and measures distortion on the valid block only:
//!
//! ```text
//! R = bits(ỹ) + bits(z̃)  /  (B · (H − h_pad) · (W − w_pad))
//! D = 1 − mean_b msssim(x_b[:H−h_pad, :W−w_pad], x̂_b[:H−h_pad, :W−w_pad])
//! L = R + λ·D
//! ```
//!
//! `ỹ = y + u` and `z̃ = z + u` with `u ~ U[-½, ½)` stand in for rounding.

use crate::context::{ContextMasks, Group};
use crate::error::{shape_err, Error, Result};
use crate::metrics::{msssim, msssim_graph, report_scales};
use crate::model::{graph_fns, ModelConfig, ParamVars, ToyModelWeights};
use crate::tensor::{Graph, Real, RngState, Tensor};

/// MS-SSIM scales used by the training loss (the most that fit a 29 px crop).
pub const TRAIN_MSSSIM_SCALES: usize = 2;
pub const DEFAULT_PATCH: usize = 32;
pub const DEFAULT_LAMBDA: f64 = 16.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PadConfig {
    pub p1: usize,
    pub p2: usize,
    pub alignment: usize,
}

impl Default for PadConfig {
    fn default() -> Self {
        Self {
            p1: 3,
            p2: 3,
            alignment: 8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossReport {
    pub rate_bpp: f64,
    pub distortion: f64,
    pub lambda: f64,
    pub total: f64,
    pub h_pad: usize,
    pub w_pad: usize,
    pub flag: bool,
}

/// `(flag, h_pad, w_pad)`; both pads are zero when `flag` is false.
pub fn sample_padding(rng: &mut RngState, cfg: &PadConfig) -> (bool, usize, usize) {
    if rng.below(2) == 0 {
        return (false, 0, 0);
    }
    let h = rng.below(cfg.p1 as u64 + 1) as usize;
    let w = rng.below(cfg.p2 as u64 + 1) as usize;
    (true, h, w)
}

fn bchw<T: Real>(x: &Tensor<T>) -> Result<(usize, usize, usize, usize)> {
    match *x.shape() {
        [b, c, h, w] => Ok((b, c, h, w)),
        _ => Err(shape_err("batch", format!("expected [B,C,H,W], got {:?}", x.shape()))),
    }
}

/// Moves the batch up by `h_pad` rows and left by `w_pad` columns, filling the
/// vacated bottom rows and right columns with zeros.
pub fn apply_pad_crop<T: Real>(x: &Tensor<T>, h_pad: usize, w_pad: usize) -> Result<Tensor<T>> {
    let (_, _, h, w) = bchw(x)?;
    if h_pad >= h || w_pad >= w {
        return Err(Error::InvalidArgument(format!(
            "padding ({h_pad}, {w_pad}) must be smaller than the {h}x{w} patch"
        )));
    }
    let (vh, vw) = (h - h_pad, w - w_pad);
    let src = x.data();
    Ok(Tensor::from_fn(x.shape(), |i| {
        let (plane, r, col) = (i / (h * w), i / w % h, i % w);
        if r < vh && col < vw {
            src[(plane * h + r + h_pad) * w + col + w_pad]
        } else {
            T::zero()
        }
    }))
}

/// Sample `i` of a `[B,C,H,W]` batch as `[C,H,W]`.
pub fn batch_item<T: Real>(x: &Tensor<T>, i: usize) -> Result<Tensor<T>> {
    let (b, c, h, w) = bchw(x)?;
    if i >= b {
        return Err(Error::InvalidArgument(format!("item {i} of a batch of {b}")));
    }
    let n = c * h * w;
    Tensor::new(vec![c, h, w], x.data()[i * n..(i + 1) * n].to_vec())
}

pub fn stack_batch<T: Real>(items: &[Tensor<T>]) -> Result<Tensor<T>> {
    let first = items
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty batch".into()))?;
    let mut shape = vec![items.len()];
    shape.extend_from_slice(first.shape());
    let mut data = Vec::with_capacity(first.len() * items.len());
    for t in items {
        if t.shape() != first.shape() {
            return Err(shape_err("batch", format!("{:?} vs {:?}", t.shape(), first.shape())));
        }
        data.extend_from_slice(t.data());
    }
    Tensor::new(shape, data)
}

/// MS-SSIM scales for a loss over `h x w` crops: at most `max_scales`, fewer when
/// the crop is too small; rejected below the single-scale window.
pub fn loss_scales(h: usize, w: usize, max_scales: usize) -> Result<usize> {
    let s = report_scales(h, w).min(max_scales);
    if s == 0 {
        return Err(Error::ImageTooSmall {
            height: h,
            width: w,
            detail: "distortion needs an unpadded area of at least 11x11".into(),
        });
    }
    Ok(s)
}

fn report(rate_bpp: f64, distortion: f64, lambda: f64, h_pad: usize, w_pad: usize) -> LossReport {
    LossReport {
        rate_bpp,
        distortion,
        lambda,
        total: rate_bpp + lambda * distortion,
        h_pad,
        w_pad,
        flag: h_pad > 0 || w_pad > 0,
    }
}

/// Loss with rate over the valid pixels and distortion over the valid block.
pub fn padded_loss<T: Real>(
    x: &Tensor<T>,
    x_hat: &Tensor<T>,
    total_bits: f64,
    h_pad: usize,
    w_pad: usize,
    lambda: f64,
) -> Result<LossReport> {
    let (b, _, h, w) = bchw(x)?;
    if x_hat.shape() != x.shape() {
        return Err(shape_err("padded_loss", format!("{:?} vs {:?}", x.shape(), x_hat.shape())));
    }
    if !(total_bits >= 0.0) {
        return Err(Error::InvalidArgument(format!("bits {total_bits} must be >= 0")));
    }
    if h_pad >= h || w_pad >= w {
        return Err(Error::InvalidArgument(format!(
            "padding ({h_pad}, {w_pad}) must be smaller than the {h}x{w} patch"
        )));
    }
    let (vh, vw) = (h - h_pad, w - w_pad);
    let scales = loss_scales(vh, vw, TRAIN_MSSSIM_SCALES)?;
    let mut sim = 0.0;
    for i in 0..b {
        let a = batch_item(x, i)?.crop(vh, vw)?;
        let r = batch_item(x_hat, i)?.crop(vh, vw)?;
        sim += msssim(&a, &r, scales)?;
    }
    let rate = total_bits / (b * vh * vw) as f64;
    Ok(report(rate, 1.0 - sim / b as f64, lambda, h_pad, w_pad))
}

/// The ordinary full-area loss.
pub fn standard_loss<T: Real>(x: &Tensor<T>, x_hat: &Tensor<T>, total_bits: f64, lambda: f64) -> Result<LossReport> {
    let (b, _, h, w) = bchw(x)?;
    if x_hat.shape() != x.shape() {
        return Err(shape_err("standard_loss", format!("{:?} vs {:?}", x.shape(), x_hat.shape())));
    }
    if !(total_bits >= 0.0) {
        return Err(Error::InvalidArgument(format!("bits {total_bits} must be >= 0")));
    }
    let scales = loss_scales(h, w, TRAIN_MSSSIM_SCALES)?;
    let mut sim = 0.0;
    for i in 0..b {
        sim += msssim(&batch_item(x, i)?, &batch_item(x_hat, i)?, scales)?;
    }
    Ok(report(total_bits / (b * h * w) as f64, 1.0 - sim / b as f64, lambda, 0, 0))
}

/// Zero-pads right and down to the next multiple of `alignment`; returns the
/// original `(H, W)` alongside.
pub fn pad_to_multiple<T: Real>(image: &Tensor<T>, alignment: usize) -> Result<(Tensor<T>, usize, usize)> {
    let (c, h, w) = image.chw()?;
    if h == 0 || w == 0 {
        return Err(Error::ImageTooSmall {
            height: h,
            width: w,
            detail: "image must be at least 1x1".into(),
        });
    }
    if alignment == 0 {
        return Err(Error::InvalidArgument("alignment must be positive".into()));
    }
    let (ph, pw) = (h.div_ceil(alignment) * alignment, w.div_ceil(alignment) * alignment);
    let out = Tensor::from_fn(&[c, ph, pw], |i| {
        let (ch, y, x) = (i / (ph * pw), i / pw % ph, i % pw);
        if y < h && x < w {
            image.at3(ch, y, x)
        } else {
            T::zero()
        }
    });
    Ok((out, h, w))
}

/// Learning rate: 1e-3 for the first 60 % of `total` steps, then 1e-4.
pub fn lr_schedule(step: usize, total: usize) -> f64 {
    if (step as f64) < 0.6 * total as f64 {
        1e-3
    } else {
        1e-4
    }
}

/// Smooth random field: per channel, a sum of four plane sinusoids with random
/// direction, frequency (0.02-0.25 cycles/pixel), phase and amplitude (0.5-1),
/// min-max normalized to `[0,1]` (a constant channel becomes 0.5).
pub fn synthetic_image(rng: &mut RngState, h: usize, w: usize) -> Tensor<f32> {
    let mut out = Tensor::zeros(&[3, h, w]);
    for c in 0..3 {
        let waves: Vec<[f64; 5]> = (0..4)
            .map(|_| {
                let theta = rng.uniform(0.0, std::f64::consts::TAU);
                let f = rng.uniform(0.02, 0.25) * std::f64::consts::TAU;
                [
                    f * theta.cos(),
                    f * theta.sin(),
                    rng.uniform(0.0, std::f64::consts::TAU),
                    rng.uniform(0.5, 1.0),
                    0.0,
                ]
            })
            .collect();
        let field: Vec<f64> = (0..h * w)
            .map(|i| {
                let (y, x) = ((i / w) as f64, (i % w) as f64);
                waves.iter().map(|wv| wv[3] * (wv[0] * x + wv[1] * y + wv[2]).sin()).sum()
            })
            .collect();
        let lo = field.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = field.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for (i, v) in field.iter().enumerate() {
            let n = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
            out.set3(c, i / w, i % w, n as f32);
        }
    }
    out
}

pub fn synthetic_batch(rng: &mut RngState, b: usize, h: usize, w: usize) -> Tensor<f32> {
    let items: Vec<Tensor<f32>> = (0..b).map(|_| synthetic_image(rng, h, w)).collect();
    stack_batch(&items).expect("uniform shapes")
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub pad: PadConfig,
    /// When false the padding draw is skipped and every step trains on full patches.
    pub pad_strategy: bool,
    pub batch_size: usize,
    pub patch: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            pad: PadConfig::default(),
            pad_strategy: true,
            batch_size: 4,
            patch: DEFAULT_PATCH,
        }
    }
}

/// Loss and per-tensor gradients (layout order) on one batch.
pub fn loss_and_grads(
    weights: &ToyModelWeights,
    batch: &Tensor<f32>,
    cfg: &TrainConfig,
    lambda: f64,
    rng: &mut RngState,
) -> Result<(LossReport, Vec<Tensor<f32>>)> {
    let (b, _, h, w) = bchw(batch)?;
    let mc: &ModelConfig = weights.config();
    let (flag, h_pad, w_pad) = if cfg.pad_strategy {
        sample_padding(rng, &cfg.pad)
    } else {
        (false, 0, 0)
    };
    let input = if flag { apply_pad_crop(batch, h_pad, w_pad)? } else { batch.clone() };
    let (vh, vw) = (h - h_pad, w - w_pad);
    let scales = loss_scales(vh, vw, TRAIN_MSSSIM_SCALES)?;

    let mut g = Graph::<f32>::new();
    let p = ParamVars::register(&mut g, weights);
    let masks = ContextMasks::new(&mc.group_spec()?, mc.context_features, mc.context_features)?;
    let split = mc.group_split;
    let mut bits = None;
    let mut sim = None;
    for i in 0..b {
        let x = g.leaf(batch_item(&input, i)?);
        let y = graph_fns::analysis(&mut g, &p, mc, x)?;
        let noise_y = noise_like(g.value(y), rng);
        let u = g.leaf(noise_y);
        let y_t = g.add(y, u)?;
        let z = graph_fns::hyper_analysis(&mut g, &p, mc, y_t)?;
        let noise_z = noise_like(g.value(z), rng);
        let u = g.leaf(noise_z);
        let z_t = g.add(z, u)?;
        let f2 = graph_fns::hyper_synthesis(&mut g, &p, mc, z_t)?;
        let (c1, c2) = graph_fns::context(&mut g, &p, &masks, y_t)?;
        let head1 = graph_fns::rpe(&mut g, &p, Group::First, c1, f2)?;
        let head2 = graph_fns::rpe(&mut g, &p, Group::Second, c2, f2)?;
        let y1 = g.slice_channels(y_t, 0, split)?;
        let y2 = g.slice_channels(y_t, split, mc.latent_channels - split)?;
        let r1 = g.gmm_rate_bits(y1, head1, mc.mixtures)?;
        let r2 = g.gmm_rate_bits(y2, head2, mc.mixtures)?;
        let (zm, zs) = p.z_prior();
        let rz = g.gauss_rate_bits(z_t, zm, zs)?;
        let r = g.add(r1, r2)?;
        let r = g.add(r, rz)?;
        let x_hat = graph_fns::synthesis(&mut g, &p, mc, y_t)?;
        let xc = g.crop(x, vh, vw)?;
        let xhc = g.crop(x_hat, vh, vw)?;
        let s = msssim_graph(&mut g, xc, xhc, scales)?;
        bits = Some(match bits {
            None => r,
            Some(acc) => g.add(acc, r)?,
        });
        sim = Some(match sim {
            None => s,
            Some(acc) => g.add(acc, s)?,
        });
    }
    let (bits, sim) = (bits.expect("non-empty batch"), sim.expect("non-empty batch"));
    let pixels = (b * vh * vw) as f64;
    let rate = g.div_const(bits, pixels);
    let mean_sim = g.div_const(sim, b as f64);
    let d = g.mul_const(mean_sim, -1.0);
    let d = g.add_const(d, 1.0);
    let ld = g.mul_const(d, lambda);
    let loss = g.add(rate, ld)?;

    let rate_v = g.scalar_value(rate).to_f64_lossless();
    let dist_v = g.scalar_value(d).to_f64_lossless();
    if !rate_v.is_finite() {
        return Err(Error::NonFiniteLoss("rate"));
    }
    if !dist_v.is_finite() {
        return Err(Error::NonFiniteLoss("distortion"));
    }
    let mut rep = report(rate_v, dist_v, lambda, h_pad, w_pad);
    rep.flag = flag;
    if !rep.total.is_finite() {
        return Err(Error::NonFiniteLoss("total"));
    }

    let grads = g.backward(loss);
    let out = p
        .leaves()
        .iter()
        .zip(weights.iter())
        .map(|((_, v), (_, t))| grads.get(*v).cloned().unwrap_or_else(|| Tensor::zeros(t.shape())))
        .collect();
    Ok((rep, out))
}

fn noise_like(t: &Tensor<f32>, rng: &mut RngState) -> Tensor<f32> {
    Tensor::from_fn(t.shape(), |_| (rng.next_f64() - 0.5) as f32)
}

/// One plain gradient-descent step.
pub fn train_step(
    weights: &ToyModelWeights,
    batch: &Tensor<f32>,
    cfg: &TrainConfig,
    lambda: f64,
    lr: f64,
    rng: &mut RngState,
) -> Result<(ToyModelWeights, LossReport)> {
    let (rep, grads) = loss_and_grads(weights, batch, cfg, lambda, rng)?;
    let mut next = weights.clone();
    let lr = lr as f32;
    for ((_, t), g) in next.tensors_mut().zip(&grads) {
        for (w, d) in t.data_mut().iter_mut().zip(g.data()) {
            *w -= lr * d;
        }
    }
    Ok((next, rep))
}

/// Adam moments for every model tensor (`beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`).
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    m: Vec<Tensor<f32>>,
    v: Vec<Tensor<f32>>,
    t: i32,
}

impl Adam {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPS: f64 = 1e-8;

    pub fn new(weights: &ToyModelWeights) -> Self {
        let zeros: Vec<Tensor<f32>> = weights.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    pub fn apply(&mut self, weights: &mut ToyModelWeights, grads: &[Tensor<f32>], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        let (b1, b2) = (Self::BETA1 as f32, Self::BETA2 as f32);
        for (i, (_, w)) in weights.tensors_mut().enumerate() {
            let (m, v, g) = (self.m[i].data_mut(), self.v[i].data_mut(), grads[i].data());
            for (j, wj) in w.data_mut().iter_mut().enumerate() {
                m[j] = b1 * m[j] + (1.0 - b1) * g[j];
                v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
                let mh = m[j] as f64 / c1;
                let vh = v[j] as f64 / c2;
                *wj -= (lr * mh / (vh.sqrt() + Self::EPS)) as f32;
            }
        }
    }
}

/// Where training patches come from.
#[derive(Clone, Debug)]
pub enum TrainData {
    Synthetic,
    /// Random `patch x patch` crops of these `[3,H,W]` images.
    Images(Vec<Tensor<f32>>),
}

impl TrainData {
    pub fn batch(&self, rng: &mut RngState, b: usize, patch: usize) -> Result<Tensor<f32>> {
        match self {
            TrainData::Synthetic => Ok(synthetic_batch(rng, b, patch, patch)),
            TrainData::Images(images) => {
                if images.is_empty() {
                    return Err(Error::InvalidArgument("no training images".into()));
                }
                let mut items = Vec::with_capacity(b);
                for _ in 0..b {
                    let img = &images[rng.below(images.len() as u64) as usize];
                    let (_, h, w) = img.chw()?;
                    if h < patch || w < patch {
                        return Err(Error::ImageTooSmall {
                            height: h,
                            width: w,
                            detail: format!("training images must be at least {patch}x{patch}"),
                        });
                    }
                    let oy = rng.below((h - patch + 1) as u64) as usize;
                    let ox = rng.below((w - patch + 1) as u64) as usize;
                    items.push(Tensor::from_fn(&[3, patch, patch], |i| {
                        let (c, y, x) = (i / (patch * patch), i / patch % patch, i % patch);
                        img.at3(c, oy + y, ox + x)
                    }));
                }
                stack_batch(&items)
            }
        }
    }
}

/// Runs `steps` Adam steps under [`lr_schedule`]. `log` sees every step's report
/// (computed before that step's update). Failures carry the step index.
pub fn train(
    mut weights: ToyModelWeights,
    data: &TrainData,
    cfg: &TrainConfig,
    lambda: f64,
    steps: usize,
    seed: u64,
    mut log: impl FnMut(usize, &LossReport),
) -> Result<ToyModelWeights> {
    let mut rng = RngState::new(seed);
    let mut adam = Adam::new(&weights);
    for step in 0..steps {
        let wrap = |e: Error| Error::TrainStep {
            step,
            source: Box::new(e),
        };
        let batch = data.batch(&mut rng, cfg.batch_size, cfg.patch).map_err(wrap)?;
        let (rep, grads) = loss_and_grads(&weights, &batch, cfg, lambda, &mut rng).map_err(wrap)?;
        log(step, &rep);
        adam.apply(&mut weights, &grads, lr_schedule(step, steps));
    }
    Ok(weights)
}
