//! Two-group 3-D context model.
//!
//! Latent channels are split into group 1 `[0, g)` and group 2 `[g, C)`. Both
//! groups see every channel at spatial positions strictly before the current
//! one in raster order; group 2 additionally sees the group-1 channels at the
//! current position. Decoding interleaves the groups per position.

use crate::error::{shape_err, Error, Result};
use crate::tensor::{conv_at, masked_conv2d, ConvWeights, Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GroupSpec {
    total_channels: usize,
    split: usize,
    kernel: usize,
}

impl GroupSpec {
    pub const DEFAULT_KERNEL: usize = 5;

    pub fn new(total_channels: usize, split: usize, kernel: usize) -> Result<Self> {
        if split < 1 || split >= total_channels {
            return Err(Error::InvalidArgument(format!(
                "group split {split} must satisfy 1 <= g < C = {total_channels}"
            )));
        }
        if kernel < 3 || kernel.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "context kernel {kernel} must be odd and >= 3"
            )));
        }
        Ok(Self {
            total_channels,
            split,
            kernel,
        })
    }

    /// Even halves with the default 5x5 kernel.
    pub fn halves(total_channels: usize) -> Result<Self> {
        Self::new(total_channels, total_channels / 2, Self::DEFAULT_KERNEL)
    }

    pub fn total_channels(&self) -> usize {
        self.total_channels
    }

    pub fn split(&self) -> usize {
        self.split
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    /// Channel range `(start, len)` of a group.
    pub fn channels(&self, group: Group) -> (usize, usize) {
        match group {
            Group::First => (0, self.split),
            Group::Second => (self.split, self.total_channels - self.split),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Group {
    First,
    Second,
}

impl Group {
    pub fn number(self) -> u8 {
        match self {
            Group::First => 1,
            Group::Second => 2,
        }
    }
}

impl TryFrom<u8> for Group {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Group::First),
            2 => Ok(Group::Second),
            _ => Err(Error::InvalidArgument(format!("group {v} is not 1 or 2"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecodeStep {
    pub i: usize,
    pub j: usize,
    pub group: Group,
}

/// Causal mask `[out_ch, C, k, k]` for `which_group` (1 or 2).
pub fn build_mask<T: Real>(spec: &GroupSpec, which_group: u8, out_ch: usize) -> Result<Tensor<T>> {
    let group = Group::try_from(which_group)?;
    let (c, k) = (spec.total_channels, spec.kernel);
    let center = k / 2;
    if out_ch == 0 {
        return Err(Error::InvalidArgument("mask needs at least one output channel".into()));
    }
    let mut mask = Tensor::zeros(&[out_ch, c, k, k]);
    for o in 0..out_ch {
        for i in 0..c {
            for ky in 0..k {
                for kx in 0..k {
                    let before = ky < center || (ky == center && kx < center);
                    let at_center = ky == center && kx == center;
                    let on = before || (at_center && group == Group::Second && i < spec.split);
                    if on {
                        mask.data_mut()[((o * c + i) * k + ky) * k + kx] = T::one();
                    }
                }
            }
        }
    }
    Ok(mask)
}

/// Masks for both groups' context convolutions.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextMasks<T = f32> {
    pub first: Tensor<T>,
    pub second: Tensor<T>,
}

impl<T: Real> ContextMasks<T> {
    pub fn new(spec: &GroupSpec, out_first: usize, out_second: usize) -> Result<Self> {
        Ok(Self {
            first: build_mask(spec, 1, out_first)?,
            second: build_mask(spec, 2, out_second)?,
        })
    }

    pub fn get(&self, group: Group) -> &Tensor<T> {
        match group {
            Group::First => &self.first,
            Group::Second => &self.second,
        }
    }
}

fn check_context_weights<T: Real>(w: &ConvWeights<T>, spec: &GroupSpec) -> Result<()> {
    w.validate()?;
    let k = spec.kernel;
    if w.in_channels() != spec.total_channels || w.kernel_size() != (k, k) {
        return Err(shape_err(
            "context weights",
            format!(
                "kernel {:?} does not match C = {} and k = {k}",
                w.kernel.shape(),
                spec.total_channels
            ),
        ));
    }
    if w.stride != 1 || w.pad != k / 2 {
        return Err(Error::InvalidArgument(format!(
            "context conv needs stride 1 and pad {}, got stride {} pad {}",
            k / 2,
            w.stride,
            w.pad
        )));
    }
    Ok(())
}

fn check_latent<T: Real>(y_hat: &Tensor<T>, spec: &GroupSpec) -> Result<(usize, usize)> {
    let (c, h, w) = y_hat.chw()?;
    if c != spec.total_channels {
        return Err(shape_err(
            "context",
            format!("latent has {c} channels, group spec expects {}", spec.total_channels),
        ));
    }
    Ok((h, w))
}

/// Context features of both groups over a fully known latent.
pub fn context_features_encode<T: Real>(
    y_hat: &Tensor<T>,
    w1: &ConvWeights<T>,
    w2: &ConvWeights<T>,
    spec: &GroupSpec,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let masks = ContextMasks::new(spec, w1.out_channels(), w2.out_channels())?;
    context_features_encode_with_masks(y_hat, w1, w2, spec, &masks)
}

pub fn context_features_encode_with_masks<T: Real>(
    y_hat: &Tensor<T>,
    w1: &ConvWeights<T>,
    w2: &ConvWeights<T>,
    spec: &GroupSpec,
    masks: &ContextMasks<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    check_latent(y_hat, spec)?;
    check_context_weights(w1, spec)?;
    check_context_weights(w2, spec)?;
    Ok((
        masked_conv2d(y_hat, w1, &masks.first)?,
        masked_conv2d(y_hat, w2, &masks.second)?,
    ))
}

/// Raster order over positions; group 1 then group 2 at each position.
pub fn decode_schedule(h: usize, w: usize) -> Vec<DecodeStep> {
    let mut steps = Vec::with_capacity(2 * h * w);
    for i in 0..h {
        for j in 0..w {
            steps.push(DecodeStep { i, j, group: Group::First });
            steps.push(DecodeStep { i, j, group: Group::Second });
        }
    }
    steps
}

/// Context feature vector at the step's position, reading only mask-permitted taps
/// of a partially decoded latent.
pub fn context_features_decode_step<T: Real>(
    partial: &Tensor<T>,
    step: DecodeStep,
    w: &ConvWeights<T>,
    spec: &GroupSpec,
) -> Result<Vec<T>> {
    let mask = build_mask(spec, step.group.number(), w.out_channels())?;
    context_features_decode_step_with_mask(partial, step, w, spec, &mask)
}

pub fn context_features_decode_step_with_mask<T: Real>(
    partial: &Tensor<T>,
    step: DecodeStep,
    w: &ConvWeights<T>,
    spec: &GroupSpec,
    mask: &Tensor<T>,
) -> Result<Vec<T>> {
    let (h, wd) = check_latent(partial, spec)?;
    check_context_weights(w, spec)?;
    if step.i >= h || step.j >= wd {
        return Err(Error::InvalidArgument(format!(
            "decode step ({}, {}) outside {h}x{wd} latent",
            step.i, step.j
        )));
    }
    Ok((0..w.out_channels())
        .map(|o| {
            conv_at(
                partial,
                &w.kernel,
                &w.bias,
                Some(mask),
                1,
                w.pad,
                o,
                step.i,
                step.j,
            )
        })
        .collect())
}
