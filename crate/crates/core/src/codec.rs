//! Encoder and decoder.
//!
//! Coding order inside the container: all `ẑ` symbols in channel-major raster
//! order under the per-channel hyper prior, then `ŷ` following
//! [`decode_schedule`]: at each position, the group-1 channels and then the
//! group-2 channels. Each `ŷ` symbol's table is built just in time from the
//! context features at that position, the hyper features `f2`, and the group's
//! RPE stack. Encoder and decoder compute these with the same per-position code,
//! so the tables agree bit for bit.

use crate::context::{decode_schedule, ContextMasks, DecodeStep, Group, GroupSpec, context_features_decode_step_with_mask};
use crate::error::{Error, Result};
use crate::format::{fnv1a64, read_bitstream, write_bitstream, write_weights};
use crate::gmm::{build_cdf, discretized_likelihood, CdfTable, GmmParams};
use crate::metrics::MetricReport;
use crate::model::{analysis_transform, hyper_decode, hyper_encode, rpe_head, synthesis_transform, z_prior_params, RpeStack, ToyModelWeights};
use crate::rangecoder::{RangeDecoder, RangeEncoder};
use crate::tensor::{quantize_round, ConvWeights, Tensor, LATENT_MAX};
use crate::train::pad_to_multiple;

/// FNV-1a 64 of the serialized weights; stored in every bitstream header.
pub fn model_hash(weights: &ToyModelWeights) -> u64 {
    fnv1a64(&write_weights(weights))
}

#[derive(Clone, Debug)]
pub struct EncodeResult {
    pub bitstream: Vec<u8>,
    /// `Σ −log2 P` over every coded `ẑ` and `ŷ` symbol.
    pub estimated_bits: f64,
    /// `8 ·` (z payload + y payload) bytes; the header is excluded.
    pub actual_bits: u64,
    pub reconstruction: Tensor<f32>,
    /// Computed on the original dims; `bpp` counts the whole bitstream.
    pub metrics: MetricReport,
    pub y_hat: Tensor<f32>,
    pub z_hat: Tensor<f32>,
}

#[derive(Clone, Debug)]
pub struct Decoded {
    pub image: Tensor<f32>,
    pub width: usize,
    pub height: usize,
    pub y_hat: Tensor<f32>,
    pub z_hat: Tensor<f32>,
}

/// Everything derived from the weights that both directions need.
pub struct Codec<'w> {
    weights: &'w ToyModelWeights,
    hash: u64,
    spec: GroupSpec,
    masks: ContextMasks<f32>,
    ctx: [ConvWeights<f32>; 2],
    rpe: [RpeStack<f32>; 2],
}

impl<'w> Codec<'w> {
    pub fn new(weights: &'w ToyModelWeights) -> Result<Self> {
        let cfg = weights.config();
        let spec = cfg.group_spec()?;
        let ctx = [weights.layer("ctx1")?, weights.layer("ctx2")?];
        let masks = ContextMasks::new(&spec, ctx[0].out_channels(), ctx[1].out_channels())?;
        Ok(Self {
            weights,
            hash: model_hash(weights),
            spec,
            masks,
            ctx,
            rpe: [weights.rpe_stack(Group::First)?, weights.rpe_stack(Group::Second)?],
        })
    }

    pub fn hash(&self) -> u64 {
        self.hash
    }

    fn group_index(g: Group) -> usize {
        match g {
            Group::First => 0,
            Group::Second => 1,
        }
    }

    /// Mixture parameters for the channels of `step.group` at `(step.i, step.j)`,
    /// reading only mask-permitted entries of `y_hat`.
    fn step_params(&self, y_hat: &Tensor<f32>, f2: &Tensor<f32>, step: DecodeStep) -> Result<GmmParams> {
        let gi = Self::group_index(step.group);
        let f1 = context_features_decode_step_with_mask(
            y_hat,
            step,
            &self.ctx[gi],
            &self.spec,
            self.masks.get(step.group),
        )?;
        let f1 = Tensor::new(vec![f1.len(), 1, 1], f1)?;
        let nf2 = f2.shape()[0];
        let f2_col = Tensor::from_fn(&[nf2, 1, 1], |c| f2.at3(c, step.i, step.j));
        let head = rpe_head(&f1, &f2_col, &self.rpe[gi])?;
        GmmParams::from_head(&head, self.weights.config().mixtures)
    }

    fn z_tables(&self, h: usize, w: usize) -> Result<(GmmParams, Vec<CdfTable>)> {
        let prior = z_prior_params(self.weights, h, w)?;
        let m = self.weights.config().hyper_channels;
        let tables = (0..m).map(|c| build_cdf(prior.element_at(c, 0, 0))).collect();
        Ok((prior, tables))
    }

    pub fn encode(&self, image: &Tensor<f32>) -> Result<EncodeResult> {
        let (c, height, width) = image.chw()?;
        if c != 3 {
            return Err(crate::error::shape_err("encode", format!("image has {c} channels, expected 3")));
        }
        if let Some(i) = image.data().iter().position(|v| !v.is_finite()) {
            return Err(Error::NanInput(i));
        }
        let cfg = self.weights.config();
        let (padded, _, _) = pad_to_multiple(image, cfg.alignment())?;

        let y = analysis_transform(&padded, self.weights)?;
        let clipped = y.data().iter().filter(|v| v.abs() > LATENT_MAX as f32 + 0.5).count();
        if clipped > 0 {
            log::warn!("{clipped} latent values saturate at ±{LATENT_MAX}");
        }
        let y_hat = quantize_round(&y)?;
        let z_hat = quantize_round(&hyper_encode(&y, self.weights)?)?;
        let (_, zh, zw) = z_hat.chw()?;

        let mut estimated = 0.0;
        let (prior, z_tables) = self.z_tables(zh, zw)?;
        let mut enc = RangeEncoder::new();
        for (e, &v) in z_hat.data().iter().enumerate() {
            estimated -= discretized_likelihood(v as f64, prior.element(e))?.log2();
            enc.encode(v as i32, &z_tables[e / (zh * zw)])?;
        }
        let z_bytes = enc.finish();

        let f2 = hyper_decode(&z_hat, self.weights)?;
        let (_, h, w) = y_hat.chw()?;
        let mut enc = RangeEncoder::new();
        for step in decode_schedule(h, w) {
            let params = self.step_params(&y_hat, &f2, step)?;
            let (c0, n) = self.spec.channels(step.group);
            for k in 0..n {
                let v = y_hat.at3(c0 + k, step.i, step.j);
                let elem = params.element(k);
                estimated -= discretized_likelihood(v as f64, elem)?.log2();
                enc.encode(v as i32, &build_cdf(elem))?;
            }
        }
        let y_bytes = enc.finish();

        let bitstream = write_bitstream(width as u32, height as u32, self.hash, &z_bytes, &y_bytes)?;
        let reconstruction = synthesis_transform(&y_hat, self.weights)?.crop(height, width)?;
        let metrics = MetricReport::compute(image, &reconstruction, bitstream.len())?;
        Ok(EncodeResult {
            actual_bits: 8 * (z_bytes.len() + y_bytes.len()) as u64,
            bitstream,
            estimated_bits: estimated,
            reconstruction,
            metrics,
            y_hat,
            z_hat,
        })
    }

    pub fn decode(&self, bitstream: &[u8]) -> Result<Decoded> {
        let (header, z_bytes, y_bytes) = read_bitstream(bitstream)?;
        if header.model_hash != self.hash {
            return Err(Error::HashMismatch {
                expected: header.model_hash,
                found: self.hash,
            });
        }
        let cfg = self.weights.config();
        let (width, height) = (header.width as usize, header.height as usize);
        let a = cfg.alignment();
        let (ph, pw) = (height.div_ceil(a) * a, width.div_ceil(a) * a);
        let (h, w) = (ph / 4, pw / 4);
        let (zh, zw) = (h / 2, w / 2);

        let (_, z_tables) = self.z_tables(zh, zw)?;
        let mut dec = RangeDecoder::new(z_bytes)?;
        let mut z_hat = Tensor::zeros(&[cfg.hyper_channels, zh, zw]);
        for e in 0..z_hat.len() {
            z_hat.data_mut()[e] = dec.decode(&z_tables[e / (zh * zw)])? as f32;
        }
        dec.finish()?;

        let f2 = hyper_decode(&z_hat, self.weights)?;
        let mut y_hat = Tensor::zeros(&[cfg.latent_channels, h, w]);
        let mut dec = RangeDecoder::new(y_bytes)?;
        for step in decode_schedule(h, w) {
            let params = self.step_params(&y_hat, &f2, step)?;
            let (c0, n) = self.spec.channels(step.group);
            for k in 0..n {
                let s = dec.decode(&build_cdf(params.element(k)))?;
                y_hat.set3(c0 + k, step.i, step.j, s as f32);
            }
        }
        dec.finish()?;

        let image = synthesis_transform(&y_hat, self.weights)?.crop(height, width)?;
        Ok(Decoded {
            image,
            width,
            height,
            y_hat,
            z_hat,
        })
    }
}

pub fn encode(image: &Tensor<f32>, weights: &ToyModelWeights) -> Result<EncodeResult> {
    Codec::new(weights)?.encode(image)
}

pub fn decode(bitstream: &[u8], weights: &ToyModelWeights) -> Result<Decoded> {
    Codec::new(weights)?.decode(bitstream)
}
