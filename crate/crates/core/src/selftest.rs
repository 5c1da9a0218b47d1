//! Embedded invariant suite behind `c3d selftest`.

use crate::codec::Codec;
use crate::context::{
    context_features_encode_with_masks, decode_schedule, ContextMasks, Group, GroupSpec,
};
use crate::error::{Error, Result};
use crate::format::{write_bitstream, HEADER_LEN};
use crate::gmm::{build_cdf, discretized_likelihood, normal_cdf, CdfTable, GmmElement, CDF_TOTAL};
use crate::metrics::{msssim, msssim_graph};
use crate::model::{ModelConfig, ToyModelWeights};
use crate::rangecoder::{rc_decode, rc_encode};
use crate::tensor::{grad_check, ConvWeights, RngState, Tensor, LATENT_MAX};
use crate::train::padded_loss;

#[derive(Clone, Debug, PartialEq)]
pub struct PropertyResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Fault injection for mutation-testing the suite itself.
#[doc(hidden)]
#[derive(Clone, Copy, Debug, Default)]
pub struct Hooks {
    /// Opens the centre tap of the group-1 context mask.
    pub corrupt_mask: bool,
}

type Check = fn(&Hooks) -> Result<String>;

const PROPERTIES: &[(&str, Check)] = &[
    ("cdf_tables_valid", cdf_tables_valid),
    ("gmm_normalization", gmm_normalization),
    ("range_coder_round_trip", range_coder_round_trip),
    ("causality_spatial", causality_spatial),
    ("causality_group1_same_position", causality_group1),
    ("causality_group2_same_position", causality_group2),
    ("grad_conv2d", grad_conv),
    ("grad_masked_conv2d", grad_masked_conv),
    ("grad_rate_noise_proxy", grad_rate),
    ("grad_msssim", grad_msssim),
    ("msssim_identity", msssim_identity),
    ("padded_loss_arithmetic", padded_loss_arithmetic),
    ("bitstream_header_size", header_size),
    ("codec_round_trip", codec_round_trip),
];

pub fn property_names() -> Vec<&'static str> {
    PROPERTIES.iter().map(|(n, _)| *n).collect()
}

pub fn run() -> Vec<PropertyResult> {
    run_with(&Hooks::default())
}

#[doc(hidden)]
pub fn run_with(hooks: &Hooks) -> Vec<PropertyResult> {
    PROPERTIES
        .iter()
        .map(|(name, check)| match check(hooks) {
            Ok(detail) => PropertyResult { name, passed: true, detail },
            Err(e) => PropertyResult { name, passed: false, detail: e.to_string() },
        })
        .collect()
}

fn fail(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn random(shape: &[usize], r: &mut RngState, lo: f64, hi: f64) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| r.uniform(lo, hi))
}

fn random_gmm(r: &mut RngState) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let raw: Vec<f64> = (0..3).map(|_| r.uniform(0.05, 1.0)).collect();
    let s: f64 = raw.iter().sum();
    let weights = raw.iter().map(|v| v / s).collect();
    let means = (0..3).map(|_| r.uniform(-64.0, 64.0)).collect();
    let scales = (0..3).map(|_| r.uniform(0.05, 20.0)).collect();
    (weights, means, scales)
}

fn cdf_tables_valid(_: &Hooks) -> Result<String> {
    let mut r = RngState::new(11);
    for _ in 0..200 {
        let (w, m, s) = random_gmm(&mut r);
        let t = build_cdf(GmmElement { weights: &w, means: &m, scales: &s });
        let cum = t.cum();
        if cum[0] != 0 || *cum.last().unwrap() != CDF_TOTAL {
            return Err(fail("table endpoints wrong"));
        }
        if cum.windows(2).any(|p| p[1] <= p[0]) {
            return Err(fail("table not strictly increasing"));
        }
    }
    Ok("200 random tables".into())
}

fn gmm_normalization(_: &Hooks) -> Result<String> {
    let mut r = RngState::new(12);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let (w, m, s) = random_gmm(&mut r);
        let mut total = 0.0;
        for v in -LATENT_MAX..=LATENT_MAX {
            total += discretized_likelihood(v as f64, GmmElement { weights: &w, means: &m, scales: &s })?;
        }
        if !(0.9999..=1.0 + 1e-6).contains(&total) {
            return Err(fail(format!("mass sums to {total}")));
        }
        worst = worst.max((total - 1.0).abs());
    }
    let centre = normal_cdf(0.5) - normal_cdf(-0.5);
    if (centre - 0.382_924_922_548_026).abs() > 1e-6 {
        return Err(fail(format!("centre bin {centre}")));
    }
    Ok(format!("max |sum - 1| = {worst:.2e}"))
}

fn range_coder_round_trip(_: &Hooks) -> Result<String> {
    let mut r = RngState::new(13);
    let tables: Vec<CdfTable> = (0..8)
        .map(|_| {
            let (w, m, s) = random_gmm(&mut r);
            build_cdf(GmmElement { weights: &w, means: &m, scales: &s })
        })
        .collect();
    let n = 2000;
    let picks: Vec<usize> = (0..n).map(|_| r.below(8) as usize).collect();
    let symbols: Vec<i32> = (0..n)
        .map(|_| r.below(2 * LATENT_MAX as u64 + 1) as i32 - LATENT_MAX)
        .collect();
    let bytes = rc_encode(symbols.iter().zip(&picks).map(|(&s, &p)| (s, &tables[p])))?;
    let back = rc_decode(&bytes, |i, _| Ok(tables[picks[i]].clone()), n)?;
    if back != symbols {
        return Err(fail("decoded symbols differ"));
    }
    Ok(format!("{n} symbols in {} bytes", bytes.len()))
}

// Context causality on a 6x6 latent. `forbidden(c, y, x)` marks elements that
// must not influence the features at (i, j) for `group`.
fn causality_trials(
    hooks: &Hooks,
    seed: u64,
    groups: &[Group],
    forbidden: fn(&GroupSpec, Group, usize, usize, usize, usize, usize) -> bool,
) -> Result<String> {
    let spec = GroupSpec::new(8, 4, 5)?;
    let mut r = RngState::new(seed);
    let w1 = ConvWeights::new(random(&[6, 8, 5, 5], &mut r, -1.0, 1.0), random(&[6], &mut r, -1.0, 1.0), 1, 2)?;
    let w2 = ConvWeights::new(random(&[6, 8, 5, 5], &mut r, -1.0, 1.0), random(&[6], &mut r, -1.0, 1.0), 1, 2)?;
    let mut masks = ContextMasks::<f64>::new(&spec, 6, 6)?;
    if hooks.corrupt_mask {
        let m = &mut masks.first;
        for o in 0..6 {
            for c in 0..8 {
                m.data_mut()[((o * 8 + c) * 5 + 2) * 5 + 2] = 1.0;
            }
        }
    }
    let trials = 100;
    for t in 0..trials {
        let clean = random(&[8, 6, 6], &mut r, -5.0, 5.0).map(f64::round);
        let (i, j) = (r.below(6) as usize, r.below(6) as usize);
        let group = groups[t % groups.len()];
        let (f1, f2) = context_features_encode_with_masks(&clean, &w1, &w2, &spec, &masks)?;
        let mut poisoned = clean.clone();
        let mut shifted = clean.clone();
        for c in 0..8 {
            for y in 0..6 {
                for x in 0..6 {
                    if forbidden(&spec, group, c, y, x, i, j) {
                        poisoned.set3(c, y, x, f64::NAN);
                        shifted.set3(c, y, x, clean.at3(c, y, x) + r.uniform(-9.0, 9.0));
                    }
                }
            }
        }
        let reference = if group == Group::First { &f1 } else { &f2 };
        for probe in [&poisoned, &shifted] {
            let (p1, p2) = context_features_encode_with_masks(probe, &w1, &w2, &spec, &masks)?;
            let got = if group == Group::First { &p1 } else { &p2 };
            for o in 0..6 {
                let (a, b) = (reference.at3(o, i, j), got.at3(o, i, j));
                if a.to_bits() != b.to_bits() {
                    return Err(fail(format!(
                        "trial {t}: group {} feature {o} at ({i},{j}) reads a forbidden element",
                        group.number()
                    )));
                }
            }
        }
    }
    Ok(format!("{trials} trials, 0 violations"))
}

fn later(y: usize, x: usize, i: usize, j: usize) -> bool {
    (y, x) > (i, j)
}

fn causality_spatial(hooks: &Hooks) -> Result<String> {
    causality_trials(hooks, 21, &[Group::First, Group::Second], |_, _, _, y, x, i, j| later(y, x, i, j))
}

fn causality_group1(hooks: &Hooks) -> Result<String> {
    causality_trials(hooks, 22, &[Group::First], |_, _, _, y, x, i, j| (y, x) >= (i, j))
}

fn causality_group2(hooks: &Hooks) -> Result<String> {
    causality_trials(hooks, 23, &[Group::Second], |spec, _, c, y, x, i, j| {
        later(y, x, i, j) || ((y, x) == (i, j) && c >= spec.split())
    })
}

fn within(err: f64, what: &str) -> Result<String> {
    if err < 1e-3 {
        Ok(format!("max rel err {err:.2e}"))
    } else {
        Err(fail(format!("{what}: relative error {err:.3e}")))
    }
}

fn grad_conv(_: &Hooks) -> Result<String> {
    let mut r = RngState::new(31);
    let x = random(&[2, 6, 5], &mut r, -1.0, 1.0);
    let k = random(&[3, 2, 3, 3], &mut r, -1.0, 1.0);
    let b = random(&[3], &mut r, -1.0, 1.0);
    let err = grad_check(
        |g, x| {
            let (k, b) = (g.leaf(k.clone()), g.leaf(b.clone()));
            let y = g.conv2d(x, k, b, 2, 1)?;
            let a = g.leaky_relu(y, 0.2)?;
            let sq = g.mul(a, a)?;
            Ok(g.mean(sq))
        },
        &x,
        1e-4,
    )?;
    within(err, "conv2d")
}

fn grad_masked_conv(_: &Hooks) -> Result<String> {
    let spec = GroupSpec::new(4, 2, 5)?;
    let masks = ContextMasks::<f64>::new(&spec, 3, 3)?;
    let mut r = RngState::new(32);
    let x = random(&[4, 5, 5], &mut r, -1.0, 1.0);
    let k = random(&[3, 4, 5, 5], &mut r, -1.0, 1.0);
    let b = random(&[3], &mut r, -1.0, 1.0);
    let err = grad_check(
        |g, x| {
            let (kv, bv) = (g.leaf(k.clone()), g.leaf(b.clone()));
            let y = g.masked_conv2d(x, kv, bv, 2, &masks.second)?;
            let sq = g.mul(y, y)?;
            Ok(g.sum(sq))
        },
        &x,
        1e-4,
    )?;
    within(err, "masked_conv2d")
}

fn grad_rate(_: &Hooks) -> Result<String> {
    let mut r = RngState::new(33);
    let y = random(&[2, 3, 3], &mut r, -3.0, 3.0);
    let noise = random(&[2, 3, 3], &mut r, -0.5, 0.5);
    let head = random(&[18, 3, 3], &mut r, -1.0, 1.0);
    let err = grad_check(
        |g, y| {
            let u = g.leaf(noise.clone());
            let h = g.leaf(head.clone());
            let v = g.add(y, u)?;
            g.gmm_rate_bits(v, h, 3)
        },
        &y,
        1e-4,
    )?;
    within(err, "rate_bits")
}

fn grad_msssim(_: &Hooks) -> Result<String> {
    let mut r = RngState::new(34);
    let a = random(&[1, 24, 24], &mut r, 0.0, 1.0);
    let b = a.map(|v| (v + 0.2 * (v * 17.0).sin()).clamp(0.0, 1.0));
    let err = grad_check(
        |g, x| {
            let t = g.leaf(a.clone());
            msssim_graph(g, t, x, 2)
        },
        &b,
        1e-3,
    )?;
    within(err, "msssim")
}

fn msssim_identity(_: &Hooks) -> Result<String> {
    let mut r = RngState::new(35);
    let a = random(&[3, 32, 40], &mut r, 0.0, 1.0);
    let v = msssim(&a, &a, 2)?;
    if v != 1.0 {
        return Err(fail(format!("msssim(a, a) = {v}")));
    }
    Ok("msssim(a, a) = 1".into())
}

fn padded_loss_arithmetic(_: &Hooks) -> Result<String> {
    let x = Tensor::<f64>::full(&[1, 3, 32, 32], 0.5);
    let rep = padded_loss(&x, &x, 1024.0, 16, 16, 16.0)?;
    if rep.rate_bpp != 4.0 || rep.distortion != 0.0 || rep.total != 4.0 {
        return Err(fail(format!("got rate {} total {}", rep.rate_bpp, rep.total)));
    }
    Ok("1024 bits over 16x16 = 4.0 bpp".into())
}

fn header_size(_: &Hooks) -> Result<String> {
    let b = write_bitstream(5, 7, 0xDEAD_BEEF, &[], &[])?;
    if b.len() != HEADER_LEN || HEADER_LEN != 29 {
        return Err(fail(format!("empty bitstream is {} bytes", b.len())));
    }
    Ok("29 bytes".into())
}

fn codec_round_trip(_: &Hooks) -> Result<String> {
    let weights = ToyModelWeights::generate(ModelConfig::default(), 5)?;
    let codec = Codec::new(&weights)?;
    let mut r = RngState::new(36);
    let img = Tensor::from_fn(&[3, 13, 10], |_| r.next_f64() as f32);
    let enc = codec.encode(&img)?;
    let dec = codec.decode(&enc.bitstream)?;
    if !dec.y_hat.bit_eq(&enc.y_hat) || !dec.image.bit_eq(&enc.reconstruction) {
        return Err(fail("decoded latent or image differs from the encoder's"));
    }
    let steps = decode_schedule(dec.y_hat.shape()[1], dec.y_hat.shape()[2]).len();
    Ok(format!("{steps} decode steps, {} bytes", enc.bitstream.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_pass_and_at_least_eight() {
        let results = run();
        assert!(results.len() >= 8);
        for r in &results {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }

    #[test]
    fn corrupted_mask_trips_causality() {
        let results = run_with(&Hooks { corrupt_mask: true });
        let g1 = results.iter().find(|r| r.name == "causality_group1_same_position").unwrap();
        assert!(!g1.passed);
        assert!(g1.detail.contains("forbidden"), "{}", g1.detail);
        let others = results.iter().filter(|r| !r.name.starts_with("causality")).all(|r| r.passed);
        assert!(others);
    }
}
