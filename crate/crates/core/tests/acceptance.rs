//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always show up in the test log.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::time::{Duration, Instant};

use c3d_core::codec::{Codec, EncodeResult};
use c3d_core::context::{
    build_mask, context_features_decode_step, context_features_encode, DecodeStep, Group, GroupSpec,
};
use c3d_core::format::{read_bitstream, read_weights, write_weights, BitstreamHeader, HEADER_LEN};
use c3d_core::gmm::{discretized_likelihood, normal_cdf, GmmElement};
use c3d_core::metrics::{msssim, msssim_graph, report_msssim, report_scales};
use c3d_core::model::{graph_fns, hyper_decode, rpe_forward, z_prior_params, ModelConfig, ParamVars, ToyModelWeights};
use c3d_core::ppm;
use c3d_core::tensor::{grad_check, LATENT_MAX};
use c3d_core::train::{padded_loss, standard_loss, synthetic_image, train, TrainConfig, TrainData};
use c3d_core::{ConvWeights, RngState, Tensor};
use common::{compensated_sum, msssim_oracle, random_image, read_fixture};

type Outcome = Result<String, String>;

const CORPUS_SEED: u64 = 2024;
const WEIGHT_SEED: u64 = 7;
// Pinned after the first verification run; see the README.
const TRAIN_SEED: u64 = 2;
const TRAIN_STEPS: usize = 200;
const LAMBDA: f64 = 16.0;

struct Corpus {
    weights: ToyModelWeights,
    images: Vec<Tensor<f32>>,
    encoded: Vec<EncodeResult>,
    elapsed: Duration,
}

fn corpus() -> Result<Corpus, String> {
    let weights = ToyModelWeights::generate(ModelConfig::default(), WEIGHT_SEED).map_err(|e| e.to_string())?;
    let codec = Codec::new(&weights).map_err(|e| e.to_string())?;
    let mut r = RngState::new(CORPUS_SEED);
    let mut images = Vec::new();
    // corners of the size range first, then random sizes (mostly non-aligned)
    let mut sizes = vec![(8, 8), (24, 40), (8, 40), (24, 8), (9, 13), (23, 39)];
    while sizes.len() < 50 {
        sizes.push((8 + r.below(17) as usize, 8 + r.below(33) as usize));
    }
    for (i, &(h, w)) in sizes.iter().enumerate() {
        images.push(if i % 2 == 0 { random_image(&mut r, h, w) } else { synthetic_image(&mut r, h, w) });
    }
    let start = Instant::now();
    let mut encoded = Vec::new();
    for img in &images {
        encoded.push(codec.encode(img).map_err(|e| e.to_string())?);
    }
    Ok(Corpus { weights, images, encoded, elapsed: start.elapsed() })
}

fn c1_round_trip(c: &Corpus) -> Outcome {
    let codec = Codec::new(&c.weights).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let mut failures = Vec::new();
    for (i, (img, enc)) in c.images.iter().zip(&c.encoded).enumerate() {
        match codec.decode(&enc.bitstream) {
            Ok(dec) => {
                let dims = (dec.height, dec.width) == (img.shape()[1], img.shape()[2]);
                if !dims || !dec.y_hat.bit_eq(&enc.y_hat) || !dec.image.bit_eq(&enc.reconstruction) {
                    failures.push(i);
                }
            }
            Err(_) => failures.push(i),
        }
    }
    let total = c.elapsed + start.elapsed();
    if !failures.is_empty() {
        return Err(format!("images {failures:?} did not round-trip"));
    }
    if total > Duration::from_secs(60) {
        return Err(format!("took {total:?}"));
    }
    Ok(format!("50/50 bitwise (y_hat and x_hat), {:.2}s", total.as_secs_f64()))
}

/// Cross-entropy recomputed over the whole latent at once (encode-form masked
/// convolutions), independent of the sequential per-step path.
fn independent_bits(weights: &ToyModelWeights, enc: &EncodeResult) -> Result<f64, String> {
    let e = |x: c3d_core::Error| x.to_string();
    let cfg = weights.config();
    let spec = cfg.group_spec().map_err(e)?;
    let y = &enc.y_hat;
    let z = &enc.z_hat;
    let (_, zh, zw) = z.chw().map_err(e)?;
    let mut terms = Vec::new();
    let prior = z_prior_params(weights, zh, zw).map_err(e)?;
    for (i, &v) in z.data().iter().enumerate() {
        terms.push(-discretized_likelihood(v as f64, prior.element(i)).map_err(e)?.log2());
    }
    let f2 = hyper_decode(z, weights).map_err(e)?;
    let (c1, c2) = (weights.layer::<f32>("ctx1").map_err(e)?, weights.layer::<f32>("ctx2").map_err(e)?);
    let (g1, g2) = context_features_encode(y, &c1, &c2, &spec).map_err(e)?;
    let (_, h, w) = y.chw().map_err(e)?;
    for (group, feats) in [(Group::First, &g1), (Group::Second, &g2)] {
        let stack = weights.rpe_stack::<f32>(group).map_err(e)?;
        let (c0, n) = spec.channels(group);
        let params = rpe_forward(feats, &f2, n, cfg.mixtures, &stack).map_err(e)?;
        for k in 0..n {
            for i in 0..h {
                for j in 0..w {
                    let v = y.at3(c0 + k, i, j) as f64;
                    terms.push(-discretized_likelihood(v, params.element_at(k, i, j)).map_err(e)?.log2());
                }
            }
        }
    }
    Ok(compensated_sum(terms))
}

fn c2_rate_tightness(c: &Corpus) -> Outcome {
    let mut worst_ratio: f64 = 0.0;
    let mut worst_rel: f64 = 0.0;
    for (i, enc) in c.encoded.iter().enumerate() {
        let bound = enc.estimated_bits * 1.02 + 512.0;
        if enc.actual_bits as f64 > bound {
            return Err(format!("image {i}: {} bits > bound {bound:.1}", enc.actual_bits));
        }
        worst_ratio = worst_ratio.max(enc.actual_bits as f64 / enc.estimated_bits.max(1.0));
        let independent = independent_bits(&c.weights, enc)?;
        let rel = (independent - enc.estimated_bits).abs() / independent.max(1e-12);
        if rel > 1e-6 {
            return Err(format!(
                "image {i}: estimated {} vs independent {independent} (rel {rel:.2e})",
                enc.estimated_bits
            ));
        }
        worst_rel = worst_rel.max(rel);
    }
    Ok(format!("max actual/estimated {worst_ratio:.4}, max estimate rel diff {worst_rel:.1e}"))
}

fn c3_causality() -> Outcome {
    let weights = ToyModelWeights::generate(ModelConfig::default(), WEIGHT_SEED).map_err(|e| e.to_string())?;
    let cfg = weights.config();
    let spec = cfg.group_spec().map_err(|e| e.to_string())?;
    let ctx: Vec<ConvWeights<f64>> = ["ctx1", "ctx2"]
        .iter()
        .map(|n| weights.layer::<f64>(n).unwrap())
        .collect();
    let c = spec.total_channels();
    let mut r = RngState::new(303);
    let mut violations = 0;
    let mut checks = 0;
    let mut g2_uses_g1 = 0;
    for _ in 0..100 {
        let clean = Tensor::<f64>::from_fn(&[c, 6, 6], |_| r.below(21) as f64 - 10.0);
        let (i, j) = (r.below(6) as usize, r.below(6) as usize);
        for group in [Group::First, Group::Second] {
            let w = &ctx[group.number() as usize - 1];
            let step = DecodeStep { i, j, group };
            let reference = context_features_decode_step(&clean, step, w, &spec).unwrap();
            // (a) later positions, (b)/(c) same-position channels per group
            let spatial = |_: usize, y: usize, x: usize| (y, x) > (i, j);
            let same_pos = |ch: usize, y: usize, x: usize| {
                (y, x) == (i, j) && (group == Group::First || ch >= spec.split())
            };
            let probes: [&dyn Fn(usize, usize, usize) -> bool; 2] = [&spatial, &same_pos];
            for forbidden in probes {
                for poison in [true, false] {
                    let mut t = clean.clone();
                    for ch in 0..c {
                        for y in 0..6 {
                            for x in 0..6 {
                                if forbidden(ch, y, x) {
                                    let v = if poison { f64::NAN } else { clean.at3(ch, y, x) + r.uniform(1.0, 50.0) };
                                    t.set3(ch, y, x, v);
                                }
                            }
                        }
                    }
                    let got = context_features_decode_step(&t, step, w, &spec).unwrap();
                    let (enc1, enc2) = context_features_encode(&t, &ctx[0], &ctx[1], &spec).unwrap();
                    let full = if group == Group::First { enc1 } else { enc2 };
                    checks += 1;
                    let same = got.iter().zip(&reference).all(|(a, b)| a.to_bits() == b.to_bits())
                        && (0..got.len()).all(|o| full.at3(o, i, j).to_bits() == reference[o].to_bits());
                    if !same {
                        violations += 1;
                    }
                }
            }
            if group == Group::Second {
                let mut t = clean.clone();
                for ch in 0..spec.split() {
                    t.set3(ch, i, j, clean.at3(ch, i, j) + 7.0);
                }
                let got = context_features_decode_step(&t, step, w, &spec).unwrap();
                if got != reference {
                    g2_uses_g1 += 1;
                }
            }
        }
    }
    // the mask itself: group 1 sees no centre tap, group 2 sees only group-1 channels there
    let k = spec.kernel();
    let m1 = build_mask::<f64>(&spec, 1, 1).unwrap();
    let m2 = build_mask::<f64>(&spec, 2, 1).unwrap();
    let centre = |m: &Tensor<f64>, ch: usize| m.data()[(ch * k + k / 2) * k + k / 2];
    for ch in 0..c {
        if centre(&m1, ch) != 0.0 || centre(&m2, ch) != f64::from(u8::from(ch < spec.split())) {
            violations += 1;
        }
    }
    if violations > 0 {
        return Err(format!("{violations} violations in {checks} checks"));
    }
    Ok(format!(
        "0 violations in {checks} checks over 100 trials; group 2 reads same-position group 1 in {g2_uses_g1}/100"
    ))
}

// erf by its Maclaurin series, summed until terms vanish.
fn erf_series(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    while term.abs() > 1e-20 {
        n += 1.0;
        term *= -x * x / n;
        sum += term / (2.0 * n + 1.0);
    }
    sum * 2.0 / std::f64::consts::PI.sqrt()
}

fn c4_gmm_normalization() -> Outcome {
    let mut r = RngState::new(404);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for d in 0..1000 {
        let raw: Vec<f64> = (0..3).map(|_| r.uniform(1e-3, 1.0)).collect();
        let s: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|v| v / s).collect();
        let means: Vec<f64> = (0..3).map(|_| r.uniform(-64.0, 64.0)).collect();
        let scales: Vec<f64> = (0..3).map(|_| r.uniform(0.05, 20.0)).collect();
        let p = GmmElement { weights: &weights, means: &means, scales: &scales };
        let total = compensated_sum((-LATENT_MAX..=LATENT_MAX).map(|v| discretized_likelihood(v as f64, p).unwrap()));
        if !(0.9999..=1.0 + 1e-6).contains(&total) {
            return Err(format!("draw {d}: sum {total}"));
        }
        lo = lo.min(total);
        hi = hi.max(total);
    }
    let oracle = erf_series(0.5 / std::f64::consts::SQRT_2);
    let ours = normal_cdf(0.5) - normal_cdf(-0.5);
    if (oracle - 0.382_925_0).abs() > 1e-6 || (ours - oracle).abs() > 1e-6 {
        return Err(format!("centre bin {ours} vs oracle {oracle}"));
    }
    Ok(format!("sums in [{lo:.9}, {hi:.9}]; centre bin {ours:.9} (oracle {oracle:.9})"))
}

fn rand64(shape: &[usize], r: &mut RngState) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| r.uniform(-1.0, 1.0))
}

fn c5_gradients() -> Outcome {
    let weights = ToyModelWeights::generate(ModelConfig::default(), WEIGHT_SEED).map_err(|e| e.to_string())?;
    let cfg = weights.config().clone();
    let spec = GroupSpec::new(4, 2, 5).unwrap();
    let mask = build_mask::<f64>(&spec, 2, 3).unwrap();
    let mut worst = [0.0f64; 6];
    let names = ["conv2d", "masked_conv2d", "leaky_relu", "rpe_stack", "rate_bits(noise)", "msssim"];
    for seed in 0..10u64 {
        let mut r = RngState::new(500 + seed);
        let x = rand64(&[2, 7, 6], &mut r);
        let k = rand64(&[3, 2, 3, 3], &mut r);
        let b = rand64(&[3], &mut r);
        let stride = 1 + (seed as usize % 2);
        let e0 = grad_check(
            |g, x| {
                let (kv, bv) = (g.leaf(k.clone()), g.leaf(b.clone()));
                let y = g.conv2d(x, kv, bv, stride, 1)?;
                let sq = g.mul(y, y)?;
                Ok(g.sum(sq))
            },
            &x,
            1e-4,
        );

        let xm = rand64(&[4, 5, 5], &mut r);
        let km = rand64(&[3, 4, 5, 5], &mut r);
        let bm = rand64(&[3], &mut r);
        let e1 = grad_check(
            |g, x| {
                let (kv, bv) = (g.leaf(km.clone()), g.leaf(bm.clone()));
                let y = g.masked_conv2d(x, kv, bv, 2, &mask)?;
                let sq = g.mul(y, y)?;
                Ok(g.sum(sq))
            },
            &xm,
            1e-4,
        );

        // keep inputs away from the kink at zero
        let xl = Tensor::from_fn(&[3, 4, 4], |_| {
            let v = r.uniform(0.05, 1.0);
            if r.next_f64() < 0.5 { -v } else { v }
        });
        let wl = rand64(&[3, 4, 4], &mut r);
        let e2 = grad_check(
            |g, x| {
                let a = g.leaky_relu(x, 0.2)?;
                let w = g.leaf(wl.clone());
                let p = g.mul(a, w)?;
                Ok(g.sum(p))
            },
            &xl,
            1e-4,
        );

        let f1 = rand64(&[cfg.context_features, 3, 3], &mut r);
        let f2 = rand64(&[cfg.hyper_features, 3, 3], &mut r);
        let group = if seed % 2 == 0 { Group::First } else { Group::Second };
        let e3 = grad_check(
            |g, x| {
                let p = ParamVars::register(g, &weights);
                let v2 = g.leaf(f2.clone());
                let head = graph_fns::rpe(g, &p, group, x, v2)?;
                let sq = g.mul(head, head)?;
                Ok(g.sum(sq))
            },
            &f1,
            1e-4,
        );

        let y = Tensor::from_fn(&[2, 3, 3], |_| r.uniform(-4.0, 4.0));
        let noise = Tensor::from_fn(&[2, 3, 3], |_| r.uniform(-0.5, 0.5));
        let head = Tensor::from_fn(&[18, 3, 3], |_| r.uniform(-1.5, 1.5));
        let e4 = grad_check(
            |g, y| {
                let u = g.leaf(noise.clone());
                let v = g.add(y, u)?;
                let h = g.leaf(head.clone());
                g.gmm_rate_bits(v, h, 3)
            },
            &y,
            1e-4,
        );

        let a = Tensor::from_fn(&[1, 24, 26], |_| r.next_f64());
        let bimg = Tensor::from_fn(&[1, 24, 26], |i| (a.data()[i] + r.uniform(-0.2, 0.2)).clamp(0.0, 1.0));
        let e5 = grad_check(
            |g, x| {
                let t = g.leaf(a.clone());
                msssim_graph(g, t, x, 2)
            },
            &bimg,
            1e-3,
        );

        for (slot, e) in [e0, e1, e2, e3, e4, e5].into_iter().enumerate() {
            let e = e.map_err(|err| format!("{} seed {seed}: {err}", names[slot]))?;
            worst[slot] = worst[slot].max(e);
        }
    }
    let summary: Vec<String> = names.iter().zip(worst).map(|(n, w)| format!("{n} {w:.1e}")).collect();
    if worst.iter().any(|&w| !(w < 1e-3)) {
        return Err(summary.join(", "));
    }
    Ok(summary.join(", "))
}

fn c6_padded_loss() -> Outcome {
    let x = Tensor::<f32>::full(&[1, 3, 32, 32], 0.25);
    let rep = padded_loss(&x, &x, 1024.0, 16, 16, LAMBDA).map_err(|e| e.to_string())?;
    if rep.rate_bpp != 4.0 {
        return Err(format!("rate_bpp {}", rep.rate_bpp));
    }
    let mut r = RngState::new(606);
    for _ in 0..5 {
        let a = Tensor::<f32>::from_fn(&[2, 3, 32, 32], |_| r.next_f64() as f32);
        let b = Tensor::<f32>::from_fn(&[2, 3, 32, 32], |_| r.next_f64() as f32);
        let bits = r.uniform(0.0, 5000.0);
        let p = padded_loss(&a, &b, bits, 0, 0, LAMBDA).map_err(|e| e.to_string())?;
        let s = standard_loss(&a, &b, bits, LAMBDA).map_err(|e| e.to_string())?;
        let same = [
            (p.rate_bpp, s.rate_bpp),
            (p.distortion, s.distortion),
            (p.total, s.total),
        ]
        .iter()
        .all(|(u, v)| u.to_bits() == v.to_bits());
        if !same {
            return Err(format!("unpadded loss {p:?} != standard {s:?}"));
        }
    }
    Ok("1024 bits / (32-16)^2 = 4.0 bpp exactly; zero padding == standard loss bitwise (5 cases)".into())
}

struct Trained {
    weights: ToyModelWeights,
    first: f64,
    last: f64,
    elapsed: Duration,
}

fn train_toy(pad: bool) -> Result<Trained, String> {
    let cfg = TrainConfig { pad_strategy: pad, ..TrainConfig::default() };
    let init = ToyModelWeights::generate(ModelConfig::default(), TRAIN_SEED).map_err(|e| e.to_string())?;
    let (mut first, mut last) = (f64::NAN, f64::NAN);
    let start = Instant::now();
    let weights = train(init, &TrainData::Synthetic, &cfg, LAMBDA, TRAIN_STEPS, TRAIN_SEED, |s, rep| {
        if s == 0 {
            first = rep.total;
        }
        last = rep.total;
    })
    .map_err(|e| e.to_string())?;
    Ok(Trained { weights, first, last, elapsed: start.elapsed() })
}

fn c7_training(on: &Result<Trained, String>) -> Outcome {
    let t = on.as_ref().map_err(Clone::clone)?;
    let detail = format!(
        "seed {TRAIN_SEED}, {TRAIN_STEPS} steps: total {:.4} -> {:.4} (ratio {:.3}), {:.1}s",
        t.first,
        t.last,
        t.last / t.first,
        t.elapsed.as_secs_f64()
    );
    if !(t.last <= 0.8 * t.first) || t.elapsed > Duration::from_secs(300) {
        return Err(detail);
    }
    Ok(detail)
}

fn c8_padding_benefit(on: &Result<Trained, String>) -> Outcome {
    let on = on.as_ref().map_err(Clone::clone)?;
    let off = train_toy(false)?;
    let (con, coff) = (
        Codec::new(&on.weights).map_err(|e| e.to_string())?,
        Codec::new(&off.weights).map_err(|e| e.to_string())?,
    );
    let mut r = RngState::new(1000 + TRAIN_SEED);
    let mut wins = 0;
    let (mut sum_on, mut sum_off) = (0.0, 0.0);
    for _ in 0..20 {
        let (mut h, mut w) = (0, 0);
        while h % 8 == 0 || w % 8 == 0 {
            h = 12 + r.below(29) as usize;
            w = 12 + r.below(29) as usize;
        }
        let img = synthetic_image(&mut r, h, w);
        // whole bitstream over the original (unpadded) pixels
        let a = con.encode(&img).map_err(|e| e.to_string())?.metrics.bpp;
        let b = coff.encode(&img).map_err(|e| e.to_string())?.metrics.bpp;
        wins += usize::from(a < b);
        sum_on += a;
        sum_off += b;
    }
    let detail = format!(
        "pad-on lower bpp on {wins}/20 images (mean {:.4} vs {:.4}); directional, seed {TRAIN_SEED}",
        sum_on / 20.0,
        sum_off / 20.0
    );
    if wins > 10 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c9_msssim_oracle() -> Outcome {
    let mut r = RngState::new(909);
    let mut worst: f64 = 0.0;
    for p in 0..10 {
        let (h, w) = if p < 3 { (48 + p * 9, 52) } else { (22 + r.below(40) as usize, 22 + r.below(40) as usize) };
        let a = Tensor::<f64>::from_fn(&[3, h, w], |_| r.next_f64());
        let amp = 0.05 + 0.1 * p as f64;
        let b = Tensor::<f64>::from_fn(&[3, h, w], |i| (a.data()[i] + r.uniform(-amp, amp)).clamp(0.0, 1.0));
        let scales = report_scales(h, w);
        let ours = msssim(&a, &b, scales).map_err(|e| e.to_string())?;
        let oracle = msssim_oracle(&a, &b, scales);
        let diff = (ours - oracle).abs();
        if !(diff <= 1e-6) {
            return Err(format!("pair {p} ({h}x{w}, {scales} scales): {ours} vs {oracle}"));
        }
        worst = worst.max(diff);
    }
    let a = random_image(&mut r, 40, 37);
    let same = [msssim(&a, &a, 2), report_msssim(&a, &a)];
    for v in same {
        let v = v.map_err(|e| e.to_string())?;
        if v != 1.0 {
            return Err(format!("identical pair gave {v}"));
        }
    }
    Ok(format!("10 pairs, max |diff| {worst:.1e}; identical pair = 1.0 exactly"))
}

fn c10_formats(c: &Corpus) -> Outcome {
    let stored = read_fixture("weights_seed7.c3dw");
    let loaded = read_weights(&stored).map_err(|e| e.to_string())?;
    if write_weights(&loaded) != stored {
        return Err("weights fixture does not re-serialize bitwise".into());
    }
    if write_weights(&c.weights) != stored {
        return Err("generated seed-7 weights differ from the fixture".into());
    }
    let stream = read_fixture("input_27x19.c3db");
    let dec = Codec::new(&loaded)
        .and_then(|codec| codec.decode(&stream))
        .map_err(|e| e.to_string())?;
    let decoded = ppm::encode_ppm(&dec.image).map_err(|e| e.to_string())?;
    if decoded != read_fixture("decoded_27x19.ppm") {
        return Err("golden bitstream no longer decodes to the golden image".into());
    }
    let input = ppm::parse_ppm(&read_fixture("input_27x19.ppm")).map_err(|e| e.to_string())?;
    let again = Codec::new(&loaded).and_then(|codec| codec.encode(&input)).map_err(|e| e.to_string())?;
    if again.bitstream != stream {
        return Err("re-encoding the golden input changed the bitstream".into());
    }
    let empty = BitstreamHeader { width: 1, height: 1, model_hash: 0, z_len: 0, y_len: 0 };
    if HEADER_LEN != 29 || empty.to_bytes().len() != 29 {
        return Err("header is not 29 bytes".into());
    }
    for (i, enc) in c.encoded.iter().chain([&again]).enumerate() {
        let (h, z, y) = read_bitstream(&enc.bitstream).map_err(|e| e.to_string())?;
        if enc.bitstream.len() - z.len() - y.len() != 29 || h.to_bytes() != enc.bitstream[..29] {
            return Err(format!("bitstream {i}: header is not 29 bytes"));
        }
    }
    Ok("weights and bitstream fixtures reproduce bitwise; 51 headers all 29 bytes".into())
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    // `cargo test -- --list` and friends: nothing to enumerate
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let corpus = corpus();
    let with_corpus = |f: fn(&Corpus) -> Outcome| match &corpus {
        Ok(c) => f(c),
        Err(e) => Err(format!("corpus encode failed: {e}")),
    };
    let trained_on = train_toy(true);

    let results: Vec<(&str, Outcome)> = vec![
        ("lossless round-trip", with_corpus(c1_round_trip)),
        ("rate tightness", with_corpus(c2_rate_tightness)),
        ("causality suite", c3_causality()),
        ("GMM normalization", c4_gmm_normalization()),
        ("gradient checks", c5_gradients()),
        ("padded loss arithmetic", c6_padded_loss()),
        ("toy training progress", c7_training(&trained_on)),
        ("padding-strategy benefit", c8_padding_benefit(&trained_on)),
        ("MS-SSIM oracle agreement", c9_msssim_oracle()),
        ("format stability", with_corpus(c10_formats)),
    ];
    let mut failed = 0;
    for (i, (name, outcome)) in results.iter().enumerate() {
        match outcome {
            Ok(d) => println!("PASS criterion {:>2} {name}: {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL criterion {:>2} {name}: {d}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
