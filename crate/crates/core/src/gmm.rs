//! Discretized Gaussian-mixture likelihood, rate in bits, and the integer CDF
//! tables handed to the range coder.
//!
//! A latent value `v` has probability
//! `P(v) = Σ_k π_k [Φ((v + ½ − μ_k)/σ_k) − Φ((v − ½ − μ_k)/σ_k)]`,
//! floored at [`P_FLOOR`] for rate computation. Latents saturate at
//! `±LATENT_MAX`, so the two edge symbols own the whole tails: their outer bin
//! boundary is at infinity. Raw network outputs map to
//! parameters by `π = softmax(logits)` and `σ = softplus(s) + SIGMA_MIN`.

use std::f64::consts::{LN_2, SQRT_2};

use crate::error::{shape_err, Error, Result};
use crate::tensor::{Real, Tensor, LATENT_MAX};

pub const SIGMA_MIN: f64 = 0.05;
pub const P_FLOOR: f64 = 1e-9;
pub const DEFAULT_MIXTURES: usize = 3;

/// CDF precision of coder tables.
pub const CDF_BITS: u32 = 16;
pub const CDF_TOTAL: u32 = 1 << CDF_BITS;
/// Number of symbols in `[-LATENT_MAX, LATENT_MAX]`.
pub const ALPHABET: usize = 2 * LATENT_MAX as usize + 1;

const MEAN_GRID: f64 = 64.0;
const SCALE_STEPS_PER_OCTAVE: f64 = 32.0;
const WEIGHT_UNITS: u32 = 1 << 12;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub(crate) fn softplus(s: f64) -> f64 {
    s.max(0.0) + (-s.abs()).exp().ln_1p()
}

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// `Φ(upper) − Φ(lower)` evaluated on whichever tail keeps precision.
fn normal_mass(lower: f64, upper: f64) -> f64 {
    if lower >= 0.0 {
        normal_cdf(-lower) - normal_cdf(-upper)
    } else {
        normal_cdf(upper) - normal_cdf(lower)
    }
}

/// Standardized bin boundaries of value `v`, with the edge symbols open-ended.
fn bin_bounds(v: f64, mean: f64, sigma: f64) -> (f64, f64) {
    let lim = LATENT_MAX as f64;
    let lower = if v <= -lim { f64::NEG_INFINITY } else { (v - 0.5 - mean) / sigma };
    let upper = if v >= lim { f64::INFINITY } else { (v + 0.5 - mean) / sigma };
    (lower, upper)
}

fn bin_mass(v: f64, mean: f64, sigma: f64) -> f64 {
    let (lower, upper) = bin_bounds(v, mean, sigma);
    normal_mass(lower, upper)
}

/// `x·φ(x)`, zero at infinity.
fn x_pdf(x: f64) -> f64 {
    if x.is_finite() {
        x * normal_pdf(x)
    } else {
        0.0
    }
}

/// Mixture parameters of one latent element.
#[derive(Clone, Copy, Debug)]
pub struct GmmElement<'a> {
    pub weights: &'a [f64],
    pub means: &'a [f64],
    pub scales: &'a [f64],
}

impl GmmElement<'_> {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    fn check(&self) -> Result<()> {
        if let Some(&sigma) = self.scales.iter().find(|&&s| !(s >= SIGMA_MIN)) {
            return Err(Error::ScaleTooSmall {
                sigma,
                min: SIGMA_MIN,
            });
        }
        Ok(())
    }

    fn mass(&self, v: f64) -> f64 {
        (0..self.k())
            .map(|j| self.weights[j] * bin_mass(v, self.means[j], self.scales[j]))
            .sum()
    }
}

/// Discretized mixture likelihood of integer `v`, floored at [`P_FLOOR`].
pub fn discretized_likelihood(v: f64, p: GmmElement<'_>) -> Result<f64> {
    p.check()?;
    Ok(p.mass(v).max(P_FLOOR))
}

/// Per-element mixture parameters over a `[G,h,w]` latent block.
#[derive(Clone, Debug, PartialEq)]
pub struct GmmParams {
    k: usize,
    shape: [usize; 3],
    weights: Vec<f64>,
    means: Vec<f64>,
    scales: Vec<f64>,
}

impl GmmParams {
    pub fn new(
        k: usize,
        shape: [usize; 3],
        weights: Vec<f64>,
        means: Vec<f64>,
        scales: Vec<f64>,
    ) -> Result<Self> {
        let n = shape.iter().product::<usize>() * k;
        if k == 0 || weights.len() != n || means.len() != n || scales.len() != n {
            return Err(shape_err("gmm params", format!("K={k}, shape {shape:?}")));
        }
        for chunk in weights.chunks(k) {
            let s: f64 = chunk.iter().sum();
            if chunk.iter().any(|&w| w < 0.0) || (s - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidArgument(format!("mixture weights {chunk:?}")));
            }
        }
        if let Some(&sigma) = scales.iter().find(|&&s| !(s >= SIGMA_MIN)) {
            return Err(Error::ScaleTooSmall {
                sigma,
                min: SIGMA_MIN,
            });
        }
        Ok(Self {
            k,
            shape,
            weights,
            means,
            scales,
        })
    }

    /// Maps a raw head `[3·K·G, h, w]` (per group channel: K logits, K means,
    /// K raw scales) to mixture parameters over `[G, h, w]`.
    pub fn from_head<T: Real>(head: &Tensor<T>, k: usize) -> Result<Self> {
        let (hc, h, w) = head.chw()?;
        if k == 0 || hc % (3 * k) != 0 {
            return Err(shape_err(
                "gmm head",
                format!("{hc} channels is not a multiple of 3·K = {}", 3 * k),
            ));
        }
        let g = hc / (3 * k);
        let n = g * h * w;
        let mut weights = vec![0.0; n * k];
        let mut means = vec![0.0; n * k];
        let mut scales = vec![0.0; n * k];
        let mut raw = RawElement::new(k);
        for c in 0..g {
            for y in 0..h {
                for x in 0..w {
                    let e = (c * h + y) * w + x;
                    raw.load(head, c, y, x);
                    raw.resolve();
                    weights[e * k..(e + 1) * k].copy_from_slice(&raw.pi);
                    means[e * k..(e + 1) * k].copy_from_slice(&raw.means);
                    scales[e * k..(e + 1) * k].copy_from_slice(&raw.sigma);
                }
            }
        }
        Ok(Self {
            k,
            shape: [g, h, w],
            weights,
            means,
            scales,
        })
    }

    /// Single Gaussian per channel, broadcast over `h x w`.
    pub fn per_channel_gaussian(means: &[f64], scales: &[f64], h: usize, w: usize) -> Result<Self> {
        let m = means.len();
        let mut ws = Vec::with_capacity(m * h * w);
        let mut mu = Vec::with_capacity(m * h * w);
        let mut sg = Vec::with_capacity(m * h * w);
        for c in 0..m {
            for _ in 0..h * w {
                ws.push(1.0);
                mu.push(means[c]);
                sg.push(scales[c]);
            }
        }
        Self::new(1, [m, h, w], ws, mu, sg)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn element(&self, e: usize) -> GmmElement<'_> {
        let r = e * self.k..(e + 1) * self.k;
        GmmElement {
            weights: &self.weights[r.clone()],
            means: &self.means[r.clone()],
            scales: &self.scales[r],
        }
    }

    pub fn element_at(&self, c: usize, y: usize, x: usize) -> GmmElement<'_> {
        let [_, h, w] = self.shape;
        self.element((c * h + y) * w + x)
    }
}

/// `Σ -log2 P(v)` over all elements.
pub fn rate_bits<T: Real>(values: &Tensor<T>, params: &GmmParams) -> Result<f64> {
    if values.shape() != params.shape {
        return Err(shape_err(
            "rate_bits",
            format!("values {:?} vs params {:?}", values.shape(), params.shape),
        ));
    }
    let mut bits = 0.0;
    for (e, v) in values.data().iter().enumerate() {
        bits += -discretized_likelihood(v.to_f64_lossless(), params.element(e))?.log2();
    }
    Ok(bits)
}

/// Raw mixture outputs of one element plus their resolved parameters.
struct RawElement {
    logits: Vec<f64>,
    means: Vec<f64>,
    scale_raw: Vec<f64>,
    pi: Vec<f64>,
    sigma: Vec<f64>,
}

impl RawElement {
    fn new(k: usize) -> Self {
        Self {
            logits: vec![0.0; k],
            means: vec![0.0; k],
            scale_raw: vec![0.0; k],
            pi: vec![0.0; k],
            sigma: vec![0.0; k],
        }
    }

    fn load<T: Real>(&mut self, head: &Tensor<T>, c: usize, y: usize, x: usize) {
        let k = self.logits.len();
        for j in 0..k {
            self.logits[j] = head.at3(c * 3 * k + j, y, x).to_f64_lossless();
            self.means[j] = head.at3(c * 3 * k + k + j, y, x).to_f64_lossless();
            self.scale_raw[j] = head.at3(c * 3 * k + 2 * k + j, y, x).to_f64_lossless();
        }
    }

    fn resolve(&mut self) {
        let max = self.logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (p, &l) in self.pi.iter_mut().zip(&self.logits) {
            *p = (l - max).exp();
            total += *p;
        }
        for p in &mut self.pi {
            *p /= total;
        }
        for (s, &r) in self.sigma.iter_mut().zip(&self.scale_raw) {
            *s = softplus(r) + SIGMA_MIN;
        }
    }

    /// Bits for value `v`; when `grad` is given, writes `d bits / d (v, logits, means, scale_raw)`.
    #[allow(clippy::needless_range_loop)]
    fn bits(&self, v: f64, grad: Option<&mut RawGrad>) -> f64 {
        let k = self.pi.len();
        let mut p = 0.0;
        let mut comp = [0.0f64; 16];
        let mut comp_buf;
        let comp: &mut [f64] = if k <= 16 {
            &mut comp[..k]
        } else {
            comp_buf = vec![0.0; k];
            &mut comp_buf
        };
        for (j, c) in comp.iter_mut().enumerate() {
            *c = bin_mass(v, self.means[j], self.sigma[j]);
            p += self.pi[j] * *c;
        }
        if p < P_FLOOR {
            if let Some(g) = grad {
                g.clear();
            }
            return -P_FLOOR.log2();
        }
        if let Some(g) = grad {
            let dbits_dp = -1.0 / (p * LN_2);
            g.dv = 0.0;
            for j in 0..k {
                let s = self.sigma[j];
                let (b, a) = bin_bounds(v, self.means[j], s);
                let (pa, pb) = (normal_pdf(a), normal_pdf(b));
                let dmass_dv = (pa - pb) / s;
                g.dv += dbits_dp * self.pi[j] * dmass_dv;
                g.dmeans[j] = -dbits_dp * self.pi[j] * dmass_dv;
                let dmass_dsigma = -(x_pdf(a) - x_pdf(b)) / s;
                g.dscale_raw[j] = dbits_dp * self.pi[j] * dmass_dsigma * sigmoid(self.scale_raw[j]);
                g.dlogits[j] = dbits_dp * self.pi[j] * (comp[j] - p);
            }
        }
        -p.log2()
    }
}

struct RawGrad {
    dv: f64,
    dlogits: Vec<f64>,
    dmeans: Vec<f64>,
    dscale_raw: Vec<f64>,
}

impl RawGrad {
    fn new(k: usize) -> Self {
        Self {
            dv: 0.0,
            dlogits: vec![0.0; k],
            dmeans: vec![0.0; k],
            dscale_raw: vec![0.0; k],
        }
    }

    fn clear(&mut self) {
        self.dv = 0.0;
        self.dlogits.iter_mut().for_each(|v| *v = 0.0);
        self.dmeans.iter_mut().for_each(|v| *v = 0.0);
        self.dscale_raw.iter_mut().for_each(|v| *v = 0.0);
    }
}

/// Rate of `values [G,h,w]` under raw mixture head `[3KG,h,w]`, with optional gradients.
pub(crate) fn head_rate_bits<T: Real>(
    values: &Tensor<T>,
    head: &Tensor<T>,
    k: usize,
    mut grad_values: Option<&mut Tensor<T>>,
    mut grad_head: Option<&mut Tensor<T>>,
) -> f64 {
    let (g, h, w) = (values.shape()[0], values.shape()[1], values.shape()[2]);
    let want = grad_values.is_some() || grad_head.is_some();
    let mut raw = RawElement::new(k);
    let mut rg = RawGrad::new(k);
    let mut total = 0.0;
    for c in 0..g {
        for y in 0..h {
            for x in 0..w {
                raw.load(head, c, y, x);
                raw.resolve();
                let v = values.at3(c, y, x).to_f64_lossless();
                total += raw.bits(v, want.then_some(&mut rg));
                if let Some(gv) = grad_values.as_deref_mut() {
                    gv.set3(c, y, x, T::from_f64_lossy(rg.dv));
                }
                if let Some(gh) = grad_head.as_deref_mut() {
                    for j in 0..k {
                        let base = c * 3 * k;
                        gh.set3(base + j, y, x, T::from_f64_lossy(rg.dlogits[j]));
                        gh.set3(base + k + j, y, x, T::from_f64_lossy(rg.dmeans[j]));
                        gh.set3(base + 2 * k + j, y, x, T::from_f64_lossy(rg.dscale_raw[j]));
                    }
                }
            }
        }
    }
    total
}

/// Rate of `values [M,h,w]` under one Gaussian per channel, with optional gradients
/// `(d values, d mean, d scale_raw)`.
pub(crate) fn channel_gauss_rate_bits<T: Real>(
    values: &Tensor<T>,
    mean: &Tensor<T>,
    scale_raw: &Tensor<T>,
    mut grads: Option<&mut (Tensor<T>, Tensor<T>, Tensor<T>)>,
) -> f64 {
    let (m, h, w) = (values.shape()[0], values.shape()[1], values.shape()[2]);
    let mut raw = RawElement::new(1);
    let mut rg = RawGrad::new(1);
    let mut total = 0.0;
    for c in 0..m {
        raw.logits[0] = 0.0;
        raw.means[0] = mean.data()[c].to_f64_lossless();
        raw.scale_raw[0] = scale_raw.data()[c].to_f64_lossless();
        raw.resolve();
        let (mut dm, mut ds) = (0.0, 0.0);
        for y in 0..h {
            for x in 0..w {
                let v = values.at3(c, y, x).to_f64_lossless();
                total += raw.bits(v, grads.is_some().then_some(&mut rg));
                if let Some(gr) = grads.as_deref_mut() {
                    gr.0.set3(c, y, x, T::from_f64_lossy(rg.dv));
                    dm += rg.dmeans[0];
                    ds += rg.dscale_raw[0];
                }
            }
        }
        if let Some(gr) = grads.as_deref_mut() {
            gr.1.data_mut()[c] = T::from_f64_lossy(dm);
            gr.2.data_mut()[c] = T::from_f64_lossy(ds);
        }
    }
    total
}

/// Integer CDF over `[-LATENT_MAX, LATENT_MAX]` with total [`CDF_TOTAL`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CdfTable {
    cum: Vec<u32>,
}

impl CdfTable {
    /// Builds a table from per-symbol widths; every width must be at least 1.
    pub fn from_widths(widths: &[u32]) -> Result<Self> {
        if widths.len() != ALPHABET {
            return Err(shape_err(
                "cdf table",
                format!("{} widths for {ALPHABET} symbols", widths.len()),
            ));
        }
        let mut cum = Vec::with_capacity(ALPHABET + 1);
        cum.push(0u32);
        for &w in widths {
            if w == 0 {
                return Err(Error::InvalidArgument("zero-width symbol".into()));
            }
            cum.push(cum.last().unwrap() + w);
        }
        if *cum.last().unwrap() != CDF_TOTAL {
            return Err(Error::InvalidArgument(format!(
                "widths sum to {}, expected {CDF_TOTAL}",
                cum.last().unwrap()
            )));
        }
        Ok(Self { cum })
    }

    /// Uniform table over the alphabet (leftover counts go to the lowest symbols).
    pub fn uniform() -> Self {
        let base = CDF_TOTAL / ALPHABET as u32;
        let extra = CDF_TOTAL as usize - base as usize * ALPHABET;
        let widths: Vec<u32> = (0..ALPHABET)
            .map(|i| base + u32::from(i < extra))
            .collect();
        Self::from_widths(&widths).expect("uniform table is valid")
    }

    pub fn cum(&self) -> &[u32] {
        &self.cum
    }

    pub fn contains(symbol: i32) -> bool {
        (-LATENT_MAX..=LATENT_MAX).contains(&symbol)
    }

    /// `(cumulative low, width)` of `symbol`.
    pub fn interval(&self, symbol: i32) -> Result<(u32, u32)> {
        if !Self::contains(symbol) {
            return Err(Error::SymbolOutOfRange { symbol });
        }
        let i = (symbol + LATENT_MAX) as usize;
        Ok((self.cum[i], self.cum[i + 1] - self.cum[i]))
    }

    pub fn width(&self, symbol: i32) -> u32 {
        self.interval(symbol).map(|(_, w)| w).unwrap_or(0)
    }

    /// Symbol whose interval contains `target < CDF_TOTAL`.
    pub fn lookup(&self, target: u32) -> i32 {
        // Last index i with cum[i] <= target.
        let i = self.cum.partition_point(|&c| c <= target) - 1;
        i.min(ALPHABET - 1) as i32 - LATENT_MAX
    }
}

/// Parameters snapped to coarse grids before table construction: means to
/// multiples of 1/64, scales to `SIGMA_MIN · 2^(n/32)`, weights to multiples of
/// `2^-12` (largest-remainder renormalized).
#[derive(Clone, Debug, PartialEq)]
pub struct SnappedElement {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

pub fn snap_element(p: GmmElement<'_>) -> SnappedElement {
    let means = p.means.iter().map(|m| (m * MEAN_GRID).round() / MEAN_GRID).collect();
    let scales = p
        .scales
        .iter()
        .map(|&s| {
            let steps = (SCALE_STEPS_PER_OCTAVE * (s / SIGMA_MIN).log2()).round().max(0.0);
            SIGMA_MIN * (steps / SCALE_STEPS_PER_OCTAVE).exp2()
        })
        .collect();
    let total: f64 = p.weights.iter().sum();
    let shares: Vec<f64> = p
        .weights
        .iter()
        .map(|w| w / total * WEIGHT_UNITS as f64)
        .collect();
    let counts = largest_remainder(&shares, WEIGHT_UNITS);
    let weights = counts
        .iter()
        .map(|&c| c as f64 / WEIGHT_UNITS as f64)
        .collect();
    SnappedElement {
        weights,
        means,
        scales,
    }
}

/// Integer apportionment of `total` proportional to `shares` (which must sum to
/// `total` up to rounding): floors first, then one extra unit each to the largest
/// fractional parts, ties to the lower index.
fn largest_remainder(shares: &[f64], total: u32) -> Vec<u32> {
    let mut counts: Vec<u32> = shares.iter().map(|s| s.floor().max(0.0) as u32).collect();
    let assigned: u32 = counts.iter().sum();
    if assigned > total {
        // Only reachable through float overshoot; trim from the largest counts.
        let mut excess = assigned - total;
        while excess > 0 {
            let i = (0..counts.len()).max_by_key(|&i| (counts[i], usize::MAX - i)).unwrap();
            counts[i] -= 1;
            excess -= 1;
        }
        return counts;
    }
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (shares[a] - shares[a].floor(), shares[b] - shares[b].floor());
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut left = (total - assigned) as usize;
    let mut i = 0;
    while left > 0 {
        counts[order[i % order.len()]] += 1;
        left -= 1;
        i += 1;
    }
    counts
}

/// Symbol probabilities over the alphabet with both tails folded into the edge symbols.
pub fn symbol_probabilities(p: &SnappedElement) -> Vec<f64> {
    let lim = LATENT_MAX as f64;
    let mut probs = vec![0.0; ALPHABET];
    for (j, &w) in p.weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (i, prob) in probs.iter_mut().enumerate() {
            *prob += w * bin_mass(i as f64 - lim, p.means[j], p.scales[j]);
        }
    }
    probs
}

/// Coder table for one element: snap, fold tails, then apportion
/// `CDF_TOTAL − ALPHABET` counts by largest remainder on top of a width of 1 per symbol.
pub fn build_cdf(p: GmmElement<'_>) -> CdfTable {
    let snapped = snap_element(p);
    let probs = symbol_probabilities(&snapped);
    let free = CDF_TOTAL - ALPHABET as u32;
    let total: f64 = probs.iter().sum();
    let shares: Vec<f64> = if total > 0.0 && total.is_finite() {
        probs.iter().map(|q| q / total * free as f64).collect()
    } else {
        vec![free as f64 / ALPHABET as f64; ALPHABET]
    };
    let widths: Vec<u32> = largest_remainder(&shares, free)
        .into_iter()
        .map(|c| c + 1)
        .collect();
    CdfTable::from_widths(&widths).expect("apportionment yields a valid table")
}
