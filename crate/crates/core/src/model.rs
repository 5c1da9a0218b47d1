//! Toy analysis/synthesis transforms, hyper encoder/decoder, context
//! convolutions, and the residual parameter estimation (RPE) stacks.
//!
//! Layer layout, for `C` latent channels, `M` hyper channels, `N` transform
//! width, `F1`/`F2` context/hyper feature widths and `R` RPE width:
//!
//! ```text
//! analysis   ga0  conv  5x5 s2  3 -> N, leaky   ga1 conv 5x5 s2 N -> C
//! synthesis  gs0  tconv 5x5 s2  C -> N, leaky   gs1 tconv 5x5 s2 N -> 3, clamp [0,1]
//! hyper enc  ha0  conv  3x3 s1  C -> M, leaky   ha1 conv 5x5 s2 M -> M
//! hyper dec  hs0  tconv 5x5 s2  M -> F2, leaky  hs1 conv 3x3 s1 F2 -> F2
//! context    ctx1, ctx2  masked 5x5 s1  C -> F1
//! rpe{1,2}   trunk0..2 (1x1, leaky between), res0..2 (1x1, leaky between, added
//!            to the trunk output), head 1x1 R -> 3·K·group_size
//! z prior    zprior.mean [M], zprior.scale [M]
//! ```

use std::fmt::Write as _;

use crate::context::{ContextMasks, Group, GroupSpec};
use crate::error::{shape_err, Error, Result};
use crate::gmm::{softplus, GmmParams, SIGMA_MIN};
use crate::tensor::{ConvWeights, Graph, Real, RngState, Tensor, Var};

/// Negative slope of every leaky ReLU in the toy model.
pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    pub image_channels: usize,
    pub latent_channels: usize,
    pub group_split: usize,
    pub hyper_channels: usize,
    pub context_features: usize,
    pub hyper_features: usize,
    pub mixtures: usize,
    pub transform_channels: usize,
    pub rpe_channels: usize,
    pub context_kernel: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            image_channels: 3,
            latent_channels: 8,
            group_split: 4,
            hyper_channels: 8,
            context_features: 16,
            hyper_features: 16,
            mixtures: 3,
            transform_channels: 16,
            rpe_channels: 32,
            context_kernel: 5,
        }
    }
}

const CONFIG_KEYS: [&str; 10] = [
    "image_channels",
    "latent_channels",
    "group_split",
    "hyper_channels",
    "context_features",
    "hyper_features",
    "mixtures",
    "transform_channels",
    "rpe_channels",
    "context_kernel",
];

impl ModelConfig {
    pub const MAIN_STRIDE: usize = 4;
    pub const HYPER_STRIDE: usize = 2;

    /// Input sides must be multiples of this.
    pub fn alignment(&self) -> usize {
        Self::MAIN_STRIDE * Self::HYPER_STRIDE
    }

    pub fn group_spec(&self) -> Result<GroupSpec> {
        GroupSpec::new(self.latent_channels, self.group_split, self.context_kernel)
    }

    pub fn group_size(&self, group: Group) -> usize {
        match group {
            Group::First => self.group_split,
            Group::Second => self.latent_channels - self.group_split,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.image_channels != 3 {
            return Err(Error::InvalidArgument(format!(
                "image_channels must be 3, got {}",
                self.image_channels
            )));
        }
        for (k, v) in self.values() {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{k} must be positive")));
            }
        }
        self.group_spec()?;
        Ok(())
    }

    fn values(&self) -> [(&'static str, usize); 10] {
        [
            (CONFIG_KEYS[0], self.image_channels),
            (CONFIG_KEYS[1], self.latent_channels),
            (CONFIG_KEYS[2], self.group_split),
            (CONFIG_KEYS[3], self.hyper_channels),
            (CONFIG_KEYS[4], self.context_features),
            (CONFIG_KEYS[5], self.hyper_features),
            (CONFIG_KEYS[6], self.mixtures),
            (CONFIG_KEYS[7], self.transform_channels),
            (CONFIG_KEYS[8], self.rpe_channels),
            (CONFIG_KEYS[9], self.context_kernel),
        ]
    }

    /// `key=value` lines, LF-terminated, in a fixed key order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.values() {
            writeln!(s, "{k}={v}").unwrap();
        }
        s
    }

    /// Parses `key=value` lines. Missing keys keep their defaults; unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Malformed {
                what: "model config",
                detail: format!("line {}: expected key=value", n + 1),
            })?;
            let value: usize = value.trim().parse().map_err(|_| Error::Malformed {
                what: "model config",
                detail: format!("line {}: `{}` is not a non-negative integer", n + 1, value.trim()),
            })?;
            let slot = match key.trim() {
                "image_channels" => &mut cfg.image_channels,
                "latent_channels" => &mut cfg.latent_channels,
                "group_split" => &mut cfg.group_split,
                "hyper_channels" => &mut cfg.hyper_channels,
                "context_features" => &mut cfg.context_features,
                "hyper_features" => &mut cfg.hyper_features,
                "mixtures" => &mut cfg.mixtures,
                "transform_channels" => &mut cfg.transform_channels,
                "rpe_channels" => &mut cfg.rpe_channels,
                "context_kernel" => &mut cfg.context_kernel,
                other => {
                    return Err(Error::Malformed {
                        what: "model config",
                        detail: format!("unknown key `{other}`"),
                    })
                }
            };
            *slot = value;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every convolution layer of the model, in canonical order.
    pub fn layers(&self) -> Vec<LayerSpec> {
        let (n, c, m) = (self.transform_channels, self.latent_channels, self.hyper_channels);
        let (f1, f2, r, k) = (
            self.context_features,
            self.hyper_features,
            self.rpe_channels,
            self.context_kernel,
        );
        let conv = |name: &str, kind, i, o, ks, stride| LayerSpec {
            name: name.to_string(),
            kind,
            in_ch: i,
            out_ch: o,
            kernel: ks,
            stride,
            pad: ks / 2,
        };
        use LayerKind::*;
        let mut layers = vec![
            conv("ga0", Conv, self.image_channels, n, 5, 2),
            conv("ga1", Conv, n, c, 5, 2),
            conv("gs0", Transposed, c, n, 5, 2),
            conv("gs1", Transposed, n, self.image_channels, 5, 2),
            conv("ha0", Conv, c, m, 3, 1),
            conv("ha1", Conv, m, m, 5, 2),
            conv("hs0", Transposed, m, f2, 5, 2),
            conv("hs1", Conv, f2, f2, 3, 1),
            conv("ctx1", Masked, c, f1, k, 1),
            conv("ctx2", Masked, c, f1, k, 1),
        ];
        for (prefix, group) in [("rpe1", Group::First), ("rpe2", Group::Second)] {
            let head = 3 * self.mixtures * self.group_size(group);
            layers.push(conv(&format!("{prefix}.trunk0"), Conv, f1 + f2, r, 1, 1));
            layers.push(conv(&format!("{prefix}.trunk1"), Conv, r, r, 1, 1));
            layers.push(conv(&format!("{prefix}.trunk2"), Conv, r, r, 1, 1));
            layers.push(conv(&format!("{prefix}.res0"), Conv, r, r, 1, 1));
            layers.push(conv(&format!("{prefix}.res1"), Conv, r, r, 1, 1));
            layers.push(conv(&format!("{prefix}.res2"), Conv, r, r, 1, 1));
            layers.push(conv(&format!("{prefix}.head"), Conv, r, head, 1, 1));
        }
        layers
    }

    /// `(name, shape, fan_in)` of every stored tensor, in file order.
    pub fn param_layout(&self) -> Vec<(String, Vec<usize>, usize)> {
        let mut out = Vec::new();
        for l in self.layers() {
            let fan_in = l.in_ch * l.kernel * l.kernel;
            out.push((
                format!("{}.weight", l.name),
                vec![l.out_ch, l.in_ch, l.kernel, l.kernel],
                fan_in,
            ));
            out.push((format!("{}.bias", l.name), vec![l.out_ch], fan_in));
        }
        out.push(("zprior.mean".into(), vec![self.hyper_channels], 1));
        out.push(("zprior.scale".into(), vec![self.hyper_channels], 1));
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Conv,
    Transposed,
    Masked,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

/// All learned tensors of the toy model, stored in [`ModelConfig::param_layout`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyModelWeights {
    config: ModelConfig,
    names: Vec<String>,
    tensors: Vec<Tensor<f32>>,
}

impl ToyModelWeights {
    /// Validates names and shapes against `config`; errors name the offending tensor.
    pub fn from_tensors(config: ModelConfig, tensors: Vec<(String, Tensor<f32>)>) -> Result<Self> {
        config.validate()?;
        let layout = config.param_layout();
        if tensors.len() != layout.len() {
            return Err(Error::TensorMismatch {
                name: "<all>".into(),
                detail: format!("expected {} tensors, found {}", layout.len(), tensors.len()),
            });
        }
        let mut names = Vec::with_capacity(layout.len());
        let mut values = Vec::with_capacity(layout.len());
        for ((name, shape, _), (got_name, t)) in layout.into_iter().zip(tensors) {
            if got_name != name {
                return Err(Error::TensorMismatch {
                    name: got_name,
                    detail: format!("expected tensor `{name}` at this position"),
                });
            }
            if t.shape() != shape.as_slice() {
                return Err(Error::TensorMismatch {
                    name,
                    detail: format!("shape {:?} does not match config shape {shape:?}", t.shape()),
                });
            }
            names.push(name);
            values.push(t);
        }
        Ok(Self {
            config,
            names,
            tensors: values,
        })
    }

    /// Every tensor i.i.d. uniform in `[-s, s]` with `s = 1/sqrt(fan_in)`, drawn
    /// in layout order from one SplitMix64 stream.
    pub fn generate(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = RngState::new(seed);
        let tensors = config
            .param_layout()
            .into_iter()
            .map(|(name, shape, fan_in)| {
                let s = 1.0 / (fan_in as f64).sqrt();
                let t = Tensor::from_fn(&shape, |_| rng.uniform(-s, s) as f32);
                (name, t)
            })
            .collect();
        Self::from_tensors(config, tensors)
    }

    pub fn zeros(config: ModelConfig) -> Result<Self> {
        let tensors = config
            .param_layout()
            .into_iter()
            .map(|(name, shape, _)| (name, Tensor::zeros(&shape)))
            .collect();
        Self::from_tensors(config, tensors)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<f32>> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<f32>> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(move |i| &mut self.tensors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<f32>)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<f32>)> {
        self.names.iter().map(String::as_str).zip(self.tensors.iter_mut())
    }

    pub fn num_tensors(&self) -> usize {
        self.tensors.len()
    }

    /// Weights of a named layer with its stride and padding.
    pub fn layer<T: Real>(&self, name: &str) -> Result<ConvWeights<T>> {
        let spec = self
            .config
            .layers()
            .into_iter()
            .find(|l| l.name == name)
            .ok_or_else(|| Error::InvalidArgument(format!("no layer `{name}`")))?;
        let kernel = self.get(&format!("{name}.weight")).expect("validated");
        let bias = self.get(&format!("{name}.bias")).expect("validated");
        ConvWeights::new(kernel.cast(), bias.cast(), spec.stride, spec.pad)
    }

    pub fn rpe_stack<T: Real>(&self, group: Group) -> Result<RpeStack<T>> {
        let p = match group {
            Group::First => "rpe1",
            Group::Second => "rpe2",
        };
        let l = |s: &str| self.layer::<T>(&format!("{p}.{s}"));
        Ok(RpeStack {
            trunk: [l("trunk0")?, l("trunk1")?, l("trunk2")?],
            residual: [l("res0")?, l("res1")?, l("res2")?],
            head: l("head")?,
        })
    }
}

/// One group's residual parameter estimator.
#[derive(Clone, Debug, PartialEq)]
pub struct RpeStack<T = f32> {
    pub trunk: [ConvWeights<T>; 3],
    pub residual: [ConvWeights<T>; 3],
    pub head: ConvWeights<T>,
}

/// Model parameters registered as leaves of a [`Graph`].
pub struct ParamVars {
    layers: Vec<(LayerSpec, Var, Var)>,
    z_mean: Var,
    z_scale: Var,
    all: Vec<(String, Var)>,
}

impl ParamVars {
    pub fn register<T: Real>(g: &mut Graph<T>, weights: &ToyModelWeights) -> Self {
        let mut all = Vec::new();
        for (name, t) in weights.iter() {
            all.push((name.to_string(), g.leaf(t.cast())));
        }
        let find = |n: &str| all.iter().find(|(name, _)| name == n).unwrap().1;
        let layers = weights
            .config
            .layers()
            .into_iter()
            .map(|l| {
                let k = find(&format!("{}.weight", l.name));
                let b = find(&format!("{}.bias", l.name));
                (l, k, b)
            })
            .collect();
        Self {
            layers,
            z_mean: find("zprior.mean"),
            z_scale: find("zprior.scale"),
            all,
        }
    }

    /// `(tensor name, leaf)` pairs in layout order.
    pub fn leaves(&self) -> &[(String, Var)] {
        &self.all
    }

    pub fn z_prior(&self) -> (Var, Var) {
        (self.z_mean, self.z_scale)
    }

    fn find(&self, name: &str) -> &(LayerSpec, Var, Var) {
        self.layers
            .iter()
            .find(|(l, _, _)| l.name == name)
            .unwrap_or_else(|| panic!("unknown layer {name}"))
    }

    /// Applies a plain or transposed layer.
    pub fn apply<T: Real>(&self, g: &mut Graph<T>, name: &str, x: Var) -> Result<Var> {
        let (spec, k, b) = self.find(name);
        match spec.kind {
            LayerKind::Conv => g.conv2d(x, *k, *b, spec.stride, spec.pad),
            LayerKind::Transposed => g.transposed_conv2d(x, *k, *b, spec.pad),
            LayerKind::Masked => Err(Error::InvalidArgument(format!(
                "layer {name} needs a mask"
            ))),
        }
    }

    pub fn apply_masked<T: Real>(
        &self,
        g: &mut Graph<T>,
        name: &str,
        x: Var,
        mask: &Tensor<T>,
    ) -> Result<Var> {
        let (spec, k, b) = self.find(name);
        g.masked_conv2d(x, *k, *b, spec.pad, mask)
    }
}

fn leaky<T: Real>(g: &mut Graph<T>, x: Var) -> Result<Var> {
    g.leaky_relu(x, LEAKY_SLOPE)
}

fn check_image_dims<T: Real>(g: &Graph<T>, x: Var, cfg: &ModelConfig) -> Result<()> {
    let (c, h, w) = g.value(x).chw()?;
    if c != cfg.image_channels {
        return Err(shape_err("analysis", format!("image has {c} channels, expected 3")));
    }
    let a = cfg.alignment();
    if h % a != 0 || w % a != 0 {
        return Err(shape_err(
            "analysis",
            format!("image {h}x{w} is not a multiple of {a}; pad it first"),
        ));
    }
    Ok(())
}

fn check_latent_dims<T: Real>(g: &Graph<T>, v: Var, channels: usize, multiple: usize, what: &'static str) -> Result<()> {
    let (c, h, w) = g.value(v).chw()?;
    if c != channels {
        return Err(shape_err(what, format!("{c} channels, expected {channels}")));
    }
    if h % multiple != 0 || w % multiple != 0 {
        return Err(shape_err(
            what,
            format!("{h}x{w} is not a multiple of {multiple}"),
        ));
    }
    Ok(())
}

/// Graph-level building blocks shared by coding and training.
pub mod graph_fns {
    use super::*;

    pub fn analysis<T: Real>(g: &mut Graph<T>, p: &ParamVars, cfg: &ModelConfig, x: Var) -> Result<Var> {
        check_image_dims(g, x, cfg)?;
        let h = p.apply(g, "ga0", x)?;
        let h = leaky(g, h)?;
        p.apply(g, "ga1", h)
    }

    pub fn synthesis<T: Real>(g: &mut Graph<T>, p: &ParamVars, cfg: &ModelConfig, y_hat: Var) -> Result<Var> {
        check_latent_dims(g, y_hat, cfg.latent_channels, ModelConfig::HYPER_STRIDE, "synthesis")?;
        let h = p.apply(g, "gs0", y_hat)?;
        let h = leaky(g, h)?;
        let out = p.apply(g, "gs1", h)?;
        Ok(g.clamp(out, 0.0, 1.0))
    }

    pub fn hyper_analysis<T: Real>(g: &mut Graph<T>, p: &ParamVars, cfg: &ModelConfig, y: Var) -> Result<Var> {
        check_latent_dims(g, y, cfg.latent_channels, ModelConfig::HYPER_STRIDE, "hyper_encode")?;
        let h = p.apply(g, "ha0", y)?;
        let h = leaky(g, h)?;
        p.apply(g, "ha1", h)
    }

    pub fn hyper_synthesis<T: Real>(g: &mut Graph<T>, p: &ParamVars, cfg: &ModelConfig, z_hat: Var) -> Result<Var> {
        check_latent_dims(g, z_hat, cfg.hyper_channels, 1, "hyper_decode")?;
        let h = p.apply(g, "hs0", z_hat)?;
        let h = leaky(g, h)?;
        p.apply(g, "hs1", h)
    }

    pub fn context<T: Real>(
        g: &mut Graph<T>,
        p: &ParamVars,
        masks: &ContextMasks<T>,
        y_hat: Var,
    ) -> Result<(Var, Var)> {
        let f1 = p.apply_masked(g, "ctx1", y_hat, &masks.first)?;
        let f2 = p.apply_masked(g, "ctx2", y_hat, &masks.second)?;
        Ok((f1, f2))
    }

    pub fn rpe<T: Real>(g: &mut Graph<T>, p: &ParamVars, group: Group, f1: Var, f2: Var) -> Result<Var> {
        let prefix = match group {
            Group::First => "rpe1",
            Group::Second => "rpe2",
        };
        let l = |s: &str| format!("{prefix}.{s}");
        let x = g.concat_channels(&[f1, f2])?;
        let h = p.apply(g, &l("trunk0"), x)?;
        let h = leaky(g, h)?;
        let h = p.apply(g, &l("trunk1"), h)?;
        let h = leaky(g, h)?;
        let trunk = p.apply(g, &l("trunk2"), h)?;
        let r = p.apply(g, &l("res0"), trunk)?;
        let r = leaky(g, r)?;
        let r = p.apply(g, &l("res1"), r)?;
        let r = leaky(g, r)?;
        let r = p.apply(g, &l("res2"), r)?;
        let sum = g.add(trunk, r)?;
        p.apply(g, &l("head"), sum)
    }
}

fn run_single<T: Real>(
    weights: &ToyModelWeights,
    input: &Tensor<T>,
    f: impl FnOnce(&mut Graph<T>, &ParamVars, &ModelConfig, Var) -> Result<Var>,
) -> Result<Tensor<T>> {
    let mut g = Graph::new();
    let p = ParamVars::register(&mut g, weights);
    let x = g.leaf(input.clone());
    let out = f(&mut g, &p, weights.config(), x)?;
    Ok(g.value(out).clone())
}

/// `x [3,H,W]` with `H`, `W` multiples of the alignment -> `y [C,H/4,W/4]`.
pub fn analysis_transform<T: Real>(x: &Tensor<T>, weights: &ToyModelWeights) -> Result<Tensor<T>> {
    run_single(weights, x, graph_fns::analysis)
}

/// `ŷ [C,h,w]` -> `x̂ [3,4h,4w]`, clamped to `[0,1]`.
pub fn synthesis_transform<T: Real>(y_hat: &Tensor<T>, weights: &ToyModelWeights) -> Result<Tensor<T>> {
    run_single(weights, y_hat, graph_fns::synthesis)
}

/// `y [C,h,w]` -> `z [M,h/2,w/2]`.
pub fn hyper_encode<T: Real>(y: &Tensor<T>, weights: &ToyModelWeights) -> Result<Tensor<T>> {
    run_single(weights, y, graph_fns::hyper_analysis)
}

/// `ẑ [M,h,w]` -> `f2 [F2,2h,2w]`.
pub fn hyper_decode<T: Real>(z_hat: &Tensor<T>, weights: &ToyModelWeights) -> Result<Tensor<T>> {
    run_single(weights, z_hat, graph_fns::hyper_synthesis)
}

/// Raw mixture head `[3·K·group_size, h, w]` of an RPE stack.
pub fn rpe_head<T: Real>(f1: &Tensor<T>, f2: &Tensor<T>, stack: &RpeStack<T>) -> Result<Tensor<T>> {
    let mut g = Graph::new();
    let x1 = g.leaf(f1.clone());
    let x2 = g.leaf(f2.clone());
    let x = g.concat_channels(&[x1, x2])?;
    let apply = |g: &mut Graph<T>, x: Var, w: &ConvWeights<T>| -> Result<Var> {
        let k = g.leaf(w.kernel.clone());
        let b = g.leaf(w.bias.clone());
        if w.kernel_size() != (1, 1) {
            return Err(shape_err("rpe", format!("kernel {:?} is not 1x1", w.kernel.shape())));
        }
        g.conv2d(x, k, b, 1, 0)
    };
    let h = apply(&mut g, x, &stack.trunk[0])?;
    let h = leaky(&mut g, h)?;
    let h = apply(&mut g, h, &stack.trunk[1])?;
    let h = leaky(&mut g, h)?;
    let trunk = apply(&mut g, h, &stack.trunk[2])?;
    let r = apply(&mut g, trunk, &stack.residual[0])?;
    let r = leaky(&mut g, r)?;
    let r = apply(&mut g, r, &stack.residual[1])?;
    let r = leaky(&mut g, r)?;
    let r = apply(&mut g, r, &stack.residual[2])?;
    let sum = g.add(trunk, r)?;
    let head = apply(&mut g, sum, &stack.head)?;
    Ok(g.value(head).clone())
}

/// Mixture parameters over `[group_size, h, w]` from context and hyper features.
pub fn rpe_forward<T: Real>(
    f1: &Tensor<T>,
    f2: &Tensor<T>,
    group_size: usize,
    k: usize,
    stack: &RpeStack<T>,
) -> Result<GmmParams> {
    let expected = 3 * k * group_size;
    if stack.head.out_channels() != expected {
        return Err(shape_err(
            "rpe head",
            format!(
                "{} output channels, expected 3·K·group_size = {expected}",
                stack.head.out_channels()
            ),
        ));
    }
    let head = rpe_head(f1, f2, stack)?;
    GmmParams::from_head(&head, k)
}

/// Per-channel mean and scale of the hyper-latent prior.
pub fn z_prior_channels(weights: &ToyModelWeights) -> (Vec<f64>, Vec<f64>) {
    let mean = weights.get("zprior.mean").expect("validated");
    let raw = weights.get("zprior.scale").expect("validated");
    (
        mean.data().iter().map(|&v| v as f64).collect(),
        raw.data().iter().map(|&v| softplus(v as f64) + SIGMA_MIN).collect(),
    )
}

/// Single-Gaussian prior for `ẑ`, broadcast over an `h x w` grid.
pub fn z_prior_params(weights: &ToyModelWeights, h: usize, w: usize) -> Result<GmmParams> {
    let (mean, scale) = z_prior_channels(weights);
    GmmParams::per_channel_gaussian(&mean, &scale, h, w)
}
