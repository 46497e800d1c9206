//! Dynamic point-sampling upsampler.
//!
//! A light linear head predicts per-pixel offsets `O`, which are added to a
//! fixed base grid `G` to form the sampling set `S = G + O`; the input is then
//! bilinearly resampled at `S`. Offsets are produced either by projecting at
//! low resolution and pixel-shuffling the result (LP), or by pixel-shuffling
//! the feature first and projecting at high resolution (PL). Channels are
//! split into `g` groups, each with its own offsets.
//!
//! Offset channel layout for LP heads: output channel `q·s² + dy·s + dx`
//! carries coordinate `q` (`2·group + {0: x, 1: y}`) for sub-pixel `(dy, dx)`,
//! which is exactly what [`Tensor::pixel_shuffle`] expects.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::layers::{sigmoid, sigmoid_backward, LinearGrads, LinearLayer};
use crate::sampler::{grid_sample, grid_sample_backward, make_base_grid, InitMode, SamplingGrid};
use crate::tensor::{Element, Rng, Shape, Tensor};

pub const DEFAULT_STATIC_FACTOR: f64 = 0.25;
pub const DEFAULT_DYNAMIC_CAP: f64 = 0.5;
pub const DEFAULT_GROUPS_LP: usize = 4;
pub const DEFAULT_GROUPS_PL: usize = 8;

/// Order of projection and pixel shuffle in the offset generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OffsetStyle {
    /// Linear projection at low resolution, then pixel shuffle.
    LinearThenShuffle,
    /// Pixel shuffle of the feature, then linear projection at high resolution.
    ShuffleThenLinear,
}

/// How raw head outputs are turned into offsets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScopeMode {
    /// `O = factor · linear(X)`
    Static(f64),
    /// `O = cap · sigmoid(linear₁(X)) · linear₂(X)`
    Dynamic(f64),
    /// `O = bound · tanh(linear(X))`. A hard-bounded ablation; not used by
    /// any named variant.
    Tanh(f64),
}

impl ScopeMode {
    fn value(self) -> f64 {
        match self {
            ScopeMode::Static(v) | ScopeMode::Dynamic(v) | ScopeMode::Tanh(v) => v,
        }
    }

    pub fn is_dynamic(self) -> bool {
        matches!(self, ScopeMode::Dynamic(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DySampleConfig {
    pub scale: usize,
    pub channels: usize,
    pub groups: usize,
    pub style: OffsetStyle,
    pub scope: ScopeMode,
    pub init: InitMode,
}

impl DySampleConfig {
    /// Config with the default group count for the style and bilinear init.
    pub fn new(channels: usize, scale: usize, style: OffsetStyle, scope: ScopeMode) -> Result<Self> {
        let groups = match style {
            OffsetStyle::LinearThenShuffle => DEFAULT_GROUPS_LP,
            OffsetStyle::ShuffleThenLinear => DEFAULT_GROUPS_PL,
        };
        let cfg = DySampleConfig {
            scale,
            channels,
            groups,
            style,
            scope,
            init: InitMode::Bilinear,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_groups(mut self, groups: usize) -> Result<Self> {
        self.groups = groups;
        self.validate()?;
        Ok(self)
    }

    pub fn with_init(mut self, init: InitMode) -> Self {
        self.init = init;
        self
    }

    pub fn with_scope(mut self, scope: ScopeMode) -> Result<Self> {
        self.scope = scope;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let DySampleConfig { scale: s, channels: c, groups: g, .. } = *self;
        if s == 0 || c == 0 || g == 0 {
            return Err(Error::invalid(format!(
                "scale, channels and groups must be >= 1 (s={s}, c={c}, g={g})"
            )));
        }
        let v = self.scope.value();
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid(format!("scope factor must be > 0, got {v}")));
        }
        match self.style {
            OffsetStyle::LinearThenShuffle if c % g != 0 => Err(Error::invalid(format!(
                "LP style needs groups ({g}) to divide channels ({c})"
            ))),
            OffsetStyle::ShuffleThenLinear if c % (s * s) != 0 || (c / (s * s)) % g != 0 => {
                Err(Error::invalid(format!(
                    "PL style needs scale² ({}) to divide channels ({c}) and groups ({g}) to divide channels/scale²",
                    s * s
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn head_in(&self) -> usize {
        match self.style {
            OffsetStyle::LinearThenShuffle => self.channels,
            OffsetStyle::ShuffleThenLinear => self.channels / (self.scale * self.scale),
        }
    }

    pub fn head_out(&self) -> usize {
        match self.style {
            OffsetStyle::LinearThenShuffle => 2 * self.groups * self.scale * self.scale,
            OffsetStyle::ShuffleThenLinear => 2 * self.groups,
        }
    }
}

/// The four named configurations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// LP, static scope.
    DySample,
    /// LP, dynamic scope.
    DySamplePlus,
    /// PL, static scope.
    DySampleS,
    /// PL, dynamic scope.
    DySampleSPlus,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::DySample,
        Variant::DySamplePlus,
        Variant::DySampleS,
        Variant::DySampleSPlus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::DySample => "dysample",
            Variant::DySamplePlus => "dysample+",
            Variant::DySampleS => "dysample-s",
            Variant::DySampleSPlus => "dysample-s+",
        }
    }

    pub fn style(self) -> OffsetStyle {
        match self {
            Variant::DySample | Variant::DySamplePlus => OffsetStyle::LinearThenShuffle,
            Variant::DySampleS | Variant::DySampleSPlus => OffsetStyle::ShuffleThenLinear,
        }
    }

    pub fn scope(self) -> ScopeMode {
        match self {
            Variant::DySample | Variant::DySampleS => ScopeMode::Static(DEFAULT_STATIC_FACTOR),
            Variant::DySamplePlus | Variant::DySampleSPlus => ScopeMode::Dynamic(DEFAULT_DYNAMIC_CAP),
        }
    }

    pub fn config(self, channels: usize, scale: usize) -> Result<DySampleConfig> {
        DySampleConfig::new(channels, scale, self.style(), self.scope())
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown variant '{s}', expected one of: dysample, dysample+, dysample-s, dysample-s+"
                ))
            })
    }
}

/// Per-output-pixel displacements, shape `(n, 2·g, s·h, s·w)`, in input-pixel units.
#[derive(Clone, Debug, PartialEq)]
pub struct OffsetField<T = f64> {
    offsets: Tensor<T>,
    groups: usize,
}

impl<T: Element> OffsetField<T> {
    pub fn new(offsets: Tensor<T>) -> Result<Self> {
        let c = offsets.shape().c;
        if c % 2 != 0 {
            return Err(Error::shape(format!("offset field needs an even channel count, got {c}")));
        }
        Ok(OffsetField { offsets, groups: c / 2 })
    }

    pub fn tensor(&self) -> &Tensor<T> {
        &self.offsets
    }

    pub fn groups(&self) -> usize {
        self.groups
    }
}

/// `S = G + O`, broadcasting the base grid over batch and groups.
pub fn build_sampling_set<T: Element>(offsets: &OffsetField<T>, base: &SamplingGrid<T>) -> Result<SamplingGrid<T>> {
    let os = offsets.offsets.shape();
    let (gn, gh, gw) = base.extent();
    if (gh, gw) != (os.h, os.w) {
        return Err(Error::shape(format!(
            "offset field is {}x{} but base grid is {gh}x{gw}",
            os.h, os.w
        )));
    }
    if gn != 1 && gn != os.n {
        return Err(Error::shape(format!("base grid batch {gn} does not match offsets batch {}", os.n)));
    }
    if base.groups() != 1 && base.groups() != offsets.groups {
        return Err(Error::shape(format!(
            "base grid has {} groups, offsets have {}",
            base.groups(),
            offsets.groups
        )));
    }
    let mut coords = offsets.offsets.clone();
    let plane = os.plane();
    for b in 0..os.n {
        let gb = if gn == 1 { 0 } else { b };
        for ch in 0..os.c {
            let gc = if base.groups() == 1 { ch % 2 } else { ch };
            let src = base.coords().plane(gb, gc);
            let start = (b * os.c + ch) * plane;
            for (d, &g) in coords.data_mut()[start..start + plane].iter_mut().zip(src) {
                *d += g;
            }
        }
    }
    SamplingGrid::new(coords)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DySampleModule<T = f64> {
    config: DySampleConfig,
    /// Offset projection (`linear` / `linear₂`).
    pub offset_head: LinearLayer<T>,
    /// Scope projection (`linear₁`), dynamic scope only.
    pub scope_head: Option<LinearLayer<T>>,
}

#[derive(Clone, Debug)]
pub struct DySampleGrads<T = f64> {
    pub x: Tensor<T>,
    pub offset_head: LinearGrads<T>,
    pub scope_head: Option<LinearGrads<T>>,
}

impl<T: Element> DySampleGrads<T> {
    /// Parameter gradients, ordered like [`DySampleModule::parameters`].
    pub fn params(&self) -> Vec<&Tensor<T>> {
        let mut out = self.offset_head.params();
        if let Some(s) = &self.scope_head {
            out.extend(s.params());
        }
        out
    }
}

/// Intermediate values kept for the backward pass.
struct OffsetTrace<'a, T: Element> {
    head_input: Cow<'a, Tensor<T>>,
    raw: Tensor<T>,
    /// `sigmoid(linear₁(X))` for dynamic scope, `tanh(linear(X))` for tanh scope.
    gate: Option<Tensor<T>>,
    field: OffsetField<T>,
}

/// A fresh module for one of the named variants: zero-initialized heads
/// without bias, bilinear init.
pub fn make_variant<T: Element>(variant: Variant, channels: usize, scale: usize) -> Result<DySampleModule<T>> {
    DySampleModule::new(variant.config(channels, scale)?)
}

impl<T: Element> DySampleModule<T> {
    /// Zero-initialized, bias-free heads, so the module starts as its base-grid interpolation.
    pub fn new(config: DySampleConfig) -> Result<Self> {
        config.validate()?;
        let (cin, cout) = (config.head_in(), config.head_out());
        Ok(DySampleModule {
            config,
            offset_head: LinearLayer::zeros(cin, cout, false)?,
            scope_head: if config.scope.is_dynamic() {
                Some(LinearLayer::zeros(cin, cout, false)?)
            } else {
                None
            },
        })
    }

    pub fn config(&self) -> &DySampleConfig {
        &self.config
    }

    pub fn scale(&self) -> usize {
        self.config.scale
    }

    /// Fills every head weight with `N(0, std²)` draws.
    pub fn randomize(&mut self, rng: &mut Rng, std: f64) -> Result<()> {
        for p in self.parameters_mut() {
            *p = Tensor::randn(p.shape(), rng, std)?;
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.offset_head.param_count() + self.scope_head.as_ref().map_or(0, |h| h.param_count())
    }

    pub fn parameters(&self) -> Vec<&Tensor<T>> {
        let mut out = self.offset_head.parameters();
        if let Some(h) = &self.scope_head {
            out.extend(h.parameters());
        }
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = self.offset_head.parameters_mut();
        if let Some(h) = &mut self.scope_head {
            out.extend(h.parameters_mut());
        }
        out
    }

    pub fn named_parameters(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = vec![("offset_head.weight".to_string(), &self.offset_head.weight)];
        if let Some(b) = &self.offset_head.bias {
            out.push(("offset_head.bias".into(), b));
        }
        if let Some(h) = &self.scope_head {
            out.push(("scope_head.weight".into(), &h.weight));
            if let Some(b) = &h.bias {
                out.push(("scope_head.bias".into(), b));
            }
        }
        out
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        if x.shape().c != self.config.channels {
            return Err(Error::shape(format!(
                "module configured for {} channels, got {}",
                self.config.channels,
                x.shape().c
            )));
        }
        Ok(())
    }

    fn trace_offsets<'a>(&self, x: &'a Tensor<T>) -> Result<OffsetTrace<'a, T>> {
        self.check_input(x)?;
        let s = self.config.scale;
        let head_input = match self.config.style {
            OffsetStyle::LinearThenShuffle => Cow::Borrowed(x),
            OffsetStyle::ShuffleThenLinear => Cow::Owned(x.pixel_shuffle(s)?),
        };
        let raw = self.offset_head.forward(&head_input)?;
        let (pre, gate) = match self.config.scope {
            ScopeMode::Static(f) => (raw.mul_scalar(T::from_f64(f)), None),
            ScopeMode::Dynamic(cap) => {
                let head = self
                    .scope_head
                    .as_ref()
                    .ok_or_else(|| Error::invalid("dynamic scope requires a scope head"))?;
                let gate = sigmoid(&head.forward(&head_input)?);
                let cap = T::from_f64(cap);
                let pre = gate.zip_map(&raw, |m, r| cap * m * r)?;
                (pre, Some(gate))
            }
            ScopeMode::Tanh(bound) => {
                let t = raw.map(|v| v.tanh());
                (t.mul_scalar(T::from_f64(bound)), Some(t))
            }
        };
        let offsets = match self.config.style {
            OffsetStyle::LinearThenShuffle => pre.pixel_shuffle(s)?,
            OffsetStyle::ShuffleThenLinear => pre,
        };
        Ok(OffsetTrace {
            head_input,
            raw,
            gate,
            field: OffsetField::new(offsets)?,
        })
    }

    /// Offsets `O` for input `x`, shape `(n, 2·g, s·h, s·w)`.
    pub fn generate_offsets(&self, x: &Tensor<T>) -> Result<OffsetField<T>> {
        Ok(self.trace_offsets(x)?.field)
    }

    /// Scope modulation `cap · sigmoid(linear₁(X))` before any reshaping, dynamic scope only.
    pub fn modulation(&self, x: &Tensor<T>) -> Result<Option<Tensor<T>>> {
        let trace = self.trace_offsets(x)?;
        Ok(match self.config.scope {
            ScopeMode::Dynamic(cap) => trace.gate.map(|g| g.mul_scalar(T::from_f64(cap))),
            _ => None,
        })
    }

    pub fn base_grid(&self, x: &Tensor<T>) -> Result<SamplingGrid<T>> {
        let s = x.shape();
        make_base_grid(s.h, s.w, self.config.scale, self.config.init)
    }

    /// The full sampling set `S = G + O` for `x`.
    pub fn sampling_set(&self, x: &Tensor<T>) -> Result<SamplingGrid<T>> {
        let offsets = self.generate_offsets(x)?;
        build_sampling_set(&offsets, &self.base_grid(x)?)
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        grid_sample(x, &self.sampling_set(x)?)
    }

    pub fn backward(&self, x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<DySampleGrads<T>> {
        let s = self.config.scale;
        let trace = self.trace_offsets(x)?;
        let grid = build_sampling_set(&trace.field, &self.base_grid(x)?)?;
        let (grad_x_sampled, grad_coords) = grid_sample_backward(x, &grid, grad_out)?;

        // dS/dO is the identity.
        let grad_pre = match self.config.style {
            OffsetStyle::LinearThenShuffle => grad_coords.pixel_unshuffle(s)?,
            OffsetStyle::ShuffleThenLinear => grad_coords,
        };

        let (grad_raw, scope_grads) = match (self.config.scope, &trace.gate) {
            (ScopeMode::Static(f), _) => (grad_pre.mul_scalar(T::from_f64(f)), None),
            (ScopeMode::Dynamic(cap), Some(gate)) => {
                let cap = T::from_f64(cap);
                let grad_raw = grad_pre.zip_map(gate, |g, m| g * cap * m)?;
                let grad_gate = grad_pre.zip_map(&trace.raw, |g, r| g * cap * r)?;
                let grad_logits = sigmoid_backward(gate, &grad_gate)?;
                let head = self
                    .scope_head
                    .as_ref()
                    .ok_or_else(|| Error::invalid("dynamic scope requires a scope head"))?;
                (grad_raw, Some(head.backward(&trace.head_input, &grad_logits)?))
            }
            (ScopeMode::Tanh(bound), Some(t)) => {
                let bound = T::from_f64(bound);
                (grad_pre.zip_map(t, |g, t| g * bound * (T::one() - t * t))?, None)
            }
            _ => unreachable!("gate is recorded for every non-static scope"),
        };
        let offset_grads = self.offset_head.backward(&trace.head_input, &grad_raw)?;

        let mut grad_head_input = offset_grads.x.clone();
        if let Some(sg) = &scope_grads {
            grad_head_input.add_assign(&sg.x)?;
        }
        let grad_from_head = match self.config.style {
            OffsetStyle::LinearThenShuffle => grad_head_input,
            OffsetStyle::ShuffleThenLinear => grad_head_input.pixel_unshuffle(s)?,
        };
        let grad_x = grad_x_sampled.add(&grad_from_head)?;

        Ok(DySampleGrads {
            x: grad_x,
            offset_head: offset_grads,
            scope_head: scope_grads,
        })
    }

    /// Output shape for an input of shape `input`.
    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        let s = self.config.scale;
        Shape::new(input.n, input.c, input.h * s, input.w * s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{bilinear_upsample, nearest_upsample};

    fn shape(n: usize, c: usize, h: usize, w: usize) -> Shape {
        Shape::new(n, c, h, w).unwrap()
    }

    #[test]
    fn variant_parameter_counts() {
        let m = make_variant::<f64>(Variant::DySample, 256, 2).unwrap();
        assert_eq!((m.offset_head.c_in(), m.offset_head.c_out()), (256, 32));
        assert_eq!(m.param_count(), 8192);
        let m = make_variant::<f64>(Variant::DySampleS, 256, 2).unwrap();
        assert_eq!((m.offset_head.c_in(), m.offset_head.c_out()), (64, 16));
        assert_eq!(m.param_count(), 1024);
        for (stat, dynamic) in [
            (Variant::DySample, Variant::DySamplePlus),
            (Variant::DySampleS, Variant::DySampleSPlus),
        ] {
            let a = make_variant::<f64>(stat, 256, 2).unwrap().param_count();
            let b = make_variant::<f64>(dynamic, 256, 2).unwrap().param_count();
            assert_eq!(b, 2 * a);
        }
    }

    #[test]
    fn invalid_configs() {
        assert!(make_variant::<f64>(Variant::DySample, 6, 2).is_err());
        assert!(make_variant::<f64>(Variant::DySampleS, 16, 2).is_err());
        assert!(make_variant::<f64>(Variant::DySampleS, 32, 2).is_ok());
        assert!(DySampleConfig::new(8, 2, OffsetStyle::LinearThenShuffle, ScopeMode::Static(0.0)).is_err());
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("dysample++".parse::<Variant>().is_err());
    }

    #[test]
    fn zero_heads_give_zero_offsets() {
        let x = Tensor::<f64>::randn(shape(1, 32, 3, 4), &mut Rng::new(1), 1.0).unwrap();
        for v in Variant::ALL {
            let m = make_variant::<f64>(v, 32, 2).unwrap();
            let o = m.generate_offsets(&x).unwrap();
            let g = if v.style() == OffsetStyle::LinearThenShuffle { 4 } else { 8 };
            assert_eq!(o.tensor().shape(), shape(1, 2 * g, 6, 8));
            assert!(o.tensor().data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn static_offsets_are_scaled_head_output() {
        let mut rng = Rng::new(2);
        let mut m = make_variant::<f64>(Variant::DySample, 8, 2).unwrap();
        m.randomize(&mut rng, 0.3).unwrap();
        let x = Tensor::randn(shape(1, 8, 3, 3), &mut rng, 1.0).unwrap();
        let raw = m.offset_head.forward(&x).unwrap().pixel_shuffle(2).unwrap();
        let o = m.generate_offsets(&x).unwrap();
        let expected = raw.mul_scalar(0.25);
        assert!(o.tensor().max_abs_diff(&expected).unwrap() < 1e-15);
    }

    #[test]
    fn static_offsets_linear_in_factor() {
        let mut rng = Rng::new(3);
        let cfg = Variant::DySample.config(8, 2).unwrap();
        let mut a = DySampleModule::<f64>::new(cfg).unwrap();
        a.randomize(&mut rng, 0.3).unwrap();
        let mut b = DySampleModule::new(cfg.with_scope(ScopeMode::Static(0.5)).unwrap()).unwrap();
        b.offset_head = a.offset_head.clone();
        let x = Tensor::randn(shape(1, 8, 3, 3), &mut rng, 1.0).unwrap();
        let oa = a.generate_offsets(&x).unwrap();
        let ob = b.generate_offsets(&x).unwrap();
        assert_eq!(oa.tensor().mul_scalar(2.0), *ob.tensor());
    }

    #[test]
    fn dynamic_with_zero_scope_head_matches_static_quarter() {
        let mut rng = Rng::new(4);
        for (dynamic, stat) in [
            (Variant::DySamplePlus, Variant::DySample),
            (Variant::DySampleSPlus, Variant::DySampleS),
        ] {
            let mut d = make_variant::<f64>(dynamic, 32, 2).unwrap();
            d.offset_head.weight = Tensor::randn(d.offset_head.weight.shape(), &mut rng, 0.3).unwrap();
            let mut s = make_variant::<f64>(stat, 32, 2).unwrap();
            s.offset_head = d.offset_head.clone();
            let x = Tensor::randn(shape(1, 32, 3, 3), &mut rng, 1.0).unwrap();
            let m = d.modulation(&x).unwrap().unwrap();
            assert!(m.data().iter().all(|&v| v == 0.25));
            let od = d.generate_offsets(&x).unwrap();
            let os = s.generate_offsets(&x).unwrap();
            assert!(od.tensor().max_abs_diff(os.tensor()).unwrap() < 1e-15);
        }
    }

    #[test]
    fn modulation_strictly_inside_cap() {
        let mut rng = Rng::new(5);
        let mut m = make_variant::<f64>(Variant::DySamplePlus, 8, 2).unwrap();
        m.randomize(&mut rng, 2.0).unwrap();
        let x = Tensor::randn(shape(1, 8, 4, 4), &mut rng, 1.0).unwrap();
        let md = m.modulation(&x).unwrap().unwrap();
        assert!(md.data().iter().all(|&v| v > 0.0 && v < 0.5));
    }

    #[test]
    fn tanh_scope_is_bounded() {
        let mut rng = Rng::new(6);
        let cfg = Variant::DySample.config(8, 2).unwrap().with_scope(ScopeMode::Tanh(0.25)).unwrap();
        let mut m = DySampleModule::<f64>::new(cfg).unwrap();
        m.randomize(&mut rng, 5.0).unwrap();
        let x = Tensor::randn(shape(1, 8, 4, 4), &mut rng, 1.0).unwrap();
        let o = m.generate_offsets(&x).unwrap();
        assert!(o.tensor().max_abs() <= 0.25);
    }

    #[test]
    fn sampling_set_composition() {
        let base = make_base_grid::<f64>(2, 2, 2, InitMode::Bilinear).unwrap();
        let zero = OffsetField::new(Tensor::zeros(shape(1, 2, 4, 4))).unwrap();
        assert_eq!(build_sampling_set(&zero, &base).unwrap(), base);

        let mut shift = Tensor::zeros(shape(1, 4, 4, 4));
        for c in [0, 2] {
            for v in shift.data_mut()[c * 16..(c + 1) * 16].iter_mut() {
                *v = 1.0;
            }
        }
        let s = build_sampling_set(&OffsetField::new(shift).unwrap(), &base).unwrap();
        assert_eq!(s.groups(), 2);
        for g in 0..2 {
            for (a, b) in s.coords().plane(0, 2 * g).iter().zip(base.coords().plane(0, 0)) {
                assert_eq!(*a, b + 1.0);
            }
            assert_eq!(s.coords().plane(0, 2 * g + 1), base.coords().plane(0, 1));
        }

        let wrong = OffsetField::new(Tensor::zeros(shape(1, 2, 3, 4))).unwrap();
        assert!(build_sampling_set(&wrong, &base).is_err());
    }

    #[test]
    fn fresh_modules_reproduce_interpolation() {
        let x = Tensor::<f64>::randn(shape(2, 32, 5, 3), &mut Rng::new(7), 1.0).unwrap();
        for s in [1, 2, 4] {
            let bil = bilinear_upsample(&x, s).unwrap();
            let near = nearest_upsample(&x, s).unwrap();
            for v in [Variant::DySample, Variant::DySamplePlus] {
                let m = make_variant::<f64>(v, 32, s).unwrap();
                assert!(m.forward(&x).unwrap().max_abs_diff(&bil).unwrap() < 1e-12);
                let m = DySampleModule::new(m.config().with_init(InitMode::Nearest)).unwrap();
                assert_eq!(m.forward(&x).unwrap(), near);
            }
        }
    }

    #[test]
    fn output_within_input_range_per_group() {
        let mut rng = Rng::new(8);
        let mut m = make_variant::<f64>(Variant::DySamplePlus, 8, 2).unwrap();
        m.randomize(&mut rng, 1.0).unwrap();
        let x = Tensor::randn(shape(1, 8, 5, 5), &mut rng, 1.0).unwrap();
        let y = m.forward(&x).unwrap();
        let xg = x.split_channels(4).unwrap();
        let yg = y.split_channels(4).unwrap();
        for (a, b) in xg.iter().zip(&yg) {
            assert!(b.min() >= a.min() - 1e-12 && b.max() <= a.max() + 1e-12);
        }
    }
}
