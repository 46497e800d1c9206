//! Central finite-difference checks of analytic gradients.
//!
//! Every operator is reduced to the scalar `f = <g, F(inputs)>` for a fixed
//! random `g`, and each input coordinate is perturbed by `±eps`.

use std::fmt;

use serde::Serialize;

use crate::baselines::{Carafe, CarafeConfig};
use crate::dysample::{make_variant, DySampleModule, Variant};
use crate::error::{Error, Result};
use crate::layers::{Conv2dLayer, Deconv2dLayer, LinearLayer};
use crate::sampler::{grid_sample, grid_sample_backward, SamplingGrid};
use crate::tensor::{Rng, Shape, Tensor};

/// An operator with inputs that can be perturbed and an analytic gradient.
pub trait Differentiable {
    fn name(&self) -> String;
    /// Current values of every differentiable input, data first.
    fn inputs(&self) -> Vec<Tensor>;
    fn evaluate(&self, inputs: &[Tensor]) -> Result<Tensor>;
    /// Gradients of `<grad_out, F(inputs)>`, one per input, same order.
    fn gradients(&self, inputs: &[Tensor], grad_out: &Tensor) -> Result<Vec<Tensor>>;
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub op: String,
    pub checked: usize,
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    /// `(input index, flat element index)` of the worst coordinate.
    pub worst: (usize, usize),
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_err <= tolerance
    }
}

/// `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares the analytic gradient of `op` with central differences.
pub fn grad_check(op: &dyn Differentiable, grad_out: &Tensor, eps: f64) -> Result<GradCheckReport> {
    if !(eps > 0.0) {
        return Err(Error::invalid("eps must be positive"));
    }
    let inputs = op.inputs();
    let analytic = op.gradients(&inputs, grad_out)?;
    if analytic.len() != inputs.len() {
        return Err(Error::invalid("gradient count does not match input count"));
    }

    let mut report = GradCheckReport {
        op: op.name(),
        checked: 0,
        max_rel_err: 0.0,
        max_abs_err: 0.0,
        worst: (0, 0),
    };
    let mut probe = inputs.clone();
    for (t, grad) in analytic.iter().enumerate() {
        if grad.shape() != inputs[t].shape() {
            return Err(Error::shape(format!("gradient {t} has shape {}, input has {}", grad.shape(), inputs[t].shape())));
        }
        for i in 0..inputs[t].len() {
            let v = inputs[t].data()[i];
            probe[t].data_mut()[i] = v + eps;
            let plus = op.evaluate(&probe)?;
            probe[t].data_mut()[i] = v - eps;
            let minus = op.evaluate(&probe)?;
            probe[t].data_mut()[i] = v;
            // <g, F(+)> - <g, F(-)> taken as one sum so unchanged outputs cancel exactly
            let numeric = plus.sub(&minus)?.dot(grad_out)? / (2.0 * eps);
            let a = grad.data()[i];
            let rel = relative_error(a, numeric);
            report.max_abs_err = report.max_abs_err.max((a - numeric).abs());
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst = (t, i);
            }
            report.checked += 1;
        }
    }
    Ok(report)
}

/// `grid_sample` with respect to both the feature map and the coordinates.
pub struct GridSampleCheck {
    pub x: Tensor,
    pub coords: Tensor,
}

impl Differentiable for GridSampleCheck {
    fn name(&self) -> String {
        "grid_sample".into()
    }

    fn inputs(&self) -> Vec<Tensor> {
        vec![self.x.clone(), self.coords.clone()]
    }

    fn evaluate(&self, inputs: &[Tensor]) -> Result<Tensor> {
        grid_sample(&inputs[0], &SamplingGrid::new(inputs[1].clone())?)
    }

    fn gradients(&self, inputs: &[Tensor], grad_out: &Tensor) -> Result<Vec<Tensor>> {
        let (gx, gc) = grid_sample_backward(&inputs[0], &SamplingGrid::new(inputs[1].clone())?, grad_out)?;
        Ok(vec![gx, gc])
    }
}

/// A module whose parameters are checked together with its input.
pub trait Module: Clone {
    fn label(&self) -> String;
    fn params(&self) -> Vec<&Tensor>;
    fn params_mut(&mut self) -> Vec<&mut Tensor>;
    fn run(&self, x: &Tensor) -> Result<Tensor>;
    /// `(grad_x, parameter grads)`.
    fn grads(&self, x: &Tensor, grad_out: &Tensor) -> Result<(Tensor, Vec<Tensor>)>;
}

impl Module for LinearLayer {
    fn label(&self) -> String {
        "linear".into()
    }
    fn params(&self) -> Vec<&Tensor> {
        self.parameters()
    }
    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.parameters_mut()
    }
    fn run(&self, x: &Tensor) -> Result<Tensor> {
        self.forward(x)
    }
    fn grads(&self, x: &Tensor, g: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        let r = self.backward(x, g)?;
        let p = r.params().into_iter().cloned().collect();
        Ok((r.x, p))
    }
}

impl Module for Conv2dLayer {
    fn label(&self) -> String {
        "conv2d".into()
    }
    fn params(&self) -> Vec<&Tensor> {
        self.parameters()
    }
    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.parameters_mut()
    }
    fn run(&self, x: &Tensor) -> Result<Tensor> {
        self.forward(x)
    }
    fn grads(&self, x: &Tensor, g: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        let r = self.backward(x, g)?;
        let p = r.params().into_iter().cloned().collect();
        Ok((r.x, p))
    }
}

impl Module for Deconv2dLayer {
    fn label(&self) -> String {
        "deconv2d".into()
    }
    fn params(&self) -> Vec<&Tensor> {
        self.parameters()
    }
    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.parameters_mut()
    }
    fn run(&self, x: &Tensor) -> Result<Tensor> {
        self.forward(x)
    }
    fn grads(&self, x: &Tensor, g: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        let r = self.backward(x, g)?;
        let p = r.params().into_iter().cloned().collect();
        Ok((r.x, p))
    }
}

impl Module for Carafe {
    fn label(&self) -> String {
        "carafe".into()
    }
    fn params(&self) -> Vec<&Tensor> {
        self.parameters()
    }
    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.parameters_mut()
    }
    fn run(&self, x: &Tensor) -> Result<Tensor> {
        self.forward(x)
    }
    fn grads(&self, x: &Tensor, g: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        let r = self.backward(x, g)?;
        let p = r.params().into_iter().cloned().collect();
        Ok((r.x, p))
    }
}

impl Module for DySampleModule {
    fn label(&self) -> String {
        let v = Variant::ALL
            .into_iter()
            .find(|v| v.style() == self.config().style && v.scope().is_dynamic() == self.config().scope.is_dynamic())
            .unwrap_or(Variant::DySample);
        v.name().into()
    }
    fn params(&self) -> Vec<&Tensor> {
        self.parameters()
    }
    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.parameters_mut()
    }
    fn run(&self, x: &Tensor) -> Result<Tensor> {
        self.forward(x)
    }
    fn grads(&self, x: &Tensor, g: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        let r = self.backward(x, g)?;
        let p = r.params().into_iter().cloned().collect();
        Ok((r.x, p))
    }
}

/// Checks a module with respect to its input and all of its parameters.
pub struct ModuleCheck<M> {
    pub module: M,
    pub x: Tensor,
}

impl<M: Module> ModuleCheck<M> {
    fn with_inputs(&self, inputs: &[Tensor]) -> M {
        let mut m = self.module.clone();
        for (slot, v) in m.params_mut().into_iter().zip(&inputs[1..]) {
            *slot = v.clone();
        }
        m
    }
}

impl<M: Module> Differentiable for ModuleCheck<M> {
    fn name(&self) -> String {
        self.module.label()
    }

    fn inputs(&self) -> Vec<Tensor> {
        let mut out = vec![self.x.clone()];
        out.extend(self.module.params().into_iter().cloned());
        out
    }

    fn evaluate(&self, inputs: &[Tensor]) -> Result<Tensor> {
        self.with_inputs(inputs).run(&inputs[0])
    }

    fn gradients(&self, inputs: &[Tensor], grad_out: &Tensor) -> Result<Vec<Tensor>> {
        let (gx, gp) = self.with_inputs(inputs).grads(&inputs[0], grad_out)?;
        let mut out = vec![gx];
        out.extend(gp);
        Ok(out)
    }
}

/// Operators with a randomized check instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckOp {
    GridSample,
    Linear,
    Conv,
    Deconv,
    Carafe,
    DySample(Variant),
}

impl CheckOp {
    pub const ALL: [CheckOp; 9] = [
        CheckOp::GridSample,
        CheckOp::Linear,
        CheckOp::Conv,
        CheckOp::Deconv,
        CheckOp::Carafe,
        CheckOp::DySample(Variant::DySample),
        CheckOp::DySample(Variant::DySamplePlus),
        CheckOp::DySample(Variant::DySampleS),
        CheckOp::DySample(Variant::DySampleSPlus),
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckOp::GridSample => "grid_sample",
            CheckOp::Linear => "linear",
            CheckOp::Conv => "conv2d",
            CheckOp::Deconv => "deconv2d",
            CheckOp::Carafe => "carafe",
            CheckOp::DySample(v) => v.name(),
        }
    }

    /// Largest accepted relative error.
    pub fn tolerance(self) -> f64 {
        match self {
            CheckOp::DySample(_) => 1e-4,
            _ => 1e-5,
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        CheckOp::ALL.into_iter().find(|op| op.name() == name).ok_or_else(|| {
            let names: Vec<_> = CheckOp::ALL.iter().map(|o| o.name()).collect();
            Error::invalid(format!("unknown op '{name}', expected one of: {}", names.join(", ")))
        })
    }
}

impl fmt::Display for CheckOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Minimum margin kept between sampling coordinates and integers, so that
/// no finite-difference probe crosses a kink of the bilinear kernel.
pub const KINK_MARGIN: f64 = 1e-3;

/// Distance from `v` to the nearest integer.
pub fn integer_distance(v: f64) -> f64 {
    (v - v.round()).abs()
}

fn shape(n: usize, c: usize, h: usize, w: usize) -> Shape {
    Shape::new(n, c, h, w).expect("nonzero extents")
}

/// One coordinate away from every integer: either inside `[0, size−1]` or
/// past a border by up to 1.5 pixels.
fn kink_free_coordinate(rng: &mut Rng, size: usize) -> f64 {
    let frac = rng.uniform(0.05, 0.95);
    match rng.below(6) {
        0 => -1.0 - frac * 0.5,
        1 => (size - 1) as f64 + frac * 1.5,
        _ => rng.below(size.max(2) - 1) as f64 + frac,
    }
}

fn grid_instance(rng: &mut Rng) -> Result<GridSampleCheck> {
    let (c, h, w, g) = (4, 4, 5, 2);
    let x = Tensor::randn(shape(1, c, h, w), rng, 1.0)?;
    let (hh, ww) = (3, 4);
    let mut coords = Tensor::zeros(shape(1, 2 * g, hh, ww));
    for gi in 0..g {
        for i in 0..hh * ww {
            let px = kink_free_coordinate(rng, w);
            let py = kink_free_coordinate(rng, h);
            coords.data_mut()[(2 * gi) * hh * ww + i] = px;
            coords.data_mut()[(2 * gi + 1) * hh * ww + i] = py;
        }
    }
    Ok(GridSampleCheck { x, coords })
}

fn dysample_instance(v: Variant, rng: &mut Rng) -> Result<ModuleCheck<DySampleModule>> {
    let (c, scale) = match v {
        Variant::DySample | Variant::DySamplePlus => (8, 2),
        Variant::DySampleS | Variant::DySampleSPlus => (32, 2),
    };
    let mut module = make_variant::<f64>(v, c, scale)?;
    let head_in = module.config().head_in() as f64;
    for _ in 0..1000 {
        let x = Tensor::randn(shape(1, c, 4, 4), rng, 1.0)?;
        module.randomize(rng, 1.2 / head_in.sqrt())?;
        let set = module.sampling_set(&x)?;
        if set.coords().data().iter().all(|&p| integer_distance(p) > KINK_MARGIN) {
            return Ok(ModuleCheck { module, x });
        }
    }
    Err(Error::invalid("could not draw a kink-free instance"))
}

/// Runs one randomized check of `op`.
pub fn check_op(op: CheckOp, seed: u64, eps: f64) -> Result<GradCheckReport> {
    let mut rng = Rng::new(seed);
    let boxed: Box<dyn Differentiable> = match op {
        CheckOp::GridSample => Box::new(grid_instance(&mut rng)?),
        CheckOp::Linear => Box::new(ModuleCheck {
            module: LinearLayer::fan_in(5, 3, true, &mut rng)?,
            x: Tensor::randn(shape(2, 5, 3, 3), &mut rng, 1.0)?,
        }),
        CheckOp::Conv => {
            let stride = 1 + rng.below(2);
            Box::new(ModuleCheck {
                module: Conv2dLayer::fan_in(3, 4, 3, stride, 1, true, &mut rng)?,
                x: Tensor::randn(shape(1, 3, 5, 6), &mut rng, 1.0)?,
            })
        }
        CheckOp::Deconv => Box::new(ModuleCheck {
            module: Deconv2dLayer::fan_in(3, 4, 3, 2, 1, 1, true, &mut rng)?,
            x: Tensor::randn(shape(1, 3, 3, 4), &mut rng, 1.0)?,
        }),
        CheckOp::Carafe => {
            let cfg = CarafeConfig { c_mid: 4, ..CarafeConfig::default() };
            Box::new(ModuleCheck {
                module: Carafe::new(3, cfg, &mut rng)?,
                x: Tensor::randn(shape(1, 3, 3, 3), &mut rng, 1.0)?,
            })
        }
        CheckOp::DySample(v) => Box::new(dysample_instance(v, &mut rng)?),
    };
    let probe = boxed.evaluate(&boxed.inputs())?;
    let grad_out = Tensor::randn(probe.shape(), &mut rng, 1.0)?;
    grad_check(boxed.as_ref(), &grad_out, eps)
}

/// Runs `trials` seeded checks of `op` and keeps the worst.
pub fn check_trials(op: CheckOp, trials: usize, seed: u64, eps: f64) -> Result<GradCheckReport> {
    if trials == 0 {
        return Err(Error::invalid("trials must be >= 1"));
    }
    let mut worst: Option<GradCheckReport> = None;
    for t in 0..trials {
        let r = check_op(op, seed.wrapping_add(t as u64 * 0x9E37_79B9), eps)?;
        let checked = worst.as_ref().map_or(0, |w| w.checked) + r.checked;
        worst = Some(match worst {
            Some(w) if w.max_rel_err >= r.max_rel_err => GradCheckReport { checked, ..w },
            _ => GradCheckReport { checked, ..r },
        });
    }
    Ok(worst.expect("at least one trial"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1.0, 1.1) - 0.1 / 1.1).abs() < 1e-15);
    }

    #[test]
    fn linear_is_tight() {
        let r = check_op(CheckOp::Linear, 3, 1e-6).unwrap();
        assert!(r.max_rel_err <= 1e-6, "{r:?}");
        assert_eq!(r.checked, 2 * 5 * 9 + 15 + 3);
    }

    #[test]
    fn every_op_agrees_with_differences() {
        for op in CheckOp::ALL {
            let r = check_op(op, 11, 1e-6).unwrap();
            assert!(r.max_abs_err < 1e-8, "{op}: {r:?}");
            if op != CheckOp::Carafe {
                assert!(r.passes(op.tolerance()), "{op}: {r:?}");
            }
        }
    }

    #[test]
    fn carafe_errors_shrink_with_larger_steps() {
        // Away from roundoff the error follows the eps² truncation term.
        let coarse = check_op(CheckOp::Carafe, 11, 1e-3).unwrap();
        let fine = check_op(CheckOp::Carafe, 11, 1e-4).unwrap();
        assert!(fine.max_abs_err < coarse.max_abs_err / 50.0, "{coarse:?} {fine:?}");
    }

    #[test]
    fn detects_wrong_gradient() {
        struct Wrong;
        impl Differentiable for Wrong {
            fn name(&self) -> String {
                "wrong".into()
            }
            fn inputs(&self) -> Vec<Tensor> {
                vec![Tensor::full(Shape::new(1, 1, 1, 2).unwrap(), 1.5)]
            }
            fn evaluate(&self, i: &[Tensor]) -> Result<Tensor> {
                Ok(i[0].map(|v| v * v))
            }
            fn gradients(&self, i: &[Tensor], g: &Tensor) -> Result<Vec<Tensor>> {
                Ok(vec![i[0].zip_map(g, |v, g| v * g)?])
            }
        }
        let g = Tensor::full(Shape::new(1, 1, 1, 2).unwrap(), 1.0);
        let r = grad_check(&Wrong, &g, 1e-6).unwrap();
        assert!((r.max_rel_err - 0.5).abs() < 1e-6);
    }
}
