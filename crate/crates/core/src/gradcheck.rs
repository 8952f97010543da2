//! Finite-difference verification of the analytic backward pass.
//!
//! The checker perturbs every parameter (and input) entry by ±h, recomputes
//! the cross-entropy loss in eval mode, and compares the central-difference
//! slope against the hand-derived gradient. Errors are reported per tensor
//! as guarded relative errors, so both large and near-zero gradients are
//! judged fairly.

use alloc::vec::Vec;

use crate::attention::{DropoutMode, InputGrads, ModelParams};
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::train::cross_entropy;

/// Guard floor for relative error: differences are measured against
/// `max(GUARD, |analytic|, |numeric|)` so exact zeros do not divide by zero.
pub const GUARD: f64 = 1e-5;

/// Central difference `(f(x+h) - f(x-h)) / 2h`.
pub fn central_difference(mut f: impl FnMut(f64) -> Result<f64>, x: f64, h: f64) -> Result<f64> {
    Ok((f(x + h)? - f(x - h)?) / (2.0 * h))
}

/// Guarded relative error between an analytic and a numeric derivative.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / GUARD.max(analytic.abs()).max(numeric.abs())
}

/// Worst disagreement within one tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: &'static str,
    pub max_rel_err: f64,
    /// (row, col) of the worst entry.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
}

/// Per-tensor comparison results, parameters first (canonical order), then
/// the three inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct GradReport {
    pub tensors: Vec<TensorCheck>,
    pub tolerance: f64,
}

impl GradReport {
    pub fn max_rel_err(&self) -> f64 {
        self.tensors
            .iter()
            .map(|t| t.max_rel_err)
            .fold(0.0, f64::max)
    }

    /// True iff every tensor's worst relative error is within tolerance.
    pub fn passes(&self) -> bool {
        self.tensors.iter().all(|t| t.max_rel_err <= self.tolerance)
    }

    /// The tensor with the largest error.
    pub fn worst(&self) -> &TensorCheck {
        self.tensors
            .iter()
            .max_by(|a, b| a.max_rel_err.total_cmp(&b.max_rel_err))
            .expect("report has at least one tensor")
    }
}

fn loss_of(params: &ModelParams, i: &Mat, b: &Mat, q: &Mat, target: usize) -> Result<f64> {
    let pass = params.forward(i, b, q, &mut DropoutMode::Eval)?;
    Ok(cross_entropy(pass.logits(), target)?.0)
}

/// Estimates every gradient by central differences. Returned containers have
/// the same shapes as the parameters and inputs.
pub fn numeric_gradients(
    params: &ModelParams,
    instance: &Mat,
    background: &Mat,
    question: &Mat,
    target: usize,
    h: f64,
) -> Result<(ModelParams, InputGrads)> {
    if h.is_nan() || h <= 0.0 {
        return Err(Error::Domain {
            context: "numeric_gradients",
            detail: alloc::format!("step h must be positive, got {h}"),
        });
    }
    let mut out = ModelParams::zeros(params.dims)?;
    let count = params.tensors().len();
    for k in 0..count {
        let (rows, cols) = {
            let t = params.tensors()[k].1;
            (t.rows(), t.cols())
        };
        for r in 0..rows {
            for c in 0..cols {
                let mut plus = params.clone();
                *plus.tensors_mut()[k].1.at_mut(r, c) += h;
                let mut minus = params.clone();
                *minus.tensors_mut()[k].1.at_mut(r, c) -= h;
                let fd = (loss_of(&plus, instance, background, question, target)?
                    - loss_of(&minus, instance, background, question, target)?)
                    / (2.0 * h);
                *out.tensors_mut()[k].1.at_mut(r, c) = fd;
            }
        }
    }

    let mut inputs = InputGrads {
        instance: Mat::zeros(instance.rows(), instance.cols()),
        background: Mat::zeros(background.rows(), background.cols()),
        question: Mat::zeros(question.rows(), question.cols()),
    };
    for which in 0..3 {
        let base = match which {
            0 => instance,
            1 => background,
            _ => question,
        };
        for r in 0..base.rows() {
            for c in 0..base.cols() {
                let mut plus = base.clone();
                *plus.at_mut(r, c) += h;
                let mut minus = base.clone();
                *minus.at_mut(r, c) -= h;
                let (fp, fm) = match which {
                    0 => (
                        loss_of(params, &plus, background, question, target)?,
                        loss_of(params, &minus, background, question, target)?,
                    ),
                    1 => (
                        loss_of(params, instance, &plus, question, target)?,
                        loss_of(params, instance, &minus, question, target)?,
                    ),
                    _ => (
                        loss_of(params, instance, background, &plus, target)?,
                        loss_of(params, instance, background, &minus, target)?,
                    ),
                };
                let dst = match which {
                    0 => &mut inputs.instance,
                    1 => &mut inputs.background,
                    _ => &mut inputs.question,
                };
                *dst.at_mut(r, c) = (fp - fm) / (2.0 * h);
            }
        }
    }
    Ok((out, inputs))
}

fn check_tensor(name: &'static str, analytic: &Mat, numeric: &Mat) -> TensorCheck {
    let mut out = TensorCheck {
        name,
        max_rel_err: 0.0,
        worst: (0, 0),
        analytic: analytic.at(0, 0),
        numeric: numeric.at(0, 0),
    };
    for r in 0..analytic.rows() {
        for c in 0..analytic.cols() {
            let e = relative_error(analytic.at(r, c), numeric.at(r, c));
            if e > out.max_rel_err {
                out.max_rel_err = e;
                out.worst = (r, c);
                out.analytic = analytic.at(r, c);
                out.numeric = numeric.at(r, c);
            }
        }
    }
    out
}

/// Compares an analytic gradient set against a numeric one, tensor by
/// tensor. Callers that want a negative control can corrupt `analytic`
/// before comparing.
pub fn compare(
    analytic: &ModelParams,
    analytic_inputs: &InputGrads,
    numeric: &ModelParams,
    numeric_inputs: &InputGrads,
    tolerance: f64,
) -> GradReport {
    let mut tensors = Vec::new();
    for ((name, a), (_, n)) in analytic.tensors().iter().zip(numeric.tensors()) {
        tensors.push(check_tensor(name, a, n));
    }
    tensors.push(check_tensor(
        "input.instance",
        &analytic_inputs.instance,
        &numeric_inputs.instance,
    ));
    tensors.push(check_tensor(
        "input.background",
        &analytic_inputs.background,
        &numeric_inputs.background,
    ));
    tensors.push(check_tensor(
        "input.question",
        &analytic_inputs.question,
        &numeric_inputs.question,
    ));
    GradReport { tensors, tolerance }
}

/// Full check of one model on one sample: analytic backward vs central
/// differences with step `h`, judged at `tolerance`.
pub fn check_model(
    params: &ModelParams,
    instance: &Mat,
    background: &Mat,
    question: &Mat,
    target: usize,
    h: f64,
    tolerance: f64,
) -> Result<GradReport> {
    let pass = params.forward(instance, background, question, &mut DropoutMode::Eval)?;
    let (_, dlogits) = cross_entropy(pass.logits(), target)?;
    let (analytic, analytic_inputs) = params.backward(&pass, &dlogits)?;
    let (numeric, numeric_inputs) =
        numeric_gradients(params, instance, background, question, target, h)?;
    Ok(compare(
        &analytic,
        &analytic_inputs,
        &numeric,
        &numeric_inputs,
        tolerance,
    ))
}
