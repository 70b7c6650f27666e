use std::fmt::Write as _;

use super::precise::{loss_dd, Dd};
use super::{backward, Gradients};
use crate::error::Result;
use crate::ingest::Sample;
use crate::model::{forward, ModelParams, SpatialContext, VariantConfig};

pub const DEFAULT_DELTA: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct TensorError {
    pub name: String,
    pub max_rel_error: f64,
    /// Flat index of the worst coordinate.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorError>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_error() < self.tolerance
    }

    pub fn to_table(&self) -> String {
        let width = self.tensors.iter().map(|t| t.name.len()).max().unwrap_or(0);
        let mut out = String::new();
        for t in &self.tensors {
            let _ = writeln!(out, "{:<width$}  {:.3e}", t.name, t.max_rel_error);
        }
        out
    }
}

pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-8)
}

/// Compares the hand-derived gradient of one sample's loss against central
/// differences with step [`DEFAULT_DELTA`].
pub fn finite_difference_check(
    params: &ModelParams,
    sample: &Sample,
    spatial: &SpatialContext,
    variant: &VariantConfig,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let trace = forward(sample, params, spatial, variant)?;
    let analytic = backward(&trace, sample, params, variant)?;
    compare_gradients(params, sample, spatial, variant, &analytic, DEFAULT_DELTA, tolerance)
}

/// Checks an arbitrary gradient against central differences, one coordinate
/// at a time. Losses are evaluated in double-double so that the difference
/// quotient is not dominated by f64 rounding.
pub fn compare_gradients(
    params: &ModelParams,
    sample: &Sample,
    spatial: &SpatialContext,
    variant: &VariantConfig,
    analytic: &Gradients,
    delta: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    // validates shapes and geometry once with the production forward pass
    forward(sample, params, spatial, variant)?;
    let loss = |p: &ModelParams| loss_dd(sample, p, spatial, variant);
    let mut probe = params.clone();
    let names = params.tensor_names();
    let lens: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
    let mut tensors = Vec::with_capacity(names.len());
    for (ti, (name, len)) in names.into_iter().zip(lens).enumerate() {
        let mut worst = TensorError {
            name,
            max_rel_error: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for i in 0..len {
            let orig = probe.tensors()[ti][i];
            probe.tensors_mut()[ti][i] = orig + delta;
            let up = loss(&probe)?;
            probe.tensors_mut()[ti][i] = orig - delta;
            let down = loss(&probe)?;
            probe.tensors_mut()[ti][i] = orig;
            let step = Dd::new(orig + delta) - Dd::new(orig - delta);
            let numeric = ((up - down) / step).to_f64();
            let a = analytic.tensors()[ti][i];
            let err = relative_error(a, numeric);
            if err > worst.max_rel_error || err.is_nan() {
                worst.max_rel_error = if err.is_nan() { f64::INFINITY } else { err };
                worst.worst_index = i;
                worst.analytic = a;
                worst.numeric = numeric;
            }
        }
        tensors.push(worst);
    }
    Ok(GradCheckReport { tensors, tolerance })
}
