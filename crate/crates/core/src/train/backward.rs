//! Reverse-mode gradients of `−log o[target]`, derived by hand.
//!
//! With `g = o − y` (the logit gradient):
//!
//! * dependence side: `∂J/∂w[j] = g[j] · s[j] · (1 − ι[j]²) · interval`;
//! * output layer: `∂J/∂W_c = g ⊗ c`, and `∂J/∂c = W_cᵀ g`;
//! * each hidden branch `hid = tanh(Σ Wₖ xₖ)`: `δ = ∂J/∂c ⊙ (1 − hid²)`,
//!   `∂J/∂Wₖ = δ ⊗ xₖ`, `∂J/∂xₖ = Wₖᵀ δ`, scattered into the embedding row
//!   `xₖ` was read from.
//!
//! Spatial rows are data, so nothing flows into coordinates.

use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};
use crate::ingest::Sample;
use crate::model::{ForwardTrace, HyperParams, ModelParams, VariantConfig};
use crate::numerics::{matvec_transposed_acc, outer_acc, DenseMatrix};

/// One gradient tensor per parameter tensor, same shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(ModelParams);

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self(ModelParams::zeros(params.num_users(), params.num_pois(), params.hyper()))
    }

    pub fn zeros(num_users: usize, num_pois: usize, hp: HyperParams) -> Self {
        Self(ModelParams::zeros(num_users, num_pois, hp))
    }

    pub fn from_params(p: ModelParams) -> Self {
        Self(p)
    }

    pub fn into_inner(self) -> ModelParams {
        self.0
    }

    pub fn clear(&mut self) {
        self.0.fill(0.0);
    }

    /// `self += other`, tensor by tensor.
    pub fn add_assign(&mut self, other: &Gradients) -> Result<()> {
        if !self.0.same_shape(&other.0) {
            return Err(Error::ShapeMismatch("gradient buffers differ in shape".into()));
        }
        for (a, b) in self.0.tensors_mut().into_iter().zip(other.0.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.0.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= factor);
        }
    }
}

impl Deref for Gradients {
    type Target = ModelParams;

    fn deref(&self) -> &ModelParams {
        &self.0
    }
}

impl DerefMut for Gradients {
    fn deref_mut(&mut self) -> &mut ModelParams {
        &mut self.0
    }
}

/// `∂J/∂logits = o − onehot(target)`.
pub fn logit_gradient(trace: &ForwardTrace, target: usize) -> Vec<f64> {
    let mut g = trace.probs.clone();
    g[target] -= 1.0;
    g
}

fn check_trace(trace: &ForwardTrace, sample: &Sample, params: &ModelParams, variant: &VariantConfig) -> Result<()> {
    let mismatch = |what: &str| Err(Error::TraceMismatch(what.to_string()));
    if trace.variant != *variant {
        return mismatch("variant differs");
    }
    if trace.user != sample.user || trace.forward_ctx != sample.forward || trace.backward_ctx != sample.backward {
        return mismatch("user or context differs");
    }
    if trace.pattern != sample.pattern.as_f64() {
        return mismatch("temporal pattern differs");
    }
    let intervals_ok = trace.dep_before.as_ref().is_none_or(|d| d.interval == sample.interval_before)
        && trace.dep_after.as_ref().is_none_or(|d| d.interval == sample.interval_after);
    if !intervals_ok {
        return mismatch("intervals differ");
    }
    if trace.logits.len() != params.num_pois() || trace.preference.len() != params.w_out.cols() {
        return mismatch("trace shapes do not match parameters");
    }
    if sample.target >= params.num_pois() {
        return mismatch("target outside POI range");
    }
    Ok(())
}

/// Gradient of one sample's loss.
pub fn backward(
    trace: &ForwardTrace,
    sample: &Sample,
    params: &ModelParams,
    variant: &VariantConfig,
) -> Result<Gradients> {
    let mut grads = Gradients::zeros_like(params);
    backward_into(&mut grads, trace, sample, params, variant, 1.0)?;
    Ok(grads)
}

/// Adds `scale · ∂J/∂θ` for one sample into `grads`. Embedding rows not
/// read by the sample are left untouched.
pub fn backward_into(
    grads: &mut Gradients,
    trace: &ForwardTrace,
    sample: &Sample,
    params: &ModelParams,
    variant: &VariantConfig,
    scale: f64,
) -> Result<()> {
    check_trace(trace, sample, params, variant)?;
    if !grads.same_shape(params) {
        return Err(Error::ShapeMismatch("gradient buffer does not match parameters".into()));
    }
    let mut g = logit_gradient(trace, sample.target);
    g.iter_mut().for_each(|x| *x *= scale);

    if let Some(dep) = &trace.dep_before {
        dependence_grad(&mut grads.w_before, &g, &dep.spatial, &dep.iota, dep.interval);
    }
    if let Some(dep) = &trace.dep_after {
        dependence_grad(&mut grads.w_after, &g, &dep.spatial, &dep.iota, dep.interval);
    }

    outer_acc(&mut grads.w_out, 1.0, &g, &trace.preference)?;
    let mut g_pref = vec![0.0; trace.preference.len()];
    matvec_transposed_acc(&params.w_out, &g, &mut g_pref)?;

    if let Some(hidden) = &trace.hidden_before {
        let delta = through_tanh(&g_pref, hidden);
        context_grad(&mut grads.0, Side::Before, params, &delta, &trace.emb_before, &sample.forward)?;
    }
    if let Some(hidden) = &trace.hidden_after {
        let delta = through_tanh(&g_pref, hidden);
        context_grad(&mut grads.0, Side::After, params, &delta, &trace.emb_after, &sample.backward)?;
    }

    let delta = through_tanh(&g_pref, &trace.hidden_user);
    outer_acc(&mut grads.w_user, 1.0, &delta, &trace.emb_user)?;
    matvec_transposed_acc(&params.w_user, &delta, grads.0.user_emb.row_mut(sample.user))?;

    if let Some(hidden) = &trace.hidden_time {
        let delta = through_tanh(&g_pref, hidden);
        outer_acc(&mut grads.w_time, 1.0, &delta, &trace.pattern)?;
    }
    Ok(())
}

fn dependence_grad(out: &mut [f64], g: &[f64], spatial: &[f64], iota: &[f64], interval: f64) {
    for (((o, &gj), &s), &i) in out.iter_mut().zip(g).zip(spatial).zip(iota) {
        *o += gj * s * (1.0 - i * i) * interval;
    }
}

fn through_tanh(upstream: &[f64], activated: &[f64]) -> Vec<f64> {
    upstream
        .iter()
        .zip(activated)
        .map(|(u, a)| u * (1.0 - a * a))
        .collect()
}

#[derive(Clone, Copy)]
enum Side {
    Before,
    After,
}

fn context_grad(
    grads: &mut ModelParams,
    side: Side,
    params: &ModelParams,
    delta: &[f64],
    embs: &[Vec<f64>],
    ctx: &[usize],
) -> Result<()> {
    let weights: &[DenseMatrix] = match side {
        Side::Before => &params.w_minus,
        Side::After => &params.w_plus,
    };
    for (k, (&poi, emb)) in ctx.iter().zip(embs).enumerate() {
        let gw = match side {
            Side::Before => &mut grads.w_minus[k],
            Side::After => &mut grads.w_plus[k],
        };
        outer_acc(gw, 1.0, delta, emb)?;
        matvec_transposed_acc(&weights[k], delta, grads.poi_emb.row_mut(poi))?;
    }
    Ok(())
}
