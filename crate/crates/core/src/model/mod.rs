//! The bi-directional spatio-temporal dependence model.
//!
//! For a sample with adjacent POIs `p₋` (before) and `p₊` (after) the model
//! scores every candidate POI with
//!
//! ```text
//! d₋ = s(p₋) ⊙ tanh(w_before · Δt₋)          d₊ = s(p₊) ⊙ tanh(w_after · Δt₊)
//! c  = tanh(Σₖ W₋ₖ E_p[p₋ₖ]) + tanh(Σₖ W₊ₖ E_p[p₊ₖ]) + tanh(W_u E_u[u]) + tanh(W_t v)
//! o  = softmax(d₋ + d₊ + W_c c)
//! ```
//!
//! where `s(p)` is the σ-normalized distance row of `p` and `v` the 7-bit
//! temporal pattern of the target time. There are no bias terms.

mod checkpoint;
mod forward;

pub use checkpoint::{
    load_checkpoint, peek_header, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointHeader,
    CKPT_MAGIC,
};
pub use forward::{cross_entropy, forward, predict_topk, truth_rank, ForwardTrace, SpatialContext};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ingest::TemporalPattern;
use crate::numerics::{glorot_uniform, DenseMatrix, RngState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HyperParams {
    /// Embedding dimension.
    pub d: usize,
    /// Hidden units.
    pub h: usize,
    /// Window width.
    pub w: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self { d: 64, h: 256, w: 1 }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.h == 0 || self.w == 0 {
            return Err(Error::Config(format!(
                "d, h and w must all be at least 1 (got d={}, h={}, w={})",
                self.d, self.h, self.w
            )));
        }
        Ok(())
    }
}

/// Which parts of the model are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariantConfig {
    pub use_forward_branch: bool,
    pub use_backward_branch: bool,
    pub use_dependence: bool,
    pub use_time_pattern: bool,
}

impl Default for VariantConfig {
    fn default() -> Self {
        Variant::Full.config()
    }
}

impl VariantConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.use_forward_branch && !self.use_backward_branch {
            return Err(Error::Config(
                "at least one of the forward and backward branches must be enabled".into(),
            ));
        }
        Ok(())
    }
}

/// The full model and its ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Both directions, dependence and time pattern.
    Full,
    /// Forward context only.
    ForwardOnly,
    /// Backward context only.
    BackwardOnly,
    /// No dependence term and no time pattern.
    NoDependenceNoPattern,
    /// No dependence term.
    NoDependence,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Full,
        Variant::ForwardOnly,
        Variant::BackwardOnly,
        Variant::NoDependenceNoPattern,
        Variant::NoDependence,
    ];

    pub fn config(self) -> VariantConfig {
        let full = VariantConfig {
            use_forward_branch: true,
            use_backward_branch: true,
            use_dependence: true,
            use_time_pattern: true,
        };
        match self {
            Variant::Full => full,
            Variant::ForwardOnly => VariantConfig {
                use_backward_branch: false,
                ..full
            },
            Variant::BackwardOnly => VariantConfig {
                use_forward_branch: false,
                ..full
            },
            Variant::NoDependenceNoPattern => VariantConfig {
                use_dependence: false,
                use_time_pattern: false,
                ..full
            },
            Variant::NoDependence => VariantConfig {
                use_dependence: false,
                ..full
            },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "Bi-STDDP",
            Variant::ForwardOnly => "F-STDDP",
            Variant::BackwardOnly => "B-STDDP",
            Variant::NoDependenceNoPattern => "Bi-A",
            Variant::NoDependence => "Bi-B",
        }
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
        let key = s.trim().to_ascii_lowercase();
        Variant::ALL
            .into_iter()
            .find(|v| v.name().to_ascii_lowercase() == key)
            .or(match key.as_str() {
                "full" | "bistddp" => Some(Variant::Full),
                "forward" => Some(Variant::ForwardOnly),
                "backward" => Some(Variant::BackwardOnly),
                _ => None,
            })
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}")))
    }
}

/// All learnable tensors. Field order is the checkpoint order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// `E_p`, M×d.
    pub poi_emb: DenseMatrix,
    /// `E_u`, N×d.
    pub user_emb: DenseMatrix,
    /// `W_{k−}`, one h×d matrix per window offset k = 1..w.
    pub w_minus: Vec<DenseMatrix>,
    /// `W_{k+}`, one h×d matrix per window offset.
    pub w_plus: Vec<DenseMatrix>,
    /// `W_u`, h×d.
    pub w_user: DenseMatrix,
    /// `W_t`, h×7.
    pub w_time: DenseMatrix,
    /// `w_{t−1}`, length M.
    pub w_before: Vec<f64>,
    /// `w_{t+1}`, length M.
    pub w_after: Vec<f64>,
    /// `W_c`, M×h.
    pub w_out: DenseMatrix,
}

impl ModelParams {
    pub fn zeros(num_users: usize, num_pois: usize, hp: HyperParams) -> Self {
        let HyperParams { d, h, w } = hp;
        Self {
            poi_emb: DenseMatrix::zeros(num_pois, d),
            user_emb: DenseMatrix::zeros(num_users, d),
            w_minus: (0..w).map(|_| DenseMatrix::zeros(h, d)).collect(),
            w_plus: (0..w).map(|_| DenseMatrix::zeros(h, d)).collect(),
            w_user: DenseMatrix::zeros(h, d),
            w_time: DenseMatrix::zeros(h, TemporalPattern::LEN),
            w_before: vec![0.0; num_pois],
            w_after: vec![0.0; num_pois],
            w_out: DenseMatrix::zeros(num_pois, h),
        }
    }

    /// Glorot-uniform initialization, drawn in field order from `rng`.
    ///
    /// A `rows×cols` matrix mapping `cols → rows` uses `fan_in = cols`,
    /// `fan_out = rows`; embedding tables use `fan_in = rows`; the two
    /// interval weight vectors are treated as M×1 matrices.
    pub fn glorot(num_users: usize, num_pois: usize, hp: HyperParams, rng: &mut RngState) -> Self {
        let HyperParams { d, h, w } = hp;
        let t = TemporalPattern::LEN;
        let poi_emb = glorot_uniform(rng, num_pois, d, num_pois, d);
        let user_emb = glorot_uniform(rng, num_users, d, num_users, d);
        let w_minus = (0..w).map(|_| glorot_uniform(rng, d, h, h, d)).collect();
        let w_plus = (0..w).map(|_| glorot_uniform(rng, d, h, h, d)).collect();
        let w_user = glorot_uniform(rng, d, h, h, d);
        let w_time = glorot_uniform(rng, t, h, h, t);
        let w_before = glorot_uniform(rng, 1, num_pois, num_pois, 1).into_vec();
        let w_after = glorot_uniform(rng, 1, num_pois, num_pois, 1).into_vec();
        let w_out = glorot_uniform(rng, h, num_pois, num_pois, h);
        Self {
            poi_emb,
            user_emb,
            w_minus,
            w_plus,
            w_user,
            w_time,
            w_before,
            w_after,
            w_out,
        }
    }

    pub fn num_users(&self) -> usize {
        self.user_emb.rows()
    }

    pub fn num_pois(&self) -> usize {
        self.poi_emb.rows()
    }

    pub fn hyper(&self) -> HyperParams {
        HyperParams {
            d: self.poi_emb.cols(),
            h: self.w_user.rows(),
            w: self.w_minus.len(),
        }
    }

    /// Tensor names in checkpoint order.
    pub fn tensor_names(&self) -> Vec<String> {
        let w = self.w_minus.len();
        let mut names = vec!["poi_emb".to_string(), "user_emb".to_string()];
        names.extend((1..=w).map(|k| format!("w_minus[{k}]")));
        names.extend((1..=w).map(|k| format!("w_plus[{k}]")));
        names.extend(["w_user", "w_time", "w_before", "w_after", "w_out"].map(String::from));
        names
    }

    /// Flat views of every tensor, in checkpoint order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = vec![self.poi_emb.as_slice(), self.user_emb.as_slice()];
        out.extend(self.w_minus.iter().map(DenseMatrix::as_slice));
        out.extend(self.w_plus.iter().map(DenseMatrix::as_slice));
        out.extend([
            self.w_user.as_slice(),
            self.w_time.as_slice(),
            self.w_before.as_slice(),
            self.w_after.as_slice(),
            self.w_out.as_slice(),
        ]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = vec![self.poi_emb.as_mut_slice(), self.user_emb.as_mut_slice()];
        out.extend(self.w_minus.iter_mut().map(DenseMatrix::as_mut_slice));
        out.extend(self.w_plus.iter_mut().map(DenseMatrix::as_mut_slice));
        out.extend([
            self.w_user.as_mut_slice(),
            self.w_time.as_mut_slice(),
            self.w_before.as_mut_slice(),
            self.w_after.as_mut_slice(),
            self.w_out.as_mut_slice(),
        ]);
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn fill(&mut self, value: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x = value);
        }
    }

    pub fn same_shape(&self, other: &ModelParams) -> bool {
        let a = self.tensors();
        let b = other.tensors();
        a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.len() == y.len())
            && self.poi_emb.shape() == other.poi_emb.shape()
            && self.user_emb.shape() == other.user_emb.shape()
            && self.w_out.shape() == other.w_out.shape()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
            v.config().validate().unwrap();
        }
        assert!("nope".parse::<Variant>().is_err());
        let none = VariantConfig {
            use_forward_branch: false,
            use_backward_branch: false,
            ..VariantConfig::default()
        };
        assert!(none.validate().is_err());
    }

    #[test]
    fn shapes_and_counts() {
        let hp = HyperParams { d: 5, h: 7, w: 2 };
        let p = ModelParams::zeros(6, 30, hp);
        assert_eq!(p.hyper(), hp);
        // 30·5 + 6·5 + 4·35 + 35 + 49 + 30 + 30 + 30·7
        assert_eq!(p.num_parameters(), 674);
        assert_eq!(p.tensor_names().len(), p.tensors().len());
    }

    #[test]
    fn glorot_is_seeded_and_bounded() {
        let hp = HyperParams { d: 4, h: 6, w: 1 };
        let a = ModelParams::glorot(3, 9, hp, &mut RngState::new(5));
        let b = ModelParams::glorot(3, 9, hp, &mut RngState::new(5));
        assert_eq!(a, b);
        let lim = crate::numerics::glorot_limit(1, 9);
        assert!(a.w_before.iter().all(|x| x.abs() <= lim));
        let lim = crate::numerics::glorot_limit(6, 9);
        assert!(a.w_out.as_slice().iter().all(|x| x.abs() <= lim));
    }
}
