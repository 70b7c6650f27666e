//! Double-double loss evaluation for the finite-difference oracle.
//!
//! A `Dd` is an unevaluated sum `hi + lo` carrying about 106 bits. Central
//! differences of an f64 loss carry roughly `ε·J/δ ≈ 1e−11` of rounding
//! noise, which swamps gradient coordinates near 1e−8; evaluating the loss
//! in double-double pushes that noise below 1e−25.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::ingest::Sample;
use crate::model::{ModelParams, SpatialContext, VariantConfig};
use crate::numerics::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Dd {
    pub hi: f64,
    pub lo: f64,
}

const LN2: Dd = Dd {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};
const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
const TWO: Dd = Dd { hi: 2.0, lo: 0.0 };

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub fn new(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    fn scale_pow2(self, k: i32) -> Self {
        let f = 2f64.powi(k);
        Self {
            hi: self.hi * f,
            lo: self.lo * f,
        }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    /// `(e^r − 1)` for `|r| ≤ ln2/2`, by series on `r/1024` and repeated
    /// squaring in expm1 form.
    fn expm1_reduced(r: Dd) -> Dd {
        let r = r.scale_pow2(-10);
        let mut term = r;
        let mut sum = r;
        for n in 2..=12 {
            term = term * r / Dd::new(n as f64);
            sum = sum + term;
        }
        for _ in 0..10 {
            sum = sum * (sum + TWO);
        }
        sum
    }

    fn reduce(self) -> (i32, Dd) {
        let k = (self.hi / LN2.hi).round();
        (k as i32, self - LN2 * Dd::new(k))
    }

    pub fn exp(self) -> Dd {
        if self.hi < -745.0 {
            return ZERO;
        }
        let (k, r) = self.reduce();
        (Self::expm1_reduced(r) + ONE).scale_pow2(k)
    }

    pub fn expm1(self) -> Dd {
        let (k, r) = self.reduce();
        let em = Self::expm1_reduced(r);
        if k == 0 {
            em
        } else {
            (em + ONE).scale_pow2(k) - ONE
        }
    }

    pub fn ln(self) -> Dd {
        let mut y = Dd::new(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - ONE;
        }
        y
    }

    pub fn tanh(self) -> Dd {
        let a = self.abs();
        let t = if a.hi > 40.0 {
            ONE - TWO * (-(a + a)).exp()
        } else {
            let e = (a + a).expm1();
            e / (e + TWO)
        };
        if self.hi < 0.0 {
            -t
        } else {
            t
        }
    }
}

impl Add for Dd {
    type Output = Dd;

    fn add(self, y: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, y.hi);
        let (t, f) = two_sum(self.lo, y.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Neg for Dd {
    type Output = Dd;

    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for Dd {
    type Output = Dd;

    fn sub(self, y: Dd) -> Dd {
        self + (-y)
    }
}

impl Mul for Dd {
    type Output = Dd;

    fn mul(self, y: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, y.hi);
        let (hi, lo) = quick_two_sum(p, e + (self.hi * y.lo + self.lo * y.hi));
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;

    fn div(self, y: Dd) -> Dd {
        let q1 = self.hi / y.hi;
        let r = self - y * Dd::new(q1);
        let q2 = r.hi / y.hi;
        let r = r - y * Dd::new(q2);
        let q3 = r.hi / y.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::new(q3)
    }
}

fn matvec_dd(w: &DenseMatrix, x: &[Dd], out: &mut [Dd]) {
    for (r, o) in out.iter_mut().enumerate() {
        let mut acc = *o;
        for (c, &xc) in x.iter().enumerate() {
            acc = acc + Dd::new(w.get(r, c)) * xc;
        }
        *o = acc;
    }
}

fn row_dd(m: &DenseMatrix, r: usize) -> Vec<Dd> {
    m.row(r).iter().map(|&v| Dd::new(v)).collect()
}

fn branch(weights: &[DenseMatrix], emb: &DenseMatrix, ctx: &[usize], h: usize) -> Vec<Dd> {
    let mut pre = vec![ZERO; h];
    for (w, &p) in weights.iter().zip(ctx) {
        matvec_dd(w, &row_dd(emb, p), &mut pre);
    }
    pre.into_iter().map(Dd::tanh).collect()
}

/// `−log o[target]` evaluated in double-double, straight from the model
/// equations.
pub(crate) fn loss_dd(
    sample: &Sample,
    params: &ModelParams,
    spatial: &SpatialContext,
    variant: &VariantConfig,
) -> Result<Dd> {
    let hp = params.hyper();
    let (m, h) = (params.num_pois(), hp.h);
    if sample.forward.len() != hp.w || sample.backward.len() != hp.w || sample.target >= m {
        return Err(Error::ShapeMismatch("sample does not fit the model".into()));
    }
    let mut c = vec![ZERO; h];
    let mut add_branch = |hid: Vec<Dd>| c.iter_mut().zip(hid).for_each(|(a, b)| *a = *a + b);
    if variant.use_forward_branch {
        add_branch(branch(&params.w_minus, &params.poi_emb, &sample.forward, h));
    }
    if variant.use_backward_branch {
        add_branch(branch(&params.w_plus, &params.poi_emb, &sample.backward, h));
    }
    add_branch(branch(std::slice::from_ref(&params.w_user), &params.user_emb, &[sample.user], h));
    if variant.use_time_pattern {
        let v: Vec<Dd> = sample.pattern.as_f64().iter().map(|&b| Dd::new(b)).collect();
        let mut pre = vec![ZERO; h];
        matvec_dd(&params.w_time, &v, &mut pre);
        add_branch(pre.into_iter().map(Dd::tanh).collect());
    }

    let mut logits = vec![ZERO; m];
    matvec_dd(&params.w_out, &c, &mut logits);
    if variant.use_dependence {
        let sides = [
            (variant.use_forward_branch, sample.forward[0], &params.w_before, sample.interval_before),
            (variant.use_backward_branch, sample.backward[0], &params.w_after, sample.interval_after),
        ];
        for (on, anchor, w, interval) in sides {
            if !on {
                continue;
            }
            let s = spatial.row(anchor)?;
            for j in 0..m {
                let iota = (Dd::new(w[j]) * Dd::new(interval)).tanh();
                logits[j] = logits[j] + Dd::new(s[j]) * iota;
            }
        }
    }

    let top = logits.iter().map(|z| z.hi).fold(f64::NEG_INFINITY, f64::max);
    let mut sum = ZERO;
    for &z in &logits {
        sum = sum + (z - Dd::new(top)).exp();
    }
    Ok(sum.ln() + Dd::new(top) - logits[sample.target])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Dd, want_hi: f64, want_lo: f64, tol: f64) {
        let err = (a - Dd { hi: want_hi, lo: want_lo }).to_f64().abs();
        assert!(err < tol, "{a:?} vs {want_hi} + {want_lo}: {err:e}");
    }

    // 50-digit references at the f64 nearest 0.37, split into hi + lo
    #[test]
    fn transcendental_reference_values() {
        // e^x = 1.447734614663324455155519124535…
        close(Dd::new(0.37).exp(), 1.447_734_614_663_324_5, -8.202_046_215_242_462e-17, 1e-30);
        // tanh x = 0.35399171247704599082910865476331…
        close(Dd::new(0.37).tanh(), 0.353_991_712_477_045_97, 1.862_192_950_724_599_7e-17, 1e-30);
        // ln 10 = 2.3025850929940456840179914546844…
        close(Dd::new(10.0).ln(), std::f64::consts::LN_10, -2.170_756_223_382_249_4e-16, 1e-30);
    }

    #[test]
    fn identities() {
        for x in [-30.0, -3.2, -0.001, 1e-9, 0.5, 7.25, 50.0] {
            let d = Dd::new(x);
            let back = d.exp().ln();
            assert!((back - d).to_f64().abs() < 1e-29 * x.abs().max(1.0), "{x}");
            let t = d.tanh();
            assert!((t + (-d).tanh()).to_f64().abs() == 0.0);
            // 1 − tanh² = sech²
            let cosh = (d.exp() + (-d).exp()) / TWO;
            let sech2 = ONE / (cosh * cosh);
            assert!(((ONE - t * t) - sech2).to_f64().abs() < 1e-29 * sech2.hi.max(1e-300) + 1e-31, "{x}");
        }
    }
}
