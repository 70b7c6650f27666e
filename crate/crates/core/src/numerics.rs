//! Dense kernels and seeded randomness used by the model.
//!
//! Everything is `f64`, row-major, with a fixed summation order so results
//! are reproducible across runs and platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// `W · x`.
pub fn matvec(w: &DenseMatrix, x: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; w.rows];
    matvec_into(w, x, &mut out)?;
    Ok(out)
}

/// `out = W · x`, overwriting `out`.
pub fn matvec_into(w: &DenseMatrix, x: &[f64], out: &mut [f64]) -> Result<()> {
    if w.cols != x.len() || w.rows != out.len() {
        return Err(Error::ShapeMismatch(format!(
            "matvec: {}x{} matrix with vector of {} into {}",
            w.rows,
            w.cols,
            x.len(),
            out.len()
        )));
    }
    for (r, o) in out.iter_mut().enumerate() {
        *o = dot(w.row(r), x);
    }
    Ok(())
}

/// `out += W · x`.
pub fn matvec_acc(w: &DenseMatrix, x: &[f64], out: &mut [f64]) -> Result<()> {
    if w.cols != x.len() || w.rows != out.len() {
        return Err(Error::ShapeMismatch(format!(
            "matvec_acc: {}x{} matrix with vector of {} into {}",
            w.rows,
            w.cols,
            x.len(),
            out.len()
        )));
    }
    for (r, o) in out.iter_mut().enumerate() {
        *o += dot(w.row(r), x);
    }
    Ok(())
}

/// `out += Wᵀ · y`.
pub fn matvec_transposed_acc(w: &DenseMatrix, y: &[f64], out: &mut [f64]) -> Result<()> {
    if w.rows != y.len() || w.cols != out.len() {
        return Err(Error::ShapeMismatch(format!(
            "matvec_transposed_acc: {}x{} matrix with vector of {} into {}",
            w.rows,
            w.cols,
            y.len(),
            out.len()
        )));
    }
    for (r, &yr) in y.iter().enumerate() {
        if yr == 0.0 {
            continue;
        }
        axpy(yr, w.row(r), out);
    }
    Ok(())
}

/// `G += scale · a ⊗ b` (rank-one update, `a` indexes rows).
pub fn outer_acc(g: &mut DenseMatrix, scale: f64, a: &[f64], b: &[f64]) -> Result<()> {
    if g.rows != a.len() || g.cols != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "outer_acc: {}x{} target with {}x{} update",
            g.rows,
            g.cols,
            a.len(),
            b.len()
        )));
    }
    for (r, &ar) in a.iter().enumerate() {
        let s = scale * ar;
        if s == 0.0 {
            continue;
        }
        axpy(s, b, g.row_mut(r));
    }
    Ok(())
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += alpha · x`.
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Hyperbolic tangent, `(eˣ − e⁻ˣ)/(eˣ + e⁻ˣ)`.
#[inline]
pub fn tanh(x: f64) -> f64 {
    x.tanh()
}

pub fn tanh_in_place(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = tanh(*x));
}

/// Softmax with the maximum subtracted before exponentiation.
pub fn stable_softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = z.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= sum);
    out
}

/// `log Σ exp(z)`, shifted by the maximum.
pub fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = z.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Seeded generator. ChaCha8 gives the same stream on every platform.
#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream `index`, derived only from the root seed.
    pub fn child(&self, index: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(self.seed);
        inner.set_stream(index.wrapping_add(1));
        Self {
            seed: self.seed,
            inner,
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.inner
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.inner.gen_range(lo..=hi)
    }
}

/// Half-width of the Glorot uniform interval.
pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Matrix with i.i.d. entries on `[−L, L]`, `L = sqrt(6/(fan_in+fan_out))`.
pub fn glorot_uniform(
    rng: &mut RngState,
    fan_in: usize,
    fan_out: usize,
    rows: usize,
    cols: usize,
) -> DenseMatrix {
    assert!(fan_in > 0 && fan_out > 0, "glorot fans must be positive");
    let limit = glorot_limit(fan_in, fan_out);
    let data = (0..rows * cols).map(|_| rng.uniform(-limit, limit)).collect();
    DenseMatrix { rows, cols, data }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive_matvec(w: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; w.len()];
        for i in 0..w.len() {
            let mut acc = 0.0;
            for j in 0..x.len() {
                acc += w[i][j] * x[j];
            }
            out[i] = acc;
        }
        out
    }

    #[test]
    fn matvec_identity_and_zero() {
        let x = [1.0, 2.0, 3.0];
        assert_eq!(matvec(&DenseMatrix::identity(3), &x).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(matvec(&DenseMatrix::zeros(2, 3), &x).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn matvec_matches_naive_loop() {
        let mut rng = RngState::new(7);
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..3).map(|_| rng.uniform(-2.0, 2.0)).collect())
            .collect();
        let x: Vec<f64> = (0..3).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let w = DenseMatrix::from_vec(4, 3, rows.concat()).unwrap();
        let got = matvec(&w, &x).unwrap();
        let want = naive_matvec(&rows, &x);
        for (g, e) in got.iter().zip(&want) {
            assert!((g - e).abs() <= 1e-15, "{g} vs {e}");
        }
    }

    #[test]
    fn matvec_rejects_bad_shape() {
        let err = matvec(&DenseMatrix::zeros(2, 3), &[1.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch(_)));
    }

    #[test]
    fn softmax_examples() {
        let u = stable_softmax(&[0.0; 8]);
        assert!(u.iter().all(|&p| (p - 0.125).abs() < 1e-15));

        let big = stable_softmax(&[1000.0, 1000.0]);
        assert_eq!(big, vec![0.5, 0.5]);

        let p = stable_softmax(&[0.0, 3f64.ln()]);
        assert!((p[0] - 0.25).abs() < 1e-15);
        assert!((p[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn log_sum_exp_matches_direct() {
        let z = [0.3, -1.2, 2.0];
        let direct: f64 = z.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&z) - direct).abs() < 1e-14);
    }

    #[test]
    fn glorot_limit_and_bounds() {
        let l = glorot_limit(64, 256);
        assert!((l - 0.136_930_639_376_291_5).abs() < 1e-12);
        let mut rng = RngState::new(3);
        let m = glorot_uniform(&mut rng, 64, 256, 256, 64);
        assert!(m.as_slice().iter().all(|v| v.abs() <= l));
        let mut again = RngState::new(3);
        assert_eq!(m, glorot_uniform(&mut again, 64, 256, 256, 64));
    }

    #[test]
    fn child_streams_are_deterministic_and_distinct() {
        let root = RngState::new(11);
        let mut a = root.child(0);
        let mut b = root.child(0);
        let mut c = root.child(1);
        let xa: Vec<f64> = (0..4).map(|_| a.uniform(0.0, 1.0)).collect();
        let xb: Vec<f64> = (0..4).map(|_| b.uniform(0.0, 1.0)).collect();
        let xc: Vec<f64> = (0..4).map(|_| c.uniform(0.0, 1.0)).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
    }

    proptest! {
        #[test]
        fn softmax_shift_invariant(z in prop::collection::vec(-50.0f64..50.0, 1..20), c in -100.0f64..100.0) {
            let shifted: Vec<f64> = z.iter().map(|x| x + c).collect();
            let a = stable_softmax(&z);
            let b = stable_softmax(&shifted);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
            let s: f64 = a.iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn softmax_preserves_order(z in prop::collection::vec(-30.0f64..30.0, 2..20)) {
            let p = stable_softmax(&z);
            for i in 0..z.len() {
                for j in 0..z.len() {
                    if z[i] > z[j] {
                        prop_assert!(p[i] >= p[j]);
                    }
                }
            }
        }

        #[test]
        fn tanh_is_odd_and_bounded(x in -40.0f64..40.0) {
            prop_assert!((tanh(-x) + tanh(x)).abs() <= 1e-15);
            prop_assert!(tanh(x).abs() <= 1.0);
            if x.abs() < 15.0 {
                prop_assert!(tanh(x).abs() < 1.0);
            }
        }

        #[test]
        fn matvec_distributes(seed in 0u64..1000) {
            let mut rng = RngState::new(seed);
            let w = glorot_uniform(&mut rng, 3, 5, 5, 3);
            let x: Vec<f64> = (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let y: Vec<f64> = (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
            let lhs = matvec(&w, &xy).unwrap();
            let a = matvec(&w, &x).unwrap();
            let b = matvec(&w, &y).unwrap();
            for i in 0..5 {
                let rhs = a[i] + b[i];
                prop_assert!((lhs[i] - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
            }
        }
    }
}
