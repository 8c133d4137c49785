//! Cubic B-splines on a uniform knot grid.

use serde::{Deserialize, Serialize};

/// `size` cubic B-spline basis functions spanning `[lower, upper]` with
/// `size - 3` equal intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformCubicBasis {
    lower: f64,
    upper: f64,
    spacing: f64,
    size: usize,
}

impl UniformCubicBasis {
    /// Panics if `size < 4` or the range is empty.
    pub fn new(lower: f64, upper: f64, size: usize) -> Self {
        assert!(size >= 4, "cubic basis needs at least 4 functions");
        assert!(upper > lower, "empty basis range");
        Self {
            lower,
            upper,
            spacing: (upper - lower) / (size - 3) as f64,
            size,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    /// Index of the first nonzero basis function at `x` (clamped into range)
    /// and the local coordinate in `[0, 1]`.
    fn locate(&self, x: f64) -> (usize, f64) {
        let t = ((x - self.lower) / self.spacing).clamp(0.0, (self.size - 3) as f64);
        let start = (t.floor() as usize).min(self.size - 4);
        (start, t - start as f64)
    }

    /// The four nonzero basis values at `x`, starting at the returned index.
    /// Only meaningful inside the range; callers extrapolate outside.
    pub fn eval_local(&self, x: f64) -> (usize, [f64; 4]) {
        let (start, u) = self.locate(x);
        let v = 1.0 - u;
        let u2 = u * u;
        let u3 = u2 * u;
        (
            start,
            [
                v * v * v / 6.0,
                (3.0 * u3 - 6.0 * u2 + 4.0) / 6.0,
                (-3.0 * u3 + 3.0 * u2 + 3.0 * u + 1.0) / 6.0,
                u3 / 6.0,
            ],
        )
    }

    /// First derivatives (with respect to `x`) of the four nonzero functions.
    pub fn deriv_local(&self, x: f64) -> (usize, [f64; 4]) {
        let (start, u) = self.locate(x);
        let v = 1.0 - u;
        let h = self.spacing;
        (
            start,
            [
                -v * v / (2.0 * h),
                (3.0 * u * u - 4.0 * u) / (2.0 * h),
                (-3.0 * u * u + 2.0 * u + 1.0) / (2.0 * h),
                u * u / (2.0 * h),
            ],
        )
    }

    /// Dense row of all basis values at `x` (clamped into range).
    pub fn row(&self, x: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let (start, vals) = self.eval_local(x);
        out[start..start + 4].copy_from_slice(&vals);
    }

    /// `sum_i coef[i] * B_i(x)` inside the range.
    pub fn combine(&self, coef: &[f64], x: f64) -> f64 {
        let (start, vals) = self.eval_local(x);
        vals.iter().zip(&coef[start..start + 4]).map(|(b, c)| b * c).sum()
    }

    pub fn combine_deriv(&self, coef: &[f64], x: f64) -> f64 {
        let (start, vals) = self.deriv_local(x);
        vals.iter().zip(&coef[start..start + 4]).map(|(b, c)| b * c).sum()
    }
}

/// Second-order difference penalty `D'D` on `size` coefficients.
pub fn second_difference_penalty(size: usize) -> Vec<Vec<f64>> {
    let mut s = vec![vec![0.0; size]; size];
    for r in 0..size.saturating_sub(2) {
        let d = [(r, 1.0), (r + 1, -2.0), (r + 2, 1.0)];
        for &(a, va) in &d {
            for &(b, vb) in &d {
                s[a][b] += va * vb;
            }
        }
    }
    s
}
