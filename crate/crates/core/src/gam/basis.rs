//! Cubic regression spline basis.
//!
//! The spline is parameterized by its values at the knots. Second
//! derivatives at the knots follow from the natural-spline conditions
//! (zero at both ends), so the wiggliness penalty is `D' B^{-1} D` and a
//! basis row is a fixed linear map of the knot values. Outside the boundary
//! knots the spline continues linearly.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::stats::quantile;

#[derive(Debug, Clone, PartialEq)]
pub struct CrBasis {
    knots: Vec<f64>,
    /// `k x k` map from knot values to knot second derivatives.
    second: DMatrix<f64>,
    penalty: DMatrix<f64>,
}

/// Knots at evenly spaced quantiles of `values`, with duplicates removed.
pub fn quantile_knots(values: &[f64], k: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut knots: Vec<f64> = (0..k)
        .map(|i| quantile(&sorted, i as f64 / (k - 1) as f64))
        .collect();
    knots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    knots
}

impl CrBasis {
    pub fn new(knots: Vec<f64>) -> Result<Self> {
        let k = knots.len();
        if k < 3 || knots.windows(2).any(|w| !(w[1] > w[0])) || knots.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(
                "spline knots must be finite, strictly increasing and at least three".into(),
            ));
        }
        let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        let mut d = DMatrix::zeros(k - 2, k);
        let mut b = DMatrix::zeros(k - 2, k - 2);
        for i in 0..k - 2 {
            d[(i, i)] = 1.0 / h[i];
            d[(i, i + 1)] = -1.0 / h[i] - 1.0 / h[i + 1];
            d[(i, i + 2)] = 1.0 / h[i + 1];
            b[(i, i)] = (h[i] + h[i + 1]) / 3.0;
            if i + 1 < k - 2 {
                b[(i, i + 1)] = h[i + 1] / 6.0;
                b[(i + 1, i)] = h[i + 1] / 6.0;
            }
        }
        let chol = b
            .cholesky()
            .ok_or_else(|| Error::Config("spline band matrix is not positive definite".into()))?;
        let inner = chol.solve(&d);
        let mut second = DMatrix::zeros(k, k);
        second.view_mut((1, 0), (k - 2, k)).copy_from(&inner);
        let penalty = d.transpose() * &inner;
        let penalty = (&penalty + penalty.transpose()) * 0.5;
        Ok(CrBasis {
            knots,
            second,
            penalty,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn size(&self) -> usize {
        self.knots.len()
    }

    /// Second-derivative penalty on the knot values.
    pub fn penalty(&self) -> &DMatrix<f64> {
        &self.penalty
    }

    /// Basis functions evaluated at `x`.
    pub fn row(&self, x: f64) -> DVector<f64> {
        let k = self.knots.len();
        let first = self.knots[0];
        let last = self.knots[k - 1];
        let mut out = DVector::zeros(k);
        if x < first {
            let h = self.knots[1] - first;
            let slope = self.end_slope(0, h, -1.0 / 3.0, -1.0 / 6.0);
            out[0] = 1.0;
            out += slope * (x - first);
            return out;
        }
        if x > last {
            let h = last - self.knots[k - 2];
            let slope = self.end_slope(k - 2, h, 1.0 / 6.0, 1.0 / 3.0);
            out[k - 1] = 1.0;
            out += slope * (x - last);
            return out;
        }
        // interval j with knots[j] <= x <= knots[j + 1]
        let j = match self.knots.partition_point(|v| *v <= x) {
            0 => 0,
            p => (p - 1).min(k - 2),
        };
        let h = self.knots[j + 1] - self.knots[j];
        let am = (self.knots[j + 1] - x) / h;
        let ap = (x - self.knots[j]) / h;
        let dm = self.knots[j + 1] - x;
        let dp = x - self.knots[j];
        let cm = (dm * dm * dm / h - h * dm) / 6.0;
        let cp = (dp * dp * dp / h - h * dp) / 6.0;
        out[j] += am;
        out[j + 1] += ap;
        for c in 0..k {
            out[c] += cm * self.second[(j, c)] + cp * self.second[(j + 1, c)];
        }
        out
    }

    /// Derivative of the basis at an end of interval `j`, given the
    /// derivative weights of the two second-derivative terms there.
    fn end_slope(&self, j: usize, h: f64, wm: f64, wp: f64) -> DVector<f64> {
        let k = self.knots.len();
        let mut s = DVector::zeros(k);
        s[j] -= 1.0 / h;
        s[j + 1] += 1.0 / h;
        for c in 0..k {
            s[c] += h * (wm * self.second[(j, c)] + wp * self.second[(j + 1, c)]);
        }
        s
    }
}
