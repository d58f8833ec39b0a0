//! Small numerical helpers shared by the feature, method and metric code.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with divisor `n - 1`; zero for fewer than two values.
pub fn variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let mu = mean(x);
    x.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

pub fn std_dev(x: &[f64]) -> f64 {
    variance(x).sqrt()
}

pub fn diff(x: &[f64], lag: usize) -> Vec<f64> {
    if x.len() <= lag {
        return Vec::new();
    }
    x[lag..].iter().zip(x).map(|(a, b)| a - b).collect()
}

/// Sample autocorrelations `r_1..=r_max_lag` (standard biased estimator).
/// Lags beyond the data or a zero-variance input yield zeros.
pub fn acf(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; max_lag];
    if n < 2 {
        return out;
    }
    let mu = mean(x);
    let dev: Vec<f64> = x.iter().map(|v| v - mu).collect();
    let denom: f64 = dev.iter().map(|d| d * d).sum();
    if is_negligible_spread(denom, x) {
        return out;
    }
    for (k, slot) in out.iter_mut().enumerate() {
        let lag = k + 1;
        if lag >= n {
            break;
        }
        let num: f64 = dev[lag..].iter().zip(&dev).map(|(a, b)| a * b).sum();
        *slot = (num / denom).clamp(-1.0, 1.0);
    }
    out
}

/// True when a sum of squared deviations is indistinguishable from rounding
/// noise relative to the magnitude of the data.
pub fn is_negligible_spread(sum_sq_dev: f64, x: &[f64]) -> bool {
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    sum_sq_dev <= x.len() as f64 * (1e-12 * scale).powi(2)
}

/// Partial autocorrelations via the Durbin-Levinson recursion.
pub fn pacf(x: &[f64], max_lag: usize) -> Vec<f64> {
    let r = acf(x, max_lag);
    pacf_from_acf(&r)
}

pub fn pacf_from_acf(r: &[f64]) -> Vec<f64> {
    let p = r.len();
    let mut out = vec![0.0; p];
    let mut phi = vec![0.0; p];
    let mut prev = vec![0.0; p];
    for k in 0..p {
        let mut num = r[k];
        let mut den = 1.0;
        for j in 0..k {
            num -= prev[j] * r[k - 1 - j];
            den -= prev[j] * r[j];
        }
        let kk = if den.abs() < 1e-14 { 0.0 } else { num / den };
        let kk = kk.clamp(-1.0, 1.0);
        phi[k] = kk;
        for j in 0..k {
            phi[j] = prev[j] - kk * prev[k - 1 - j];
        }
        out[k] = kk;
        prev[..=k].copy_from_slice(&phi[..=k]);
    }
    out
}

/// Least-squares fit of `y` on the columns of `x`. Returns coefficients and
/// residuals, or `None` when the design is numerically rank-deficient.
pub fn ols(x: &DMatrix<f64>, y: &[f64]) -> Option<(DVector<f64>, Vec<f64>)> {
    if x.nrows() < x.ncols() || x.nrows() != y.len() {
        return None;
    }
    let yv = DVector::from_column_slice(y);
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = (0..r.ncols()).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if scale == 0.0 || (0..r.ncols()).any(|i| r[(i, i)].abs() <= 1e-10 * scale) {
        return None;
    }
    let qty = qr.q().transpose() * &yv;
    let beta = r.solve_upper_triangular(&qty)?;
    let fitted = x * &beta;
    let resid = (yv - fitted).iter().copied().collect();
    Some((beta, resid))
}

/// Coefficient of determination of an OLS fit (with intercept column included in `x`).
pub fn r_squared(y: &[f64], resid: &[f64]) -> f64 {
    let mu = mean(y);
    let tss: f64 = y.iter().map(|v| (v - mu).powi(2)).sum();
    if tss <= 0.0 {
        return 0.0;
    }
    let rss: f64 = resid.iter().map(|e| e * e).sum();
    (1.0 - rss / tss).clamp(0.0, 1.0)
}

/// Upper standard normal quantile `z` with `P(Z <= z) = p`.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Two-sided critical value for a central interval with nominal coverage `level`.
pub fn interval_z(level: f64) -> f64 {
    normal_quantile(0.5 + level / 2.0)
}

/// Quantile with linear interpolation between order statistics (R type 7).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Tests whether the AR polynomial `1 - c1 z - ... - cp z^p` has all roots
/// outside the unit circle, using the step-down (reverse Levinson) recursion.
pub fn is_stationary(coefs: &[f64]) -> bool {
    let mut a: Vec<f64> = coefs.to_vec();
    while let Some(&last) = a.last() {
        if last == 0.0 {
            a.pop();
        } else {
            break;
        }
    }
    while !a.is_empty() {
        let p = a.len();
        let k = a[p - 1];
        if !k.is_finite() || k.abs() >= 1.0 {
            return false;
        }
        let denom = 1.0 - k * k;
        let next: Vec<f64> = (0..p - 1)
            .map(|j| (a[j] + k * a[p - 2 - j]) / denom)
            .collect();
        a = next;
    }
    true
}

/// Maps partial autocorrelations in (-1, 1) to AR coefficients.
pub fn pacf_to_ar(partials: &[f64]) -> Vec<f64> {
    let mut phi: Vec<f64> = Vec::with_capacity(partials.len());
    for (k, &kk) in partials.iter().enumerate() {
        let prev = phi.clone();
        phi.push(kk);
        for j in 0..k {
            phi[j] = prev[j] - kk * prev[k - 1 - j];
        }
    }
    phi
}

/// Multiplies two lag polynomials given as coefficient vectors including the
/// constant term (index = power of the backshift operator).
pub fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}
