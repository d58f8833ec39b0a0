//! Exponential smoothing on a Box-Cox transformed series.
//!
//! Stands in for the trigonometric/Box-Cox/ARMA state space model. The
//! transformation parameter is chosen by Guerrero's coefficient-of-variation
//! criterion over `{0, 0.1, ..., 1}`; the restricted ETS model is fitted on
//! the transformed scale; interval bounds are mapped back directly (they are
//! quantiles, so a monotone transform preserves them) and the point forecast
//! is bias-adjusted to the mean of the back-transformed distribution.

use super::ets::{fit_ets, EtsSpec};
use super::{failed, MethodId};
use crate::error::Result;
use crate::series::IntervalForecast;
use crate::stats::{interval_z, mean, std_dev};

pub const LAMBDA_GRID: [f64; 11] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

pub fn transform(y: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        y.ln()
    } else {
        (y.powf(lambda) - 1.0) / lambda
    }
}

pub fn inverse(z: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        z.exp()
    } else {
        let base = (lambda * z + 1.0).max(0.0);
        base.powf(1.0 / lambda)
    }
}

/// Guerrero's criterion for one candidate lambda: the coefficient of variation
/// of `sd / mean^(1 - lambda)` across non-overlapping subseries.
fn guerrero_cv(y: &[f64], period: usize, lambda: f64) -> f64 {
    let width = period.max(2);
    let blocks = y.len() / width;
    if blocks < 2 {
        return f64::INFINITY;
    }
    let start = y.len() - blocks * width;
    let ratios: Vec<f64> = y[start..]
        .chunks(width)
        .map(|c| std_dev(c) / mean(c).powf(1.0 - lambda))
        .collect();
    let mu = mean(&ratios);
    if mu <= 0.0 || !mu.is_finite() {
        return f64::INFINITY;
    }
    std_dev(&ratios) / mu
}

/// Chooses lambda from [`LAMBDA_GRID`]. Non-positive data cannot be
/// transformed and gets `lambda = 1` (a pure shift).
pub fn guerrero_lambda(y: &[f64], period: usize) -> f64 {
    if y.iter().any(|v| *v <= 0.0) {
        return 1.0;
    }
    let mut best = (1.0, f64::INFINITY);
    for &lambda in &LAMBDA_GRID {
        let cv = guerrero_cv(y, period, lambda);
        if cv < best.1 {
            best = (lambda, cv);
        }
    }
    best.0
}

pub fn forecast(y: &[f64], m: usize, h: usize, levels: &[f64]) -> Result<Vec<IntervalForecast>> {
    let lambda = guerrero_lambda(y, m);
    let z: Vec<f64> = y.iter().map(|v| transform(*v, lambda)).collect();
    if z.iter().any(|v| !v.is_finite()) {
        return Err(failed(MethodId::EtsBoxCox, "transform produced non-finite values"));
    }
    let fit = fit_ets(&z, m, &EtsSpec::candidates(m))
        .map_err(|_| failed(MethodId::EtsBoxCox, "no candidate model could be fitted"))?;
    let mean_z = fit.point(h);
    let var_z = fit.variance(h);

    let point_raw: Vec<f64> = mean_z
        .iter()
        .zip(&var_z)
        .map(|(mu, v)| {
            let base = inverse(*mu, lambda);
            if lambda == 1.0 {
                base
            } else {
                let denom = (lambda * mu + 1.0).powi(2);
                base * (1.0 + v * (1.0 - lambda) / (2.0 * denom))
            }
        })
        .collect();

    levels
        .iter()
        .map(|&level| {
            let q = interval_z(level);
            let mut lower = Vec::with_capacity(h);
            let mut upper = Vec::with_capacity(h);
            let mut point = Vec::with_capacity(h);
            for k in 0..h {
                let half = q * var_z[k].max(0.0).sqrt();
                let lo = inverse(mean_z[k] - half, lambda);
                let hi = inverse(mean_z[k] + half, lambda);
                if !(lo.is_finite() && hi.is_finite() && point_raw[k].is_finite()) {
                    return Err(failed(MethodId::EtsBoxCox, "back-transform overflow"));
                }
                lower.push(lo);
                upper.push(hi);
                point.push(point_raw[k].clamp(lo, hi));
            }
            IntervalForecast::new(level, lower, point, upper)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transform_inverts() {
        for lambda in LAMBDA_GRID {
            for y in [0.5, 1.0, 3.7, 120.0] {
                assert!((inverse(transform(y, lambda), lambda) - y).abs() < 1e-9 * y.max(1.0));
            }
        }
    }

    #[test]
    fn multiplicative_growth_prefers_log() {
        // variance proportional to level squared
        let y: Vec<f64> = (0..48)
            .map(|t| {
                let level = 10.0 * 1.06f64.powi(t);
                level * (1.0 + 0.1 * [1.0, -1.0, 0.5, -0.5][t as usize % 4])
            })
            .collect();
        let lambda = guerrero_lambda(&y, 4);
        assert!(lambda <= 0.2, "lambda {lambda}");
    }

    #[test]
    fn nonpositive_data_uses_identity_shape() {
        assert_eq!(guerrero_lambda(&[1.0, -2.0, 3.0, 4.0], 1), 1.0);
    }

    #[test]
    fn bounds_ordered_and_nested() {
        let y: Vec<f64> = (0..40).map(|t| 20.0 + (t as f64 * 0.7).sin() * 3.0 + t as f64 * 0.2).collect();
        let f = forecast(&y, 4, 8, &[0.8, 0.95]).unwrap();
        for k in 0..8 {
            assert!(f[0].lower[k] <= f[0].point[k] && f[0].point[k] <= f[0].upper[k]);
            assert!(f[1].lower[k] <= f[0].lower[k] && f[0].upper[k] <= f[1].upper[k]);
        }
    }
}
