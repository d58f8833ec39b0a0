//! Naive, seasonal naive and random walk with drift.

use super::{failed, gaussian_intervals, MethodId};
use crate::error::Result;
use crate::series::IntervalForecast;

fn mean_square(x: impl Iterator<Item = f64>, divisor: usize) -> f64 {
    if divisor == 0 {
        return 0.0;
    }
    x.map(|e| e * e).sum::<f64>() / divisor as f64
}

pub fn naive(y: &[f64], h: usize, levels: &[f64]) -> Result<Vec<IntervalForecast>> {
    let n = y.len();
    if n < 2 {
        return Err(failed(MethodId::Naive, "need at least two observations"));
    }
    let last = y[n - 1];
    let sigma2 = mean_square(y.windows(2).map(|w| w[1] - w[0]), n - 1);
    let point = vec![last; h];
    let var: Vec<f64> = (1..=h).map(|k| sigma2 * k as f64).collect();
    gaussian_intervals(&point, &var, levels)
}

pub fn snaive(y: &[f64], m: usize, h: usize, levels: &[f64]) -> Result<Vec<IntervalForecast>> {
    if m <= 1 {
        return naive(y, h, levels);
    }
    let n = y.len();
    if n <= m {
        return Err(failed(MethodId::Snaive, "need more than one seasonal cycle"));
    }
    let sigma2 = mean_square((m..n).map(|t| y[t] - y[t - m]), n - m);
    let point: Vec<f64> = (0..h).map(|k| y[n - m + k % m]).collect();
    let var: Vec<f64> = (0..h).map(|k| sigma2 * (k / m + 1) as f64).collect();
    gaussian_intervals(&point, &var, levels)
}

pub fn rw_drift(y: &[f64], h: usize, levels: &[f64]) -> Result<Vec<IntervalForecast>> {
    let n = y.len();
    if n < 3 {
        return Err(failed(MethodId::RwDrift, "need at least three observations"));
    }
    let drift = (y[n - 1] - y[0]) / (n - 1) as f64;
    let sigma2 = mean_square(y.windows(2).map(|w| w[1] - w[0] - drift), n - 2);
    let point: Vec<f64> = (1..=h).map(|k| y[n - 1] + drift * k as f64).collect();
    let var: Vec<f64> = (1..=h)
        .map(|k| {
            let k = k as f64;
            sigma2 * k * (1.0 + k / (n - 1) as f64)
        })
        .collect();
    gaussian_intervals(&point, &var, levels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn naive_repeats_last_value() {
        let f = naive(&[1., 2., 3., 4., 5.], 2, &[0.95]).unwrap();
        assert_eq!(f[0].point, vec![5.0, 5.0]);
    }

    #[test]
    fn snaive_repeats_last_cycle() {
        let y: Vec<f64> = (1..=8).map(f64::from).collect();
        let f = snaive(&y, 4, 4, &[0.95]).unwrap();
        assert_eq!(f[0].point, vec![5.0, 6.0, 7.0, 8.0]);
    }

    #[test]
    fn rw_drift_extends_average_slope() {
        let f = rw_drift(&[1., 2., 3., 4., 5.], 2, &[0.95]).unwrap();
        assert_eq!(f[0].point, vec![6.0, 7.0]);
        // perfectly linear history has zero residual variance
        assert_eq!(f[0].lower, f[0].upper);
    }

    #[test]
    fn snaive_on_yearly_is_naive() {
        let y = [3.0, 1.5, 4.0, 2.25, 9.0];
        assert_eq!(snaive(&y, 1, 3, &[0.8, 0.95]).unwrap(), naive(&y, 3, &[0.8, 0.95]).unwrap());
    }

    #[test]
    fn random_walk_intervals_widen() {
        let y = [1.0, 3.0, 2.0, 5.0, 4.0, 6.0];
        for f in [naive(&y, 5, &[0.9]).unwrap(), rw_drift(&y, 5, &[0.9]).unwrap()] {
            let widths: Vec<f64> = f[0].upper.iter().zip(&f[0].lower).map(|(u, l)| u - l).collect();
            assert!(widths.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        }
        let s = snaive(&[1.0, 2.0, 3.0, 2.0, 1.5, 2.5, 2.0, 1.0], 2, 6, &[0.9]).unwrap();
        let widths: Vec<f64> = s[0].upper.iter().zip(&s[0].lower).map(|(u, l)| u - l).collect();
        assert!(widths.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }
}
