//! Theta method.
//!
//! The (possibly seasonally adjusted) series is split into two theta lines:
//! theta-0, the least-squares linear trend, and theta-2, which doubles the
//! local curvature (`2y - trend`). The forecast averages the extrapolated
//! trend line with simple exponential smoothing of the theta-2 line.
//! Seasonality is detected with the lag-m autocorrelation test and removed
//! by an additive classical decomposition.

use super::ets::{centred_moving_average, fit_spec, EtsSpec, Seasonality, Trend};
use super::{failed, gaussian_intervals, MethodId};
use crate::error::Result;
use crate::series::IntervalForecast;
use crate::stats::{acf, mean};

/// 90% one-sided critical value of the seasonality test.
const SEASONALITY_CRITICAL: f64 = 1.645;

/// Whether the lag-m autocorrelation is significantly positive.
pub fn is_seasonal(y: &[f64], m: usize) -> bool {
    let n = y.len();
    if m <= 1 || n < 2 * m {
        return false;
    }
    let r = acf(y, m);
    let partial: f64 = r[..m - 1].iter().map(|v| v * v).sum();
    let limit = SEASONALITY_CRITICAL * ((1.0 + 2.0 * partial) / n as f64).sqrt();
    r[m - 1].abs() > limit
}

/// Additive seasonal indices (one per cycle position, summing to zero).
pub fn classical_seasonal_indices(y: &[f64], m: usize) -> Vec<f64> {
    let trend = centred_moving_average(y, m);
    let mut sums = vec![0.0; m];
    let mut counts = vec![0usize; m];
    for (t, tr) in trend.iter().enumerate() {
        if let Some(tr) = tr {
            sums[t % m] += y[t] - tr;
            counts[t % m] += 1;
        }
    }
    let mut idx: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, c)| if *c > 0 { s / *c as f64 } else { 0.0 })
        .collect();
    let centre = mean(&idx);
    for v in &mut idx {
        *v -= centre;
    }
    idx
}

pub fn theta_forecast(
    y: &[f64],
    m: usize,
    h: usize,
    levels: &[f64],
) -> Result<Vec<IntervalForecast>> {
    let n = y.len();
    if n < 3 {
        return Err(failed(MethodId::Thetaf, "need at least three observations"));
    }
    let seasonal = if is_seasonal(y, m) {
        Some(classical_seasonal_indices(y, m))
    } else {
        None
    };
    let adjusted: Vec<f64> = match &seasonal {
        Some(idx) => y.iter().enumerate().map(|(t, v)| v - idx[t % m]).collect(),
        None => y.to_vec(),
    };

    // theta-0: least-squares line on t = 1..n
    let tbar = (n as f64 + 1.0) / 2.0;
    let ybar = mean(&adjusted);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, v) in adjusted.iter().enumerate() {
        let t = i as f64 + 1.0;
        sxy += (t - tbar) * (v - ybar);
        sxx += (t - tbar).powi(2);
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * tbar;

    // theta-2 line and its simple exponential smoothing
    let theta2: Vec<f64> = adjusted
        .iter()
        .enumerate()
        .map(|(i, v)| 2.0 * v - (intercept + slope * (i as f64 + 1.0)))
        .collect();
    let ses = fit_spec(&theta2, 1, EtsSpec::new(Trend::None, Seasonality::None))
        .ok_or_else(|| failed(MethodId::Thetaf, "SES fit failed"))?;
    let ses_point = ses.point(h);
    let ses_var = ses.variance(h);

    let point: Vec<f64> = (1..=h)
        .map(|k| {
            let line = intercept + slope * (n + k) as f64;
            let mut p = 0.5 * (line + ses_point[k - 1]);
            if let Some(idx) = &seasonal {
                p += idx[(n + k - 1) % m];
            }
            p
        })
        .collect();
    // the SES component enters with weight one half
    let var: Vec<f64> = ses_var.iter().map(|v| 0.25 * v).collect();
    gaussian_intervals(&point, &var, levels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_forecast_grows_linearly_from_the_last_value() {
        let y: Vec<f64> = (0..30).map(|t| 4.0 + 1.5 * t as f64).collect();
        let f = theta_forecast(&y, 1, 6, &[0.95]).unwrap();
        let p = &f[0].point;
        // theta-0 extrapolates the ramp exactly; SES of the (identical)
        // theta-2 line stays at the last level, so the average rises at half
        // the trend slope.
        for w in p.windows(2) {
            assert!((w[1] - w[0] - 0.75).abs() < 1e-9);
        }
        let last = *y.last().unwrap();
        assert!((p[0] - (last + 0.75)).abs() < 1e-3, "{}", p[0]);
    }

    #[test]
    fn constant_series() {
        let f = theta_forecast(&[3.0; 20], 1, 4, &[0.9]).unwrap();
        for k in 0..4 {
            assert!((f[0].point[k] - 3.0).abs() < 1e-9);
            assert!(f[0].upper[k] - f[0].lower[k] < 1e-6);
        }
    }

    #[test]
    fn seasonality_detection() {
        let season: Vec<f64> = (0..48)
            .map(|t| 10.0 + [5.0, -3.0, 1.0, -3.0][t % 4])
            .collect();
        assert!(is_seasonal(&season, 4));
        assert!(!is_seasonal(&season, 1));
        let ramp: Vec<f64> = (0..48).map(f64::from).collect();
        assert!(!is_seasonal(&ramp[..7], 4));
    }

    #[test]
    fn seasonal_indices_sum_to_zero() {
        let y: Vec<f64> = (0..40)
            .map(|t| t as f64 * 0.3 + [2.0, -1.0, 0.5, -1.5][t % 4])
            .collect();
        let idx = classical_seasonal_indices(&y, 4);
        assert!(idx.iter().sum::<f64>().abs() < 1e-12);
        assert!((idx[0] - 2.0).abs() < 1e-9);
    }
}
