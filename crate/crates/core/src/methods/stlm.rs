//! STL decomposition followed by an AR model on the seasonally adjusted series.

use super::ar::fit_ar_aicc;
use super::{failed, gaussian_intervals, MethodId};
use crate::error::{Error, Result};
use crate::features::stl::{decompose, StlParams};
use crate::series::IntervalForecast;

pub const MAX_AR_ORDER: usize = 5;

pub fn stlm_ar_forecast(
    y: &[f64],
    m: usize,
    h: usize,
    levels: &[f64],
) -> Result<Vec<IntervalForecast>> {
    let n = y.len();
    let (adjusted, seasonal) = if m > 1 {
        let stl = decompose(y, m, &StlParams::default()).map_err(|e| match e {
            Error::SeriesTooShort { needed, got } => failed(
                MethodId::StlmAr,
                format!("series too short for STL: need {needed}, got {got}"),
            ),
            other => failed(MethodId::StlmAr, other.to_string()),
        })?;
        let adjusted: Vec<f64> = y.iter().zip(&stl.seasonal).map(|(v, s)| v - s).collect();
        (adjusted, Some(stl.seasonal))
    } else {
        (y.to_vec(), None)
    };

    let fit = fit_ar_aicc(&adjusted, MAX_AR_ORDER)
        .ok_or_else(|| failed(MethodId::StlmAr, "AR fit failed"))?;
    let mut point = fit.point(&adjusted, h);
    if let Some(seasonal) = seasonal {
        for (k, p) in point.iter_mut().enumerate() {
            *p += seasonal[n - m + k % m];
        }
    }
    gaussian_intervals(&point, &fit.variance(h), levels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::mase;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn continues_a_pure_sine() {
        let full: Vec<f64> = (0..132)
            .map(|t| 5.0 + (2.0 * std::f64::consts::PI * t as f64 / 12.0).sin())
            .collect();
        let (train, test) = full.split_at(120);
        let f = stlm_ar_forecast(train, 12, 12, &[0.95]).unwrap();
        // the seasonal-difference scale of an exact sine is zero (MASE is
        // undefined), so scale by the mean absolute first difference instead
        assert!(mase(test, &f[0].point, train, 12).is_err());
        let lag1: f64 = train.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / 119.0;
        let mae: f64 = test.iter().zip(&f[0].point).map(|(a, b)| (a - b).abs()).sum::<f64>() / 12.0;
        assert!(mae / lag1 < 0.1, "scaled error {}", mae / lag1);
    }

    #[test]
    fn white_noise_forecasts_the_mean() {
        // AICc picks AR(0) for most samples, and then the forecast is the
        // mean plus the (small) estimated seasonal pattern
        let mut close = 0;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let normal = Normal::new(20.0, 1.0).unwrap();
            let y: Vec<f64> = (0..120).map(|_| normal.sample(&mut rng)).collect();
            let f = stlm_ar_forecast(&y, 4, 8, &[0.95]).unwrap();
            let mu = crate::stats::mean(&y);
            if f[0].point.iter().all(|p| (p - mu).abs() < 0.6) {
                close += 1;
            }
        }
        assert!(close >= 15, "{close} of 20");
    }

    #[test]
    fn two_cycles_is_too_short() {
        let y: Vec<f64> = (0..24).map(f64::from).collect();
        assert!(matches!(
            stlm_ar_forecast(&y, 12, 6, &[0.95]),
            Err(Error::MethodFailed { method: MethodId::StlmAr, .. })
        ));
    }
}
