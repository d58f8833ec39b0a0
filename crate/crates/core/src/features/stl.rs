//! Seasonal-trend decomposition by loess.
//!
//! Implements the inner/outer loop of the classical STL procedure for
//! equally spaced data. With a periodic seasonal window the cycle-subseries
//! smoother reduces to the subseries mean, which makes the seasonal component
//! exactly periodic with zero mean over every full cycle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

#[derive(Debug, Clone, PartialEq)]
pub struct StlDecomposition {
    pub trend: Vec<f64>,
    pub seasonal: Vec<f64>,
    pub remainder: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeasonalWindow {
    Periodic,
    /// Odd loess span (in cycles) for the cycle-subseries smoother.
    Span(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StlParams {
    pub seasonal: SeasonalWindow,
    /// Trend loess span; derived from the period when `None`.
    pub trend_window: Option<usize>,
    pub inner: usize,
    /// Passes of the outer loop. Robustness weights are recomputed between
    /// passes, so a single pass is the non-robust fit.
    pub outer: usize,
}

impl Default for StlParams {
    fn default() -> Self {
        StlParams {
            seasonal: SeasonalWindow::Periodic,
            trend_window: None,
            inner: 2,
            outer: 1,
        }
    }
}

fn next_odd(x: f64) -> usize {
    let v = x.ceil().max(1.0) as usize;
    if v % 2 == 0 {
        v + 1
    } else {
        v
    }
}

/// Trend span used for non-seasonal series.
pub fn nonseasonal_trend_window(n: usize) -> usize {
    next_odd((n as f64 / 4.0).max(7.0))
}

/// Decomposes `series` with the default parameters.
pub fn stl_decompose(series: &TimeSeries) -> Result<StlDecomposition> {
    decompose(series.values(), series.period(), &StlParams::default())
}

pub fn decompose(y: &[f64], period: usize, params: &StlParams) -> Result<StlDecomposition> {
    let n = y.len();
    if period <= 1 {
        let window = params
            .trend_window
            .unwrap_or_else(|| nonseasonal_trend_window(n));
        let trend = loess_smooth(y, None, window, 1);
        let remainder = y.iter().zip(&trend).map(|(v, t)| v - t).collect();
        return Ok(StlDecomposition {
            trend,
            seasonal: vec![0.0; n],
            remainder,
        });
    }
    if n < 2 * period + 1 {
        return Err(Error::SeriesTooShort {
            needed: 2 * period + 1,
            got: n,
        });
    }

    let n_s = match params.seasonal {
        SeasonalWindow::Periodic => 10 * n + 1,
        SeasonalWindow::Span(s) => next_odd(s.max(7) as f64),
    };
    let n_l = next_odd(period as f64);
    let n_t = params.trend_window.unwrap_or_else(|| {
        next_odd(1.5 * period as f64 / (1.0 - 1.5 / n_s as f64))
    });

    let mut trend = vec![0.0; n];
    let mut seasonal = vec![0.0; n];
    let mut robustness: Option<Vec<f64>> = None;

    for pass in 0..params.outer.max(1) {
        for _ in 0..params.inner.max(1) {
            let detrended: Vec<f64> = y.iter().zip(&trend).map(|(v, t)| v - t).collect();
            let cycle = match params.seasonal {
                SeasonalWindow::Periodic => periodic_subseries(&detrended, period),
                SeasonalWindow::Span(_) => {
                    smoothed_subseries(&detrended, period, n_s, robustness.as_deref())
                }
            };
            let low = low_pass(&cycle, period, n_l);
            for i in 0..n {
                seasonal[i] = cycle[i + period] - low[i];
            }
            let deseasonal: Vec<f64> = y.iter().zip(&seasonal).map(|(v, s)| v - s).collect();
            trend = loess_smooth(&deseasonal, robustness.as_deref(), n_t, 1);
        }
        if pass + 1 < params.outer {
            let resid: Vec<f64> = (0..n).map(|i| y[i] - trend[i] - seasonal[i]).collect();
            robustness = Some(robustness_weights(&resid));
        }
    }

    if params.seasonal == SeasonalWindow::Periodic {
        // Average each cycle position and re-centre so every full cycle sums to zero.
        let mut sums = vec![0.0; period];
        let mut counts = vec![0usize; period];
        for (i, s) in seasonal.iter().enumerate() {
            sums[i % period] += s;
            counts[i % period] += 1;
        }
        let means: Vec<f64> = sums.iter().zip(&counts).map(|(s, c)| s / *c as f64).collect();
        let centre = means.iter().sum::<f64>() / period as f64;
        for (i, s) in seasonal.iter_mut().enumerate() {
            *s = means[i % period] - centre;
        }
    }

    let remainder = (0..n).map(|i| y[i] - trend[i] - seasonal[i]).collect();
    Ok(StlDecomposition {
        trend,
        seasonal,
        remainder,
    })
}

/// Cycle-subseries means, extended by one cycle at each end (length n + 2m).
fn periodic_subseries(x: &[f64], period: usize) -> Vec<f64> {
    let n = x.len();
    let mut sums = vec![0.0; period];
    let mut counts = vec![0usize; period];
    for (i, v) in x.iter().enumerate() {
        sums[i % period] += v;
        counts[i % period] += 1;
    }
    (0..n + 2 * period)
        .map(|j| sums[j % period] / counts[j % period] as f64)
        .collect()
}

fn smoothed_subseries(
    x: &[f64],
    period: usize,
    span: usize,
    robustness: Option<&[f64]>,
) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n + 2 * period];
    for pos in 0..period {
        let idx: Vec<usize> = (pos..n).step_by(period).collect();
        let sub: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
        let w: Option<Vec<f64>> = robustness.map(|r| idx.iter().map(|&i| r[i]).collect());
        let len = sub.len();
        // evaluate at -1, 0..len, len (in subseries coordinates)
        for k in 0..len + 2 {
            let at = k as f64 - 1.0;
            let v = loess_at(&sub, w.as_deref(), at, span, 1).unwrap_or_else(|| {
                sub[(k.saturating_sub(1)).min(len - 1)]
            });
            out[pos + k * period] = v;
        }
    }
    out
}

fn moving_average(x: &[f64], width: usize) -> Vec<f64> {
    if x.len() < width {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(x.len() - width + 1);
    let mut sum: f64 = x[..width].iter().sum();
    out.push(sum / width as f64);
    for i in width..x.len() {
        sum += x[i] - x[i - width];
        out.push(sum / width as f64);
    }
    out
}

fn low_pass(cycle: &[f64], period: usize, n_l: usize) -> Vec<f64> {
    let a = moving_average(cycle, period);
    let b = moving_average(&a, period);
    let c = moving_average(&b, 3);
    loess_smooth(&c, None, n_l, 1)
}

fn robustness_weights(resid: &[f64]) -> Vec<f64> {
    let mut abs: Vec<f64> = resid.iter().map(|r| r.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let mid = abs.len() / 2;
    let median = if abs.len() % 2 == 0 {
        0.5 * (abs[mid - 1] + abs[mid])
    } else {
        abs[mid]
    };
    let h = 6.0 * median;
    resid
        .iter()
        .map(|r| {
            if h <= 0.0 {
                1.0
            } else {
                let u = r.abs() / h;
                if u < 1.0 {
                    (1.0 - u * u).powi(2)
                } else {
                    0.0
                }
            }
        })
        .collect()
}

/// Loess smooth of equally spaced data evaluated at every observation.
pub fn loess_smooth(y: &[f64], weights: Option<&[f64]>, span: usize, degree: usize) -> Vec<f64> {
    (0..y.len())
        .map(|i| loess_at(y, weights, i as f64, span, degree).unwrap_or(y[i]))
        .collect()
}

/// Local polynomial (degree 0 or 1) fit with tricube weights over the `span`
/// nearest observations to position `at` (0-based; may lie outside the data).
pub fn loess_at(
    y: &[f64],
    weights: Option<&[f64]>,
    at: f64,
    span: usize,
    degree: usize,
) -> Option<f64> {
    let n = y.len();
    if n == 0 {
        return None;
    }
    let q = span.max(1);
    let (left, right) = if q >= n {
        (0, n - 1)
    } else {
        // contiguous window of the q points nearest to `at`
        let l = (at - (q as f64 - 1.0) / 2.0)
            .round()
            .clamp(0.0, (n - q) as f64) as usize;
        (l, l + q - 1)
    };
    let mut h = (at - left as f64).abs().max((right as f64 - at).abs());
    if q > n {
        h += ((q - n) / 2) as f64;
    }
    let h1 = 0.001 * h;
    let h9 = 0.999 * h;

    let mut w = Vec::with_capacity(right - left + 1);
    let mut total = 0.0;
    for j in left..=right {
        let r = (j as f64 - at).abs();
        let mut wj = if r <= h1 {
            1.0
        } else if r <= h9 && h > 0.0 {
            (1.0 - (r / h).powi(3)).powi(3)
        } else {
            0.0
        };
        if let Some(rw) = weights {
            wj *= rw[j];
        }
        total += wj;
        w.push(wj);
    }
    if total <= 0.0 {
        return None;
    }
    for wj in &mut w {
        *wj /= total;
    }
    if degree >= 1 && h > 0.0 {
        let centre: f64 = w
            .iter()
            .enumerate()
            .map(|(k, wj)| wj * (left + k) as f64)
            .sum();
        let spread: f64 = w
            .iter()
            .enumerate()
            .map(|(k, wj)| wj * ((left + k) as f64 - centre).powi(2))
            .sum();
        if spread.sqrt() > 0.001 * (right - left) as f64 {
            let b = (at - centre) / spread;
            for (k, wj) in w.iter_mut().enumerate() {
                *wj *= b * ((left + k) as f64 - centre) + 1.0;
            }
        }
    }
    Some(w.iter().enumerate().map(|(k, wj)| wj * y[left + k]).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::Frequency;
    use crate::stats::variance;

    fn ts(values: Vec<f64>, freq: Frequency) -> TimeSeries {
        TimeSeries::with_default_horizon("t", values, freq).unwrap()
    }

    #[test]
    fn pure_sine_has_tiny_remainder() {
        let y: Vec<f64> = (0..120)
            .map(|t| (2.0 * std::f64::consts::PI * t as f64 / 12.0).sin())
            .collect();
        let d = stl_decompose(&ts(y.clone(), Frequency::Monthly)).unwrap();
        let ratio = variance(&d.remainder) / variance(&y);
        assert!(ratio < 0.01, "remainder variance ratio {ratio}");
    }

    #[test]
    fn constant_series_is_all_trend() {
        let d = stl_decompose(&ts(vec![5.0; 24], Frequency::Quarterly)).unwrap();
        for i in 0..24 {
            assert!((d.trend[i] - 5.0).abs() < 1e-12);
            assert!(d.seasonal[i].abs() < 1e-12);
            assert!(d.remainder[i].abs() < 1e-12);
        }
    }

    #[test]
    fn ramp_without_season() {
        let y: Vec<f64> = (0..30).map(|t| 2.0 + 0.5 * t as f64).collect();
        let d = stl_decompose(&ts(y.clone(), Frequency::Yearly)).unwrap();
        assert!(d.seasonal.iter().all(|s| *s == 0.0));
        for (t, v) in d.trend.iter().zip(&y) {
            assert!((t - v).abs() < 1e-9);
        }
    }

    #[test]
    fn too_short_for_seasonal() {
        let s = ts((0..24).map(f64::from).collect(), Frequency::Monthly);
        assert!(matches!(
            stl_decompose(&s),
            Err(Error::SeriesTooShort { needed: 25, .. })
        ));
    }

    #[test]
    fn seasonal_cycles_sum_to_zero_and_components_add_up() {
        let y: Vec<f64> = (0..50)
            .map(|t| 10.0 + 0.2 * t as f64 + [3.0, -1.0, 0.5, -2.5][t % 4] + ((t * 7919) % 13) as f64 * 0.1)
            .collect();
        let d = stl_decompose(&ts(y.clone(), Frequency::Quarterly)).unwrap();
        for c in 0..(50 / 4) {
            let s: f64 = d.seasonal[4 * c..4 * c + 4].iter().sum();
            assert!(s.abs() < 1e-6);
        }
        for i in 0..y.len() {
            assert!((d.trend[i] + d.seasonal[i] + d.remainder[i] - y[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn robust_passes_stay_additive() {
        let mut y: Vec<f64> = (0..48)
            .map(|t| (2.0 * std::f64::consts::PI * t as f64 / 12.0).cos() + 0.05 * t as f64)
            .collect();
        y[20] += 30.0;
        let params = StlParams {
            seasonal: SeasonalWindow::Span(7),
            outer: 3,
            ..StlParams::default()
        };
        let d = decompose(&y, 12, &params).unwrap();
        for i in 0..y.len() {
            assert!((d.trend[i] + d.seasonal[i] + d.remainder[i] - y[i]).abs() < 1e-8);
        }
        // the outlier ends up in the remainder
        assert!(d.remainder[20] > 20.0);
    }
}
