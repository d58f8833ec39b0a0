//! Additive-error exponential smoothing state space models.
//!
//! The taxonomy is restricted to additive components: trend none, additive
//! or damped additive, and seasonality none or additive. With additive
//! errors the h-step forecast variance has a closed form, so no simulation
//! is needed for intervals.

use serde::{Deserialize, Serialize};

use super::{failed, gaussian_intervals, FittedMethod, MethodId};
use crate::error::Result;
use crate::optim::{from_bounded, to_bounded, NelderMead};
use crate::series::IntervalForecast;
use crate::stats::{mean, std_dev};

pub const PARAM_LOWER: f64 = 1e-4;
pub const PARAM_UPPER: f64 = 0.9999;
const PHI_LOWER: f64 = 0.8;
const PHI_UPPER: f64 = 0.98;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trend {
    None,
    Additive,
    Damped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Seasonality {
    None,
    Additive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EtsSpec {
    pub trend: Trend,
    pub season: Seasonality,
}

impl EtsSpec {
    pub const fn new(trend: Trend, season: Seasonality) -> Self {
        EtsSpec { trend, season }
    }

    pub fn label(&self) -> String {
        let t = match self.trend {
            Trend::None => "N",
            Trend::Additive => "A",
            Trend::Damped => "Ad",
        };
        let s = match self.season {
            Seasonality::None => "N",
            Seasonality::Additive => "A",
        };
        format!("ETS(A,{t},{s})")
    }

    /// Every candidate of the restricted taxonomy admissible for period `m`.
    pub fn candidates(m: usize) -> Vec<EtsSpec> {
        let mut out = Vec::new();
        for trend in [Trend::None, Trend::Additive, Trend::Damped] {
            out.push(EtsSpec::new(trend, Seasonality::None));
            if m > 1 {
                out.push(EtsSpec::new(trend, Seasonality::Additive));
            }
        }
        out
    }

    fn has_trend(&self) -> bool {
        self.trend != Trend::None
    }

    fn is_seasonal(&self) -> bool {
        self.season == Seasonality::Additive
    }
}

/// A fitted model with final states, ready to forecast.
#[derive(Debug, Clone, PartialEq)]
pub struct EtsFit {
    pub spec: EtsSpec,
    pub period: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub phi: f64,
    pub sse: f64,
    pub sigma2: f64,
    pub aicc: f64,
    pub n_params: usize,
    level: f64,
    slope: f64,
    /// Final seasonal states, oldest first (index 0 is `s_{n-m+1}`).
    season: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Smoothing {
    alpha: f64,
    beta: f64,
    gamma: f64,
    phi: f64,
}

struct FilterOutput {
    sse: f64,
    level: f64,
    slope: f64,
    season: Vec<f64>,
}

fn filter(
    y: &[f64],
    spec: EtsSpec,
    m: usize,
    p: Smoothing,
    level0: f64,
    slope0: f64,
    season0: &[f64],
) -> FilterOutput {
    let mut level = level0;
    let mut slope = if spec.has_trend() { slope0 } else { 0.0 };
    let phi = if spec.trend == Trend::Damped { p.phi } else { 1.0 };
    let mut season: Vec<f64> = if spec.is_seasonal() {
        season0.to_vec()
    } else {
        Vec::new()
    };
    let mut sse = 0.0;
    for (t, &obs) in y.iter().enumerate() {
        let s = if spec.is_seasonal() { season[t % m] } else { 0.0 };
        let pred = level + phi * slope + s;
        let e = obs - pred;
        sse += e * e;
        let new_level = level + phi * slope + p.alpha * e;
        if spec.has_trend() {
            slope = phi * slope + p.beta * e;
        }
        level = new_level;
        if spec.is_seasonal() {
            season[t % m] = s + p.gamma * e;
        }
    }
    // rotate so that index 0 is the oldest seasonal state
    if spec.is_seasonal() {
        let n = y.len();
        season.rotate_left(n % m);
    }
    FilterOutput {
        sse,
        level,
        slope,
        season,
    }
}

/// Heuristic initial states: seasonal indices from a classical decomposition
/// of the first cycles, level and slope from a regression on the first
/// (deseasonalised) observations.
fn initial_states(y: &[f64], spec: EtsSpec, m: usize) -> (f64, f64, Vec<f64>) {
    let mut season = Vec::new();
    let mut adjusted = y.to_vec();
    if spec.is_seasonal() {
        let cycles = (y.len() / m).clamp(2, 4);
        let span = &y[..(cycles * m).min(y.len())];
        let trend = centred_moving_average(span, m);
        let mut sums = vec![0.0; m];
        let mut counts = vec![0usize; m];
        for (t, tr) in trend.iter().enumerate() {
            if let Some(tr) = tr {
                sums[t % m] += span[t] - tr;
                counts[t % m] += 1;
            }
        }
        season = sums
            .iter()
            .zip(&counts)
            .map(|(s, c)| if *c > 0 { s / *c as f64 } else { 0.0 })
            .collect();
        let centre = mean(&season);
        for s in &mut season {
            *s -= centre;
        }
        for (t, v) in adjusted.iter_mut().enumerate() {
            *v -= season[t % m];
        }
    }
    let k = adjusted.len().clamp(2, 10);
    let head = &adjusted[..k];
    let tbar = (k as f64 - 1.0) / 2.0 + 1.0;
    let ybar = mean(head);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, v) in head.iter().enumerate() {
        let t = i as f64 + 1.0;
        sxy += (t - tbar) * (v - ybar);
        sxx += (t - tbar).powi(2);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = ybar - slope * tbar;
    if spec.has_trend() {
        (intercept, slope, season)
    } else {
        (ybar, 0.0, season)
    }
}

/// Centred moving average of order `m` (2 x m for even `m`); `None` where undefined.
pub(crate) fn centred_moving_average(y: &[f64], m: usize) -> Vec<Option<f64>> {
    let n = y.len();
    let mut out = vec![None; n];
    if m <= 1 {
        return y.iter().map(|v| Some(*v)).collect();
    }
    let half = m / 2;
    for t in half..n.saturating_sub(half) {
        let v = if m % 2 == 1 {
            y[t - half..=t + half].iter().sum::<f64>() / m as f64
        } else {
            if t + half >= n {
                continue;
            }
            let inner: f64 = y[t - half + 1..t + half].iter().sum();
            (inner + 0.5 * (y[t - half] + y[t + half])) / m as f64
        };
        out[t] = Some(v);
    }
    out
}

fn min_length(spec: EtsSpec, m: usize) -> usize {
    if spec.is_seasonal() {
        2 * m + 2
    } else if spec.has_trend() {
        4
    } else {
        3
    }
}

/// Fits one model by minimising the Gaussian likelihood (equivalently the
/// sum of squared one-step errors) over smoothing parameters and the initial
/// level and slope. Seasonal initial states stay at their heuristic values.
pub fn fit_spec(y: &[f64], m: usize, spec: EtsSpec) -> Option<EtsFit> {
    let n = y.len();
    if n < min_length(spec, m) || (spec.is_seasonal() && m <= 1) {
        return None;
    }
    let (level0, slope0, season0) = initial_states(y, spec, m);
    let scale = std_dev(y).max(1e-8 * y.iter().fold(0.0f64, |a, v| a.max(v.abs()))).max(1e-12);

    // coordinates: alpha, [beta share], [gamma share], [phi], level offset, [slope offset]
    let decode = |u: &[f64]| -> (Smoothing, f64, f64) {
        let mut i = 0;
        let alpha = to_bounded(u[i], PARAM_LOWER, PARAM_UPPER);
        i += 1;
        let mut beta = 0.0;
        if spec.has_trend() {
            beta = alpha * to_bounded(u[i], PARAM_LOWER, PARAM_UPPER);
            i += 1;
        }
        let mut gamma = 0.0;
        if spec.is_seasonal() {
            gamma = (1.0 - alpha) * to_bounded(u[i], PARAM_LOWER, PARAM_UPPER);
            i += 1;
        }
        let mut phi = 1.0;
        if spec.trend == Trend::Damped {
            phi = to_bounded(u[i], PHI_LOWER, PHI_UPPER);
            i += 1;
        }
        let level = level0 + u[i] * scale;
        i += 1;
        let slope = if spec.has_trend() {
            slope0 + u[i] * scale * 0.1
        } else {
            0.0
        };
        (
            Smoothing {
                alpha,
                beta: beta.clamp(PARAM_LOWER.min(alpha), PARAM_UPPER),
                gamma: gamma.max(if spec.is_seasonal() { PARAM_LOWER } else { 0.0 }),
                phi,
            },
            level,
            slope,
        )
    };

    let mut start = vec![from_bounded(0.3, PARAM_LOWER, PARAM_UPPER)];
    if spec.has_trend() {
        start.push(from_bounded(0.2, PARAM_LOWER, PARAM_UPPER));
    }
    if spec.is_seasonal() {
        start.push(from_bounded(0.1, PARAM_LOWER, PARAM_UPPER));
    }
    if spec.trend == Trend::Damped {
        start.push(from_bounded(0.95, PHI_LOWER, PHI_UPPER));
    }
    start.push(0.0);
    if spec.has_trend() {
        start.push(0.0);
    }

    let objective = |u: &[f64]| {
        let (p, l, b) = decode(u);
        filter(y, spec, m, p, l, b, &season0).sse
    };
    let nm = NelderMead {
        max_evals: 400 * start.len(),
        tolerance: 1e-10,
        step: 0.5,
    };
    let best = nm.minimize(objective, &start);
    let (p, level_init, slope_init) = decode(&best.x);
    let out = filter(y, spec, m, p, level_init, slope_init, &season0);
    if !out.sse.is_finite() {
        return None;
    }

    let n_smoothing = 1 + spec.has_trend() as usize + spec.is_seasonal() as usize
        + (spec.trend == Trend::Damped) as usize;
    let n_states = 1 + spec.has_trend() as usize + if spec.is_seasonal() { m - 1 } else { 0 };
    let n_params = n_smoothing + n_states + 1;
    let aicc = aicc_from_sse(out.sse, y, n_params);
    let dof = n.saturating_sub(n_params - 1).max(1);
    Some(EtsFit {
        spec,
        period: m,
        alpha: p.alpha,
        beta: if spec.has_trend() { p.beta } else { 0.0 },
        gamma: if spec.is_seasonal() { p.gamma } else { 0.0 },
        phi: p.phi,
        sse: out.sse,
        sigma2: out.sse / dof as f64,
        aicc,
        n_params,
        level: out.level,
        slope: out.slope,
        season: out.season,
    })
}

/// AICc of a Gaussian model with `k` parameters (including the variance)
/// given its residual sum of squares. The variance is floored relative to
/// the data magnitude so exact fits stay finite.
pub(crate) fn aicc_from_sse(sse: f64, y: &[f64], k: usize) -> f64 {
    let n = y.len() as f64;
    let magnitude = y.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let floor = (1e-10 * magnitude).powi(2);
    let var = (sse / n).max(floor);
    let loglik = -0.5 * n * ((2.0 * std::f64::consts::PI * var).ln() + 1.0);
    let k = k as f64;
    if n - k - 1.0 <= 0.0 {
        return f64::INFINITY;
    }
    -2.0 * loglik + 2.0 * k + 2.0 * k * (k + 1.0) / (n - k - 1.0)
}

impl EtsFit {
    pub fn point(&self, h: usize) -> Vec<f64> {
        let m = self.period;
        let mut phi_sum = 0.0;
        (1..=h)
            .map(|k| {
                phi_sum += match self.spec.trend {
                    Trend::Damped => self.phi.powi(k as i32),
                    _ => 1.0,
                };
                let trend = if self.spec.has_trend() {
                    phi_sum * self.slope
                } else {
                    0.0
                };
                let s = if self.spec.is_seasonal() {
                    self.season[(k - 1) % m]
                } else {
                    0.0
                };
                self.level + trend + s
            })
            .collect()
    }

    /// Analytic h-step forecast variances for additive-error models.
    pub fn variance(&self, h: usize) -> Vec<f64> {
        let m = self.period;
        let mut acc = 0.0;
        let mut phi_sum = 0.0;
        let mut out = Vec::with_capacity(h);
        for k in 1..=h {
            out.push(self.sigma2 * (1.0 + acc));
            let j = k;
            phi_sum += match self.spec.trend {
                Trend::Damped => self.phi.powi(j as i32),
                Trend::Additive => 1.0,
                Trend::None => 0.0,
            };
            let mut c = self.alpha + self.beta * phi_sum;
            if self.spec.is_seasonal() && j % m == 0 {
                c += self.gamma;
            }
            acc += c * c;
        }
        out
    }

    pub fn fitted_method(&self, method: MethodId) -> FittedMethod {
        let mut parameters = vec![("alpha".to_string(), self.alpha)];
        if self.spec.has_trend() {
            parameters.push(("beta".into(), self.beta));
        }
        if self.spec.is_seasonal() {
            parameters.push(("gamma".into(), self.gamma));
        }
        if self.spec.trend == Trend::Damped {
            parameters.push(("phi".into(), self.phi));
        }
        FittedMethod {
            method,
            parameters,
            sigma2: self.sigma2,
            aicc: Some(self.aicc),
        }
    }
}

/// Selects the best candidate by AICc.
pub fn fit_ets(y: &[f64], m: usize, candidates: &[EtsSpec]) -> Result<EtsFit> {
    let mut best: Option<EtsFit> = None;
    for &spec in candidates {
        if let Some(fit) = fit_spec(y, m, spec) {
            if best.as_ref().is_none_or(|b| fit.aicc < b.aicc) {
                best = Some(fit);
            }
        }
    }
    best.ok_or_else(|| failed(MethodId::Ets, "no candidate model could be fitted"))
}

pub fn forecast(y: &[f64], m: usize, h: usize, levels: &[f64]) -> Result<Vec<IntervalForecast>> {
    let fit = fit_ets(y, m, &EtsSpec::candidates(m))?;
    gaussian_intervals(&fit.point(h), &fit.variance(h), levels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seasonal_series(n: usize, noise: f64) -> Vec<f64> {
        // deterministic pseudo-noise from a linear congruential sequence
        let mut state: u64 = 12345;
        (0..n)
            .map(|t| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let u = (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
                50.0 + 10.0 * (2.0 * std::f64::consts::PI * t as f64 / 12.0).sin() + noise * u
            })
            .collect()
    }

    #[test]
    fn constant_series_selects_level_only() {
        let y = vec![7.5; 30];
        let fit = fit_ets(&y, 1, &EtsSpec::candidates(1)).unwrap();
        assert_eq!(fit.spec, EtsSpec::new(Trend::None, Seasonality::None));
        for p in fit.point(5) {
            assert!((p - 7.5).abs() < 1e-9);
        }
        assert!(fit.sigma2 < 1e-12);
    }

    #[test]
    fn ramp_prefers_trend() {
        let y: Vec<f64> = (0..40).map(|t| 3.0 + 0.7 * t as f64).collect();
        let level_only = fit_spec(&y, 1, EtsSpec::new(Trend::None, Seasonality::None)).unwrap();
        let trended = fit_spec(&y, 1, EtsSpec::new(Trend::Additive, Seasonality::None)).unwrap();
        assert!(trended.aicc < level_only.aicc);
        let best = fit_ets(&y, 1, &EtsSpec::candidates(1)).unwrap();
        assert!(best.spec.has_trend());
        let p = best.point(3);
        assert!((p[2] - (3.0 + 0.7 * 42.0)).abs() < 1e-3, "{p:?}");
    }

    #[test]
    fn strongly_seasonal_series_selects_seasonal_model() {
        let y = seasonal_series(96, 2.0);
        let fit = fit_ets(&y, 12, &EtsSpec::candidates(12)).unwrap();
        assert!(fit.spec.is_seasonal(), "{}", fit.spec.label());
    }

    #[test]
    fn parameters_within_bounds() {
        let y = seasonal_series(72, 5.0);
        for spec in EtsSpec::candidates(12) {
            let fit = fit_spec(&y, 12, spec).unwrap();
            assert!((PARAM_LOWER..=PARAM_UPPER).contains(&fit.alpha));
            if spec.has_trend() {
                assert!((PARAM_LOWER..=PARAM_UPPER).contains(&fit.beta));
            }
            if spec.is_seasonal() {
                assert!((PARAM_LOWER..=PARAM_UPPER).contains(&fit.gamma));
            }
        }
    }

    #[test]
    fn variance_grows_with_horizon() {
        let y = seasonal_series(60, 4.0);
        let fit = fit_spec(&y, 12, EtsSpec::new(Trend::Additive, Seasonality::Additive)).unwrap();
        let v = fit.variance(24);
        assert!((v[0] - fit.sigma2).abs() < 1e-12);
        assert!(v.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn simple_smoothing_variance_formula() {
        let y = seasonal_series(40, 10.0);
        let fit = fit_spec(&y, 1, EtsSpec::new(Trend::None, Seasonality::None)).unwrap();
        let v = fit.variance(4);
        for (k, vk) in v.iter().enumerate() {
            let expected = fit.sigma2 * (1.0 + fit.alpha.powi(2) * k as f64);
            assert!((vk - expected).abs() < 1e-9 * expected.max(1.0));
        }
    }
}
