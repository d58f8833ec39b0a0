//! The individual forecasting method pool.
//!
//! Every method turns a training period into point forecasts and central
//! Gaussian-style prediction intervals at the requested levels. Failures are
//! reported as [`Error::MethodFailed`]; batch callers use
//! [`forecast_or_naive`] which substitutes the naive forecast.

pub mod ar;
pub mod arima;
pub mod boxcox;
pub mod ets;
pub mod simple;
pub mod stlm;
pub mod theta;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{IntervalForecast, TimeSeries};
use crate::stats::interval_z;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MethodId {
    #[serde(rename = "auto-arima")]
    AutoArima,
    #[serde(rename = "ets")]
    Ets,
    #[serde(rename = "ets-boxcox")]
    EtsBoxCox,
    #[serde(rename = "stlm-ar")]
    StlmAr,
    #[serde(rename = "rw-drift")]
    RwDrift,
    #[serde(rename = "thetaf")]
    Thetaf,
    #[serde(rename = "naive")]
    Naive,
    #[serde(rename = "snaive")]
    Snaive,
}

impl MethodId {
    /// The full pool in its canonical order.
    pub const POOL: [MethodId; 8] = [
        MethodId::AutoArima,
        MethodId::Ets,
        MethodId::EtsBoxCox,
        MethodId::StlmAr,
        MethodId::RwDrift,
        MethodId::Thetaf,
        MethodId::Naive,
        MethodId::Snaive,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodId::AutoArima => "auto-arima",
            MethodId::Ets => "ets",
            MethodId::EtsBoxCox => "ets-boxcox",
            MethodId::StlmAr => "stlm-ar",
            MethodId::RwDrift => "rw-drift",
            MethodId::Thetaf => "thetaf",
            MethodId::Naive => "naive",
            MethodId::Snaive => "snaive",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            MethodId::AutoArima => "Seasonal ARIMA selected by AICc after unit-root based differencing",
            MethodId::Ets => "Additive-error exponential smoothing state space model selected by AICc",
            MethodId::EtsBoxCox => "Exponential smoothing on a Box-Cox transformed series (lambda by Guerrero's method)",
            MethodId::StlmAr => "STL decomposition with an AR model on the seasonally adjusted series",
            MethodId::RwDrift => "Random walk with drift",
            MethodId::Thetaf => "Theta method: average of the theta-0 line and SES on the theta-2 line",
            MethodId::Naive => "Last observation carried forward",
            MethodId::Snaive => "Last observed value of the same season",
        }
    }

    /// Methods that take part in combination for a series of period `m`.
    /// Seasonal naive coincides with naive for non-seasonal data and is dropped.
    pub fn active_pool(period: usize) -> Vec<MethodId> {
        MethodId::POOL
            .into_iter()
            .filter(|m| period > 1 || *m != MethodId::Snaive)
            .collect()
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodId::POOL
            .into_iter()
            .find(|m| m.as_str() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

/// Registry table (`id<TAB>description`) for report labelling.
pub fn method_registry() -> String {
    let mut out = String::from("id\tdescription\n");
    for m in MethodId::POOL {
        out.push_str(&format!("{}\t{}\n", m, m.description()));
    }
    out
}

/// Parameters and fit statistics common to every pool member.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedMethod {
    pub method: MethodId,
    /// Named parameter estimates, in a method-specific order.
    pub parameters: Vec<(String, f64)>,
    /// One-step in-sample residual variance.
    pub sigma2: f64,
    /// AICc of the selected model where a selection criterion applies.
    pub aicc: Option<f64>,
}

/// Runs one pool method on `train` for the levels given as coverages in (0, 1).
pub fn forecast(
    method: MethodId,
    train: &TimeSeries,
    h: usize,
    levels: &[f64],
) -> Result<Vec<IntervalForecast>> {
    if h == 0 {
        return Err(Error::Config("horizon must be positive".into()));
    }
    if let Some(bad) = levels.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
        return Err(Error::Config(format!("level {bad} outside (0, 1)")));
    }
    let y = train.values();
    let m = train.period();
    let out = match method {
        MethodId::Naive => simple::naive(y, h, levels),
        MethodId::Snaive => simple::snaive(y, m, h, levels),
        MethodId::RwDrift => simple::rw_drift(y, h, levels),
        MethodId::Ets => ets::forecast(y, m, h, levels),
        MethodId::EtsBoxCox => boxcox::forecast(y, m, h, levels),
        MethodId::AutoArima => arima::forecast(y, m, h, levels),
        MethodId::Thetaf => theta::theta_forecast(y, m, h, levels),
        MethodId::StlmAr => stlm::stlm_ar_forecast(y, m, h, levels),
    };
    let forecasts = out.map_err(|e| match e {
        Error::MethodFailed { .. } => e,
        other => Error::MethodFailed {
            method,
            reason: other.to_string(),
        },
    })?;
    for f in &forecasts {
        let finite = f
            .lower
            .iter()
            .chain(&f.point)
            .chain(&f.upper)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::MethodFailed {
                method,
                reason: "non-finite forecast".into(),
            });
        }
    }
    Ok(forecasts)
}

/// Like [`forecast`], but substitutes the naive forecast on failure. The
/// second element reports whether the fallback was used.
pub fn forecast_or_naive(
    method: MethodId,
    train: &TimeSeries,
    h: usize,
    levels: &[f64],
) -> Result<(Vec<IntervalForecast>, bool)> {
    match forecast(method, train, h, levels) {
        Ok(f) => Ok((f, false)),
        Err(Error::MethodFailed { method, reason }) => {
            log::debug!("{}: {method} failed ({reason}); using naive", train.id());
            Ok((simple::naive(train.values(), h, levels)?, true))
        }
        Err(e) => Err(e),
    }
}

/// Symmetric Gaussian intervals `point ± z * sqrt(var)` for every level.
pub(crate) fn gaussian_intervals(
    point: &[f64],
    variance: &[f64],
    levels: &[f64],
) -> Result<Vec<IntervalForecast>> {
    levels
        .iter()
        .map(|&level| {
            let z = interval_z(level);
            let (lower, upper): (Vec<f64>, Vec<f64>) = point
                .iter()
                .zip(variance)
                .map(|(p, v)| {
                    let half = z * v.max(0.0).sqrt();
                    (p - half, p + half)
                })
                .unzip();
            IntervalForecast::new(level, lower, point.to_vec(), upper)
        })
        .collect()
}

pub(crate) fn failed(method: MethodId, reason: impl Into<String>) -> Error {
    Error::MethodFailed {
        method,
        reason: reason.into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::Frequency;

    #[test]
    fn ids_round_trip_through_strings() {
        for m in MethodId::POOL {
            assert_eq!(m.as_str().parse::<MethodId>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.as_str()));
        }
        assert!("tbats".parse::<MethodId>().is_err());
    }

    #[test]
    fn yearly_pool_has_seven_methods() {
        assert_eq!(MethodId::active_pool(1).len(), 7);
        assert!(!MethodId::active_pool(1).contains(&MethodId::Snaive));
        assert_eq!(MethodId::active_pool(12).len(), 8);
    }

    #[test]
    fn gaussian_intervals_are_symmetric() {
        let f = gaussian_intervals(&[1.0, 2.0], &[1.0, 4.0], &[0.95]).unwrap();
        for i in 0..2 {
            let up = f[0].upper[i] - f[0].point[i];
            let down = f[0].point[i] - f[0].lower[i];
            assert!((up - down).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_levels() {
        let s = TimeSeries::new("x", vec![1.0, 2.0, 3.0, 4.0], Frequency::Yearly, 2).unwrap();
        assert!(forecast(MethodId::Naive, &s, 2, &[1.5]).is_err());
    }
}
