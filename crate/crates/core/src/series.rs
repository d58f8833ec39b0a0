//! Time-series containers, train/test splitting and the per-series forecast bundle.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::methods::MethodId;

/// Sampling frequency of a series. Only the three frequencies of the
/// competition subsets are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frequency {
    Yearly,
    Quarterly,
    Monthly,
}

impl Frequency {
    pub const ALL: [Frequency; 3] = [Frequency::Yearly, Frequency::Quarterly, Frequency::Monthly];

    /// Seasonal period `m`.
    pub fn period(self) -> usize {
        match self {
            Frequency::Yearly => 1,
            Frequency::Quarterly => 4,
            Frequency::Monthly => 12,
        }
    }

    /// Default forecast horizon.
    pub fn horizon(self) -> usize {
        match self {
            Frequency::Yearly => 6,
            Frequency::Quarterly => 8,
            Frequency::Monthly => 18,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Frequency::Yearly => "yearly",
            Frequency::Quarterly => "quarterly",
            Frequency::Monthly => "monthly",
        }
    }

    pub fn from_period(m: usize) -> Option<Frequency> {
        match m {
            1 => Some(Frequency::Yearly),
            4 => Some(Frequency::Quarterly),
            12 => Some(Frequency::Monthly),
            _ => None,
        }
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Frequency {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "yearly" => Ok(Frequency::Yearly),
            "quarterly" => Ok(Frequency::Quarterly),
            "monthly" => Ok(Frequency::Monthly),
            other => Err(Error::InvalidSeries(format!("unknown frequency '{other}'"))),
        }
    }
}

/// Observations of one series together with its frequency and forecast horizon.
///
/// Invariants: every value is finite, `len >= m + 2` and `horizon > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    id: String,
    values: Vec<f64>,
    frequency: Frequency,
    horizon: usize,
}

impl TimeSeries {
    pub fn new(
        id: impl Into<String>,
        values: Vec<f64>,
        frequency: Frequency,
        horizon: usize,
    ) -> Result<Self> {
        let id = id.into();
        if horizon == 0 {
            return Err(Error::InvalidSeries(format!("{id}: horizon must be positive")));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!(
                "{id}: non-finite value at index {pos}"
            )));
        }
        let needed = frequency.period() + 2;
        if values.len() < needed {
            return Err(Error::SeriesTooShort {
                needed,
                got: values.len(),
            });
        }
        Ok(TimeSeries {
            id,
            values,
            frequency,
            horizon,
        })
    }

    /// Series with the default horizon of its frequency.
    pub fn with_default_horizon(
        id: impl Into<String>,
        values: Vec<f64>,
        frequency: Frequency,
    ) -> Result<Self> {
        Self::new(id, values, frequency, frequency.horizon())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn frequency(&self) -> Frequency {
        self.frequency
    }

    pub fn period(&self) -> usize {
        self.frequency.period()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        Self::new(self.id.clone(), self.values.clone(), self.frequency, horizon)
    }

    /// Same metadata, new values (used by transformations such as shifting).
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.id.clone(), values, self.frequency, self.horizon)
    }

    /// Splits off the final `horizon` observations as the test period.
    pub fn split(&self) -> Result<SplitSeries> {
        let h = self.horizon;
        let needed = h + self.period() + 2;
        if self.values.len() < needed {
            return Err(Error::SeriesTooShort {
                needed,
                got: self.values.len(),
            });
        }
        let cut = self.values.len() - h;
        let train = TimeSeries {
            id: self.id.clone(),
            values: self.values[..cut].to_vec(),
            frequency: self.frequency,
            horizon: h,
        };
        Ok(SplitSeries {
            train,
            test: self.values[cut..].to_vec(),
        })
    }
}

/// A series cut into its training period and the `h` held-out values that follow it.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSeries {
    pub train: TimeSeries,
    pub test: Vec<f64>,
}

/// Central prediction interval plus point path for one confidence level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalForecast {
    /// Nominal coverage, e.g. 0.95.
    pub level: f64,
    pub lower: Vec<f64>,
    pub point: Vec<f64>,
    pub upper: Vec<f64>,
}

impl IntervalForecast {
    pub fn new(level: f64, lower: Vec<f64>, point: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::Config(format!("level {level} outside (0, 1)")));
        }
        if lower.len() != upper.len() || point.len() != upper.len() {
            return Err(Error::LevelMismatch);
        }
        for ((l, p), u) in lower.iter().zip(&point).zip(&upper) {
            if !(l.is_finite() && p.is_finite() && u.is_finite()) {
                return Err(Error::InvalidSeries("non-finite forecast".into()));
            }
            if l > u {
                return Err(Error::InvalidSeries(format!("lower {l} exceeds upper {u}")));
            }
        }
        Ok(IntervalForecast {
            level,
            lower,
            point,
            upper,
        })
    }

    /// Significance `alpha = 1 - level`.
    pub fn alpha(&self) -> f64 {
        1.0 - self.level
    }

    pub fn horizon(&self) -> usize {
        self.point.len()
    }
}

/// All pool forecasts for one series, one interval per requested level and method.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForecastBundle {
    pub series_id: String,
    pub forecasts: BTreeMap<MethodId, Vec<IntervalForecast>>,
}

impl ForecastBundle {
    pub fn new(series_id: impl Into<String>) -> Self {
        ForecastBundle {
            series_id: series_id.into(),
            forecasts: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, method: MethodId, forecasts: Vec<IntervalForecast>) -> Result<()> {
        if let Some((_, existing)) = self.forecasts.iter().next() {
            let same_levels = existing.len() == forecasts.len()
                && existing
                    .iter()
                    .zip(&forecasts)
                    .all(|(a, b)| a.level == b.level && a.horizon() == b.horizon());
            if !same_levels {
                return Err(Error::LevelMismatch);
            }
        }
        self.forecasts.insert(method, forecasts);
        Ok(())
    }

    pub fn get(&self, method: MethodId, level: f64) -> Option<&IntervalForecast> {
        self.forecasts
            .get(&method)?
            .iter()
            .find(|f| (f.level - level).abs() < 1e-12)
    }
}
