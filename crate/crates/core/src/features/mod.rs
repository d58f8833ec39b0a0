//! Time-series features used as additive-model covariates.
//!
//! The registry below fixes the name, order, kind and valid range of every
//! feature. Its text table is hashed so that fitted models can verify they
//! are applied to vectors built by the same definitions.

mod compute;
pub mod stl;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

pub use crate::methods::arima::kpss_statistic;
pub use compute::pp_statistic;

/// Groups of features sharing an invariance property.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    /// Autocorrelations and functions of them; unchanged by shift and scale.
    Autocorrelation,
    /// Variance-ratio strengths; unchanged by shift and scale.
    Strength,
    /// Normalized spectral entropy; unchanged by shift.
    Entropy,
    /// Trend shape coefficients; unchanged by shift, proportional to scale.
    Shape,
    /// Variances of block statistics; unchanged by shift, not by scale.
    Variance,
    /// Fitted smoothing parameters of exponential smoothing models.
    Smoothing,
    /// Other test statistics and model-based summaries.
    Statistic,
    /// Cycle positions of the seasonal extremes.
    Position,
    /// Frequency indicator dummies.
    Dummy,
    /// Number of observations.
    Length,
}

impl FeatureKind {
    pub fn shift_invariant(self) -> bool {
        matches!(
            self,
            FeatureKind::Autocorrelation | FeatureKind::Strength | FeatureKind::Entropy
        )
    }

    pub fn scale_invariant(self) -> bool {
        matches!(self, FeatureKind::Autocorrelation | FeatureKind::Strength)
    }

    fn tag(self) -> &'static str {
        match self {
            FeatureKind::Autocorrelation => "acf",
            FeatureKind::Strength => "strength",
            FeatureKind::Entropy => "entropy",
            FeatureKind::Shape => "shape",
            FeatureKind::Variance => "variance",
            FeatureKind::Smoothing => "smoothing",
            FeatureKind::Statistic => "statistic",
            FeatureKind::Position => "position",
            FeatureKind::Dummy => "dummy",
            FeatureKind::Length => "length",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureDef {
    pub name: &'static str,
    pub kind: FeatureKind,
    pub lower: f64,
    pub upper: f64,
    pub definition: &'static str,
}

const fn def(
    name: &'static str,
    kind: FeatureKind,
    lower: f64,
    upper: f64,
    definition: &'static str,
) -> FeatureDef {
    FeatureDef {
        name,
        kind,
        lower,
        upper,
        definition,
    }
}

use FeatureKind::*;

const INF: f64 = f64::INFINITY;

pub const N_FEATURES: usize = 43;

/// STL settings recorded in the registry table.
pub const STL_SETTINGS: &str = "stl seasonal=periodic inner=2 outer=1";

pub static REGISTRY: [FeatureDef; N_FEATURES] = [
    def("x-acf1", Autocorrelation, -1.0, 1.0, "acf of x at lag 1"),
    def("x-acf10", Autocorrelation, 0.0, 1.0, "mean squared acf of x over lags 1-10"),
    def("diff1-acf1", Autocorrelation, -1.0, 1.0, "acf of diff(x) at lag 1"),
    def("diff1-acf10", Autocorrelation, 0.0, 1.0, "mean squared acf of diff(x) over lags 1-10"),
    def("diff2-acf1", Autocorrelation, -1.0, 1.0, "acf of diff(diff(x)) at lag 1"),
    def("diff2-acf10", Autocorrelation, 0.0, 1.0, "mean squared acf of diff(diff(x)) over lags 1-10"),
    def("seas-acf1", Autocorrelation, -1.0, 1.0, "acf of x at lag m; 0 when m=1"),
    def("arch-lm", Statistic, 0.0, 1.0, "R2 of (x-mean)^2 on its first 12 lags"),
    def("crossing-points", Statistic, 0.0, 1.0, "share of consecutive pairs crossing the median"),
    def("entropy", Entropy, 0.0, 1.0, "normalized Shannon entropy of the periodogram"),
    def("flat-spots", Statistic, 0.0, 1.0, "longest run in one of 10 equal-width bins over n"),
    def("arch-acf", Autocorrelation, 0.0, 1.0, "mean squared acf of (x-mean)^2 over lags 1-12"),
    def("garch-acf", Statistic, 0.0, 1.0, "mean squared acf of squared GARCH(1,1) standardized residuals over lags 1-12"),
    def("arch-r2", Statistic, 0.0, 1.0, "R2 of squared AR-prewhitened residuals on their first 12 lags"),
    def("garch-r2", Statistic, 0.0, 1.0, "R2 of squared GARCH(1,1) standardized residuals on their first 12 lags"),
    def("alpha", Smoothing, 0.0, 1.0, "level smoothing parameter of additive Holt"),
    def("beta", Smoothing, 0.0, 1.0, "trend smoothing parameter of additive Holt"),
    def("hurst", Statistic, 0.5, 1.0, "0.5 plus the Whittle estimate of d in ARFIMA(0,d,0), d in [0,0.5]"),
    def("lumpiness", Variance, 0.0, INF, "variance of block variances, block max(2m,10)"),
    def("non-linearity", Statistic, 0.0, INF, "Terasvirta neural-network test statistic times 10/n"),
    def("x-pacf5", Autocorrelation, 0.0, 1.0, "mean squared pacf of x over lags 1-5"),
    def("diff1x-pacf5", Autocorrelation, 0.0, 1.0, "mean squared pacf of diff(x) over lags 1-5"),
    def("diff2x-pacf5", Autocorrelation, 0.0, 1.0, "mean squared pacf of diff(diff(x)) over lags 1-5"),
    def("seas-pacf", Autocorrelation, -1.0, 1.0, "pacf of x at lag m; 0 when m=1"),
    def("nperiods", Dummy, 0.0, 1.0, "1 when the series is seasonal (m>1)"),
    def("seasonal-period-q", Dummy, 0.0, 1.0, "1 when m=4"),
    def("seasonal-period-m", Dummy, 0.0, 1.0, "1 when m=12"),
    def("trend-strength", Strength, 0.0, 1.0, "max(0, 1 - var(remainder)/var(trend+remainder))"),
    def("spike", Variance, 0.0, INF, "variance of leave-one-out variances of the remainder"),
    def("linearity", Shape, -INF, INF, "trend coefficient on the orthonormal linear polynomial"),
    def("curvature", Shape, -INF, INF, "trend coefficient on the orthonormal quadratic polynomial"),
    def("e-acf1", Autocorrelation, -1.0, 1.0, "acf of the remainder at lag 1"),
    def("e-acf10", Autocorrelation, 0.0, 1.0, "mean squared acf of the remainder over lags 1-10"),
    def("seasonal-strength", Strength, 0.0, 1.0, "max(0, 1 - var(remainder)/var(seasonal+remainder)); 0 when m=1"),
    def("peak", Position, 0.0, 1.0, "cycle position of the seasonal maximum over m; 0 when m=1"),
    def("trough", Position, 0.0, 1.0, "cycle position of the seasonal minimum over m; 0 when m=1"),
    def("stability", Variance, 0.0, INF, "variance of block means, block max(2m,10)"),
    def("hw-alpha", Smoothing, 0.0, 1.0, "level smoothing parameter of additive Holt-Winters; 0 when m=1"),
    def("hw-beta", Smoothing, 0.0, 1.0, "trend smoothing parameter of additive Holt-Winters; 0 when m=1"),
    def("hw-gamma", Smoothing, 0.0, 1.0, "seasonal smoothing parameter of additive Holt-Winters; 0 when m=1"),
    def("unitroot-kpss", Statistic, 0.0, INF, "KPSS level statistic, lag trunc(4(n/100)^0.25)"),
    def("unitroot-pp", Statistic, -INF, INF, "Phillips-Perron Z-alpha statistic, lag trunc(4(n/100)^0.25)"),
    def("series-length", Length, 0.0, INF, "number of observations"),
];

pub fn feature_names() -> Vec<&'static str> {
    REGISTRY.iter().map(|d| d.name).collect()
}

pub fn feature_index(name: &str) -> Result<usize> {
    REGISTRY
        .iter()
        .position(|d| d.name == name)
        .ok_or_else(|| Error::UnknownFeature(name.to_string()))
}

/// Indices of the dummy features, which enter the additive model linearly.
pub fn dummy_indices() -> Vec<usize> {
    REGISTRY
        .iter()
        .enumerate()
        .filter(|(_, d)| d.kind == Dummy)
        .map(|(i, _)| i)
        .collect()
}

/// The versioned registry as a tab-separated text table.
pub fn registry_table() -> String {
    let mut out = String::from("# fuma feature registry v1\n");
    out.push_str(&format!("# {STL_SETTINGS}\n"));
    out.push_str("name\tkind\tlower\tupper\tdefinition\n");
    for d in &REGISTRY {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            d.name,
            d.kind.tag(),
            d.lower,
            d.upper,
            d.definition
        ));
    }
    out
}

/// Hex SHA-256 of [`registry_table`].
pub fn registry_hash() -> String {
    hex::encode(Sha256::digest(registry_table().as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    values: Vec<f64>,
    /// Set when the input had zero variance; every data-driven feature is 0.
    pub degenerate: bool,
}

impl FeatureVector {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() != N_FEATURES {
            return Err(Error::InvalidSeries(format!(
                "feature vector needs {N_FEATURES} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries("non-finite feature value".into()));
        }
        Ok(FeatureVector {
            values,
            degenerate: false,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        Ok(self.values[feature_index(name)?])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        REGISTRY.iter().map(|d| d.name).zip(self.values.iter().copied())
    }
}

/// Computes the full registry for a training period. Never fails: a
/// constant series yields zeros for every data-driven feature and sets
/// [`FeatureVector::degenerate`].
pub fn extract_features(train: &TimeSeries) -> FeatureVector {
    extract_from_values(train.values(), train.period())
}

pub fn extract_from_values(y: &[f64], m: usize) -> FeatureVector {
    let (mut values, degenerate) = compute::all_features(y, m);
    for (v, d) in values.iter_mut().zip(&REGISTRY) {
        if !v.is_finite() {
            *v = 0.0;
        }
        *v = v.clamp(d.lower, d.upper);
    }
    FeatureVector { values, degenerate }
}
