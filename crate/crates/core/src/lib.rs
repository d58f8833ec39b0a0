//! Feature-based combination of prediction intervals.
//!
//! A pool of univariate forecasting methods is run over a large reference
//! collection of series. For every method an additive model learns how the
//! series features drive its log mean scaled interval score. At forecast time
//! the fitted scores become softargmin weights, a threshold on the weight
//! ratio picks the subset of methods to combine, and the selected intervals
//! are averaged into a single interval and point forecast.

pub mod combiner;
pub mod error;
pub mod features;
pub mod gam;
pub mod generator;
pub mod methods;
pub mod metrics;
pub mod optim;
pub mod pipeline;
pub mod series;
pub mod stats;

pub use error::{Error, Result};
pub use series::{ForecastBundle, Frequency, IntervalForecast, SplitSeries, TimeSeries};
