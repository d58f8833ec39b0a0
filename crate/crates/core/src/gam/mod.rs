//! Additive models of log-MSIS on series features.
//!
//! One model per (method, level): an intercept, linear terms for the
//! frequency dummies, and a penalized cubic regression spline for every other
//! feature. Smoothing parameters are chosen by GCV.

mod basis;
mod fit;
mod float_text;

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{registry_hash, FeatureVector, REGISTRY};

pub use basis::{quantile_knots, CrBasis};
pub use fit::{fit_gam, FitDiagnostics, GamConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearTerm {
    pub feature: String,
    pub index: usize,
    /// Subtracted before multiplying; zero for dummies.
    #[serde(with = "float_text")]
    pub centre: f64,
    #[serde(with = "float_text")]
    pub coef: f64,
    pub dummy: bool,
}

impl LinearTerm {
    fn value(&self, x: f64) -> f64 {
        self.coef * (x - self.centre)
    }
}

#[derive(Clone, Serialize, Deserialize)]
pub struct SmoothTerm {
    pub feature: String,
    pub index: usize,
    #[serde(with = "float_text::vec")]
    pub knots: Vec<f64>,
    /// Spline values at the knots.
    #[serde(with = "float_text::vec")]
    pub coefs: Vec<f64>,
    #[serde(with = "float_text")]
    pub lambda: f64,
    #[serde(skip)]
    basis: OnceLock<CrBasis>,
}

impl std::fmt::Debug for SmoothTerm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SmoothTerm")
            .field("feature", &self.feature)
            .field("index", &self.index)
            .field("knots", &self.knots)
            .field("coefs", &self.coefs)
            .field("lambda", &self.lambda)
            .finish()
    }
}

impl PartialEq for SmoothTerm {
    fn eq(&self, other: &Self) -> bool {
        self.feature == other.feature
            && self.index == other.index
            && self.knots == other.knots
            && self.coefs == other.coefs
            && self.lambda == other.lambda
    }
}

impl SmoothTerm {
    pub(crate) fn new(feature: String, index: usize, basis: CrBasis, coefs: Vec<f64>, lambda: f64) -> Self {
        let knots = basis.knots().to_vec();
        let cell = OnceLock::new();
        let _ = cell.set(basis);
        SmoothTerm {
            feature,
            index,
            knots,
            coefs,
            lambda,
            basis: cell,
        }
    }

    fn basis(&self) -> &CrBasis {
        self.basis.get_or_init(|| {
            CrBasis::new(self.knots.clone()).expect("knots validated when the model was built or loaded")
        })
    }

    pub fn value(&self, x: f64) -> f64 {
        let row = self.basis().row(x);
        row.iter().zip(&self.coefs).map(|(b, c)| b * c).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GamModel {
    /// Response label, e.g. `ets-95`.
    pub label: String,
    pub registry_hash: String,
    #[serde(with = "float_text")]
    pub intercept: f64,
    pub linear: Vec<LinearTerm>,
    pub smooths: Vec<SmoothTerm>,
}

fn current_hash() -> &'static str {
    static HASH: OnceLock<String> = OnceLock::new();
    HASH.get_or_init(registry_hash)
}

impl GamModel {
    /// Checks a deserialized model before use.
    pub fn validate(&self) -> Result<()> {
        if !self.intercept.is_finite() {
            return Err(Error::Config(format!("{}: non-finite intercept", self.label)));
        }
        for t in &self.linear {
            if t.index >= REGISTRY.len() || !t.coef.is_finite() || !t.centre.is_finite() {
                return Err(Error::Config(format!("{}: bad linear term {}", self.label, t.feature)));
            }
        }
        for s in &self.smooths {
            if s.index >= REGISTRY.len()
                || s.coefs.len() != s.knots.len()
                || s.coefs.iter().any(|c| !c.is_finite())
                || !(s.lambda.is_finite() && s.lambda >= 0.0)
            {
                return Err(Error::Config(format!("{}: bad smooth term {}", self.label, s.feature)));
            }
            CrBasis::new(s.knots.clone())?;
        }
        Ok(())
    }

    fn check_hash(&self) -> Result<()> {
        if self.registry_hash != current_hash() {
            return Err(Error::RegistryMismatch {
                expected: self.registry_hash.clone(),
                found: current_hash().to_string(),
            });
        }
        Ok(())
    }

    /// Contribution of every term, in model order (linear terms first).
    pub fn term_values(&self, features: &FeatureVector) -> Result<Vec<(String, f64)>> {
        self.check_hash()?;
        let x = features.values();
        let linear = self.linear.iter().map(|t| (t.feature.clone(), t.value(x[t.index])));
        let smooth = self.smooths.iter().map(|s| (s.feature.clone(), s.value(x[s.index])));
        Ok(linear.chain(smooth).collect())
    }

    /// Fitted log-MSIS for one feature vector.
    pub fn predict(&self, features: &FeatureVector) -> Result<f64> {
        self.check_hash()?;
        let x = features.values();
        let mut total = self.intercept;
        for t in &self.linear {
            total += t.value(x[t.index]);
        }
        for s in &self.smooths {
            total += s.value(x[s.index]);
        }
        Ok(total)
    }

    /// Centred effect of one feature on a grid of values. Smooths are
    /// centred over the training data by construction; linear terms are
    /// centred at their training mean.
    pub fn partial_effect(&self, feature: &str, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
        if let Some(s) = self.smooths.iter().find(|s| s.feature == feature) {
            return Ok(grid.iter().map(|&g| (g, s.value(g))).collect());
        }
        if let Some(t) = self.linear.iter().find(|t| t.feature == feature) {
            return Ok(grid.iter().map(|&g| (g, t.value(g))).collect());
        }
        Err(Error::UnknownFeature(feature.to_string()))
    }

    pub fn smooth_features(&self) -> impl Iterator<Item = &str> {
        self.smooths.iter().map(|s| s.feature.as_str())
    }
}

/// Convenience wrapper matching the free-function style of the pipeline.
pub fn predict_gam(model: &GamModel, features: &FeatureVector) -> Result<f64> {
    model.predict(features)
}

pub fn partial_effect(model: &GamModel, feature: &str, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    model.partial_effect(feature, grid)
}
