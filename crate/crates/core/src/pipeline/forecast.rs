//! Testing phase: weights from predicted scores, threshold selection and
//! combination of the selected methods.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::TrainedEnsemble;
use super::train::SeriesRecord;
use crate::combiner::{adjusted_softmax, combine_intervals, select_by_threshold, subset_weights, Mode};
use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureVector};
use crate::methods::{forecast_or_naive, MethodId};
use crate::series::{Frequency, IntervalForecast, TimeSeries};

/// How one combined forecast was formed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub series_id: String,
    pub frequency: Frequency,
    pub level: f64,
    pub mode: Mode,
    pub tr: f64,
    /// Candidate methods with their predicted log-MSIS and softmax weights.
    pub methods: Vec<MethodId>,
    pub fitted: Vec<f64>,
    pub weights: Vec<f64>,
    pub selected: Vec<MethodId>,
    /// Weights actually applied to the selected methods; they sum to 1.
    pub combination_weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesForecast {
    pub series_id: String,
    pub frequency: Frequency,
    /// One combined forecast per ensemble level, ascending.
    pub forecasts: Vec<IntervalForecast>,
    pub provenance: Vec<Provenance>,
    /// Selected methods that failed and were replaced by the naive forecast.
    pub fallbacks: Vec<MethodId>,
}

struct Plan {
    level: f64,
    tr: f64,
    methods: Vec<MethodId>,
    fitted: Vec<f64>,
    weights: Vec<f64>,
    subset: Vec<usize>,
}

impl TrainedEnsemble {
    fn plan(&self, features: &FeatureVector, frequency: Frequency, mode: Mode) -> Result<Vec<Plan>> {
        let mut plans = Vec::with_capacity(self.levels.len());
        for &level in &self.levels {
            let methods = self.pool(frequency.period(), level);
            if methods.is_empty() {
                return Err(Error::Config(format!("no fitted models for {frequency} series")));
            }
            let fitted = methods
                .iter()
                .map(|m| self.model(*m, level).expect("pool filtered on fitted models").predict(features))
                .collect::<Result<Vec<f64>>>()?;
            let weights = adjusted_softmax(&fitted)?;
            let tr = self.threshold(frequency, mode, level)?;
            let subset = select_by_threshold(&weights, tr);
            plans.push(Plan {
                level,
                tr,
                methods,
                fitted,
                weights,
                subset,
            });
        }
        Ok(plans)
    }

    fn combine_plans<'a>(
        &self,
        id: &str,
        frequency: Frequency,
        mode: Mode,
        plans: Vec<Plan>,
        member: impl Fn(MethodId, usize) -> Option<&'a IntervalForecast>,
    ) -> Result<(Vec<IntervalForecast>, Vec<Provenance>)> {
        let mut forecasts = Vec::with_capacity(plans.len());
        let mut provenance = Vec::with_capacity(plans.len());
        for (li, plan) in plans.into_iter().enumerate() {
            let members = plan
                .subset
                .iter()
                .map(|&i| {
                    member(plan.methods[i], li)
                        .ok_or_else(|| Error::Config(format!("{id}: missing {} forecast", plan.methods[i])))
                })
                .collect::<Result<Vec<_>>>()?;
            let local: Vec<usize> = (0..members.len()).collect();
            let w: Vec<f64> = plan.subset.iter().map(|&i| plan.weights[i]).collect();
            let combined = combine_intervals(&members, &w, &local, mode)?;
            provenance.push(Provenance {
                series_id: id.to_string(),
                frequency,
                level: plan.level,
                mode,
                tr: plan.tr,
                combination_weights: subset_weights(&w, &local, mode),
                selected: plan.subset.iter().map(|&i| plan.methods[i]).collect(),
                methods: plan.methods,
                fitted: plan.fitted,
                weights: plan.weights,
            });
            forecasts.push(combined);
        }
        Ok((forecasts, provenance))
    }

    /// Forecasts beyond the end of `series`, fitting only selected methods.
    pub fn forecast_series(&self, series: &TimeSeries, mode: Mode) -> Result<SeriesForecast> {
        let features = extract_features(series);
        let plans = self.plan(&features, series.frequency(), mode)?;
        let mut needed: Vec<MethodId> = plans
            .iter()
            .flat_map(|p| p.subset.iter().map(|&i| p.methods[i]))
            .collect();
        needed.sort();
        needed.dedup();
        let mut runs: BTreeMap<MethodId, Vec<IntervalForecast>> = BTreeMap::new();
        let mut fallbacks = Vec::new();
        for m in needed {
            let (list, fell_back) = forecast_or_naive(m, series, series.horizon(), &self.levels)?;
            if fell_back {
                fallbacks.push(m);
            }
            runs.insert(m, list);
        }
        let (forecasts, provenance) =
            self.combine_plans(series.id(), series.frequency(), mode, plans, |m, li| runs.get(&m)?.get(li))?;
        Ok(SeriesForecast {
            series_id: series.id().to_string(),
            frequency: series.frequency(),
            forecasts,
            provenance,
            fallbacks,
        })
    }

    /// Combination from forecasts already computed for a reference record,
    /// whose levels must match the ensemble's.
    pub fn forecast_record(&self, record: &SeriesRecord, mode: Mode) -> Result<SeriesForecast> {
        let plans = self.plan(&record.features, record.frequency, mode)?;
        let (forecasts, provenance) =
            self.combine_plans(&record.id, record.frequency, mode, plans, |m, li| record.forecast(m, li))?;
        Ok(SeriesForecast {
            series_id: record.id.clone(),
            frequency: record.frequency,
            forecasts,
            provenance,
            fallbacks: Vec::new(),
        })
    }
}

/// Forecasts every series in parallel, keeping input order.
pub fn forecast_all(ensemble: &TrainedEnsemble, series: &[TimeSeries], mode: Mode) -> Result<Vec<SeriesForecast>> {
    series.par_iter().map(|s| ensemble.forecast_series(s, mode)).collect()
}

/// Unweighted mean of every active pool member of a record, per level.
pub fn simple_average(record: &SeriesRecord) -> Result<Vec<IntervalForecast>> {
    let levels = record.forecasts.first().map_or(0, |f| f.len());
    (0..levels)
        .map(|li| {
            let members: Vec<&IntervalForecast> = record.forecasts.iter().map(|f| &f[li]).collect();
            let all: Vec<usize> = (0..members.len()).collect();
            let w = vec![1.0; members.len()];
            let mut combined = combine_intervals(&members, &w, &all, Mode::Mean)?;
            if members.len() == 1 {
                combined.point = crate::combiner::combine_point(&combined.lower, &combined.upper);
            }
            Ok(combined)
        })
        .collect()
}
