//! Training phase: run the pool on the reference set, score it, fit one
//! additive model per (method, level) and search the thresholds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::io::format_level;
use super::model::{MethodModel, TrainConfig, TrainedEnsemble, FORMAT_VERSION};
use crate::combiner::{search_threshold, Mode, ReferenceCase};
use crate::error::{Error, Result};
use crate::features::{extract_features, registry_hash, FeatureVector};
use crate::gam::{fit_gam, FitDiagnostics};
use crate::methods::{forecast_or_naive, MethodId};
use crate::metrics::ScoreEntry;
use crate::series::{Frequency, IntervalForecast, TimeSeries};

/// Everything the pipeline needs about one split series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRecord {
    pub id: String,
    pub frequency: Frequency,
    pub train: Vec<f64>,
    pub test: Vec<f64>,
    pub features: FeatureVector,
    /// Active pool in canonical order.
    pub methods: Vec<MethodId>,
    /// Per method, one forecast per level.
    pub forecasts: Vec<Vec<IntervalForecast>>,
    /// Per method, one score per level; `None` when unscorable.
    pub scores: Vec<Vec<Option<ScoreEntry>>>,
    /// Methods that failed and were replaced by the naive forecast.
    pub fallbacks: Vec<MethodId>,
}

impl SeriesRecord {
    pub fn forecast(&self, method: MethodId, level: usize) -> Option<&IntervalForecast> {
        let i = self.methods.iter().position(|m| *m == method)?;
        self.forecasts[i].get(level)
    }

    pub fn score(&self, method: MethodId, level: usize) -> Option<&ScoreEntry> {
        let i = self.methods.iter().position(|m| *m == method)?;
        self.scores[i].get(level)?.as_ref()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub id: String,
    pub frequency: Frequency,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDiagnostics {
    pub method: MethodId,
    pub level: f64,
    pub diagnostics: FitDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub diagnostics: Vec<ModelDiagnostics>,
    pub exclusions: Vec<Exclusion>,
    /// (method, level, reason) for models that could not be fitted.
    pub skipped: Vec<(MethodId, f64, String)>,
    pub fallbacks: usize,
    pub records: usize,
}

/// Splits one series, runs the active pool and scores every forecast.
pub fn prepare_record(series: &TimeSeries, levels: &[f64]) -> Result<SeriesRecord> {
    let split = series.split()?;
    let train = &split.train;
    let m = train.period();
    let h = split.test.len();
    let methods = MethodId::active_pool(m);
    let mut forecasts = Vec::with_capacity(methods.len());
    let mut scores = Vec::with_capacity(methods.len());
    let mut fallbacks = Vec::new();
    for &method in &methods {
        let (list, fell_back) = forecast_or_naive(method, train, h, levels)?;
        if fell_back {
            fallbacks.push(method);
        }
        let row = list
            .iter()
            .map(|f| {
                ScoreEntry::compute(&split.test, &f.lower, &f.point, &f.upper, train.values(), m, f.level)
            })
            .collect::<Result<Vec<_>>>()?;
        forecasts.push(list);
        scores.push(row);
    }
    Ok(SeriesRecord {
        id: series.id().to_string(),
        frequency: series.frequency(),
        train: train.values().to_vec(),
        test: split.test,
        features: extract_features(train),
        methods,
        forecasts,
        scores,
        fallbacks,
    })
}

/// Prepares every series in parallel, keeping input order. Failures become
/// exclusions.
pub fn prepare_reference(series: &[TimeSeries], levels: &[f64]) -> (Vec<SeriesRecord>, Vec<Exclusion>) {
    let results: Vec<Result<SeriesRecord>> = series.par_iter().map(|s| prepare_record(s, levels)).collect();
    let mut records = Vec::new();
    let mut exclusions = Vec::new();
    for (s, r) in series.iter().zip(results) {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => {
                log::warn!("{}: excluded ({e})", s.id());
                exclusions.push(Exclusion {
                    id: s.id().to_string(),
                    frequency: s.frequency(),
                    reason: e.to_string(),
                });
            }
        }
    }
    (records, exclusions)
}

/// Fails when more than `max_rate` of any frequency's series were excluded.
pub fn check_failures(series: &[TimeSeries], exclusions: &[Exclusion], max_rate: f64) -> Result<()> {
    for f in Frequency::ALL {
        let total = series.iter().filter(|s| s.frequency() == f).count();
        let failed = exclusions.iter().filter(|e| e.frequency == f).count();
        if total > 0 && failed as f64 > max_rate * total as f64 {
            return Err(Error::SystemicFailure {
                frequency: f.as_str().to_string(),
                failed,
                total,
            });
        }
    }
    Ok(())
}

/// Full training phase from raw series.
pub fn train(series: &[TimeSeries], config: &TrainConfig) -> Result<(TrainedEnsemble, TrainReport)> {
    config.validate()?;
    if series.is_empty() {
        return Err(Error::InsufficientData("empty reference set".into()));
    }
    let (records, exclusions) = prepare_reference(series, &config.levels);
    log::info!("ran the pool on {} series", records.len());
    check_failures(series, &exclusions, config.max_failure_rate)?;
    train_from_records(&records, exclusions, config)
}

fn model_label(method: MethodId, level: f64) -> String {
    format!("{method}@{}", format_level(level))
}

/// Fits the additive models and searches thresholds on prepared records.
pub fn train_from_records(
    records: &[SeriesRecord],
    exclusions: Vec<Exclusion>,
    config: &TrainConfig,
) -> Result<(TrainedEnsemble, TrainReport)> {
    config.validate()?;
    let jobs: Vec<(MethodId, usize)> = MethodId::POOL
        .iter()
        .flat_map(|&m| (0..config.levels.len()).map(move |l| (m, l)))
        .collect();
    let fits: Vec<Result<(MethodId, f64, std::result::Result<(crate::gam::GamModel, FitDiagnostics), String>)>> = jobs
        .par_iter()
        .map(|&(method, li)| {
            let level = config.levels[li];
            let mut x = Vec::new();
            let mut y = Vec::new();
            for r in records {
                if let Some(s) = r.score(method, li) {
                    x.push(r.features.clone());
                    y.push(s.log_msis);
                }
            }
            match fit_gam(&x, &y, &model_label(method, level), &config.gam) {
                Ok(fit) => Ok((method, level, Ok(fit))),
                Err(e @ Error::InsufficientData(_)) => Ok((method, level, Err(e.to_string()))),
                Err(e) => Err(e),
            }
        })
        .collect();

    let mut models = Vec::new();
    let mut diagnostics = Vec::new();
    let mut skipped = Vec::new();
    for fit in fits {
        let (method, level, outcome) = fit?;
        match outcome {
            Ok((model, diag)) => {
                diagnostics.push(ModelDiagnostics {
                    method,
                    level,
                    diagnostics: diag,
                });
                models.push(MethodModel { method, level, model });
            }
            Err(reason) => {
                log::warn!("{}: not fitted ({reason})", model_label(method, level));
                skipped.push((method, level, reason));
            }
        }
    }

    log::info!("fitted {} models", models.len());
    let mut ensemble = TrainedEnsemble {
        format_version: FORMAT_VERSION,
        registry_hash: registry_hash(),
        methods: MethodId::POOL.to_vec(),
        levels: config.levels.clone(),
        models,
        thresholds: Vec::new(),
        config: config.clone(),
    };

    for (li, &level) in config.levels.iter().enumerate() {
        let mut cases = Vec::new();
        for r in records {
            let pool = ensemble.pool(r.frequency.period(), level);
            if pool.is_empty() {
                continue;
            }
            let mut members = Vec::with_capacity(pool.len());
            let mut fitted = Vec::with_capacity(pool.len());
            for &m in &pool {
                let f = r.forecast(m, li).ok_or_else(|| {
                    Error::Config(format!("{}: no {m} forecast at level {level}", r.id))
                })?;
                members.push(f);
                let model = ensemble.model(m, level).expect("pool filtered on fitted models");
                fitted.push(model.predict(&r.features)?);
            }
            cases.push(ReferenceCase {
                frequency: r.frequency,
                train: &r.train,
                test: &r.test,
                members,
                fitted,
            });
        }
        if cases.is_empty() {
            return Err(Error::InsufficientData(format!("no reference series usable at level {level}")));
        }
        ensemble
            .thresholds
            .push(search_threshold(&cases, &config.grid, &Mode::SEARCHED, level)?);
    }

    let report = TrainReport {
        diagnostics,
        exclusions,
        skipped,
        fallbacks: records.iter().map(|r| r.fallbacks.len()).sum(),
        records: records.len(),
    };
    Ok((ensemble, report))
}
