//! Holdout evaluation: accuracy per candidate, frequency and level,
//! selection rates and the comparison with the best.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::forecast::Provenance;
use super::io::{format_level, ForecastTable};
use super::mcb::{mcb_test, McbResult};
use crate::error::{Error, Result};
use crate::methods::MethodId;
use crate::metrics::{acd, covered_count, mase, msis, Coverage};
use crate::series::{Frequency, TimeSeries};

/// Named set of forecasts to score, e.g. `fuma-weighted` or `ets`.
pub struct Candidate<'a> {
    pub name: String,
    pub forecasts: &'a ForecastTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub candidate: String,
    /// A frequency name or `all`.
    pub frequency: String,
    pub level: f64,
    pub series: usize,
    /// Series without a usable scale (zero denominator).
    pub excluded: usize,
    pub mean_msis: f64,
    pub mean_mase: f64,
    pub coverage: f64,
    pub acd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub frequency: String,
    pub level: f64,
    pub method: MethodId,
    pub selected: usize,
    pub series: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelMcb {
    pub level: f64,
    pub result: McbResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub levels: Vec<f64>,
    pub rows: Vec<ReportRow>,
    pub selection: Vec<SelectionRow>,
    pub mcb: Vec<LevelMcb>,
}

#[derive(Debug, Clone, Copy)]
struct Score {
    msis: f64,
    mase: f64,
    covered: usize,
    horizon: usize,
}

fn score(test: &[f64], lower: &[f64], point: &[f64], upper: &[f64], train: &[f64], m: usize, level: f64) -> Result<Option<Score>> {
    let s = match msis(test, lower, upper, train, m, 1.0 - level) {
        Ok(v) => v,
        Err(Error::ZeroDenominator) => return Ok(None),
        Err(e) => return Err(e),
    };
    Ok(Some(Score {
        msis: s,
        mase: mase(test, point, train, m)?,
        covered: covered_count(test, lower, upper),
        horizon: test.len(),
    }))
}

fn group_names() -> Vec<(String, Option<Frequency>)> {
    Frequency::ALL
        .iter()
        .map(|f| (f.as_str().to_string(), Some(*f)))
        .chain(std::iter::once(("all".to_string(), None)))
        .collect()
}

/// Scores every candidate on the held-out end of each series.
pub fn evaluate(
    candidates: &[Candidate<'_>],
    series: &[TimeSeries],
    provenance: &[Provenance],
) -> Result<EvaluationReport> {
    let ids: BTreeSet<&str> = series.iter().map(|s| s.id()).collect();
    let mut unmatched = BTreeSet::new();
    for c in candidates {
        let have: BTreeSet<&str> = c.forecasts.keys().map(String::as_str).collect();
        unmatched.extend(ids.symmetric_difference(&have).map(|s| s.to_string()));
    }
    if !unmatched.is_empty() {
        return Err(Error::IdMismatch(unmatched.into_iter().collect()));
    }
    let splits = series.iter().map(|s| s.split()).collect::<Result<Vec<_>>>()?;

    let mut levels: Vec<f64> = candidates
        .iter()
        .flat_map(|c| c.forecasts.values().flat_map(|l| l.iter().map(|f| f.level)))
        .collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();

    // scores[candidate][level][series]
    let mut scores: Vec<Vec<Vec<Option<Score>>>> = Vec::with_capacity(candidates.len());
    for c in candidates {
        let mut per_level = Vec::with_capacity(levels.len());
        for &level in &levels {
            let mut per_series = Vec::with_capacity(series.len());
            for (s, split) in series.iter().zip(&splits) {
                let entry = match c.forecasts[s.id()].iter().find(|f| f.level == level) {
                    Some(f) => score(&split.test, &f.lower, &f.point, &f.upper, split.train.values(), s.period(), level)?,
                    None => None,
                };
                per_series.push(entry);
            }
            per_level.push(per_series);
        }
        scores.push(per_level);
    }

    let mut rows = Vec::new();
    for (ci, c) in candidates.iter().enumerate() {
        for (li, &level) in levels.iter().enumerate() {
            for (name, freq) in group_names() {
                let members: Vec<usize> = (0..series.len())
                    .filter(|&i| freq.is_none_or(|f| series[i].frequency() == f))
                    .collect();
                if members.is_empty() {
                    continue;
                }
                let mut n = 0;
                let mut excluded = 0;
                let (mut sum_msis, mut sum_mase) = (0.0, 0.0);
                let mut coverage = Coverage::default();
                for &i in &members {
                    match &scores[ci][li][i] {
                        Some(sc) => {
                            n += 1;
                            sum_msis += sc.msis;
                            sum_mase += sc.mase;
                            coverage.add(sc.covered, sc.horizon);
                        }
                        None => excluded += 1,
                    }
                }
                let mean = |v: f64| if n > 0 { v / n as f64 } else { f64::NAN };
                rows.push(ReportRow {
                    candidate: c.name.clone(),
                    frequency: name,
                    level,
                    series: n,
                    excluded,
                    mean_msis: mean(sum_msis),
                    mean_mase: mean(sum_mase),
                    coverage: coverage.rate(),
                    acd: acd(coverage, level),
                });
            }
        }
    }

    let mut mcb = Vec::new();
    if candidates.len() >= 2 {
        let names: Vec<String> = candidates.iter().map(|c| c.name.clone()).collect();
        for (li, &level) in levels.iter().enumerate() {
            let matrix: Vec<Vec<f64>> = (0..series.len())
                .map(|i| {
                    (0..candidates.len())
                        .map(|ci| scores[ci][li][i].map_or(f64::NAN, |s| s.msis))
                        .collect()
                })
                .collect();
            match mcb_test(&names, &matrix) {
                Ok(result) => mcb.push(LevelMcb { level, result }),
                Err(e) => log::info!("comparison at level {} skipped: {e}", format_level(level)),
            }
        }
    }

    Ok(EvaluationReport {
        levels,
        rows,
        selection: selection_rates(provenance),
        mcb,
    })
}

/// Share of series whose combination selected each method, per frequency
/// and level.
pub fn selection_rates(provenance: &[Provenance]) -> Vec<SelectionRow> {
    let mut counts: BTreeMap<(String, u64), (usize, BTreeMap<MethodId, usize>)> = BTreeMap::new();
    let mut order: Vec<(String, u64)> = Vec::new();
    for (name, freq) in group_names() {
        let mut levels: Vec<f64> = provenance.iter().map(|p| p.level).collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        for level in levels {
            let key = (name.clone(), level.to_bits());
            let entry = counts.entry(key.clone()).or_default();
            for p in provenance.iter().filter(|p| p.level == level && freq.is_none_or(|f| p.frequency == f)) {
                entry.0 += 1;
                for m in &p.selected {
                    *entry.1.entry(*m).or_default() += 1;
                }
            }
            if entry.0 > 0 {
                order.push(key);
            }
        }
    }
    let mut rows = Vec::new();
    for key in order {
        let (n, methods) = &counts[&key];
        for m in MethodId::POOL {
            let selected = methods.get(&m).copied().unwrap_or(0);
            rows.push(SelectionRow {
                frequency: key.0.clone(),
                level: f64::from_bits(key.1),
                method: m,
                selected,
                series: *n,
                rate: selected as f64 / *n as f64,
            });
        }
    }
    rows
}

impl EvaluationReport {
    /// Row for a candidate, frequency group (`all` for overall) and level.
    pub fn row(&self, candidate: &str, frequency: &str, level: f64) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.candidate == candidate && r.frequency == frequency && r.level == level)
    }

    pub fn rows_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["candidate", "frequency", "level", "series", "excluded", "mean_msis", "mean_mase", "coverage", "acd"])?;
        for r in &self.rows {
            w.write_record([
                r.candidate.clone(),
                r.frequency.clone(),
                format_level(r.level),
                r.series.to_string(),
                r.excluded.to_string(),
                r.mean_msis.to_string(),
                r.mean_mase.to_string(),
                r.coverage.to_string(),
                r.acd.to_string(),
            ])?;
        }
        csv_text(w)
    }

    pub fn selection_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["frequency", "level", "method", "selected", "series", "rate"])?;
        for r in &self.selection {
            w.write_record([
                r.frequency.clone(),
                format_level(r.level),
                r.method.to_string(),
                r.selected.to_string(),
                r.series.to_string(),
                r.rate.to_string(),
            ])?;
        }
        csv_text(w)
    }

    pub fn mcb_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["level", "candidate", "mean_rank", "lower", "upper", "differs_from_best"])?;
        for m in &self.mcb {
            for r in &m.result.rows {
                w.write_record([
                    format_level(m.level),
                    r.name.clone(),
                    r.mean_rank.to_string(),
                    r.lower.to_string(),
                    r.upper.to_string(),
                    r.differs_from_best.to_string(),
                ])?;
            }
        }
        csv_text(w)
    }
}

fn csv_text(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
